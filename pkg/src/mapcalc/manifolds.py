"""Closed-form Riemannian geometry of the target manifolds.

Two targets are supported: the round sphere of any radius in R^3 and the
flat torus R^n modulo a rectangular period lattice.  Both have closed-form
exponential and logarithm maps, so every finite-difference probe in the
rest of the package can be cross-checked analytically.  A sphere may carry
an optional conformal rescaling of the round metric; its geodesics are then
integrated numerically and the logarithm is recovered by shooting.

All operations are pure functions over immutable values.  Array-level
variants (suffix ``_points``/``_vectors``) act on stacked coordinate arrays
with the point dimension last and are the workhorses for grid-sized data.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BaseMismatch, BeyondInjectivityRadius

SPHERE = "sphere"
TORUS = "torus"

# Euclidean-orthonormality and membership tolerance for stored geometry.
POINT_TOL = 1e-12

_EXPR_NS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "pi": np.pi,
}


@dataclass(frozen=True)
class ConformalFactor:
    """Strictly positive scalar field on the sphere, given as an expression.

    The expression uses ambient coordinates ``x, y, z`` and the usual
    elementary functions.  The ambient gradient is taken by central
    differences; only its tangential part enters the geodesic equation,
    so the (arbitrary) ambient extension does not matter.
    """

    expr: str

    def __call__(self, coords: np.ndarray) -> np.ndarray:
        ns = dict(_EXPR_NS)
        ns["x"] = coords[..., 0]
        ns["y"] = coords[..., 1]
        ns["z"] = coords[..., 2]
        val = eval(self.expr, {"__builtins__": {}}, ns)  # trusted config input
        return np.asarray(val, dtype=float) * np.ones(coords.shape[:-1])

    def gradient(self, coords: np.ndarray, step: float = 1e-6) -> np.ndarray:
        grad = np.empty_like(coords, dtype=float)
        for axis in range(3):
            e = np.zeros(3)
            e[axis] = step
            grad[..., axis] = (self(coords + e) - self(coords - e)) / (2.0 * step)
        return grad


@dataclass(frozen=True)
class TargetManifold:
    """Round sphere S^2 or flat torus, with an optional conformal metric."""

    kind: str
    radius: float = 1.0
    periods: tuple[float, ...] = ()
    conformal: Optional[ConformalFactor] = None

    def __post_init__(self):
        if self.kind == SPHERE:
            if self.radius <= 0:
                raise ValueError("sphere radius must be positive")
            if self.conformal is not None:
                vals = self.conformal(_conformal_probe_points(self))
                if not np.all(vals > 0):
                    raise ValueError("conformal factor must be strictly positive")
        elif self.kind == TORUS:
            if not self.periods or any(p <= 0 for p in self.periods):
                raise ValueError("torus periods must be positive")
            if self.conformal is not None:
                raise ValueError("conformal factors are supported on the sphere only")
        else:
            raise ValueError(f"unknown manifold kind {self.kind!r}")

    @property
    def dim(self) -> int:
        return 2 if self.kind == SPHERE else len(self.periods)

    @property
    def ambient_dim(self) -> int:
        return 3 if self.kind == SPHERE else len(self.periods)

    @property
    def is_conformal(self) -> bool:
        return self.conformal is not None

    def to_json(self) -> str:
        if self.kind == SPHERE:
            obj = {"kind": "sphere", "radius": self.radius}
            if self.conformal is not None:
                obj["conformal"] = self.conformal.expr
        else:
            obj = {"kind": "torus", "periods": list(self.periods)}
        return json.dumps(obj, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "TargetManifold":
        obj = json.loads(text)
        if obj["kind"] == "sphere":
            conf = obj.get("conformal")
            return sphere(obj["radius"], conformal=conf)
        return flat_torus(*obj["periods"])


def sphere(radius: float = 1.0, conformal: str | ConformalFactor | None = None) -> TargetManifold:
    if isinstance(conformal, str):
        conformal = ConformalFactor(conformal)
    return TargetManifold(SPHERE, radius=radius, conformal=conformal)


def flat_torus(*periods: float) -> TargetManifold:
    return TargetManifold(TORUS, periods=tuple(float(p) for p in periods))


@dataclass(frozen=True, eq=False)
class Point:
    """A point of the target, stored in canonical coordinates."""

    coords: np.ndarray


@dataclass(frozen=True, eq=False)
class TangentVector:
    base: Point
    vec: np.ndarray


@dataclass(frozen=True, eq=False)
class FiberLinearMap:
    """Linear map between tangent fibers, in fixed orthonormal frames."""

    source_base: Point
    target_base: Point
    matrix: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("fiber matrix entries must be finite")


# ---------------------------------------------------------------------------
# canonical coordinates


def reduce_points(m: TargetManifold, coords: np.ndarray) -> np.ndarray:
    """Project raw coordinates onto the canonical representation."""
    coords = np.asarray(coords, dtype=float)
    if m.kind == SPHERE:
        norms = np.linalg.norm(coords, axis=-1, keepdims=True)
        return coords * (m.radius / norms)
    periods = np.asarray(m.periods)
    return np.mod(coords, periods)


def check_points(m: TargetManifold, coords: np.ndarray, tol: float = POINT_TOL) -> None:
    coords = np.asarray(coords, dtype=float)
    if m.kind == SPHERE:
        err = np.max(np.abs(np.linalg.norm(coords, axis=-1) - m.radius))
        if err > tol:
            raise ValueError(f"sphere point off the sphere by {err:g}")
    else:
        periods = np.asarray(m.periods)
        if np.any(coords < -tol) or np.any(coords >= periods + tol):
            raise ValueError("torus coordinates not reduced into [0, period)")


def as_point(m: TargetManifold, coords) -> Point:
    coords = reduce_points(m, np.asarray(coords, dtype=float))
    check_points(m, coords)
    return Point(coords)


def tangent(m: TargetManifold, p: Point, vec) -> TangentVector:
    vec = np.asarray(vec, dtype=float)
    if m.kind == SPHERE:
        vec = project_tangent(m, p.coords, vec)
    return TangentVector(p, vec)


def project_tangent(m: TargetManifold, base: np.ndarray, vec: np.ndarray) -> np.ndarray:
    if m.kind == SPHERE:
        n = base / m.radius
        return vec - np.sum(vec * n, axis=-1, keepdims=True) * n
    return np.asarray(vec, dtype=float)


# ---------------------------------------------------------------------------
# metric, frames


def conformal_weight(m: TargetManifold, base: np.ndarray) -> np.ndarray:
    if m.conformal is None:
        return np.ones(np.asarray(base).shape[:-1])
    return m.conformal(np.asarray(base))


def inner_points(m: TargetManifold, base: np.ndarray, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    return conformal_weight(m, base) * np.sum(v * w, axis=-1)


def norm_points(m: TargetManifold, base: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.sqrt(np.maximum(inner_points(m, base, v, v), 0.0))


def metric_inner(m: TargetManifold, v: TangentVector, w: TangentVector) -> float:
    if not np.allclose(v.base.coords, w.base.coords, atol=POINT_TOL):
        raise BaseMismatch("tangent vectors live at different base points")
    return float(inner_points(m, v.base.coords, v.vec, w.vec))


def frames_at(m: TargetManifold, base: np.ndarray) -> np.ndarray:
    """Pointwise Euclidean-orthonormal tangent frames, shape (..., dim, amb).

    On the torus the frame is the identity.  On the sphere the first leg is
    the ambient axis least aligned with the outward normal, Gram-Schmidt
    projected; the second is the cross product with the normal.  The choice
    is deterministic per point but may switch axes between far-apart points,
    so these frames are for pointwise use only (see ``smooth_frames`` for
    frame fields along a map).
    """
    base = np.asarray(base, dtype=float)
    if m.kind == TORUS:
        d = len(m.periods)
        eye = np.eye(d)
        return np.broadcast_to(eye, base.shape[:-1] + (d, d)).copy()
    n = base / m.radius
    axis = np.argmin(np.abs(n), axis=-1)
    e = np.zeros(base.shape[:-1] + (3,))
    np.put_along_axis(e, axis[..., None], 1.0, axis=-1)
    u1 = e - np.sum(e * n, axis=-1, keepdims=True) * n
    u1 = u1 / np.linalg.norm(u1, axis=-1, keepdims=True)
    u2 = np.cross(n, u1)
    return np.stack([u1, u2], axis=-2)


def smooth_frames(m: TargetManifold, base_grid: np.ndarray) -> np.ndarray:
    """Orthonormal frame field along a grid of sphere points, single axis pick.

    The reference axis is chosen once for the whole grid (the one whose worst
    alignment with the normals is smallest), which keeps the field smooth in
    the grid as long as the values stay away from that axis.
    """
    base_grid = np.asarray(base_grid, dtype=float)
    if m.kind == TORUS:
        return frames_at(m, base_grid)
    n = base_grid / m.radius
    worst = np.max(np.abs(n.reshape(-1, 3)), axis=0)
    axis = int(np.argmin(worst))
    if worst[axis] > 0.99:
        raise ValueError("no ambient axis yields a smooth trivialization over this grid")
    e = np.zeros(3)
    e[axis] = 1.0
    u1 = e - np.sum(e * n, axis=-1, keepdims=True) * n
    u1 = u1 / np.linalg.norm(u1, axis=-1, keepdims=True)
    u2 = np.cross(n, u1)
    return np.stack([u1, u2], axis=-2)


# ---------------------------------------------------------------------------
# exponential / logarithm / distance


def inj_radius(m: TargetManifold, p: Point | None = None) -> float:
    """Injectivity radius; constant over each supported manifold.

    For the conformally rescaled sphere a conservative lower bound is
    returned, which is all the chart machinery needs.
    """
    if m.kind == SPHERE:
        base = math.pi * m.radius
        if m.conformal is None:
            return base
        probe = _conformal_probe_points(m)
        w = m.conformal(probe)
        return 0.5 * base * math.sqrt(float(np.min(w)) / float(np.max(w)))
    return 0.5 * min(m.periods)


def _conformal_probe_points(m: TargetManifold) -> np.ndarray:
    u = np.linspace(0, math.pi, 40)
    v = np.linspace(0, 2 * math.pi, 80, endpoint=False)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    return m.radius * np.stack(
        [np.sin(uu) * np.cos(vv), np.sin(uu) * np.sin(vv), np.cos(uu)], axis=-1
    ).reshape(-1, 3)


def _log_margin(m: TargetManifold) -> float:
    # Near-cut-locus requests are rejected rather than regularized.
    if m.kind == SPHERE:
        return 1e-6
    return 1e-12 * min(m.periods)


def exp_points(m: TargetManifold, base: np.ndarray, vec: np.ndarray) -> np.ndarray:
    base = np.asarray(base, dtype=float)
    vec = np.asarray(vec, dtype=float)
    if m.kind == TORUS:
        return reduce_points(m, base + vec)
    if m.conformal is not None:
        return _geodesic_flow(m, base, vec)
    r = m.radius
    speed = np.linalg.norm(vec, axis=-1, keepdims=True)
    ang = speed / r
    # sinc form keeps vec = 0 exact and smooth
    unit_term = vec * _sinc(ang)
    out = np.cos(ang) * base + unit_term
    return reduce_points(m, out)


def _sinc(x: np.ndarray) -> np.ndarray:
    return np.sinc(x / np.pi)


def log_points(m: TargetManifold, base: np.ndarray, target: np.ndarray) -> np.ndarray:
    base = np.asarray(base, dtype=float)
    target = np.asarray(target, dtype=float)
    inj = inj_radius(m)
    margin = _log_margin(m)
    if m.kind == TORUS:
        periods = np.asarray(m.periods)
        delta = np.mod(target - base + periods / 2.0, periods) - periods / 2.0
        d = np.linalg.norm(delta, axis=-1)
        _reject_beyond(d, inj, margin, m)
        return delta
    if m.conformal is not None:
        return _shoot_log(m, base, target)
    r = m.radius
    dots = np.clip(np.sum(base * target, axis=-1) / r**2, -1.0, 1.0)
    sins = np.linalg.norm(np.cross(base, target), axis=-1) / r**2
    ang = np.arctan2(sins, dots)
    d = r * ang
    _reject_beyond(d, inj, margin, m)
    u = target - dots[..., None] * base
    return u / _sinc(ang)[..., None]


def _reject_beyond(d: np.ndarray, inj: float, margin: float, m: TargetManifold) -> None:
    worst = float(np.max(d)) if np.size(d) else 0.0
    if worst >= inj - margin:
        raise BeyondInjectivityRadius(
            f"distance {worst:.6g} reaches the injectivity radius {inj:.6g} of {m.kind}"
        )


def dist_points(m: TargetManifold, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if m.kind == TORUS:
        periods = np.asarray(m.periods)
        delta = np.mod(b - a + periods / 2.0, periods) - periods / 2.0
        return np.linalg.norm(delta, axis=-1)
    if m.conformal is not None:
        v = _shoot_log(m, a, b)
        return norm_points(m, a, v)
    dots = np.clip(np.sum(a * b, axis=-1) / m.radius**2, -1.0, 1.0)
    sins = np.linalg.norm(np.cross(a, b), axis=-1) / m.radius**2
    return m.radius * np.arctan2(sins, dots)


def exp(m: TargetManifold, v: TangentVector) -> Point:
    """Geodesic endpoint at time 1 from ``v.base`` with velocity ``v.vec``."""
    return Point(exp_points(m, v.base.coords, v.vec))


def log(m: TargetManifold, p: Point, q: Point) -> TangentVector:
    """Inverse of ``exp`` at ``p``; requires dist(p, q) inside the injectivity radius."""
    return TangentVector(p, log_points(m, p.coords, q.coords))


def dist(m: TargetManifold, p: Point, q: Point) -> float:
    return float(dist_points(m, p.coords, q.coords))


# ---------------------------------------------------------------------------
# conformal geodesics: fixed-step RK4 plus batched Newton shooting

_ODE_STEPS = 64
_SHOOT_TOL = 1e-11
_SHOOT_MAX_ITER = 60
_JACOBIAN_REFRESH = 8


def _conformal_rhs(m: TargetManifold, pos: np.ndarray, vel: np.ndarray) -> np.ndarray:
    r2 = m.radius**2
    phi = m.conformal(pos)[..., None]
    grad = m.conformal.gradient(pos)
    n = pos / m.radius
    grad_t = grad - np.sum(grad * n, axis=-1, keepdims=True) * n
    sq = np.sum(vel * vel, axis=-1, keepdims=True)
    acc = (0.5 * sq * grad_t - np.sum(grad_t * vel, axis=-1, keepdims=True) * vel) / phi
    acc = acc - (sq / r2) * pos
    return acc


def _geodesic_flow(
    m: TargetManifold, base: np.ndarray, vec: np.ndarray, steps: int | None = None
) -> np.ndarray:
    pos = np.array(base, dtype=float)
    vel = np.array(vec, dtype=float)
    if steps is None:
        # step count grows with the longest geodesic in the batch, keeping
        # the fourth-order error near the shooting tolerance
        vmax = float(np.max(np.linalg.norm(vel, axis=-1))) if vel.size else 0.0
        steps = max(_ODE_STEPS, int(math.ceil(160.0 * vmax)))
    h = 1.0 / steps
    for _ in range(steps):
        k1p, k1v = vel, _conformal_rhs(m, pos, vel)
        k2p = vel + 0.5 * h * k1v
        k2v = _conformal_rhs(m, pos + 0.5 * h * k1p, k2p)
        k3p = vel + 0.5 * h * k2v
        k3v = _conformal_rhs(m, pos + 0.5 * h * k2p, k3p)
        k4p = vel + h * k3v
        k4v = _conformal_rhs(m, pos + h * k3p, k4p)
        pos = pos + (h / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
        vel = vel + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        pos = reduce_points(m, pos)
    return pos


def _shoot_log(m: TargetManifold, base: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Invert the conformal exponential by Newton iteration in frame coordinates.

    The iteration is batched over all leading axes; the round-metric
    logarithm provides the initial guess and the residual is measured
    through the round logarithm at the target, which is well defined for
    the desk-scale distances the charts allow.
    """
    base = np.asarray(base, dtype=float)
    target = np.asarray(target, dtype=float)
    round_m = sphere(m.radius)
    frames = frames_at(m, base)

    def residual(wc: np.ndarray) -> np.ndarray:
        v = np.einsum("...a,...ad->...d", wc, frames)
        end = _geodesic_flow(m, base, v)
        gap = log_points(round_m, target, end)
        tframes = frames_at(round_m, target)
        return np.einsum("...ad,...d->...a", tframes, gap)

    v0 = log_points(round_m, base, target)
    w = np.einsum("...ad,...d->...a", frames, v0)
    fd = 1e-7
    inv = None
    r0 = residual(w)
    for it in range(_SHOOT_MAX_ITER):
        err = float(np.max(np.linalg.norm(r0, axis=-1))) if np.size(r0) else 0.0
        if err < _SHOOT_TOL:
            return np.einsum("...a,...ad->...d", w, frames)
        if inv is None or it % _JACOBIAN_REFRESH == 0:
            # chord Newton: a forward-difference Jacobian is refreshed rarely
            cols = []
            for a in range(2):
                e = np.zeros(2)
                e[a] = fd
                cols.append((residual(w + e) - r0) / fd)
            jac = np.stack(cols, axis=-1)
            det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
            if np.any(np.abs(det) < 1e-14):
                raise BeyondInjectivityRadius("conformal shooting became singular")
            inv = (
                np.stack(
                    [jac[..., 1, 1], -jac[..., 0, 1], -jac[..., 1, 0], jac[..., 0, 0]],
                    axis=-1,
                )
                / det[..., None]
            )
        dw0 = inv[..., 0] * r0[..., 0] + inv[..., 1] * r0[..., 1]
        dw1 = inv[..., 2] * r0[..., 0] + inv[..., 3] * r0[..., 1]
        w = w - np.stack([dw0, dw1], axis=-1)
        r0 = residual(w)
    raise BeyondInjectivityRadius("conformal shooting did not converge")


# ---------------------------------------------------------------------------
# fiberwise derivative of log_dst(exp_src(.))


def fiber_derivative_points(
    m: TargetManifold,
    src: np.ndarray,
    dst: np.ndarray,
    v0: np.ndarray,
    step: float = 1e-6,
) -> np.ndarray:
    """Derivative matrices of v -> log_dst(exp_src(v)) at v0, batched.

    Matrices are expressed in the canonical frames of ``frames_at`` at the
    source and destination.  On the flat torus the map is an affine
    translation, so the derivative is returned as the exact identity.
    """
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    if m.kind == TORUS:
        d = len(m.periods)
        eye = np.eye(d)
        return np.broadcast_to(eye, src.shape[:-1] + (d, d)).copy()
    sframes = frames_at(m, src)
    dframes = frames_at(m, dst)

    def image_coords(vc: np.ndarray) -> np.ndarray:
        v = np.einsum("...a,...ad->...d", vc, sframes)
        out = log_points(m, dst, exp_points(m, src, v))
        return np.einsum("...ad,...d->...a", dframes, out)

    w0 = np.einsum("...ad,...d->...a", sframes, v0)
    cols = []
    for a in range(2):
        e = np.zeros(2)
        e[a] = step
        cols.append((image_coords(w0 + e) - image_coords(w0 - e)) / (2.0 * step))
    return np.stack(cols, axis=-1)


def fiber_transition_derivative(
    m: TargetManifold,
    p_src: Point,
    p_dst: Point,
    v0: TangentVector,
    step: float = 1e-6,
) -> FiberLinearMap:
    if not np.allclose(v0.base.coords, p_src.coords, atol=POINT_TOL):
        raise BaseMismatch("v0 must be tangent at p_src")
    vnorm = float(norm_points(m, p_src.coords, v0.vec))
    reach = dist(m, p_src, p_dst) + vnorm
    if reach >= inj_radius(m) - _log_margin(m):
        raise BeyondInjectivityRadius(
            f"source vector reaches {reach:.6g}, beyond the log domain at the destination"
        )
    mat = fiber_derivative_points(m, p_src.coords, p_dst.coords, v0.vec, step=step)
    return FiberLinearMap(p_src, p_dst, mat)
