"""Exp-map charts on the mapping space, transitions, and operator calculus.

A chart identifies maps g close to a center f with sections of the
pullback tangent bundle along f, fiberwise through the logarithm.  The
transition between two overlapping charts acts nodewise by the fiber map
v -> log_g(exp_f(v)); its derivative is the nodewise fiber derivative of
that map, which is the identity this package exists to check numerically.
The same fiberwise picture drives the composition operator machinery and
the Banach-space Taylor expansion with integral remainder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .atlas import (
    DomainAtlas,
    SampledMap,
    evaluate_map,
    grid_mesh,
    map_sup_distance,
)
from .errors import (
    BaseMismatch,
    FiberBoxViolated,
    ThickeningViolated,
    WellDefinednessViolated,
)
from .gridfn import GridFunction
from .manifolds import (
    TargetManifold,
    exp_points,
    fiber_derivative_points,
    frames_at,
    inj_radius,
    log_points,
    reduce_points,
)
from .sections import PullbackSection, make_section, maps_equal, section_sup


def default_delta(f: SampledMap, factor: float = 0.4) -> float:
    """Default chart bound along f: a 1/6 margin of the injectivity radius."""
    return factor * inj_radius(f.target) / 6.0


# ---------------------------------------------------------------------------
# charts and transitions


def chart_forward(f: SampledMap, g: SampledMap, delta: float) -> PullbackSection:
    """Represent g in the chart centered at f: nodewise logarithm along f."""
    if not delta < inj_radius(f.target):
        raise WellDefinednessViolated("delta must stay below the injectivity radius")
    gap = map_sup_distance(f, g)
    if not gap < delta:
        raise WellDefinednessViolated(
            f"maps are {gap:.6g} apart, not within the chart bound {delta:.6g}"
        )
    vecs = [log_points(f.target, fv, gv) for fv, gv in zip(f.values, g.values)]
    return PullbackSection(f, tuple(vecs), float(delta))


def chart_inverse(f: SampledMap, s: PullbackSection) -> SampledMap:
    """Leave the chart at f: nodewise exponential of the section."""
    if not maps_equal(s.base_map, f):
        raise BaseMismatch("section is not based on the chart center")
    if not min(s.bound, section_sup(s) * (1 + 1e-12)) < inj_radius(f.target):
        raise WellDefinednessViolated(
            "section is too large to push through the exponential map"
        )
    vals = [
        reduce_points(f.target, exp_points(f.target, fv, v))
        for fv, v in zip(f.values, s.vectors)
    ]
    return f.with_values(vals)


def transition(f: SampledMap, g: SampledMap, s: PullbackSection) -> PullbackSection:
    """Re-center a section from the chart at f to the chart at g.

    The margin requirement is symmetric in the two charts: the section
    bound plus the distance between the centers must stay below the
    injectivity radius, so the fiber maps are defined on the whole range.
    """
    if not maps_equal(s.base_map, f):
        raise BaseMismatch("section is not based on the source chart center")
    gap = map_sup_distance(f, g)
    budget = s.bound + gap
    inj = inj_radius(g.target)
    if not budget < inj:
        raise WellDefinednessViolated(
            f"section bound plus center distance {budget:.6g} exceeds the chart margin"
        )
    moved = chart_inverse(f, s)
    delta = budget * (1.0 + 1e-12) + 1e-300
    if delta >= inj:
        delta = 0.5 * (budget + inj)
    return chart_forward(g, moved, delta)


def transition_derivative(
    f: SampledMap,
    g: SampledMap,
    s0: PullbackSection,
    s: PullbackSection,
    step: float = 1e-6,
) -> PullbackSection:
    """Derivative of the chart transition at s0, applied to s, nodewise.

    Acts through the fiber derivative of v -> log_g(exp_f(v)) at s0; on the
    flat torus this is exactly the identity on vectors.
    """
    if not maps_equal(s0.base_map, f) or not maps_equal(s.base_map, f):
        raise BaseMismatch("sections are not based on the source chart center")
    m = f.target
    gap = map_sup_distance(f, g)
    # slack covers the finite-difference probes around s0
    if not s0.bound + gap + 2 * step < inj_radius(m):
        raise WellDefinednessViolated("base section leaves the transition margin")
    if m.kind == "torus":
        return make_section(g, s.vectors)
    out = []
    for fv, gv, v0, v in zip(f.values, g.values, s0.vectors, s.vectors):
        mats = fiber_derivative_points(m, fv, gv, v0, step=step)
        sframes = frames_at(m, fv)
        dframes = frames_at(m, gv)
        coords = np.einsum("...ad,...d->...a", sframes, v)
        out_c = np.einsum("...ab,...b->...a", mats, coords)
        out.append(np.einsum("...a,...ad->...d", out_c, dframes))
    return make_section(g, out)


def metric_transition(
    f: SampledMap, s: PullbackSection, m_from: TargetManifold, m_to: TargetManifold
) -> PullbackSection:
    """Transition at a fixed center between charts built from two metrics."""
    if not maps_equal(s.base_map, f):
        raise BaseMismatch("section is not based on the chart center")
    vecs = []
    for fv, v in zip(f.values, s.vectors):
        moved = exp_points(m_from, fv, v)
        vecs.append(log_points(m_to, fv, moved))
    return make_section(f, vecs)


def metric_transition_fiber(
    f: SampledMap,
    s0: PullbackSection,
    m_from: TargetManifold,
    m_to: TargetManifold,
    step: float = 1e-4,
) -> list[np.ndarray]:
    """Nodewise fiber derivative matrices of the two-metric transition at s0.

    Matrices are expressed in the pointwise frames along f; computing them
    once lets several direction sections share the shooting work.
    """
    m = f.target
    mats = []
    for fv, v0 in zip(f.values, s0.vectors):
        sframes = frames_at(m, fv)
        w0 = np.einsum("...ad,...d->...a", sframes, v0)

        def img(wc):
            vv = np.einsum("...a,...ad->...d", wc, sframes)
            moved = exp_points(m_from, fv, vv)
            back = log_points(m_to, fv, moved)
            return np.einsum("...ad,...d->...a", sframes, back)

        cols = []
        for a in range(2):
            e = np.zeros(2)
            e[a] = step
            cols.append((img(w0 + e) - img(w0 - e)) / (2.0 * step))
        mats.append(np.stack(cols, axis=-1))
    return mats


def apply_fiber_matrices(
    f: SampledMap, mats: list[np.ndarray], s: PullbackSection
) -> PullbackSection:
    """Contract per-node fiber matrices (in the pointwise frames) with a section."""
    m = f.target
    out = []
    for fv, mat, v in zip(f.values, mats, s.vectors):
        frames = frames_at(m, fv)
        coords = np.einsum("...ad,...d->...a", frames, v)
        out_c = np.einsum("...ab,...b->...a", mat, coords)
        out.append(np.einsum("...a,...ad->...d", out_c, frames))
    return make_section(f, out)


def metric_transition_derivative(
    f: SampledMap,
    s0: PullbackSection,
    s: PullbackSection,
    m_from: TargetManifold,
    m_to: TargetManifold,
    step: float = 1e-4,
) -> PullbackSection:
    """Nodewise fiber derivative of the two-metric transition at s0, applied to s."""
    mats = metric_transition_fiber(f, s0, m_from, m_to, step=step)
    return apply_fiber_matrices(f, mats, s)


# ---------------------------------------------------------------------------
# composition operator on chart-local functions


@dataclass(frozen=True, eq=False)
class OmegaKernel:
    """Parametrized fiber map g(x, y) with its closed-form fiber derivative.

    The fiber derivative is required in closed form: the derivative identity
    under test is a statement about the exact fiber derivative, and a second
    numerical differentiation layer would drown it in noise.
    """

    base_interval: tuple[float, float]
    fiber_box: tuple[tuple[float, float], ...]
    value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    fiber_derivative: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None

    def check_fiber(self, values: np.ndarray) -> None:
        for a, (lo, hi) in enumerate(self.fiber_box):
            col = values[..., a]
            if np.any(col <= lo) or np.any(col >= hi):
                raise FiberBoxViolated("function values leave the open fiber box")


def omega_apply(kernel: OmegaKernel, f: GridFunction) -> GridFunction:
    """Composition operator: x -> g(x, f(x)) on the grid."""
    kernel.check_fiber(f.values)
    out = np.asarray(kernel.value(f.xs, f.values), dtype=float)
    if out.ndim == 1:
        out = out[:, None]
    return GridFunction(f.lo, f.hi, out)


def omega_derivative(kernel: OmegaKernel, f: GridFunction, h: GridFunction) -> GridFunction:
    """Derivative of the composition operator at f, applied to h.

    Pointwise this is the fiber derivative of the kernel at (x, f(x))
    contracted with h(x).
    """
    if kernel.fiber_derivative is None:
        raise ValueError("kernel carries no closed-form fiber derivative")
    kernel.check_fiber(f.values)
    dmat = np.asarray(kernel.fiber_derivative(f.xs, f.values), dtype=float)
    if dmat.ndim == 1:
        dmat = dmat[:, None, None]
    out = np.einsum("nlm,nm->nl", dmat, h.values)
    return GridFunction(f.lo, f.hi, out)


# ---------------------------------------------------------------------------
# Taylor expansion with integral remainder

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
_GL_T = 0.5 * (_GL_NODES + 1.0)
_GL_W = 0.5 * _GL_WEIGHTS


@dataclass(frozen=True, eq=False)
class TaylorData:
    """A function on an open convex box with closed-form derivative tensors.

    ``derivatives[i-1]`` returns the i-th derivative at a point as a tensor
    with i trailing axes of the domain dimension (plain floats in dimension
    one).  The admissibility predicate is the canonical thickening: both the
    point and its displaced endpoint lie in the box, so the whole segment
    does by convexity.
    """

    order: int
    box: tuple[tuple[float, float], ...]
    fn: Callable
    derivatives: tuple[Callable, ...]

    def __post_init__(self):
        if len(self.derivatives) < self.order:
            raise ValueError("need derivative callables up to the expansion order")

    def contains(self, u: np.ndarray) -> bool:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return all(lo < x < hi for x, (lo, hi) in zip(u, self.box))


def thickening_admissible(data: TaylorData, u, h) -> bool:
    u = np.atleast_1d(np.asarray(u, dtype=float))
    h = np.atleast_1d(np.asarray(h, dtype=float))
    return data.contains(u) and data.contains(u + h)


def _apply_form(form, h: np.ndarray, times: int):
    out = np.asarray(form, dtype=float)
    if times == 0:
        return out
    if out.ndim < times:
        # scalar coefficient of an i-form on a one-dimensional domain
        return out * h[0] ** times
    for _ in range(times):
        out = np.tensordot(out, h, axes=([-1], [0]))
    return out


def taylor_remainder(data: TaylorData, u, h):
    """Integral remainder of the degree-r expansion, applied to h^r.

    Computed by 32-node Gauss-Legendre quadrature of the difference of the
    r-th derivative along the segment, so that
    f(u+h) = f(u) + sum_i D^i f(u) h^i / i! + (this value).
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if not thickening_admissible(data, u, h):
        raise ThickeningViolated("(u, h) is not admissible for the expansion")
    r = data.order
    d_r = data.derivatives[r - 1]
    base = np.asarray(d_r(u), dtype=float)
    acc = np.zeros_like(_apply_form(base, h, r), dtype=float)
    for t, w in zip(_GL_T, _GL_W):
        diff = np.asarray(d_r(u + t * h), dtype=float) - base
        weight = (1.0 - t) ** (r - 1) / math.factorial(r - 1)
        acc = acc + w * weight * _apply_form(diff, h, r)
    return acc if acc.shape else float(acc)


def taylor_identity_residual(data: TaylorData, u, h) -> float:
    """Residual of the expansion identity at (u, h); zero for exact data."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    h = np.atleast_1d(np.asarray(h, dtype=float))
    total = np.asarray(data.fn(u + h), dtype=float) - np.asarray(data.fn(u), dtype=float)
    for i in range(1, data.order + 1):
        form = np.asarray(data.derivatives[i - 1](u), dtype=float)
        total = total - _apply_form(form, h, i) / math.factorial(i)
    total = total - taylor_remainder(data, u, h)
    return float(np.max(np.abs(total)))


# ---------------------------------------------------------------------------
# post- and pre-composition with fixed smooth maps


@dataclass(frozen=True)
class TargetMap:
    """Closed-form map between targets, for post-composition."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    target: TargetManifold


@dataclass(frozen=True)
class DomainMap:
    """Closed-form map between domains, for pre-composition."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    source_atlas: DomainAtlas


def pushforward(g_target: TargetMap, f: SampledMap) -> SampledMap:
    """Post-compose the sampled map with a fixed map of the targets."""
    values = []
    for fv in f.values:
        raw = np.asarray(g_target.fn(fv), dtype=float)
        values.append(reduce_points(g_target.target, raw))
    return SampledMap(f.atlas, g_target.target, f.resolution, tuple(values))


def pullback(g_dom: DomainMap, f: SampledMap) -> SampledMap:
    """Pre-compose with a fixed map of the domains, by chart interpolation.

    The new map is sampled on the source atlas; values come from the cubic
    chart interpolant of f at the image points, so the chart-local
    representative is linear in the representative of f.
    """
    atlas = g_dom.source_atlas
    values = []
    for chart in atlas.charts:
        mesh = grid_mesh(chart, f.resolution)
        pts = np.asarray(g_dom.fn(mesh), dtype=float)
        flat = pts.reshape(-1, pts.shape[-1])
        vals = evaluate_map(f, flat)
        values.append(vals.reshape(mesh.shape[:-1] + (f.target.ambient_dim,)))
    return SampledMap(atlas, f.target, f.resolution, tuple(values))
