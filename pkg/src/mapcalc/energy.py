"""Discrete Dirichlet energy on loop spaces and chart-based gradient descent.

Loops are sampled maps on the circle; the lattice grid convention makes the
loop samples uniformly spaced, with each domain point contributed by the
chart whose compact piece owns it.  Descent retracts along the chart at the
current iterate, so every accepted step stays inside a chart by
construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .atlas import CIRCLE, TAU, SampledMap, compact_slices, grid_ranges
from .charts import chart_inverse, default_delta
from .errors import StepOutOfChart
from .manifolds import fiber_derivative_points, frames_at, inner_points, log_points, norm_points
from .sections import (
    PullbackSection,
    make_section,
    section_add,
    section_scale,
    section_sup,
)


@dataclass(frozen=True)
class EnergyFunctional:
    kind: str = "discrete_dirichlet"

    def evaluate(self, f: SampledMap) -> float:
        return dirichlet_energy(f)

    def gradient(self, f: SampledMap) -> PullbackSection:
        return energy_gradient(f)


@dataclass(frozen=True, eq=False)
class DescentTrace:
    """Per-iterate record of (step index, energy, gradient norm, step size)."""

    rows: tuple[tuple[int, float, float, float], ...]

    def __post_init__(self):
        steps = [r[0] for r in self.rows]
        if steps != sorted(steps):
            raise ValueError("trace rows must be ordered by step")
        if any(r[3] <= 0 for r in self.rows):
            raise ValueError("step sizes must be positive")

    @property
    def energies(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])


def _require_circle(f: SampledMap) -> None:
    if f.atlas.kind != CIRCLE:
        raise ValueError("loop energies are defined for circle domains")


def _owned_indices(chart, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Local and global lattice indices owned by a chart's compact piece.

    Ownership is half-open at the upper end so the pieces tile the circle.
    """
    (j0, _), = grid_ranges(chart, n)
    (ksl,) = compact_slices(chart, n)
    h = TAU / n
    local = np.arange(ksl.start, ksl.stop)
    keep = (j0 + local) * h < chart.compact[0][1] - 1e-12
    local = local[keep]
    return local, (j0 + local) % n


def loop_values(f: SampledMap) -> np.ndarray:
    """Values on the global loop lattice, each node owned by one compact piece."""
    _require_circle(f)
    n = f.resolution
    out = np.empty((n, f.target.ambient_dim))
    filled = np.zeros(n, dtype=bool)
    for chart in f.atlas.charts:
        local, global_idx = _owned_indices(chart, n)
        out[global_idx] = f.values[chart.id][local]
        filled[global_idx] = True
    if not np.all(filled):
        raise ValueError("compact pieces do not cover the loop lattice")
    return out


def loop_step(f: SampledMap) -> float:
    return TAU / f.resolution


def dirichlet_energy(f: SampledMap) -> float:
    """One half the sum of squared geodesic gaps per unit parameter length.

    Exact summation makes the value independent of the starting index.
    """
    vals = loop_values(f)
    m = f.target
    dtheta = loop_step(f)
    gaps = log_points(m, vals, np.roll(vals, -1, axis=0))
    sq = inner_points(m, vals, gaps, gaps)
    return 0.5 * math.fsum(sq.tolist()) / dtheta


def energy_gradient(f: SampledMap) -> PullbackSection:
    """Nodewise energy gradient as a section along f.

    At each loop node this is minus the sum of the logarithms toward the two
    neighbors, divided by the squared step; chart grid nodes inherit the
    value of their lattice point, so no interpolation is involved.
    """
    vals = loop_values(f)
    m = f.target
    n = f.resolution
    dtheta = loop_step(f)
    fwd = log_points(m, vals, np.roll(vals, -1, axis=0))
    bwd = log_points(m, vals, np.roll(vals, 1, axis=0))
    grad = -(fwd + bwd) / dtheta**2
    vecs = []
    for chart in f.atlas.charts:
        (j0, j1), = grid_ranges(chart, n)
        idx = np.arange(j0, j1 + 1) % n
        vecs.append(grad[idx])
    return make_section(f, vecs)


def loop_inner(f: SampledMap, s: PullbackSection, t: PullbackSection) -> float:
    """Weighted inner product pairing gradients with directional derivatives."""
    m = f.target
    vals = loop_values(f)
    sv = _loop_vectors(f, s)
    tv = _loop_vectors(f, t)
    dtheta = loop_step(f)
    return float(np.sum(inner_points(m, vals, sv, tv)) * dtheta)


def _loop_vectors(f: SampledMap, s: PullbackSection) -> np.ndarray:
    n = f.resolution
    out = np.empty((n, f.target.ambient_dim))
    for chart in f.atlas.charts:
        local, global_idx = _owned_indices(chart, n)
        out[global_idx] = s.vectors[chart.id][local]
    return out


def geodesic_residual(f: SampledMap) -> float:
    """Sup norm of the discrete geodesic equation over the loop nodes."""
    vals = loop_values(f)
    m = f.target
    dtheta = loop_step(f)
    fwd = log_points(m, vals, np.roll(vals, -1, axis=0))
    bwd = log_points(m, vals, np.roll(vals, 1, axis=0))
    res = (fwd + bwd) / dtheta**2
    return float(np.max(norm_points(m, vals, res)))


def winding_numbers(f: SampledMap) -> tuple[int, ...]:
    """Integer homotopy data of a torus-valued loop, per target axis."""
    if f.target.kind != "torus":
        raise ValueError("winding numbers are defined for torus targets")
    vals = loop_values(f)
    periods = np.asarray(f.target.periods)
    steps = np.mod(np.diff(np.vstack([vals, vals[:1]]), axis=0) + periods / 2, periods) - periods / 2
    total = steps.sum(axis=0)
    return tuple(int(round(t / p)) for t, p in zip(total, periods))


def descend(
    f0: SampledMap,
    steps: int,
    step_size: float,
    backtracking: bool = True,
    max_halvings: int = 30,
    grad_tol: float = 0.0,
    on_step: Callable[[int, SampledMap], None] | None = None,
) -> tuple[SampledMap, DescentTrace]:
    """Gradient descent with the chart at the current iterate as retraction.

    Each trial step must fit inside the chart bound of the iterate; on an
    energy increase the step is halved, at most ``max_halvings`` times.
    Accepted step sizes carry over (doubled, capped by ``step_size``) as the
    next trial.
    """
    f = f0
    rows = []
    energy = dirichlet_energy(f)
    trial = step_size
    for it in range(steps):
        grad = energy_gradient(f)
        gnorm = section_sup(grad)
        if gnorm <= grad_tol:
            rows.append((it, energy, gnorm, trial))
            break
        delta = default_delta(f)
        accepted = None
        for _ in range(max_halvings + 1):
            if trial * gnorm >= delta:
                trial *= 0.5
                continue
            candidate = chart_inverse(f, section_scale(grad, -trial))
            cand_energy = dirichlet_energy(candidate)
            if cand_energy <= energy or not backtracking:
                accepted = (candidate, cand_energy)
                break
            trial *= 0.5
        if accepted is None:
            raise StepOutOfChart(
                f"no admissible decreasing step at iterate {it} (gradient {gnorm:.3g})"
            )
        f, energy = accepted
        rows.append((it, energy, gnorm, trial))
        if on_step is not None:
            on_step(it, f)
        trial = min(step_size, 2.0 * trial)
    return f, DescentTrace(tuple(rows))


def fixed_chart_step(
    f0: SampledMap, s: PullbackSection, step_size: float
) -> PullbackSection:
    """One descent step taken inside the fixed chart at f0.

    The tangent step at the current map is transported into the chart
    through the inverse of the chart-inverse fiber derivative, then added
    linearly to the section.  This is the moving-chart update seen through
    the fixed chart, so the two trajectories agree to second order in the
    step size.
    """
    m = f0.target
    current = chart_inverse(f0, s)
    grad = energy_gradient(current)
    pulled = []
    for fv, gv, sv, gr in zip(f0.values, current.values, s.vectors, grad.vectors):
        mats = fiber_derivative_points(m, fv, gv, sv)
        fframes = frames_at(m, fv)
        gframes = frames_at(m, gv)
        coords = np.einsum("...ad,...d->...a", gframes, gr)
        out_c = np.linalg.solve(mats, coords[..., None])[..., 0]
        pulled.append(np.einsum("...a,...ad->...d", out_c, fframes))
    chart_grad = make_section(f0, pulled)
    return section_add(s, section_scale(chart_grad, -step_size))
