"""Chart atlases on the compact domains and grid-sampled maps into the targets.

The circle carries two arc charts whose compact pieces are the closed half
circles; the 2-torus carries the four product charts.  Every chart comes
pre-enlarged, so finite differences at the boundary of a compact piece
never need one-sided stencils.

Grids live on a single angular lattice of spacing 2*pi/resolution per axis;
a chart's grid is the set of lattice nodes inside (the closure of) its
enlarged box.  Charts therefore agree exactly at shared lattice nodes,
which makes overlap consistency a node-equality statement and gives loop
samples uniform spacing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import FormulaOutOfTarget, ResolutionMismatch, TargetChartViolated
from .finite_diff import diff_multi, multi_indices
from .manifolds import SPHERE, TORUS, TargetManifold, dist_points, reduce_points
from .target_charts import SphereCapChart, TargetChart, lift_grid

TAU = 2.0 * math.pi

CIRCLE = "circle"
TORUS2 = "torus2"


@dataclass(frozen=True)
class Chart:
    id: int
    box: tuple[tuple[float, float], ...]
    enlarged: tuple[tuple[float, float], ...]
    compact: tuple[tuple[float, float], ...]

    @property
    def dim(self) -> int:
        return len(self.box)


@dataclass(frozen=True)
class DomainAtlas:
    kind: str
    charts: tuple[Chart, ...]

    @property
    def dim(self) -> int:
        return 1 if self.kind == CIRCLE else 2


_ARCS = (
    # (domain box, enlarged box, compact piece) per circle chart
    ((-0.25 * math.pi, 1.25 * math.pi), (-0.5 * math.pi, 1.5 * math.pi), (0.0, math.pi)),
    ((0.75 * math.pi, 2.25 * math.pi), (0.5 * math.pi, 2.5 * math.pi), (math.pi, TAU)),
)


def circle_atlas() -> DomainAtlas:
    charts = tuple(
        Chart(i, (box,), (enl,), (comp,)) for i, (box, enl, comp) in enumerate(_ARCS)
    )
    return DomainAtlas(CIRCLE, charts)


def torus2_atlas() -> DomainAtlas:
    charts = []
    cid = 0
    for box_a, enl_a, comp_a in _ARCS:
        for box_b, enl_b, comp_b in _ARCS:
            charts.append(Chart(cid, (box_a, box_b), (enl_a, enl_b), (comp_a, comp_b)))
            cid += 1
    return DomainAtlas(TORUS2, charts)


CIRCLE_ATLAS = circle_atlas()
TORUS2_ATLAS = torus2_atlas()


# ---------------------------------------------------------------------------
# lattice grids


def _axis_range(lo: float, hi: float, h: float) -> tuple[int, int]:
    j0 = math.ceil(lo / h - 1e-9)
    j1 = math.floor(hi / h + 1e-9)
    return j0, j1


def grid_ranges(chart: Chart, resolution: int) -> list[tuple[int, int]]:
    h = TAU / resolution
    return [_axis_range(lo, hi, h) for lo, hi in chart.enlarged]


def grid_coords(chart: Chart, resolution: int) -> list[np.ndarray]:
    h = TAU / resolution
    return [np.arange(j0, j1 + 1) * h for j0, j1 in grid_ranges(chart, resolution)]


def grid_mesh(chart: Chart, resolution: int) -> np.ndarray:
    """Chart coordinates of all grid nodes, shape (n0[, n1], dim)."""
    axes = grid_coords(chart, resolution)
    if len(axes) == 1:
        return axes[0][:, None]
    aa, bb = np.meshgrid(axes[0], axes[1], indexing="ij")
    return np.stack([aa, bb], axis=-1)


def compact_slices(chart: Chart, resolution: int) -> tuple[slice, ...]:
    """Index slices selecting the compact-piece nodes inside the chart grid."""
    h = TAU / resolution
    out = []
    for (j0, _), (klo, khi) in zip(grid_ranges(chart, resolution), chart.compact):
        a0 = math.ceil(klo / h - 1e-9)
        a1 = math.floor(khi / h + 1e-9)
        out.append(slice(a0 - j0, a1 - j0 + 1))
    return tuple(out)


# ---------------------------------------------------------------------------
# sampled maps


@dataclass(frozen=True, eq=False)
class SampledMap:
    atlas: DomainAtlas
    target: TargetManifold
    resolution: int
    values: tuple[np.ndarray, ...]

    def with_values(self, values) -> "SampledMap":
        return SampledMap(self.atlas, self.target, self.resolution, tuple(values))


@dataclass(frozen=True)
class MapFormula:
    name: str
    fn: Callable[[np.ndarray], np.ndarray]


def sample_map(
    atlas: DomainAtlas, target: TargetManifold, formula: MapFormula, resolution: int
) -> SampledMap:
    """Evaluate a closed-form map on every chart grid of the enlarged boxes."""
    if resolution < 8:
        raise ValueError("resolution must be at least 8")
    values = []
    for chart in atlas.charts:
        mesh = grid_mesh(chart, resolution)
        raw = np.asarray(formula.fn(mesh), dtype=float)
        if raw.shape != mesh.shape[:-1] + (target.ambient_dim,):
            raise FormulaOutOfTarget(
                f"formula {formula.name!r} returned shape {raw.shape}"
            )
        if not np.all(np.isfinite(raw)):
            raise FormulaOutOfTarget(f"formula {formula.name!r} produced non-finite values")
        if target.kind == SPHERE:
            err = np.max(np.abs(np.linalg.norm(raw, axis=-1) - target.radius))
            if err > 1e-9:
                raise FormulaOutOfTarget(
                    f"formula {formula.name!r} leaves the sphere by {err:g}"
                )
        values.append(reduce_points(target, raw))
    return SampledMap(atlas, target, resolution, tuple(values))


def same_discretization(f: SampledMap, g: SampledMap) -> None:
    if f.atlas.kind != g.atlas.kind or f.resolution != g.resolution:
        raise ResolutionMismatch("maps live on different atlases or resolutions")
    if f.target.kind != g.target.kind or f.target.ambient_dim != g.target.ambient_dim:
        raise ResolutionMismatch("maps have different targets")


def map_sup_distance(f: SampledMap, g: SampledMap) -> float:
    """Sup over all grid nodes of the target distance between two maps."""
    same_discretization(f, g)
    worst = 0.0
    for fv, gv in zip(f.values, g.values):
        worst = max(worst, float(np.max(dist_points(f.target, fv, gv))))
    return worst


# ---------------------------------------------------------------------------
# chart-local jets


@dataclass(frozen=True, eq=False)
class JetTable:
    chart_id: int
    order: int
    entries: dict[tuple[int, ...], np.ndarray]


def chart_rep(f: SampledMap, target_chart: TargetChart, chart_id: int) -> np.ndarray:
    """Smooth chart representative of the values over the full chart grid.

    Torus values are lifted to the universal cover and anchored so the
    representative agrees with the branch representative on the compact
    piece; sphere values go through the cap chart's global formula.
    """
    vals = f.values[chart_id]
    if isinstance(target_chart, SphereCapChart):
        return target_chart.rep(vals)
    lifted = lift_grid(vals, target_chart.periods)
    ksl = compact_slices(f.atlas.charts[chart_id], f.resolution)
    anchor = tuple(s.start for s in ksl)
    shift = target_chart.rep(vals[anchor]) - lifted[anchor]
    return lifted + shift


def check_containment(f: SampledMap, target_chart: TargetChart, chart_id: int) -> bool:
    ksl = compact_slices(f.atlas.charts[chart_id], f.resolution)
    return bool(np.all(target_chart.contains(f.values[chart_id][ksl])))


def chart_jet(f: SampledMap, target_chart: TargetChart, chart_id: int, k: int) -> JetTable:
    """Finite-difference partial derivatives of the chart representative.

    Entries hold every multi-index up to total order ``k``, evaluated at the
    grid nodes of the compact piece.  Values over the compact piece must lie
    inside the target chart; the surrounding stencil nodes only need the
    representative, which both chart kinds provide smoothly.
    """
    if k > 4:
        raise ValueError("jet order capped at 4")
    if not check_containment(f, target_chart, chart_id):
        raise TargetChartViolated(
            f"values on the compact piece of chart {chart_id} leave the target chart"
        )
    chart = f.atlas.charts[chart_id]
    rep = chart_rep(f, target_chart, chart_id)
    h = TAU / f.resolution
    ksl = compact_slices(chart, f.resolution)
    entries: dict[tuple[int, ...], np.ndarray] = {}
    for alpha in multi_indices(chart.dim, k):
        darr, offsets = diff_multi(rep, alpha, h)
        sl = []
        for axis, s in enumerate(ksl):
            start = s.start - offsets[axis]
            stop = s.stop - offsets[axis]
            if start < 0 or stop > darr.shape[axis]:
                raise ValueError(
                    f"resolution {f.resolution} too coarse for order-{sum(alpha)} stencils"
                )
            sl.append(slice(start, stop))
        entries[alpha] = darr[tuple(sl)]
    return JetTable(chart_id, k, entries)


def jet_table_sup_diff(a: JetTable, b: JetTable) -> float:
    worst = 0.0
    for alpha, ea in a.entries.items():
        diff = ea - b.entries[alpha]
        worst = max(worst, float(np.max(np.linalg.norm(diff, axis=-1))))
    return worst


# ---------------------------------------------------------------------------
# overlap consistency


def _axis_matches(r_i: tuple[int, int], r_j: tuple[int, int], resolution: int):
    ji = np.arange(r_i[0], r_i[1] + 1)
    pairs = []
    for t in (-resolution, 0, resolution):
        mask = (ji + t >= r_j[0]) & (ji + t <= r_j[1])
        if np.any(mask):
            pairs.append((np.nonzero(mask)[0], ji[mask] + t - r_j[0]))
    return pairs


def shared_nodes(atlas: DomainAtlas, resolution: int, ci: int, cj: int):
    """Index pairs of lattice nodes present in both charts' grids."""
    ri = grid_ranges(atlas.charts[ci], resolution)
    rj = grid_ranges(atlas.charts[cj], resolution)
    per_axis = [_axis_matches(ra, rb, resolution) for ra, rb in zip(ri, rj)]
    if any(not p for p in per_axis):
        return []
    out = []
    if len(per_axis) == 1:
        for idx_i, idx_j in per_axis[0]:
            out.append(((idx_i,), (idx_j,)))
    else:
        for ia, ja in per_axis[0]:
            for ib, jb in per_axis[1]:
                mi = np.meshgrid(ia, ib, indexing="ij")
                mj = np.meshgrid(ja, jb, indexing="ij")
                out.append(((mi[0].ravel(), mi[1].ravel()), (mj[0].ravel(), mj[1].ravel())))
    return out


def overlap_residual(f: SampledMap) -> float:
    """Max target distance between the charts' values at shared lattice nodes."""
    worst = 0.0
    ncharts = len(f.atlas.charts)
    for ci in range(ncharts):
        for cj in range(ci + 1, ncharts):
            for idx_i, idx_j in shared_nodes(f.atlas, f.resolution, ci, cj):
                va = f.values[ci][idx_i]
                vb = f.values[cj][idx_j]
                if va.size:
                    worst = max(worst, float(np.max(dist_points(f.target, va, vb))))
    return worst


# ---------------------------------------------------------------------------
# chart-local cubic interpolation (for precomposition with domain maps)


def interpolate_chart(f: SampledMap, chart_id: int, coords: np.ndarray) -> np.ndarray:
    """Evaluate the chart's values at arbitrary chart coordinates.

    Piecewise-cubic 4-point Lagrange interpolation per axis, applied to a
    continuous lift for torus targets and renormalized for sphere targets.
    ``coords`` has shape (npts, dim); the result is reduced target points.
    """
    chart = f.atlas.charts[chart_id]
    vals = f.values[chart_id]
    if f.target.kind == TORUS:
        data = lift_grid(vals, f.target.periods)
    else:
        data = vals
    h = TAU / f.resolution
    ranges = grid_ranges(chart, f.resolution)
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    npts = coords.shape[0]
    out = data
    for axis in range(chart.dim):
        j0, j1 = ranges[axis]
        x = coords[:, axis] / h - j0
        base = np.clip(np.floor(x).astype(int) - 1, 0, (j1 - j0) - 3)
        t = x - (base + 1)
        w = _lagrange_weights(t)
        stacked = np.stack([out[base + k] if axis == 0 else out[np.arange(npts), base + k] for k in range(4)], axis=0)
        out = np.einsum("kn,kn...->n...", w, stacked)
    return reduce_points(f.target, out)


def _lagrange_weights(t: np.ndarray) -> np.ndarray:
    """Weights of the cubic through nodes at offsets -1, 0, 1, 2 from the base."""
    w0 = -t * (t - 1.0) * (t - 2.0) / 6.0
    w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0
    w2 = -(t + 1.0) * t * (t - 2.0) / 2.0
    w3 = (t + 1.0) * t * (t - 1.0) / 6.0
    return np.stack([w0, w1, w2, w3], axis=0)


def locate_chart(atlas: DomainAtlas, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deepest chart (by domain box) containing each domain point.

    Returns chart ids and the chart-coordinate representatives,
    shape (npts,) and (npts, dim).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    npts, dim = points.shape
    best_depth = np.full(npts, -np.inf)
    best_chart = np.zeros(npts, dtype=int)
    best_rep = np.zeros_like(points)
    for chart in atlas.charts:
        rep = np.empty_like(points)
        depth = np.full(npts, np.inf)
        for a, (lo, hi) in enumerate(chart.box):
            r = lo + np.mod(points[:, a] - lo, TAU)
            rep[:, a] = r
            depth = np.minimum(depth, np.minimum(r - lo, hi - r))
        better = depth > best_depth
        best_depth = np.where(better, depth, best_depth)
        best_chart = np.where(better, chart.id, best_chart)
        best_rep = np.where(better[:, None], rep, best_rep)
    return best_chart, best_rep


def evaluate_map(f: SampledMap, points: np.ndarray) -> np.ndarray:
    """Interpolated values of the map at arbitrary domain points."""
    cids, reps = locate_chart(f.atlas, points)
    out = np.empty((reps.shape[0], f.target.ambient_dim))
    for cid in np.unique(cids):
        mask = cids == cid
        out[mask] = interpolate_chart(f, int(cid), reps[mask])
    return out
