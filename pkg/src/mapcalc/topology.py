"""Compact-open C^k neighborhoods, the C^k distance, and section norms.

Membership in a neighborhood controls all chart-local partial derivatives
up to order k uniformly on the compact pieces, together with containment
of the values in the target charts.  The distance is defined relative to a
fixed chart cover of the center; it generates the topology near that map
but is not a global metric on the mapping space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .atlas import (
    TAU,
    SampledMap,
    chart_jet,
    check_containment,
    compact_slices,
    jet_table_sup_diff,
    same_discretization,
)
from .errors import HypothesisViolated, TargetChartViolated
from .finite_diff import diff_multi, multi_indices
from .gridfn import GridFunction, grid_jet_sup_diff
from .sections import PullbackSection, section_rep
from .target_charts import TargetChart, auto_chart


@dataclass(frozen=True, eq=False)
class CkCover:
    """One target chart per domain chart, containing the center's values."""

    target_charts: tuple[TargetChart, ...]


def canonical_cover(f: SampledMap) -> CkCover:
    charts = []
    for chart in f.atlas.charts:
        ksl = compact_slices(chart, f.resolution)
        charts.append(auto_chart(f.target, f.values[chart.id][ksl]))
    return CkCover(tuple(charts))


@dataclass(frozen=True, eq=False)
class CkNeighborhood:
    """A finite intersection of subbasis neighborhoods around a center map."""

    center: SampledMap
    cover: CkCover
    chart_ids: tuple[int, ...]
    epsilon: float
    order: int

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        for cid in self.chart_ids:
            if not check_containment(self.center, self.cover.target_charts[cid], cid):
                raise TargetChartViolated(
                    f"center leaves its own target chart on chart {cid}"
                )


def neighborhood(
    center: SampledMap,
    epsilon: float,
    order: int,
    chart_ids: tuple[int, ...] | None = None,
    cover: CkCover | None = None,
) -> CkNeighborhood:
    if cover is None:
        cover = canonical_cover(center)
    if chart_ids is None:
        chart_ids = tuple(c.id for c in center.atlas.charts)
    return CkNeighborhood(center, cover, tuple(chart_ids), float(epsilon), int(order))


def nbhd_contains(nbhd: CkNeighborhood, g: SampledMap) -> bool:
    """Strict membership test; containment failures mean non-membership."""
    same_discretization(nbhd.center, g)
    for cid in nbhd.chart_ids:
        tchart = nbhd.cover.target_charts[cid]
        if not check_containment(g, tchart, cid):
            return False
        jf = chart_jet(nbhd.center, tchart, cid, nbhd.order)
        jg = chart_jet(g, tchart, cid, nbhd.order)
        if not jet_table_sup_diff(jf, jg) < nbhd.epsilon:
            return False
    return True


def ck_distance(f: SampledMap, g: SampledMap, k: int, cover: CkCover | None = None) -> float:
    """Max jet difference over the fixed cover; defined only when g stays inside it.

    With a shared cover this is a pseudometric: symmetric by construction
    and triangle-bounded node by node.
    """
    same_discretization(f, g)
    if cover is None:
        cover = canonical_cover(f)
    worst = 0.0
    for chart in f.atlas.charts:
        tchart = cover.target_charts[chart.id]
        for h in (f, g):
            if not check_containment(h, tchart, chart.id):
                raise TargetChartViolated(
                    f"map leaves the cover's target chart on chart {chart.id}"
                )
        jf = chart_jet(f, tchart, chart.id, k)
        jg = chart_jet(g, tchart, chart.id, k)
        worst = max(worst, jet_table_sup_diff(jf, jg))
    return worst


# ---------------------------------------------------------------------------
# C^k norm on sections


@dataclass(frozen=True, eq=False)
class SectionNormReport:
    """Per chart and multi-index sups of the trivialized derivatives."""

    entries: dict[tuple[int, tuple[int, ...]], float]
    total: float

    def __post_init__(self):
        if any(v < 0 for v in self.entries.values()):
            raise ValueError("norm entries must be nonnegative")
        expected = max(self.entries.values(), default=0.0)
        if abs(self.total - expected) > 0.0:
            raise ValueError("total must be the max over entries")

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "entries": [
                {"chart": cid, "alpha": list(alpha), "sup": v}
                for (cid, alpha), v in sorted(self.entries.items())
            ],
        }


def section_norm(s: PullbackSection, k: int) -> SectionNormReport:
    """C^k norm of a section through per-chart orthonormal trivializations."""
    f = s.base_map
    h = TAU / f.resolution
    entries: dict[tuple[int, tuple[int, ...]], float] = {}
    for chart in f.atlas.charts:
        rep = section_rep(s, chart.id)
        ksl = compact_slices(chart, f.resolution)
        for alpha in multi_indices(chart.dim, k):
            darr, offsets = diff_multi(rep, alpha, h)
            sl = []
            for axis, ks in enumerate(ksl):
                start = ks.start - offsets[axis]
                stop = ks.stop - offsets[axis]
                if start < 0 or stop > darr.shape[axis]:
                    raise ValueError(
                        f"resolution {f.resolution} too coarse for order-{sum(alpha)} stencils"
                    )
                sl.append(slice(start, stop))
            block = darr[tuple(sl)]
            entries[(chart.id, alpha)] = float(np.max(np.linalg.norm(block, axis=-1)))
    total = max(entries.values(), default=0.0)
    return SectionNormReport(entries, total)


# ---------------------------------------------------------------------------
# composition estimate probe


def composition_bound_probe(
    psi,
    f1: GridFunction,
    samples: list[GridFunction],
    R: float,
    k: int,
    box: tuple[tuple[float, float], ...] | None = None,
) -> dict:
    """Empirical constant of the post-composition estimate.

    For each admissible sample f2, the ratio of the jet difference of the
    compositions psi(f1), psi(f2) to the jet difference of f1, f2 is
    computed; the maximum is the empirical constant for this radius R.
    Samples must stay inside the value box and within jet distance R of f1.
    """
    psi_f1 = f1.map_values(psi)
    max_ratio = 0.0
    for f2 in samples:
        if box is not None:
            for a, (lo, hi) in enumerate(box):
                col = f2.values[..., a]
                if np.any(col < lo) or np.any(col > hi):
                    raise HypothesisViolated("sample leaves the compact value box")
        base = grid_jet_sup_diff(f1, f2, k)
        if base > R + 1e-12:
            raise HypothesisViolated(
                f"sample jet distance {base:g} exceeds the allowed radius {R:g}"
            )
        if base < 1e-14:
            continue
        comp = grid_jet_sup_diff(psi_f1, f2.map_values(psi), k)
        ratio = comp / base
        if not np.isfinite(ratio):
            raise HypothesisViolated("composition ratio is not finite")
        max_ratio = max(max_ratio, ratio)
    return {"max_ratio": max_ratio, "bound_witness": max_ratio}


def witness_ladder(
    psi,
    f1: GridFunction,
    samples: list[GridFunction],
    ladder: tuple[float, ...],
    k: int,
    box: tuple[tuple[float, float], ...] | None = None,
) -> list[float]:
    """Empirical constants along a growing radius ladder.

    Each radius admits the samples within that jet distance of f1; the
    admissible sets are nested, so the witnesses are non-decreasing.
    """
    out = []
    for R in sorted(ladder):
        admissible = [f2 for f2 in samples if grid_jet_sup_diff(f1, f2, k) <= R + 1e-12]
        res = composition_bound_probe(psi, f1, admissible, R, k, box=box)
        out.append(res["bound_witness"])
    return out
