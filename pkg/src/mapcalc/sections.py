"""Grid-sampled sections of the pullback tangent bundle along a map.

A section stores one tangent vector per chart grid node, based at the map's
value there.  Sections are the local model of the mapping space: charts
identify maps near f with small sections along f.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .atlas import SampledMap, grid_mesh
from .errors import BaseMismatch
from .manifolds import norm_points, project_tangent, smooth_frames


@dataclass(frozen=True, eq=False)
class PullbackSection:
    """Vectors along the base map, with the bound governing chart use.

    ``bound`` strictly dominates the sup of the fiber norms.  Whether it is
    also small enough to push the section through the exponential map is
    checked where that happens, so raw data like energy gradients can be
    carried as sections too.
    """

    base_map: SampledMap
    vectors: tuple[np.ndarray, ...]
    bound: float

    def __post_init__(self):
        sup = section_sup(self)
        if not sup < self.bound:
            raise ValueError(f"section sup {sup:g} must stay strictly below bound {self.bound:g}")


def maps_equal(f: SampledMap, g: SampledMap) -> bool:
    if f is g:
        return True
    if f.atlas.kind != g.atlas.kind or f.resolution != g.resolution:
        return False
    return all(np.array_equal(a, b) for a, b in zip(f.values, g.values))


def require_same_base(s: PullbackSection, t: PullbackSection | SampledMap) -> None:
    other = t.base_map if isinstance(t, PullbackSection) else t
    if not maps_equal(s.base_map, other):
        raise BaseMismatch("sections are not based on the same map")


def make_section(f: SampledMap, vectors, bound: float | None = None) -> PullbackSection:
    vecs = tuple(
        project_tangent(f.target, fv, np.asarray(v, dtype=float))
        for fv, v in zip(f.values, vectors)
    )
    if bound is None:
        sup = max(
            (float(np.max(norm_points(f.target, fv, v))) for fv, v in zip(f.values, vecs)),
            default=0.0,
        )
        bound = sup * (1.0 + 1e-9) + 1e-300
    return PullbackSection(f, vecs, float(bound))


def zero_section(f: SampledMap) -> PullbackSection:
    vecs = [np.zeros_like(v) for v in f.values]
    return make_section(f, vecs, bound=1e-300)


def section_from_formula(
    f: SampledMap,
    vector_fn: Callable[[np.ndarray], np.ndarray],
    sup_scale: float | None = None,
    bound: float | None = None,
) -> PullbackSection:
    """Section from a closed-form vector field over the domain.

    The field is evaluated at domain coordinates, projected to the tangent
    space at the map value, and optionally rescaled to a prescribed sup.
    Evaluating at raw chart coordinates keeps shared lattice nodes exactly
    consistent for periodic fields.
    """
    vecs = []
    for chart, fv in zip(f.atlas.charts, f.values):
        mesh = grid_mesh(chart, f.resolution)
        raw = np.asarray(vector_fn(mesh), dtype=float)
        vecs.append(project_tangent(f.target, fv, raw))
    if sup_scale is not None:
        sup = max(
            (float(np.max(norm_points(f.target, fv, v))) for fv, v in zip(f.values, vecs)),
            default=0.0,
        )
        if sup > 0:
            vecs = [v * (sup_scale / sup) for v in vecs]
    return make_section(f, vecs, bound=bound)


def section_sup(s: PullbackSection) -> float:
    """Sup over all grid nodes of the fiber norm."""
    m = s.base_map.target
    return max(
        (float(np.max(norm_points(m, fv, v))) for fv, v in zip(s.base_map.values, s.vectors)),
        default=0.0,
    )


def section_add(s: PullbackSection, t: PullbackSection) -> PullbackSection:
    require_same_base(s, t)
    vecs = [a + b for a, b in zip(s.vectors, t.vectors)]
    return PullbackSection(s.base_map, tuple(vecs), s.bound + t.bound)


def section_scale(s: PullbackSection, a: float) -> PullbackSection:
    vecs = [a * v for v in s.vectors]
    bound = abs(a) * s.bound + 1e-300
    return PullbackSection(s.base_map, tuple(vecs), bound)


def section_max_diff(s: PullbackSection, t: PullbackSection) -> float:
    """Sup fiber norm of the difference of two sections over the same map."""
    require_same_base(s, t)
    m = s.base_map.target
    return max(
        (
            float(np.max(norm_points(m, fv, a - b)))
            for fv, a, b in zip(s.base_map.values, s.vectors, t.vectors)
        ),
        default=0.0,
    )


def section_rep(s: PullbackSection, chart_id: int) -> np.ndarray:
    """Components of the section in a smooth orthonormal frame field.

    The frame field along the base values is built per chart, mirroring how
    bundle trivializations are chosen per chart piece.
    """
    fv = s.base_map.values[chart_id]
    frames = smooth_frames(s.base_map.target, fv)
    return np.einsum("...ad,...d->...a", frames, s.vectors[chart_id])
