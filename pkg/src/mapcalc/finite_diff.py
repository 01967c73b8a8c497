"""Central finite-difference stencils of fourth-order accuracy."""

from __future__ import annotations

from itertools import product

import numpy as np

# offsets are symmetric around 0; radius 2 up to second order, 3 above
_STENCILS = {
    1: (2, np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0),
    2: (2, np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0),
    3: (3, np.array([1.0, -8.0, 13.0, 0.0, -13.0, 8.0, -1.0]) / 8.0),
    4: (3, np.array([-1.0, 12.0, -39.0, 56.0, -39.0, 12.0, -1.0]) / 6.0),
}


def stencil(order: int) -> tuple[int, np.ndarray]:
    if order not in _STENCILS:
        raise ValueError(f"no central stencil for derivative order {order}")
    return _STENCILS[order]


def stencil_radius(order: int) -> int:
    return 0 if order == 0 else stencil(order)[0]


def diff_axis(values: np.ndarray, order: int, h: float, axis: int) -> np.ndarray:
    """Differentiate along ``axis``; output shrinks by the stencil radius per side."""
    if order == 0:
        return values
    radius, coeffs = stencil(order)
    n = values.shape[axis]
    if n < 2 * radius + 1:
        raise ValueError("grid too small for the requested stencil")
    out_len = n - 2 * radius
    out = np.zeros(values.shape[:axis] + (out_len,) + values.shape[axis + 1 :])
    for k, c in enumerate(coeffs):
        if c == 0.0:
            continue
        sl = [slice(None)] * values.ndim
        sl[axis] = slice(k, k + out_len)
        out += c * values[tuple(sl)]
    return out / h**order


def diff_multi(values: np.ndarray, alpha: tuple[int, ...], h: float) -> tuple[np.ndarray, tuple[int, ...]]:
    """Apply a multi-index of axis derivatives to a grid array.

    ``values`` has one leading axis per grid dimension plus a trailing
    component axis.  Returns the differentiated array and the per-axis
    offset of its first node relative to the input grid.
    """
    out = values
    offsets = []
    for axis, order in enumerate(alpha):
        out = diff_axis(out, order, h, axis)
        offsets.append(stencil_radius(order))
    return out, tuple(offsets)


def multi_indices(dim: int, k: int) -> list[tuple[int, ...]]:
    """All multi-indices of total order at most k, ordered by (|alpha|, alpha)."""
    alphas = [a for a in product(range(k + 1), repeat=dim) if sum(a) <= k]
    alphas.sort(key=lambda a: (sum(a), a))
    return alphas
