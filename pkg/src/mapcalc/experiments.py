"""Builders and residual computations for the verification experiments.

Each function here produces the raw residual of one property check; the
CLI suites and the acceptance tests wrap them with counts and tolerances.
Randomness always flows through an explicit generator.
"""

from __future__ import annotations

import math

import numpy as np

from .atlas import (
    CIRCLE_ATLAS,
    TAU,
    SampledMap,
    chart_jet,
    compact_slices,
    grid_ranges,
    sample_map,
)
from .charts import (
    OmegaKernel,
    TaylorData,
    apply_fiber_matrices,
    chart_forward,
    chart_inverse,
    default_delta,
    metric_transition,
    metric_transition_fiber,
    omega_apply,
    omega_derivative,
    taylor_identity_residual,
    taylor_remainder,
    transition,
    transition_derivative,
)
from .energy import DescentTrace, descend, dirichlet_energy, winding_numbers
from .gridfn import GridFunction, grid_jet_sup_diff
from .manifolds import TargetManifold, flat_torus, sphere
from .maps import random_loop, torus_loop
from .sections import (
    PullbackSection,
    section_add,
    section_from_formula,
    section_max_diff,
    section_scale,
    section_sup,
)
from .target_charts import auto_chart
from .topology import (
    canonical_cover,
    ck_distance,
    composition_bound_probe,
    nbhd_contains,
    neighborhood,
    section_norm,
    witness_ladder,
)

DEFAULT_SPHERE = sphere(1.0)
DEFAULT_TORUS = flat_torus(2 * math.pi, 2 * math.pi)
DEFAULT_CONFORMAL_EXPR = "exp(0.3*z)"


def random_vector_field(rng: np.random.Generator, ambient: int, modes: int = 3):
    coeff = rng.standard_normal((modes, 2, ambient))
    coeff = coeff / np.arange(1, modes + 1)[:, None, None]
    const = rng.standard_normal(ambient)

    def vf(mesh):
        theta = mesh[..., 0]
        out = np.broadcast_to(const, theta.shape + (ambient,)).copy()
        for k in range(modes):
            out = out + np.sin((k + 1) * theta)[..., None] * coeff[k, 0]
            out = out + np.cos((k + 1) * theta)[..., None] * coeff[k, 1]
        return out

    return vf


def random_section(
    f: SampledMap, rng: np.random.Generator, sup: float, bound: float | None = None
) -> PullbackSection:
    vf = random_vector_field(rng, f.target.ambient_dim)
    return section_from_formula(f, vf, sup_scale=sup, bound=bound)


def random_center(m: TargetManifold, resolution: int, rng: np.random.Generator) -> SampledMap:
    return sample_map(CIRCLE_ATLAS, m, random_loop(m, rng, amplitude=0.15), resolution)


def random_pair(
    m: TargetManifold,
    resolution: int,
    rng: np.random.Generator,
    sup_frac: float = 0.9,
    delta_factor: float = 0.4,
) -> tuple[SampledMap, SampledMap, float]:
    """A random loop f and a perturbation g within the chart bound of f."""
    f = random_center(m, resolution, rng)
    delta = default_delta(f, factor=delta_factor)
    sup = sup_frac * delta * rng.uniform(0.2, 0.99)
    s = random_section(f, rng, sup, bound=delta)
    g = chart_inverse(f, s)
    return f, g, delta


# ---------------------------------------------------------------------------
# chart checks


def roundtrip_residual(f: SampledMap, g: SampledMap, delta: float, k: int) -> float:
    s = chart_forward(f, g, delta)
    g2 = chart_inverse(f, s)
    return ck_distance(g, g2, k, cover=canonical_cover(g))


def homeo_rate_ratios(
    f: SampledMap, rng: np.random.Generator, k: int, ladder=(1e-1, 1e-2, 1e-3, 1e-4)
) -> tuple[list[float], list[float]]:
    """Linear-rate witnesses for the chart and its inverse along a shrinking family."""
    delta = default_delta(f)
    u = random_section(f, rng, sup=1.0, bound=2.0)
    fwd, inv = [], []
    cover = canonical_cover(f)
    for t in ladder:
        ut = section_scale(u, t * delta)
        g = chart_inverse(f, ut)
        d = ck_distance(f, g, k, cover=cover)
        s = chart_forward(f, g, delta)
        fwd.append(section_norm(s, k).total / d)
        inv.append(d / section_norm(ut, k).total)
    return fwd, inv


def jet_convergence_ratio(resolutions=(128, 256), alpha=(2,)) -> float:
    """Error ratio of chart jets across a resolution doubling (nominal 16)."""
    errs = []
    for res in resolutions:
        f = sample_map(
            CIRCLE_ATLAS, DEFAULT_TORUS, torus_loop((0, 0), waves=((0, 1.0, 0.0),)), res
        )
        worst = 0.0
        for chart in f.atlas.charts:
            tchart = auto_chart(f.target, f.values[chart.id][compact_slices(chart, res)])
            jet = chart_jet(f, tchart, chart.id, sum(alpha))
            entry = jet.entries[alpha][..., 0]
            (js,) = compact_slices(chart, res)
            (j0, _), = grid_ranges(chart, res)
            thetas = (np.arange(js.start, js.stop) + j0) * (TAU / res)
            exact = {1: np.cos(thetas), 2: -np.sin(thetas)}[sum(alpha)]
            worst = max(worst, float(np.max(np.abs(entry - exact))))
        errs.append(worst)
    return errs[0] / errs[1]


# ---------------------------------------------------------------------------
# transition checks


def cocycle_residual(
    m: TargetManifold, resolution: int, rng: np.random.Generator
) -> float:
    f = random_center(m, resolution, rng)
    delta = default_delta(f)
    g = chart_inverse(f, random_section(f, rng, 0.25 * delta, bound=delta))
    h = chart_inverse(f, random_section(f, rng, 0.25 * delta, bound=delta))
    s = random_section(f, rng, 0.2 * delta, bound=0.25 * delta)
    via = transition(g, h, transition(f, g, s))
    direct = transition(f, h, s)
    return section_max_diff(via, direct)


def derivative_identity_residual(
    m: TargetManifold, resolution: int, rng: np.random.Generator, eps: float | None = None
) -> tuple[float, float]:
    """Transition derivative vs a central directional difference; (abs, rel).

    On the flat torus the transition is affine, so the difference quotient
    has no truncation error and a larger probe step only suppresses the
    rounding amplification of 1/eps.
    """
    if eps is None:
        eps = 1e-2 if m.kind == "torus" else 1e-4
    f = random_center(m, resolution, rng)
    delta = default_delta(f)
    g = chart_inverse(f, random_section(f, rng, 0.3 * delta, bound=delta))
    s0 = random_section(f, rng, 0.25 * delta, bound=0.3 * delta)
    s = random_section(f, rng, 0.2 * delta, bound=0.25 * delta)
    plus = transition(f, g, section_add(s0, section_scale(s, eps)))
    minus = transition(f, g, section_add(s0, section_scale(s, -eps)))
    fd = section_scale(section_add(plus, section_scale(minus, -1.0)), 0.5 / eps)
    analytic = transition_derivative(f, g, s0, s)
    resid = section_max_diff(fd, analytic)
    scale = max(section_sup(analytic), 1e-12)
    return resid, resid / scale


def chain_rule_residual(
    m: TargetManifold, resolution: int, rng: np.random.Generator
) -> float:
    """Composite transition derivative vs the product of fiber derivatives."""
    f = random_center(m, resolution, rng)
    delta = default_delta(f)
    g = chart_inverse(f, random_section(f, rng, 0.2 * delta, bound=delta))
    h = chart_inverse(f, random_section(f, rng, 0.2 * delta, bound=delta))
    s0 = random_section(f, rng, 0.2 * delta, bound=0.25 * delta)
    s = random_section(f, rng, 0.15 * delta, bound=0.2 * delta)
    t0 = transition(f, g, s0)
    via = transition_derivative(g, h, t0, transition_derivative(f, g, s0, s))
    direct = transition_derivative(f, h, s0, s)
    resid = section_max_diff(via, direct)
    return resid / max(section_sup(direct), 1e-12)


def metric_independence_residuals(
    resolution: int,
    rng: np.random.Generator,
    n_sections: int = 20,
    conformal_expr: str = DEFAULT_CONFORMAL_EXPR,
    eps: float = 1e-3,
    dirs_per_base: int = 5,
) -> list[float]:
    """Derivative checks for the transition between round and conformal charts.

    Bases s0 are shared by several direction sections, so the nodewise
    fiber derivative (four shooting batches) is amortized across them.
    """
    m_round = DEFAULT_SPHERE
    m_conf = sphere(1.0, conformal=conformal_expr)
    f = random_center(m_round, resolution, rng)
    residuals: list[float] = []
    while len(residuals) < n_sections:
        s0 = random_section(f, rng, 0.12, bound=0.2)
        mats = metric_transition_fiber(f, s0, m_round, m_conf, step=1e-4)
        for _ in range(min(dirs_per_base, n_sections - len(residuals))):
            s = random_section(f, rng, 0.08, bound=0.12)
            plus = metric_transition(f, section_add(s0, section_scale(s, eps)), m_round, m_conf)
            minus = metric_transition(f, section_add(s0, section_scale(s, -eps)), m_round, m_conf)
            fd = section_scale(section_add(plus, section_scale(minus, -1.0)), 0.5 / eps)
            analytic = apply_fiber_matrices(f, mats, s)
            residuals.append(
                section_max_diff(fd, analytic) / max(section_sup(analytic), 1e-12)
            )
    return residuals


# ---------------------------------------------------------------------------
# composition operator checks


def standard_kernels() -> dict[str, OmegaKernel]:
    interval = (0.0, 2 * math.pi)
    box = ((-1.4, 1.4),)
    return {
        "square": OmegaKernel(
            interval,
            box,
            value=lambda xs, ys: ys**2,
            fiber_derivative=lambda xs, ys: (2 * ys)[..., None],
        ),
        "sinx_times_y": OmegaKernel(
            interval,
            box,
            value=lambda xs, ys: np.sin(xs)[:, None] * ys,
            fiber_derivative=lambda xs, ys: np.sin(xs)[:, None, None]
            * np.ones_like(ys)[..., None],
        ),
        "exp": OmegaKernel(
            interval,
            box,
            value=lambda xs, ys: np.exp(ys),
            fiber_derivative=lambda xs, ys: np.exp(ys)[..., None],
        ),
    }


def omega_fd_residual(
    kernel: OmegaKernel, f: GridFunction, h: GridFunction, r: int, eps: float = 1e-4
) -> float:
    """Operator derivative vs function-space central difference, C^r residual."""
    analytic = omega_derivative(kernel, f, h)
    plus = omega_apply(kernel, GridFunction(f.lo, f.hi, f.values + eps * h.values))
    minus = omega_apply(kernel, GridFunction(f.lo, f.hi, f.values - eps * h.values))
    fd = GridFunction(f.lo, f.hi, (plus.values - minus.values) / (2 * eps))
    return grid_jet_sup_diff(analytic, fd, r)


def omega_test_functions(n: int = 512) -> tuple[GridFunction, GridFunction]:
    f = GridFunction.sample(lambda x: 0.8 * np.sin(x), 0.0, 2 * math.pi, n)
    h = GridFunction.sample(lambda x: 0.5 * np.cos(2 * x) + 0.3 * np.sin(x), 0.0, 2 * math.pi, n)
    return f, h


# ---------------------------------------------------------------------------
# Taylor checks


def taylor_cases() -> dict[str, TaylorData]:
    box = ((-2.0, 2.0),)
    return {
        "square_r1": TaylorData(1, box, lambda u: u[0] ** 2, (lambda u: 2 * u[0],)),
        "sin_r1": TaylorData(1, box, lambda u: math.sin(u[0]), (lambda u: math.cos(u[0]),)),
        "sin_r2": TaylorData(
            2,
            box,
            lambda u: math.sin(u[0]),
            (lambda u: math.cos(u[0]), lambda u: -math.sin(u[0])),
        ),
        "sin_r3": TaylorData(
            3,
            box,
            lambda u: math.sin(u[0]),
            (
                lambda u: math.cos(u[0]),
                lambda u: -math.sin(u[0]),
                lambda u: -math.cos(u[0]),
            ),
        ),
        "exp_r3": TaylorData(
            3,
            box,
            lambda u: math.exp(u[0]),
            (lambda u: math.exp(u[0]),) * 3,
        ),
    }


def taylor_quadratic_residual(u: float, h: float) -> float:
    data = taylor_cases()["square_r1"]
    applied = taylor_remainder(data, [u], [h])
    return abs(applied / h - h) if h != 0 else abs(applied)


# ---------------------------------------------------------------------------
# topology checks


def composition_probe_case(
    rng: np.random.Generator, count: int = 40, n: int = 400
) -> dict:
    """Trigonometric rays around sin for the composition estimate probe.

    Each sample sits on a ray f1 + lambda * q with q a bounded trigonometric
    direction, so every sample stays inside the value box and a dense sweep
    along the rays dominates the sampled ratios by construction.  The ray
    parameters are drawn log-uniformly, spreading the jet distances across
    the radius ladder.
    """
    lo, hi = 0.0, 2 * math.pi
    scale = 0.995
    f1 = GridFunction.sample(lambda x: scale * np.sin(x), lo, hi, n)
    samples, rays = [], []
    for _ in range(count):
        w = rng.uniform(-1.0, 1.0, size=2)
        w = w / (np.abs(w).sum() + 1e-12)
        phase = rng.uniform(0, 2 * math.pi, size=2)
        lam = math.exp(rng.uniform(math.log(0.01), math.log(0.3)))

        def direction(x, w=w, phase=phase):
            return w[0] * np.sin(2 * x + phase[0]) + w[1] * np.cos(x + phase[1])

        def fn(x, lam=lam, direction=direction):
            return scale * ((1 - lam) * np.sin(x) + lam * direction(x))

        def ray(x, direction=direction):
            return scale * (direction(x) - np.sin(x))

        samples.append(GridFunction.sample(fn, lo, hi, n))
        rays.append((lam, GridFunction.sample(ray, lo, hi, n)))
    return {"f1": f1, "samples": samples, "rays": rays, "box": ((-1.0, 1.0),)}


def lipschitz_probe_residual(n: int = 200) -> float:
    """k = 0 probe against a known Lipschitz constant (psi doubles its input)."""
    lo, hi = 0.0, 1.0
    f1 = GridFunction.sample(lambda x: 0.4 * np.sin(3 * x), lo, hi, n)
    samples = [
        GridFunction.sample(lambda x, c=c: 0.4 * np.sin(3 * x) + c, lo, hi, n)
        for c in (0.05, -0.1, 0.2)
    ]
    res = composition_bound_probe(lambda y: 2.0 * y, f1, samples, R=1.0, k=0)
    return max(0.0, res["max_ratio"] - 2.0)


def pseudometric_residuals(
    m: TargetManifold, resolution: int, rng: np.random.Generator, k: int
) -> tuple[float, float]:
    """(symmetry residual, triangle violation) under one shared cover."""
    f = random_center(m, resolution, rng)
    delta = default_delta(f)
    cover = canonical_cover(f)
    g = chart_inverse(f, random_section(f, rng, 0.1 * delta, bound=delta))
    h = chart_inverse(f, random_section(f, rng, 0.1 * delta, bound=delta))
    sym = abs(ck_distance(f, g, k, cover=cover) - ck_distance(g, f, k, cover=cover))
    tri = max(
        0.0,
        ck_distance(f, h, k, cover=cover)
        - ck_distance(f, g, k, cover=cover)
        - ck_distance(g, h, k, cover=cover),
    )
    return sym, tri


def norm_axiom_residuals(
    m: TargetManifold, resolution: int, rng: np.random.Generator, k: int
) -> tuple[float, float]:
    f = random_center(m, resolution, rng)
    s = random_section(f, rng, 0.3)
    t = random_section(f, rng, 0.2)
    a = -2.5
    hom = abs(section_norm(section_scale(s, a), k).total - abs(a) * section_norm(s, k).total)
    tri = max(
        0.0,
        section_norm(section_add(s, t), k).total
        - section_norm(s, k).total
        - section_norm(t, k).total,
    )
    return hom, tri


def basis_convergence_failures(
    m: TargetManifold,
    resolution: int,
    rng: np.random.Generator,
    m_max: int = 30,
    epsilon: float = 2e-2,
) -> int:
    """Shrinking family against three subbasis elements; counts late failures."""
    f = random_center(m, resolution, rng)
    delta = default_delta(f)
    u = random_section(f, rng, delta * 0.5, bound=delta)
    nbhds = [
        neighborhood(f, epsilon=epsilon, order=1, chart_ids=(0,)),
        neighborhood(f, epsilon=0.5 * epsilon, order=0, chart_ids=(1,)),
        neighborhood(f, epsilon=2.5 * epsilon, order=2, chart_ids=(0,)),
    ]
    failures = 0
    for nbhd in nbhds:
        member_since = None
        for step in range(1, m_max + 1):
            g = chart_inverse(f, section_scale(u, 1.0 / step))
            inside = nbhd_contains(nbhd, g)
            if inside and member_since is None:
                member_since = step
            if not inside and member_since is not None:
                failures += 1
        if member_since is None:
            failures += 1
    return failures


# ---------------------------------------------------------------------------
# descent demos


def torus_descent_demo(
    resolution: int = 128, steps: int = 5000, step_size: float = 0.1
) -> tuple[float, DescentTrace, bool]:
    """Perturbed winding loop relaxing to the straight loop of its class."""
    formula = torus_loop((1, 0), waves=((0, 0.3, 0.4), (1, 0.2, 1.1)))
    f0 = sample_map(CIRCLE_ATLAS, DEFAULT_TORUS, formula, resolution)
    w0 = winding_numbers(f0)
    windings_ok = True

    def check(_, current):
        nonlocal windings_ok
        if winding_numbers(current) != w0:
            windings_ok = False

    final, trace = descend(f0, steps, step_size, grad_tol=1e-8, on_step=check)
    return dirichlet_energy(final), trace, windings_ok


def sphere_descent_demo(
    resolution: int = 64, steps: int = 5000, step_size: float = 0.1
) -> tuple[float, DescentTrace]:
    """Contractible cap loop shrinking toward a point."""
    from .maps import sphere_cap_loop

    f0 = sample_map(CIRCLE_ATLAS, DEFAULT_SPHERE, sphere_cap_loop(1.0, 0.5), resolution)
    final, trace = descend(f0, steps, step_size, grad_tol=1e-9)
    return dirichlet_energy(final), trace


def trace_monotone_violation(trace: DescentTrace) -> float:
    energies = trace.energies
    if len(energies) < 2:
        return 0.0
    return max(0.0, float(np.max(np.diff(energies))))
