"""Acceptance suite: every headline property at its pinned tolerance.

Each test prints one machine-readable line.  Criteria with runtime budgets
assert the elapsed wall time as well.
"""

import math
import time

import numpy as np

from mapcalc import flat_torus, sphere
from mapcalc.atlas import TAU
from mapcalc.experiments import (
    basis_convergence_failures,
    cocycle_residual,
    composition_probe_case,
    derivative_identity_residual,
    jet_convergence_ratio,
    lipschitz_probe_residual,
    metric_independence_residuals,
    norm_axiom_residuals,
    omega_fd_residual,
    omega_test_functions,
    pseudometric_residuals,
    random_pair,
    sphere_descent_demo,
    standard_kernels,
    taylor_cases,
    taylor_identity_residual,
    taylor_quadratic_residual,
    torus_descent_demo,
    trace_monotone_violation,
)
from mapcalc.charts import chart_forward, chart_inverse, taylor_remainder
from mapcalc.topology import canonical_cover, ck_distance, composition_bound_probe, witness_ladder

S1 = sphere(1.0)
T22 = flat_torus(TAU, TAU)


def report(num, label, residual, tolerance, ok=None, extra=""):
    ok = residual < tolerance if ok is None else ok
    status = "PASS" if ok else "FAIL"
    print(f"criterion {num:2d} [{label}]: {status} residual={residual:.3e} "
          f"tolerance={tolerance:.1e} {extra}")
    assert ok, f"criterion {num} ({label}) failed: {residual:.3e} !< {tolerance:.1e}"


def test_criterion_01_chart_roundtrip():
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    worst0 = worst2 = 0.0
    for m in (S1, T22):
        for _ in range(500):
            f, g, delta = random_pair(m, 256, rng)
            s = chart_forward(f, g, delta)
            g2 = chart_inverse(f, s)
            cover = canonical_cover(g)
            worst0 = max(worst0, ck_distance(g, g2, 0, cover=cover))
            worst2 = max(worst2, ck_distance(g, g2, 2, cover=cover))
    elapsed = time.perf_counter() - start
    report(1, "chart round-trip k=0", worst0, 1e-9, extra=f"({elapsed:.1f}s)")
    report(1, "chart round-trip k=2", worst2, 1e-5)
    assert elapsed < 60.0


def test_criterion_02_transition_derivative_identity():
    start = time.perf_counter()
    rng = np.random.default_rng(102)
    worst_rel = 0.0
    for _ in range(100):
        _, rel = derivative_identity_residual(S1, 256, rng)
        worst_rel = max(worst_rel, rel)
    worst_abs = 0.0
    for _ in range(100):
        ab, _ = derivative_identity_residual(T22, 256, rng)
        worst_abs = max(worst_abs, ab)
    elapsed = time.perf_counter() - start
    report(2, "transition derivative sphere (relative)", worst_rel, 1e-5,
           extra=f"({elapsed:.1f}s)")
    report(2, "transition derivative flat torus (exact)", worst_abs, 1e-12)
    assert elapsed < 120.0


def test_criterion_03_cocycle():
    rng = np.random.default_rng(103)
    worst = 0.0
    for _ in range(50):
        worst = max(worst, cocycle_residual(S1, 128, rng))
        worst = max(worst, cocycle_residual(T22, 128, rng))
    report(3, "three-chart cocycle", worst, 1e-9)


def test_criterion_04_omega_derivative_identity():
    f, h = omega_test_functions()
    worst = 0.0
    for kernel in standard_kernels().values():
        for r in (0, 1, 2):
            worst = max(worst, omega_fd_residual(kernel, f, h, r))
    report(4, "composition-operator derivative", worst, 1e-5)


def test_criterion_05_taylor_remainder():
    worst_id = 0.0
    worst_zero = 0.0
    for data in taylor_cases().values():
        worst_id = max(worst_id, taylor_identity_residual(data, [0.3], [0.2]))
        worst_id = max(worst_id, taylor_identity_residual(data, [-.5], [0.35]))
        val = taylor_remainder(data, [0.4], [0.0])
        worst_zero = max(worst_zero, abs(float(np.max(np.atleast_1d(val)))))
    quad = max(taylor_quadratic_residual(0.7, 0.25), taylor_quadratic_residual(-0.2, 0.4))
    report(5, "expansion identity (r <= 3)", worst_id, 1e-10)
    report(5, "zero displacement", worst_zero, 1e-300, ok=worst_zero == 0.0)
    report(5, "quadratic remainder", quad, 1e-12)


def test_criterion_06_composition_estimate_probe():
    rng = np.random.default_rng(106)
    case = composition_probe_case(rng, count=100)
    psi = lambda y: y**2
    res = composition_bound_probe(psi, case["f1"], case["samples"], R=1.0, k=1,
                                  box=case["box"])
    assert np.isfinite(res["max_ratio"])
    ladder = witness_ladder(psi, case["f1"], case["samples"], (0.1, 0.5, 1.0), k=1,
                            box=case["box"])
    drops = max((ladder[i] - ladder[i + 1] for i in range(len(ladder) - 1)), default=0.0)
    lip = lipschitz_probe_residual()

    # dense sweep along the sample rays dominates the sampled witness
    from mapcalc.gridfn import GridFunction, grid_jet_sup_diff

    sweep = 0.0
    for lam, ray in case["rays"]:
        for c in np.linspace(lam / 10, lam, 10):
            f2 = GridFunction(ray.lo, ray.hi, case["f1"].values + c * ray.values)
            base = grid_jet_sup_diff(case["f1"], f2, 1)
            if base < 1e-14:
                continue
            comp = grid_jet_sup_diff(case["f1"].map_values(psi), f2.map_values(psi), 1)
            sweep = max(sweep, comp / base)
    report(6, "probe ratio finite", 0.0, 1.0, ok=np.isfinite(res["max_ratio"]))
    report(6, "Lipschitz case bound", lip, 1e-9)
    report(6, "witness non-decreasing in R", max(0.0, drops), 1e-300,
           ok=drops <= 0.0)
    report(6, "sampled witness below ray sweep", res["max_ratio"] - sweep, 1e-12)


def test_criterion_07_topology():
    rng = np.random.default_rng(107)
    failures = basis_convergence_failures(T22, 128, rng)
    sym = tri = 0.0
    for m in (S1, T22):
        s, t = pseudometric_residuals(m, 128, rng, 2)
        sym, tri = max(sym, s), max(tri, t)
    hom = ntri = 0.0
    for m in (S1, T22):
        a, b = norm_axiom_residuals(m, 128, rng, 2)
        hom, ntri = max(hom, a), max(ntri, b)
    report(7, "neighborhood basis convergence", float(failures), 0.5)
    report(7, "pseudometric symmetry", sym, 1e-10)
    report(7, "pseudometric triangle", tri, 1e-10)
    report(7, "norm homogeneity", hom, 1e-12)
    report(7, "norm triangle", ntri, 1e-12)


def test_criterion_08_descent():
    start = time.perf_counter()
    torus_energy, torus_trace, windings_ok = torus_descent_demo(128, 5000, 0.1)
    sphere_energy, sphere_trace = sphere_descent_demo(64, 5000, 0.1)
    elapsed = time.perf_counter() - start
    mono = max(
        trace_monotone_violation(torus_trace), trace_monotone_violation(sphere_trace)
    )
    report(8, "torus class minimum", abs(torus_energy - math.pi), 1e-3,
           extra=f"({elapsed:.1f}s, {len(torus_trace.rows)} steps)")
    report(8, "sphere contractible minimum", sphere_energy, 1e-4)
    report(8, "traces monotone", mono, 1e-300, ok=mono == 0.0)
    report(8, "winding numbers preserved", 0.0, 1.0, ok=windings_ok)
    assert elapsed < 300.0


def test_criterion_09_metric_independence():
    rng = np.random.default_rng(109)
    residuals = metric_independence_residuals(96, rng, n_sections=20)
    assert len(residuals) == 20
    report(9, "round vs conformal chart derivative", max(residuals), 1e-4)


def test_criterion_10_jet_convergence_order():
    ratio = jet_convergence_ratio(resolutions=(128, 256), alpha=(2,))
    ok = 8.0 <= ratio <= 32.0
    report(10, "finite-difference order", abs(math.log2(ratio / 16.0)), 1.0, ok=ok,
           extra=f"(ratio {ratio:.2f}, nominal 16)")
