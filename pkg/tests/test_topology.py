"""Tests for neighborhoods, the C^k distance, section norms, and the probe."""

import numpy as np
import pytest

from mapcalc import (
    CIRCLE_ATLAS,
    GridFunction,
    HypothesisViolated,
    ResolutionMismatch,
    TargetChartViolated,
    canonical_cover,
    ck_distance,
    composition_bound_probe,
    flat_torus,
    nbhd_contains,
    neighborhood,
    pushforward,
    sample_map,
    section_norm,
    sphere,
    witness_ladder,
    zero_section,
)
from mapcalc.atlas import TAU
from mapcalc.experiments import (
    basis_convergence_failures,
    composition_probe_case,
    norm_axiom_residuals,
    pseudometric_residuals,
    random_center,
    random_section,
)
from mapcalc.gridfn import grid_jet_sup_diff
from mapcalc.maps import great_circle, sphere_rotation, torus_loop

T22 = flat_torus(TAU, TAU)
S1 = sphere(1.0)


class TestNeighborhood:
    def test_contains_center(self):
        f = sample_map(CIRCLE_ATLAS, T22, torus_loop((1, 0)), 64)
        nb = neighborhood(f, epsilon=1e-6, order=2)
        assert nbhd_contains(nb, f)

    def test_leaving_target_chart_means_outside(self):
        f = sample_map(CIRCLE_ATLAS, T22, torus_loop((1, 0)), 64)
        nb = neighborhood(f, epsilon=100.0, order=0)
        g = sample_map(CIRCLE_ATLAS, T22, torus_loop((1, 0), shift=(2.5, 0.0)), 64)
        assert not nbhd_contains(nb, g)

    def test_resolution_mismatch(self):
        f = sample_map(CIRCLE_ATLAS, T22, torus_loop((1, 0)), 64)
        g = sample_map(CIRCLE_ATLAS, T22, torus_loop((1, 0)), 128)
        nb = neighborhood(f, epsilon=1.0, order=0)
        with pytest.raises(ResolutionMismatch):
            nbhd_contains(nb, g)

    def test_epsilon_positive(self):
        f = sample_map(CIRCLE_ATLAS, T22, torus_loop((1, 0)), 64)
        with pytest.raises(ValueError):
            neighborhood(f, epsilon=0.0, order=0)

    def test_verdicts_match_dense_grid_oracle(self):
        # sup on the working grid against a brute-force sup on a 10x grid
        f = sample_map(CIRCLE_ATLAS, S1, great_circle(1.0), 256)
        rot = sphere_rotation(S1, [0.0, 0.0, 1.0], 0.01)
        g = pushforward(rot, f)
        f10 = sample_map(CIRCLE_ATLAS, S1, great_circle(1.0), 2560)
        g10 = pushforward(rot, f10)
        oracle = ck_distance(f10, g10, 1, cover=canonical_cover(f10))
        wide = neighborhood(f, epsilon=1.05 * oracle, order=1)
        tight = neighborhood(f, epsilon=0.95 * oracle, order=1)
        assert nbhd_contains(wide, g)
        assert not nbhd_contains(tight, g)

    def test_basis_convergence_three_elements(self, rng):
        assert basis_convergence_failures(T22, 96, rng) == 0


class TestCkDistance:
    def test_zero_on_self(self):
        f = sample_map(CIRCLE_ATLAS, T22, torus_loop((1, 0)), 64)
        assert ck_distance(f, f, 2) == 0.0

    def test_constant_shift_k0_and_k1(self):
        f = sample_map(CIRCLE_ATLAS, T22, torus_loop((1, 0)), 256)
        g = sample_map(CIRCLE_ATLAS, T22, torus_loop((1, 0), shift=(0.01, 0.0)), 256)
        assert ck_distance(f, g, 0) == pytest.approx(0.01, abs=1e-12)
        # the derivative difference vanishes, so the order-1 value is the same
        assert ck_distance(f, g, 1) == pytest.approx(0.01, abs=1e-12)

    def test_containment_violation_raises(self):
        f = sample_map(CIRCLE_ATLAS, T22, torus_loop((1, 0)), 64)
        g = sample_map(CIRCLE_ATLAS, T22, torus_loop((1, 0), shift=(2.5, 0.0)), 64)
        with pytest.raises(TargetChartViolated):
            ck_distance(f, g, 0)

    @pytest.mark.parametrize("m", [T22, S1])
    def test_pseudometric_axioms(self, m, rng):
        sym, tri = pseudometric_residuals(m, 128, rng, 2)
        assert sym < 1e-10
        assert tri < 1e-10


class TestSectionNorm:
    def test_zero_section(self):
        f = sample_map(CIRCLE_ATLAS, T22, torus_loop((1, 0)), 64)
        report = section_norm(zero_section(f), 2)
        assert report.total == 0.0

    def test_constant_section_k0(self):
        f = sample_map(CIRCLE_ATLAS, T22, torus_loop((1, 0)), 64)
        from mapcalc.sections import make_section

        c = 0.37
        s = make_section(f, [np.full(v.shape, 0.0) + [c, 0.0] for v in f.values])
        assert section_norm(s, 0).total == pytest.approx(c, abs=1e-15)

    def test_sine_section_k1(self):
        f = sample_map(CIRCLE_ATLAS, T22, torus_loop((1, 0)), 256)
        from mapcalc.sections import section_from_formula

        s = section_from_formula(
            f, lambda mesh: np.stack(
                [np.sin(mesh[..., 0]), np.zeros_like(mesh[..., 0])], axis=-1
            )
        )
        # sup of the values and of the first derivative are both 1
        assert section_norm(s, 1).total == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("m", [T22, S1])
    def test_norm_axioms(self, m, rng):
        hom, tri = norm_axiom_residuals(m, 128, rng, 2)
        assert hom < 1e-12
        assert tri < 1e-12

    def test_report_total_is_max(self, rng):
        f = random_center(S1, 96, rng)
        rep = section_norm(random_section(f, rng, 0.2), 2)
        assert rep.total == max(rep.entries.values())
        assert all(v >= 0 for v in rep.entries.values())

    def test_two_dimensional_domain(self):
        from mapcalc import TORUS2_ATLAS
        from mapcalc.maps import torus2_wave
        from mapcalc.sections import section_from_formula

        f = sample_map(TORUS2_ATLAS, T22, torus2_wave(((1, 0), (0, 1))), 24)
        s = section_from_formula(
            f,
            lambda mesh: np.stack(
                [np.sin(mesh[..., 0]), 0.5 * np.cos(mesh[..., 1])], axis=-1
            ),
        )
        rep = section_norm(s, 2)
        # order-0 sup is the largest fiber norm over the compact pieces
        assert 1.0 <= rep.total < 3.0
        assert len({cid for cid, _ in rep.entries}) == 4


class TestCompositionProbe:
    def test_identical_sample_skipped(self):
        f1 = GridFunction.sample(np.sin, 0, TAU, 200)
        res = composition_bound_probe(lambda y: y**2, f1, [f1], R=1.0, k=1)
        assert res["max_ratio"] == 0.0

    def test_lipschitz_case_bounded(self):
        f1 = GridFunction.sample(lambda x: 0.4 * np.sin(3 * x), 0, 1, 200)
        samples = [
            GridFunction.sample(lambda x, c=c: 0.4 * np.sin(3 * x) + c, 0, 1, 200)
            for c in (0.05, -0.1, 0.2)
        ]
        res = composition_bound_probe(lambda y: 2.0 * y, f1, samples, R=1.0, k=0)
        assert res["max_ratio"] <= 2.0 + 1e-9

    def test_radius_violation_rejected(self):
        f1 = GridFunction.sample(np.sin, 0, TAU, 200)
        far = GridFunction.sample(lambda x: np.sin(x) + 0.5, 0, TAU, 200)
        with pytest.raises(HypothesisViolated):
            composition_bound_probe(lambda y: y**2, f1, [far], R=0.1, k=0)

    def test_box_violation_rejected(self):
        f1 = GridFunction.sample(np.sin, 0, TAU, 200)
        out = GridFunction.sample(lambda x: 1.2 * np.sin(x), 0, TAU, 200)
        with pytest.raises(HypothesisViolated):
            composition_bound_probe(
                lambda y: y**2, f1, [out], R=2.0, k=0, box=((-1.0, 1.0),)
            )

    def test_witness_ladder_monotone_and_finite(self, rng):
        case = composition_probe_case(rng, count=60)
        values = witness_ladder(
            lambda y: y**2, case["f1"], case["samples"], (0.1, 0.5, 1.0), k=1,
            box=case["box"],
        )
        assert all(np.isfinite(values))
        assert values == sorted(values)

    def test_sampled_ratio_dominated_by_ray_sweep(self, rng):
        # every sample sits on a ray; a sweep along the rays with the sample's
        # own parameter included can only raise the witness
        case = composition_probe_case(rng, count=30)
        psi = lambda y: y**2
        res = composition_bound_probe(
            psi, case["f1"], case["samples"], R=1.0, k=1, box=case["box"]
        )
        sweep = 0.0
        for lam, ray in case["rays"]:
            for c in np.linspace(lam / 8, lam, 8):
                f2 = GridFunction(ray.lo, ray.hi, case["f1"].values + c * ray.values)
                base = grid_jet_sup_diff(case["f1"], f2, 1)
                if base < 1e-14:
                    continue
                comp = grid_jet_sup_diff(
                    case["f1"].map_values(psi), f2.map_values(psi), 1
                )
                sweep = max(sweep, comp / base)
        assert res["max_ratio"] <= sweep + 1e-12
