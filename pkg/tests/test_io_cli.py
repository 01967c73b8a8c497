"""Tests for file formats, report determinism, and the command line."""

import json
import math

import numpy as np
import pytest
from click.testing import CliRunner

from mapcalc import CIRCLE_ATLAS, flat_torus, sample_map, sphere
from mapcalc.atlas import TAU
from mapcalc.cli import ExperimentConfig, emit_trace_plots_data, load_config, main, run_suite
from mapcalc.energy import DescentTrace, descend
from mapcalc.errors import ConfigError
from mapcalc.experiments import random_center, random_section
from mapcalc.io import (
    read_map_csv,
    read_section_csv,
    read_trace_csv,
    write_map_csv,
    write_section_csv,
)
from mapcalc.maps import torus_loop

T22 = flat_torus(TAU, TAU)
S1 = sphere(1.0)


class TestMapCsv:
    def test_roundtrip_torus(self, tmp_path):
        f = sample_map(CIRCLE_ATLAS, T22, torus_loop((1, 0), waves=((0, 0.2, 0.4),)), 64)
        path = tmp_path / "map.csv"
        write_map_csv(f, path)
        again = read_map_csv(path)
        assert again.resolution == f.resolution
        assert again.target.kind == f.target.kind
        for a, b in zip(f.values, again.values):
            assert np.array_equal(a, b)

    def test_roundtrip_sphere(self, tmp_path, rng):
        f = random_center(S1, 64, rng)
        path = tmp_path / "map.csv"
        write_map_csv(f, path)
        again = read_map_csv(path)
        for a, b in zip(f.values, again.values):
            assert np.array_equal(a, b)

    def test_roundtrip_torus2_domain(self, tmp_path):
        from mapcalc import TORUS2_ATLAS
        from mapcalc.maps import torus2_wave

        f = sample_map(TORUS2_ATLAS, T22, torus2_wave(((1, 0), (0, 1)), amp=0.1), 16)
        path = tmp_path / "map2d.csv"
        write_map_csv(f, path)
        again = read_map_csv(path)
        for a, b in zip(f.values, again.values):
            assert np.array_equal(a, b)


class TestSectionCsv:
    def test_roundtrip(self, tmp_path, rng):
        f = random_center(S1, 64, rng)
        s = random_section(f, rng, 0.2, bound=0.3)
        path = tmp_path / "section.csv"
        write_section_csv(s, path)
        again = read_section_csv(path)
        assert again.bound == s.bound
        for a, b in zip(s.vectors, again.vectors):
            assert np.array_equal(a, b)
        for a, b in zip(s.base_map.values, again.base_map.values):
            assert np.array_equal(a, b)


class TestTraceCsv:
    def test_single_step_trace_two_lines(self, tmp_path):
        trace = DescentTrace(((0, 1.5, 0.1, 0.05),))
        path = tmp_path / "trace.csv"
        emit_trace_plots_data(trace, path)
        assert path.read_text().count("\n") == 2

    def test_roundtrip_values_identical(self, tmp_path):
        f = sample_map(CIRCLE_ATLAS, T22, torus_loop((1, 0), waves=((0, 0.2, 0.4),)), 64)
        _, trace = descend(f, 40, 0.1)
        path = tmp_path / "trace.csv"
        emit_trace_plots_data(trace, path)
        assert read_trace_csv(path).rows == trace.rows
        assert path.read_text().count("\n") == len(trace.rows) + 1

    def test_empty_trace_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_trace_plots_data(DescentTrace(()), tmp_path / "x.csv")


class TestConfig:
    def test_defaults_valid(self):
        ExperimentConfig()

    def test_resolution_floor(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(resolution=4)

    def test_order_cap(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(order=5)

    def test_load_from_json_with_overrides(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"resolution": 32, "seed": 5}))
        loaded = load_config(str(cfg), seed=9)
        assert loaded.resolution == 32
        assert loaded.seed == 9

    def test_unknown_field_rejected(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"no_such_field": 1}))
        with pytest.raises(ConfigError):
            load_config(str(cfg))


class TestRunSuite:
    def test_taylor_suite_passes_and_reports(self, tmp_path):
        config = ExperimentConfig(resolution=32, trials=2, sections=1)
        status = run_suite(config, "taylor", tmp_path)
        assert status == 0
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["all_pass"]
        zero = [c for c in report["checks"] if c["check"] == "taylor_zero_displacement"]
        assert zero and zero[0]["residual"] == 0.0
        assert all("anchor" in c for c in report["checks"])
        assert (tmp_path / "metadata.json").exists()

    def test_reports_byte_identical_for_same_seed(self, tmp_path):
        config = ExperimentConfig(resolution=32, trials=2, sections=1, seed=3)
        run_suite(config, "topology", tmp_path / "a")
        run_suite(config, "topology", tmp_path / "b")
        assert (tmp_path / "a/report.json").read_bytes() == (
            tmp_path / "b/report.json"
        ).read_bytes()

    def test_thread_cap_keeps_reports_identical(self, tmp_path, monkeypatch):
        config = ExperimentConfig(resolution=32, trials=2, sections=1, seed=3)
        run_suite(config, "taylor", tmp_path / "serial")
        monkeypatch.setenv("MAPCALC_THREADS", "4")
        run_suite(config, "taylor", tmp_path / "parallel")
        assert (tmp_path / "serial/report.json").read_bytes() == (
            tmp_path / "parallel/report.json"
        ).read_bytes()

    def test_transitions_report_schema(self, tmp_path):
        config = ExperimentConfig(resolution=24, trials=1, sections=1)
        status = run_suite(config, "transitions", tmp_path)
        assert status == 0
        entries = json.loads((tmp_path / "transitions_report.json").read_text())
        assert entries
        for entry in entries:
            assert set(entry) == {"test", "max_residual", "tolerance", "pass"}
            assert entry["pass"]

    def test_descent_suite_reports_final_energy(self, tmp_path):
        config = ExperimentConfig(
            resolution=32, trials=1, sections=1,
            descent_resolution=48, descent_steps=900,
            sphere_descent_resolution=48,
        )
        status = run_suite(config, "descent", tmp_path)
        assert status == 0
        report = json.loads((tmp_path / "report.json").read_text())
        torus = [c for c in report["checks"] if c["check"] == "descent_torus_class_minimum"]
        assert torus and abs(torus[0]["final_energy"] - math.pi) < 1e-3
        assert (tmp_path / "torus_descent_trace.csv").exists()


class TestJsonReports:
    def test_section_norm_report_serializes(self, rng):
        from mapcalc import section_norm
        from mapcalc.io import canonical_json

        f = random_center(S1, 64, rng)
        rep = section_norm(random_section(f, rng, 0.2), 1)
        text = canonical_json(rep.to_dict())
        parsed = json.loads(text)
        assert parsed["total"] == rep.total
        assert len(parsed["entries"]) == len(rep.entries)

    def test_probe_result_serializes(self, rng):
        from mapcalc.experiments import composition_probe_case
        from mapcalc.io import canonical_json
        from mapcalc.topology import composition_bound_probe

        case = composition_probe_case(rng, count=5)
        res = composition_bound_probe(
            lambda y: y**2, case["f1"], case["samples"], R=1.0, k=1, box=case["box"]
        )
        parsed = json.loads(canonical_json(res))
        assert set(parsed) == {"max_ratio", "bound_witness"}


class TestCliCommands:
    def test_malformed_config_exits_2(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"resolution": 4}))
        runner = CliRunner()
        result = runner.invoke(main, ["run", "--config", str(cfg), "--out", str(tmp_path)])
        assert result.exit_code == 2

    def test_taylor_suite_exit_0(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(main, ["run", "--suite", "taylor", "--out", str(tmp_path)])
        assert result.exit_code == 0
        assert "taylor_zero_displacement" in result.output

    def test_unwritable_out_exits_3(self, tmp_path):
        blocker = tmp_path / "blocked"
        blocker.write_text("a file, not a directory")
        runner = CliRunner()
        result = runner.invoke(
            main, ["run", "--suite", "taylor", "--out", str(blocker / "sub")]
        )
        assert result.exit_code == 3

    def test_descend_command_writes_outputs(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"descent_resolution": 48, "descent_steps": 400}))
        runner = CliRunner()
        result = runner.invoke(
            main, ["descend", "--config", str(cfg), "--out", str(tmp_path / "out")]
        )
        assert result.exit_code == 0
        report = json.loads((tmp_path / "out/descent_report.json").read_text())
        assert abs(report["final_energy"] - math.pi) < 5e-2
        assert (tmp_path / "out/descent_trace.csv").exists()
        assert (tmp_path / "out/descent_final_map.csv").exists()
