"""Config round-trips, CLI artifacts, exit codes, and sweep behavior."""
import json
import os
import xml.etree.ElementTree as ET

import jsonschema
import pytest
import yaml

from ggkdv import cli
from ggkdv.config import (ConfigError, ExperimentConfig, InitialSpec,
                          VerifySpec, apply_overrides, build_initial_state,
                          config_from_dict, config_to_dict, load_config,
                          save_config)
from ggkdv.model import CoefficientSet
from ggkdv.spectral import make_grid
from ggkdv.verification import IdentityReport


def base_config_dict(tmp_path, **run_overrides):
    run = {"dt": 0.01, "t_final": 0.5, "stride": 10, "n_max": 2}
    run.update(run_overrides)
    return {
        "grid": {"n_points": 32},
        "coefficients": {"a1": 1.0, "a2": 1.0, "a3": 0.5, "k": 1.0},
        "initial": {"preset": "single-mode", "amplitude": 0.1},
        "run": run,
        "checks": ["L2", "GEN_N"],
        "output": {
            "csv": str(tmp_path / "diag.csv"),
            "summary": str(tmp_path / "summary.json"),
            "plot": str(tmp_path / "energy.svg"),
        },
        "verify": {"n_states": 9, "amplitude": 0.05, "kmax": 5,
                   "poincare_fields": 4, "product_fields": 2},
    }


def write_config(tmp_path, raw, name="config.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw, sort_keys=False))
    return str(path)


class TestConfigRoundTrip:
    def test_defaults_round_trip(self, tmp_path):
        cfg = ExperimentConfig()
        path = tmp_path / "cfg.yaml"
        save_config(cfg, str(path))
        assert load_config(str(path)) == cfg

    def test_fully_specified_round_trip(self, tmp_path):
        cfg = ExperimentConfig(
            n_points=64,
            coefficients=CoefficientSet(a1=1.0, a2=1.0, a3=-0.25, k=0.75),
            initial=InitialSpec(preset="random-smooth", amplitude=0.31,
                                seed=11, kmax=6, mean_u=0.2, mean_v=-0.1),
            dt=1.25e-3, t_final=2.5, stride=4, n_max=3,
            fit_window=(1.0, 2.5),
            checks=("L2", "H1"),
            csv_path="out/d.csv", summary_path="out/s.json",
            plot_path="out/p.svg",
            verify=VerifySpec(n_states=7, amplitude=0.2, seed=3, kmax=5,
                              poincare_fields=17, product_fields=9))
        path = tmp_path / "cfg.yaml"
        save_config(cfg, str(path))
        assert load_config(str(path)) == cfg

    def test_dict_round_trip_is_identity(self):
        cfg = ExperimentConfig(dt=0.5, fit_window=(2.0, 8.0))
        assert config_from_dict(config_to_dict(cfg)) == cfg

    @pytest.mark.parametrize("mutate, message", [
        (lambda d: d.update(extra=1), "unknown keys"),
        (lambda d: d["grid"].update(n_points=31), "even integer"),
        (lambda d: d["initial"].update(preset="bogus"), "unknown preset"),
        (lambda d: d["run"].update(dt=-1.0), "dt must be positive"),
        (lambda d: d["run"].update(fit_window=[3.0, 1.0]), "fit_window"),
        (lambda d: d.update(checks=["L2", "NOPE"]), "unknown checks"),
        (lambda d: d["coefficients"].update(zz=1.0), "in coefficients"),
    ])
    def test_malformed_configs_rejected(self, tmp_path, mutate, message):
        raw = base_config_dict(tmp_path)
        mutate(raw)
        with pytest.raises(ConfigError, match=message):
            config_from_dict(raw)

    def test_sweep_overrides(self, tmp_path):
        cfg = config_from_dict(base_config_dict(tmp_path))
        swept = apply_overrides(cfg, {"k": 0.25, "amplitude": 0.05})
        assert swept.coefficients.k == 0.25
        assert swept.initial.amplitude == 0.05
        assert swept.coefficients.a3 == cfg.coefficients.a3
        with pytest.raises(ConfigError, match="unknown sweep axis"):
            apply_overrides(cfg, {"n_points": 64})


class TestInitialPresets:
    def test_single_mode_mean_exactly_zero_at_any_amplitude(self):
        cfg = ExperimentConfig(
            n_points=32, initial=InitialSpec(preset="single-mode",
                                             amplitude=500.0))
        state = build_initial_state(cfg)
        assert state.u.coeffs[0] == 0.0 and state.v.coeffs[0] == 0.0
        assert state.mean_u == 0.0 and state.mean_v == 0.0

    def test_two_soliton_like_carries_nonzero_means(self):
        cfg = ExperimentConfig(
            n_points=128, initial=InitialSpec(preset="two-soliton-like",
                                              amplitude=1.0))
        state = build_initial_state(cfg)
        assert state.u.coeffs[0] == 0.0 and state.v.coeffs[0] == 0.0
        assert state.mean_u > 0.0 and state.mean_v > 0.0

    def test_random_smooth_seeded_and_band_limited(self):
        cfg = ExperimentConfig(
            n_points=64, initial=InitialSpec(preset="random-smooth",
                                             amplitude=0.4, seed=9, kmax=5))
        s1 = build_initial_state(cfg)
        s2 = build_initial_state(cfg)
        assert (s1.u.coeffs == s2.u.coeffs).all()
        assert s1.u.band() <= 5 and s1.v.band() <= 5
        assert abs(s1.u.samples()).max() <= 0.4 + 1e-12


class TestRunCommand:
    def test_run_writes_artifacts_and_passes(self, tmp_path):
        path = write_config(tmp_path, base_config_dict(tmp_path))
        assert cli.main(["run", path]) == 0

        csv_lines = (tmp_path / "diag.csv").read_text().strip().split("\n")
        header = csv_lines[0].split(",")
        assert header == ["t", "energy", "seminorm_sq_0", "seminorm_sq_1",
                          "seminorm_sq_2", "f1", "g1", "f2", "g2", "h2"]
        assert len(csv_lines) == 1 + 6  # t = 0.0, 0.1, ..., 0.5

        summary = json.loads((tmp_path / "summary.json").read_text())
        jsonschema.validate(summary, cli.load_summary_schema())
        assert summary["status"] == "ok"
        assert summary["command"] == "run"
        assert set(summary["identity_residuals"]) == {
            "L2", "GEN_N(0)", "GEN_N(1)", "GEN_N(2)"}
        assert all(v <= 1e-8 for v in summary["identity_residuals"].values())

        # full-precision cells: the CSV round-trips through float exactly
        first_energy = csv_lines[1].split(",")[1]
        assert first_energy == format(float(first_energy), ".17g")
        assert float(first_energy) == summary["energy"]["initial"]

        svg = ET.parse(tmp_path / "energy.svg").getroot()
        assert svg.tag.endswith("svg")

    def test_run_is_deterministic(self, tmp_path):
        path = write_config(tmp_path, base_config_dict(tmp_path))
        assert cli.main(["run", path]) == 0
        first = (tmp_path / "diag.csv").read_bytes()
        assert cli.main(["run", path]) == 0
        assert (tmp_path / "diag.csv").read_bytes() == first

    def test_zero_initial_data_writes_zero_csv(self, tmp_path):
        raw = base_config_dict(tmp_path)
        raw["initial"]["amplitude"] = 0.0
        path = write_config(tmp_path, raw)
        assert cli.main(["run", path]) == 0
        rows = (tmp_path / "diag.csv").read_text().strip().split("\n")[1:]
        for row in rows:
            cells = [float(x) for x in row.split(",")]
            assert all(v == 0.0 for v in cells[1:])
        assert not (tmp_path / "energy.svg").exists()

    def test_invalid_coefficients_exit_2(self, tmp_path, capsys):
        raw = base_config_dict(tmp_path)
        raw["coefficients"]["a3"] = 1.0
        path = write_config(tmp_path, raw)
        assert cli.main(["run", path]) == 2
        assert "a3_magnitude" in capsys.readouterr().err

    def test_missing_config_exit_2(self, tmp_path):
        assert cli.main(["run", str(tmp_path / "nope.yaml")]) == 2

    def test_unparsable_yaml_exit_2(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("grid: [unbalanced")
        assert cli.main(["run", str(path)]) == 2

    def test_indivisible_dt_exit_2(self, tmp_path, capsys):
        path = write_config(tmp_path, base_config_dict(tmp_path, dt=0.3))
        assert cli.main(["run", path]) == 2
        assert "divide" in capsys.readouterr().err

    def test_blow_up_exit_3(self, tmp_path, capsys):
        raw = base_config_dict(tmp_path, dt=10.0, t_final=100.0, stride=1)
        raw["initial"]["amplitude"] = 500.0
        raw["checks"] = []
        path = write_config(tmp_path, raw)
        assert cli.main(["run", path]) == 3
        assert "blow-up" in capsys.readouterr().err
        summary = json.loads((tmp_path / "summary.json").read_text())
        jsonschema.validate(summary, cli.load_summary_schema())
        assert summary["status"] == "blow_up"
        assert 0.0 < summary["blow_up_time"] <= 100.0

    def test_identity_failure_exit_4(self, tmp_path, monkeypatch, capsys):
        def broken_l2(state, c):
            return IdentityReport(identity_id="L2", lhs=1.0, rhs=0.0,
                                  terms={"x": 0.0}, normalizer=1.0,
                                  relative_residual=1.0)
        monkeypatch.setattr(cli, "residual_l2", broken_l2)
        path = write_config(tmp_path, base_config_dict(tmp_path))
        assert cli.main(["run", path]) == 4
        assert "L2" in capsys.readouterr().err
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["status"] == "identity_failure"

    def test_nonzero_mean_run_skips_h_batteries(self, tmp_path):
        raw = base_config_dict(tmp_path)
        raw["initial"] = {"preset": "two-soliton-like", "amplitude": 0.5}
        raw["checks"] = ["L2", "GEN_N", "H1", "H2"]
        path = write_config(tmp_path, raw)
        assert cli.main(["run", path]) == 0
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert set(summary["identity_residuals"]) == {
            "L2", "GEN_N(0)", "GEN_N(1)", "GEN_N(2)"}
        assert any("H1" in f for f in summary["failures"])


class TestVerifyCommand:
    def test_small_battery_passes(self, tmp_path, capsys):
        raw = base_config_dict(tmp_path)
        raw["checks"] = ["L2", "GEN_N", "H1", "H2", "POINCARE",
                         "PRODUCT_BOUND", "DECAY"]
        raw["initial"]["amplitude"] = 1e-5  # linear regime for the decay fit
        path = write_config(tmp_path, raw)
        assert cli.main(["verify", path]) == 0
        out = capsys.readouterr().out
        assert "PASS  L2" in out and "PASS  DECAY" in out
        summary = json.loads((tmp_path / "summary.json").read_text())
        jsonschema.validate(summary, cli.load_summary_schema())
        assert summary["status"] == "ok"
        assert summary["failures"] == []

    def test_check_list_filters_reports(self, tmp_path):
        raw = base_config_dict(tmp_path)
        raw["checks"] = ["L2"]
        path = write_config(tmp_path, raw)
        assert cli.main(["verify", path]) == 0
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert [c["check_id"] for c in summary["checks"]] == ["L2"]

    def test_invalid_coefficients_exit_2(self, tmp_path, capsys):
        raw = base_config_dict(tmp_path)
        raw["coefficients"] = {"a1": 1.0, "a2": 1.0, "a3": 0.5, "k": 0.0}
        path = write_config(tmp_path, raw)
        assert cli.main(["verify", path]) == 2
        assert "k_positive" in capsys.readouterr().err

    def test_failed_check_exit_4_names_identity(self, tmp_path, monkeypatch,
                                                capsys):
        def broken_l2(state, c):
            return IdentityReport(identity_id="L2", lhs=1.0, rhs=0.0,
                                  terms={"x": 0.0}, normalizer=1.0,
                                  relative_residual=1.0)
        monkeypatch.setattr(cli, "residual_l2", broken_l2)
        raw = base_config_dict(tmp_path)
        raw["checks"] = ["L2"]
        path = write_config(tmp_path, raw)
        assert cli.main(["verify", path]) == 4
        captured = capsys.readouterr()
        assert "FAIL  L2" in captured.out
        assert "L2" in captured.err
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["status"] == "check_failure"
        assert summary["failures"] == ["L2"]


class TestSweepCommand:
    def sweep_config(self, tmp_path):
        raw = base_config_dict(tmp_path, dt=0.01, t_final=2.0, stride=20)
        raw["initial"]["amplitude"] = 1e-6
        raw["checks"] = ["L2"]
        return write_config(tmp_path, raw)

    def test_rates_track_k(self, tmp_path, monkeypatch):
        monkeypatch.setenv("GG_THREADS", "2")
        path = self.sweep_config(tmp_path)
        assert cli.main(["sweep", path, "--axis", "k=0.25,0.5,1.0"]) == 0
        lines = (tmp_path / "diag.csv").read_text().strip().split("\n")
        assert lines[0] == "k,fitted_rate,target_rate,r_squared,status"
        ks, rates = [], []
        for line in lines[1:]:
            cells = line.split(",")
            ks.append(float(cells[0]))
            rates.append(float(cells[1]))
            assert cells[4] == "ok"
        assert ks == [0.25, 0.5, 1.0]
        for k, rate in zip(ks, rates):
            assert rate == pytest.approx(-2.0 * k, abs=1e-3)
        summary = json.loads((tmp_path / "summary.json").read_text())
        jsonschema.validate(summary, cli.load_summary_schema())
        assert summary["status"] == "ok"
        assert len(summary["points"]) == 3

    def test_two_axes_cartesian_product(self, tmp_path):
        path = self.sweep_config(tmp_path)
        assert cli.main(["sweep", path, "--axis", "k=0.5,1.0",
                         "--axis", "a3=0.0,0.5"]) == 0
        summary = json.loads((tmp_path / "summary.json").read_text())
        points = [p["point"] for p in summary["points"]]
        assert points == [{"k": 0.5, "a3": 0.0}, {"k": 0.5, "a3": 0.5},
                          {"k": 1.0, "a3": 0.0}, {"k": 1.0, "a3": 0.5}]
        # The decay rate is set by the damping k, not by the coupling a3.
        for p in summary["points"]:
            assert p["fitted_rate"] == pytest.approx(-2.0 * p["point"]["k"],
                                                     abs=1e-3)

    def test_empty_axis_exit_2(self, tmp_path, capsys):
        path = self.sweep_config(tmp_path)
        assert cli.main(["sweep", path]) == 2
        assert "empty sweep" in capsys.readouterr().err

    def test_malformed_axis_exit_2(self, tmp_path):
        path = self.sweep_config(tmp_path)
        assert cli.main(["sweep", path, "--axis", "k="]) == 2
        assert cli.main(["sweep", path, "--axis", "k=a,b"]) == 2

    def test_invalid_point_exit_2(self, tmp_path, capsys):
        path = self.sweep_config(tmp_path)
        assert cli.main(["sweep", path, "--axis", "k=0.5,0.0"]) == 2
        assert "k_positive" in capsys.readouterr().err

    def test_thread_cap_parsing(self, monkeypatch):
        monkeypatch.setenv("GG_THREADS", "7")
        assert cli._thread_cap(100) == 7
        monkeypatch.setenv("GG_THREADS", "not-a-number")
        assert cli._thread_cap(2) <= 2
        monkeypatch.delenv("GG_THREADS")
        assert cli._thread_cap(1) == 1


class TestSchema:
    def test_shipped_schema_is_valid_draft7(self):
        schema = cli.load_summary_schema()
        jsonschema.Draft7Validator.check_schema(schema)

    def test_summary_missing_required_fails(self):
        with pytest.raises(jsonschema.ValidationError):
            cli.validate_summary({"schema_version": 1, "command": "run"})
