"""Command-line behavior: outputs, error records, byte stability."""

import json

import numpy as np
import pytest

import evobarrier as eb
from evobarrier.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def parse_summary(text):
    table, summary = text.split("\n\nkey,value\n")
    values = {}
    for line in summary.strip().splitlines():
        key, value = line.split(",", 1)
        values[key] = value
    return table, values


class TestAnalyze:
    def test_chain_summary_values(self, capsys, tmp_path):
        code, out, _ = run_cli(
            capsys,
            "analyze", "--example", "example1", "--a", "2", "--b", "1",
            "--N", "3", "--out", str(tmp_path),
        )
        assert code == 0
        _, values = parse_summary(out)
        assert values["energy_barrier"] == "1"
        assert values["theta"] == "1"
        assert values["mCR"] == "3"
        assert (tmp_path / "analyze.csv").read_text(encoding="utf-8") == out

    def test_equal_costs_report_infinite_gap(self, capsys, tmp_path):
        code, out, _ = run_cli(
            capsys,
            "analyze", "--example", "example1", "--a", "1", "--b", "1",
            "--N", "2", "--out", str(tmp_path),
        )
        assert code == 0
        _, values = parse_summary(out)
        assert values["theta"] == "inf"

    def test_missing_model_error_record(self, capsys, tmp_path):
        code, _, err = run_cli(
            capsys, "analyze", "--model", str(tmp_path / "missing.json")
        )
        assert code != 0
        record = json.loads(err.strip().splitlines()[-1])
        assert "file not found" in record["message"]

    def test_model_or_example_required(self, capsys):
        code, _, err = run_cli(capsys, "analyze")
        assert code == 2
        record = json.loads(err.strip().splitlines()[-1])
        assert "required" in record["message"]


class TestKernelCommand:
    def test_single_eps_output(self, capsys, tmp_path):
        code, out, _ = run_cli(
            capsys, "kernel", "--example", "example2", "--eps", "0.2",
            "--out", str(tmp_path),
        )
        assert code == 0
        values = dict(line.split(",", 1) for line in out.strip().splitlines())
        assert float(values["gap"]) > 0.0
        assert float(values["poincare_bound"]) <= float(values["gap"]) + 1e-9
        assert float(values["poisson_residual_left"]) <= 1e-10

    def test_grid_csv(self, capsys, tmp_path):
        code, _, _ = run_cli(
            capsys, "kernel", "--example", "example2", "--grid",
            "--out", str(tmp_path),
        )
        assert code == 0
        lines = (tmp_path / "kernel_grid.csv").read_text().splitlines()
        assert lines[0] == "eps,gap,bound,pi_err"
        assert len(lines) == 9
        assert (tmp_path / "kernel_grid.gp").exists()


class TestSimulateAndRate:
    def test_simulate_csv(self, capsys, tmp_path):
        code, out, _ = run_cli(
            capsys,
            "simulate", "--example", "example3", "--N", "3",
            "--A", "0.3", "--horizon", "1000", "--seed", "5",
            "--out", str(tmp_path),
        )
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "n,1,2,3"
        rows = [line.split(",") for line in lines[1:]]
        assert rows[-1][0] == "1000"
        total = sum(float(v) for v in rows[-1][1:])
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_rate_outputs_and_byte_stability(self, capsys, tmp_path):
        args = (
            "rate", "--example", "example3", "--N", "3", "--A", "0.3",
            "--horizon", "2000", "--reps", "50", "--seed", "3",
        )
        code, out1, _ = run_cli(capsys, *args, "--out", str(tmp_path / "a"))
        assert code == 0
        assert out1.startswith("slope,")
        code, out2, _ = run_cli(capsys, *args, "--out", str(tmp_path / "b"))
        assert code == 0
        csv_a = (tmp_path / "a" / "rate.csv").read_bytes()
        csv_b = (tmp_path / "b" / "rate.csv").read_bytes()
        assert csv_a == csv_b
        assert (tmp_path / "a" / "rate.gp").read_text().startswith("set datafile")

    def test_rate_with_u_norms(self, capsys, tmp_path):
        code, _, _ = run_cli(
            capsys,
            "rate", "--example", "example3", "--N", "3", "--A", "0.3",
            "--horizon", "1000", "--reps", "50", "--seed", "3",
            "--u-norms", "--out", str(tmp_path),
        )
        assert code == 0
        header = (tmp_path / "rate.csv").read_text().splitlines()[0]
        assert header == "n,mean_err,stderr,u0,u1,u2,u3"

    def test_schedule_warning_on_fast_decay(self, capsys, tmp_path):
        code, _, err = run_cli(
            capsys,
            "simulate", "--example", "example3", "--N", "3", "--A", "0.8",
            "--horizon", "100", "--out", str(tmp_path),
        )
        assert code == 0
        assert "warning" in err
        code, _, err = run_cli(
            capsys,
            "simulate", "--example", "example3", "--N", "3", "--A", "0.3",
            "--horizon", "100", "--out", str(tmp_path),
        )
        assert code == 0
        assert "warning" not in err


class TestDiagnose:
    def test_diagnose_csv_and_checks(self, capsys, tmp_path):
        code, out, _ = run_cli(
            capsys,
            "diagnose", "--example", "example2", "--A", "0.25",
            "--grid-ns", "100,316,1000,3162,10000", "--out", str(tmp_path),
        )
        assert code == 0
        header = (tmp_path / "diagnose.csv").read_text().splitlines()[0]
        assert header == "n,eps,q_norm,p_step,pi_err,pi_step,update_residual"
        assert "check,update_identity,pass" in out


class TestEmitExample:
    def test_round_trips_through_parser(self, capsys, tmp_path):
        path = tmp_path / "chain.json"
        code, out, _ = run_cli(
            capsys,
            "emit-example", "--example", "example1", "--a", "1", "--b", "1",
            "--N", "2", "--path", str(path),
        )
        assert code == 0
        model = eb.parse_model(path)
        assert eb.tree_gap(model.graph) == float("inf")

    def test_example2_weight_matrix(self, capsys, tmp_path):
        path = tmp_path / "game.json"
        code, _, _ = run_cli(capsys, "emit-example", "--example", "example2",
                             "--path", str(path))
        assert code == 0
        model = eb.parse_model(path)
        eps = 0.3
        weights = model.k * np.power(eps, model.graph.cost)
        expect = np.array(
            [
                [1, eps, eps**2, eps**3],
                [eps**2, eps**4, 1, eps**2],
                [eps**2, 1, eps**4, eps**2],
                [eps**3, eps**2, eps, 1],
            ]
        )
        assert np.abs(weights - expect).max() < 1e-15

    def test_symmetric_two_state_splits_mass(self, capsys, tmp_path):
        path = tmp_path / "uniform.json"
        code, _, _ = run_cli(
            capsys,
            "emit-example", "--example", "example3", "--N", "2",
            "--path", str(path),
        )
        assert code == 0
        model = eb.parse_model(path)
        assert np.allclose(eb.limit_distribution(model), [0.5, 0.5])


class TestConfig:
    def test_config_supplies_flags_cli_overrides(self, capsys, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"example": "example1", "a": 2.0, "b": 1.0, "N": 2}))
        code, out, _ = run_cli(
            capsys, "analyze", "--config", str(config), "--out", str(tmp_path)
        )
        assert code == 0
        _, values = parse_summary(out)
        assert values["mCR"] == "2"  # b*N with config N=2
        code, out, _ = run_cli(
            capsys, "analyze", "--config", str(config), "--N", "3",
            "--out", str(tmp_path),
        )
        assert code == 0
        _, values = parse_summary(out)
        assert values["mCR"] == "3"  # CLI overrides the config N

    def test_unknown_config_key_rejected(self, capsys, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"nonsense": 1}))
        code, _, err = run_cli(capsys, "analyze", "--config", str(config))
        assert code == 2
        assert "unknown flags" in json.loads(err.strip().splitlines()[-1])["message"]
