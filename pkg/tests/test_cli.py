import json

import numpy as np
import pytest

from goelab.cli import main
from goelab.ensembles import load_samples_csv

ENVELOPE_KEYS = {"schema_version", "command", "config", "report", "timing_ms"}


def run_cli(args, capsys):
    code = main(args)
    out = capsys.readouterr().out
    return code, out


class TestIdentities:
    def test_passes_and_reports_residuals(self, capsys):
        code, out = run_cli(["identities"], capsys)
        assert code == 0
        env = json.loads(out)
        assert set(env) == ENVELOPE_KEYS
        assert env["schema_version"] == 1
        assert env["report"]["overall_pass"] is True
        closed = next(
            c for c in env["report"]["checks"] if c["name"] == "closed_form_vs_conjugation"
        )
        assert closed["max_residual"] <= 1e-12

    def test_fd_step_flag(self, capsys):
        code, out = run_cli(["identities", "--fd-step", "1e-4"], capsys)
        env = json.loads(out)
        deriv = next(
            c
            for c in env["report"]["checks"]
            if c["name"] == "derivatives_vs_central_differences"
        )
        assert deriv["max_residual"] <= 1e-6


class TestSample:
    def test_writes_csv(self, tmp_path, capsys):
        out_file = tmp_path / "samples.csv"
        code, _ = run_cli(
            ["sample", "--ensemble", "goe", "--dim", "3", "--n", "50",
             "--seed", "7", "--out", str(out_file)],
            capsys,
        )
        assert code == 0
        batch = load_samples_csv(str(out_file))
        assert batch.n == 50 and batch.dim == 3

    def test_stdout_mode(self, capsys):
        code, out = run_cli(
            ["sample", "--ensemble", "goe", "--dim", "2", "--n", "3", "--seed", "1"], capsys
        )
        assert code == 0
        assert out.splitlines()[0] == "x_1_1,x_1_2,x_2_2"
        assert len(out.splitlines()) == 4

    def test_deterministic_across_runs(self, tmp_path, capsys):
        files = []
        for name in ("a.csv", "b.csv"):
            f = tmp_path / name
            run_cli(
                ["sample", "--ensemble", "affine-goe", "--mu", "1.0", "--scale2", "0.25",
                 "--dim", "2", "--n", "20", "--seed", "5", "--out", str(f)],
                capsys,
            )
            files.append(f.read_bytes())
        assert files[0] == files[1]


class TestVerifyForward:
    def test_goe_passes(self, tmp_path, capsys):
        out_file = tmp_path / "report.json"
        code, _ = run_cli(
            ["verify-forward", "--ensemble", "goe", "--dim", "3", "--n", "10000",
             "--seed", "7", "--haar-count", "2", "--out", str(out_file)],
            capsys,
        )
        assert code == 0
        env = json.loads(out_file.read_text())
        assert set(env) == ENVELOPE_KEYS
        assert env["report"]["overall_pass"] is True

    def test_uniform_fails_and_names_probe(self, capsys):
        code, out = run_cli(
            ["verify-forward", "--ensemble", "uniform-sym", "--dim", "3", "--n", "10000",
             "--seed", "7", "--haar-count", "2"],
            capsys,
        )
        assert code == 1
        env = json.loads(out)
        assert env["report"]["overall_pass"] is False
        assert env["report"]["failures"]
        assert env["report"]["failures"][0]["probe"]

    def test_dim_one_is_usage_error(self, capsys):
        code = main(["verify-forward", "--ensemble", "goe", "--dim", "1", "--n", "10000"])
        assert code == 2


class TestCharacterize:
    def test_round_trip_matches_in_memory(self, tmp_path, capsys):
        csv_file = tmp_path / "dump.csv"
        run_cli(
            ["sample", "--ensemble", "goe", "--dim", "2", "--n", "20000",
             "--seed", "11", "--out", str(csv_file)],
            capsys,
        )
        code_file, out_file = run_cli(["characterize", "--input", str(csv_file)], capsys)
        code_mem, out_mem = run_cli(
            ["characterize", "--ensemble", "goe", "--dim", "2", "--n", "20000", "--seed", "11"],
            capsys,
        )
        assert code_file == code_mem == 0
        rep_file = json.loads(out_file)["report"]
        rep_mem = json.loads(out_mem)["report"]
        rep_file.pop("seed"), rep_mem.pop("seed")
        assert rep_file == rep_mem
        assert rep_file["verdict"] == "AffineGOE"
        assert abs(rep_file["mu"]) < 0.05 and abs(rep_file["sigma2"] - 1.0) < 0.05

    def test_sym_haar_inconclusive_exit_1(self, capsys):
        code, out = run_cli(
            ["characterize", "--ensemble", "sym-haar", "--dim", "4", "--n", "20000",
             "--seed", "3"],
            capsys,
        )
        assert code == 1
        rep = json.loads(out)["report"]
        assert rep["verdict"] == "Inconclusive"
        assert "entry_independence" in rep["failing_gates"]

    def test_malformed_csv_reports_row(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("x_1_1,x_1_2,x_2_2\n1.0,2.0,3.0\n1.0,nope,3.0\n")
        code = main(["characterize", "--input", str(bad)])
        assert code == 2
        assert "row 2" in capsys.readouterr().err

    def test_requires_exactly_one_source(self, capsys):
        assert main(["characterize", "--n", "20000"]) == 2

    def test_missing_file_is_input_error(self, capsys):
        assert main(["characterize", "--input", "/nonexistent/file.csv"]) == 2


class TestProbeCf:
    def test_goe_offdiag_probe_passes(self, capsys):
        code, out = run_cli(
            ["probe-cf", "--ensemble", "goe", "--dim", "3", "--probe", "offdiag:1,2",
             "--n", "20000", "--seed", "2"],
            capsys,
        )
        assert code == 0
        rep = json.loads(out)["report"]
        assert rep["comparison"]["pass"] is True
        assert len(rep["ecf"]["t"]) == 41

    def test_bad_probe_spec(self, capsys):
        assert main(["probe-cf", "--ensemble", "goe", "--dim", "3",
                     "--probe", "bogus:1", "--n", "100"]) == 2

    def test_sym_haar_has_no_closed_form(self, capsys):
        code, out = run_cli(
            ["probe-cf", "--ensemble", "sym-haar", "--dim", "3", "--probe", "diag:1",
             "--n", "5000", "--seed", "2"],
            capsys,
        )
        assert code == 0
        assert "comparison" not in json.loads(out)["report"]


class TestPlots:
    def test_probe_cf_plot_written(self, tmp_path, capsys):
        pytest.importorskip("matplotlib")
        plot_dir = tmp_path / "plots"
        code, out = run_cli(
            ["probe-cf", "--ensemble", "goe", "--dim", "2", "--probe", "diag:1",
             "--n", "5000", "--seed", "2", "--out", str(tmp_path / "r.json"),
             "--plot", str(plot_dir)],
            capsys,
        )
        assert code == 0
        svgs = list(plot_dir.glob("*.svg"))
        assert svgs and svgs[0].stat().st_size > 500


def test_byte_stable_reports(tmp_path, capsys):
    outs = []
    for name in ("r1.json", "r2.json"):
        f = tmp_path / name
        run_cli(
            ["verify-forward", "--ensemble", "goe", "--dim", "2", "--n", "10000",
             "--seed", "9", "--haar-count", "1", "--out", str(f)],
            capsys,
        )
        env = json.loads(f.read_text())
        env.pop("timing_ms")
        outs.append(json.dumps(env, sort_keys=True))
    assert outs[0] == outs[1]
