"""CLI harness tests: plumbing, determinism, validation, exit codes."""

import json
import subprocess
import sys

import pytest

from popcd.engine import CSV_HEADER, read_csv
from popcd.experiments import fit_log_slope, main
from popcd.state import InputError, InvariantViolation


def run_cli(*argv):
    return main(list(argv))


class TestRun:
    def test_single_csv_row(self, capsys):
        code = run_cli(
            "run", "--protocol", "cold", "--n", "256", "--input", "pair", "--seed", "7"
        )
        assert code == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert len(out) == 1
        cells = out[0].split(",")
        assert len(cells) == len(CSV_HEADER)
        assert cells[0] == "256"
        assert cells[2] == "pair"

    def test_rerun_byte_identical(self, capsys):
        args = ("run", "--protocol", "cold", "--n", "128", "--input", "pair", "--seed", "3")
        run_cli(*args)
        first = capsys.readouterr().out
        run_cli(*args)
        second = capsys.readouterr().out
        assert first == second

    def test_json_flag(self, capsys):
        code = run_cli("run", "--n", "64", "--input", "pair", "--json")
        assert code == 0
        row = json.loads(capsys.readouterr().out)
        assert row["n"] == 64
        assert row["input_kind"] == "pair"

    def test_out_file(self, tmp_path, capsys):
        path = tmp_path / "one.csv"
        code = run_cli("run", "--n", "64", "--input", "pair", "--out", str(path))
        assert code == 0
        capsys.readouterr()
        rows = read_csv(str(path))
        assert len(rows) == 1
        assert rows[0].n == 64

    def test_trace_lines_before_row(self, capsys):
        code = run_cli(
            "run", "--protocol", "epidemic", "--n", "16", "--trace",
            "--trace-limit", "3",
        )
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 4  # 3 trace lines + 1 csv row
        assert lines[0].startswith("step=0 ")
        assert all("initiator=" in line for line in lines[:3])


class TestSweep:
    def test_rows_to_file_summary_to_stdout(self, tmp_path, capsys):
        path = tmp_path / "sweep.csv"
        code = run_cli(
            "sweep", "--protocol", "epidemic", "--n-list", "32,64",
            "--trials", "4", "--input", "distinct", "--out", str(path),
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "n=32" in out and "n=64" in out
        assert "median=" in out and "p95=" in out
        assert "slope=" in out
        rows = read_csv(str(path))
        assert len(rows) == 8
        assert sorted({r.n for r in rows}) == [32, 64]

    def test_rows_to_stdout_without_out(self, capsys):
        code = run_cli(
            "sweep", "--protocol", "epidemic", "--n-list", "32",
            "--trials", "2", "--input", "distinct",
        )
        assert code == 0
        captured = capsys.readouterr()
        lines = captured.out.strip().splitlines()
        assert lines[0] == ",".join(CSV_HEADER)
        assert len(lines) == 3  # header + 2 rows
        assert "median=" in captured.err  # summary moved to stderr

    def test_cell_seeds_stable_under_trial_count(self, tmp_path, capsys):
        # trial j of cell n uses a seed derived from (base, n, j), so
        # extending the sweep must not change earlier rows
        small = tmp_path / "small.csv"
        large = tmp_path / "large.csv"
        run_cli("sweep", "--protocol", "epidemic", "--n-list", "32",
                "--trials", "2", "--input", "distinct", "--out", str(small))
        run_cli("sweep", "--protocol", "epidemic", "--n-list", "32",
                "--trials", "4", "--input", "distinct", "--out", str(large))
        capsys.readouterr()
        assert read_csv(str(large))[:2] == read_csv(str(small))

    def test_trials_validation(self, capsys):
        code = run_cli("sweep", "--n-list", "32", "--trials", "0")
        assert code == 1
        assert "trials" in capsys.readouterr().err

    def test_n_list_must_increase(self, capsys):
        code = run_cli("sweep", "--n-list", "64,32", "--trials", "2")
        assert code == 1
        assert "strictly increasing" in capsys.readouterr().err

    def test_unwritable_out_path(self, capsys):
        code = run_cli(
            "sweep", "--protocol", "epidemic", "--n-list", "32", "--trials", "1",
            "--input", "distinct", "--out", "/nonexistent-dir/x.csv",
        )
        assert code == 1
        assert "i/o error" in capsys.readouterr().err


class TestStates:
    def test_reports_per_n_maxima_and_deltas(self, capsys):
        code = run_cli(
            "states", "--protocol", "cold", "--n-list", "32,64",
            "--trials", "2", "--input", "pair",
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "n=32 max_state_bits=" in out
        assert "n=64 max_state_bits=" in out
        assert "doubling 32->64:" in out


class TestCalibrate:
    def test_unknown_target_rejected(self, capsys):
        code = run_cli("calibrate", "nonexistent-target")
        assert code == 1

    def test_epidemic_target_reports_json(self, tmp_path, capsys):
        path = tmp_path / "cal.json"
        code = run_cli(
            "calibrate", "epidemic-d", "--n-list", "32,64", "--trials", "20",
            "--out", str(path),
        )
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["target"] == "epidemic-d"
        assert report["d"] > 0
        assert json.loads(path.read_text()) == report


class TestExitCodes:
    def test_usage_error_is_one(self, capsys):
        assert run_cli("run") == 1  # missing --n
        assert run_cli("frobnicate") == 1  # unknown subcommand
        capsys.readouterr()

    def test_input_error_is_one(self, capsys):
        code = run_cli("run", "--n", "3", "--input", "file:/no/such/ranks")
        assert code == 1
        assert "input error" in capsys.readouterr().err

    def test_invariant_violation_is_two(self, monkeypatch, capsys):
        import popcd.experiments as exp

        def boom(*args, **kwargs):
            raise InvariantViolation("induced for the exit-code contract")

        monkeypatch.setattr(exp, "run_trial", boom)
        code = run_cli("run", "--n", "16")
        assert code == 2
        assert "invariant violation" in capsys.readouterr().err

    def test_input_error_subclasses_route_to_one(self, monkeypatch, capsys):
        import popcd.experiments as exp

        def bad(*args, **kwargs):
            raise InputError("induced")

        monkeypatch.setattr(exp, "run_trial", bad)
        assert run_cli("run", "--n", "16") == 1
        capsys.readouterr()


class TestSlopeFit:
    def test_exact_power_law(self):
        points = [(float(n), float(n) ** 1.5) for n in (512, 1024, 2048, 4096)]
        assert abs(fit_log_slope(points) - 1.5) < 1e-12

    def test_quadratic(self):
        points = [(float(n), float(n) ** 2) for n in (64, 128, 256)]
        assert abs(fit_log_slope(points) - 2.0) < 1e-12

    def test_needs_two_points(self):
        with pytest.raises(InputError):
            fit_log_slope([(64.0, 100.0)])


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "popcd", "run", "--protocol", "epidemic",
         "--n", "32", "--seed", "1"],
        capture_output=True, text=True, timeout=300,
    )
    assert proc.returncode == 0
    cells = proc.stdout.strip().split(",")
    assert cells[0] == "32"
