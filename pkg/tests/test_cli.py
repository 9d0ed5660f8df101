import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from rpdlp.cli import main
from rpdlp.mps import read_solution

SUITE = Path(__file__).parent / "data" / "suite"

PRIMAL_INFEASIBLE = """NAME          PINF
ROWS
 N  obj
 G  lo
 L  hi
COLUMNS
    x         lo        1.0          hi        1.0
RHS
    rhs       lo        1.0          hi        0.0
BOUNDS
 FR bnd       x
ENDATA
"""

DUAL_INFEASIBLE = """NAME          DINF
ROWS
 N  obj
COLUMNS
    x         obj       -1.0
ENDATA
"""


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for key in ("EPS", "EPS_INFEASIBLE", "TIME_LIMIT", "ITERATION_LIMIT", "SCALING", "EAGER_RESTART", "JOBS"):
        monkeypatch.delenv(f"RPDLP_{key}", raising=False)
    shutil.copy(SUITE / "wyndor.mps", tmp_path / "wyndor.mps")
    (tmp_path / "pinf.mps").write_text(PRIMAL_INFEASIBLE)
    (tmp_path / "dinf.mps").write_text(DUAL_INFEASIBLE)
    return tmp_path


class TestSolve:
    def test_optimal(self, workdir, capsys):
        assert main(["solve", "wyndor.mps", "--eps", "1e-8"]) == 0
        assert "optimal" in capsys.readouterr().out
        rec = read_solution(workdir / "wyndor.sol")
        assert rec["status"] == "optimal"
        assert rec["primal_objective"] == pytest.approx(-36.0, rel=1e-6)
        assert len(rec["primal"]) == 2

    def test_infeasible_exit_codes(self, workdir):
        assert main(["solve", "pinf.mps", "--eps-infeasible", "1e-8"]) == 3
        assert main(["solve", "dinf.mps", "--eps-infeasible", "1e-8"]) == 4
        assert read_solution(workdir / "pinf.sol")["status"] == "primal_infeasible"

    def test_limits(self, workdir):
        assert main(["solve", "wyndor.mps", "--eps", "1e-12", "--iteration-limit", "5"]) == 5

    def test_bad_path(self, workdir, capsys):
        assert main(["solve", "missing.mps"]) == 8
        assert "missing.mps" in capsys.readouterr().err

    def test_parse_error(self, workdir, capsys):
        (workdir / "bad.mps").write_text("NAME x\nROWS\n Q r\nENDATA\n")
        assert main(["solve", "bad.mps"]) == 8
        assert "line 3" in capsys.readouterr().err

    def test_summary_and_out(self, workdir, capsys):
        out = workdir / "custom.sol"
        assert main(["solve", "wyndor.mps", "--summary", "--out", str(out), "--no-vectors"]) == 0
        text = capsys.readouterr().out
        for label in ("gap", "primal", "dual"):
            assert f"  {label}" in text
        rec = read_solution(out)
        assert "primal" not in rec
        assert not (workdir / "wyndor.sol").exists()

    def test_invalid_parameters(self, workdir):
        assert main(["solve", "wyndor.mps", "--eps", "-1"]) == 2

    def test_unknown_scaling_rejected(self, workdir):
        with pytest.raises(SystemExit) as err:
            main(["solve", "wyndor.mps", "--scaling", "l2"])
        assert err.value.code == 2


class TestConfig:
    def test_show_config_defaults(self, workdir, capsys):
        assert main(["solve", "wyndor.mps", "--show-config"]) == 0
        config = json.loads(capsys.readouterr().out)
        assert config["eps_optimal"] == 1e-4 and config["scaling"] == "ruiz+pc"

    def test_environment_overrides(self, workdir, capsys, monkeypatch):
        monkeypatch.setenv("RPDLP_EPS", "1e-6")
        monkeypatch.setenv("RPDLP_SCALING", "none")
        monkeypatch.setenv("RPDLP_EAGER_RESTART", "yes")
        assert main(["solve", "wyndor.mps", "--show-config"]) == 0
        config = json.loads(capsys.readouterr().out)
        assert (config["eps_optimal"], config["scaling"], config["eager_restart"]) == (1e-6, "none", True)

    def test_flag_beats_environment(self, workdir, capsys, monkeypatch):
        monkeypatch.setenv("RPDLP_EPS", "1e-6")
        assert main(["solve", "wyndor.mps", "--eps", "1e-3", "--show-config"]) == 0
        assert json.loads(capsys.readouterr().out)["eps_optimal"] == 1e-3

    def test_bad_environment_value(self, workdir, monkeypatch):
        monkeypatch.setenv("RPDLP_EPS", "tiny")
        with pytest.raises(SystemExit):
            main(["solve", "wyndor.mps"])


class TestOtherCommands:
    def test_theory_check(self, workdir, capsys):
        assert main(["theory-check", "wyndor.mps", "--epochs", "8"]) == 0
        out = capsys.readouterr().out
        assert out.count(" ok") == 9 and "VIOLATED" not in out

    def test_theory_check_budget_exhausted(self, workdir):
        assert main(["theory-check", "wyndor.mps", "--epochs", "8", "--max-iterations", "3"]) == 9

    def test_bench(self, workdir, capsys):
        report = workdir / "report.tsv"
        assert main(["bench", str(workdir), "--eps", "1e-6", "--report", str(report)]) == 0
        out = capsys.readouterr().out
        assert out == report.read_text()
        assert "# class=all count=3 solved=3" in out

    def test_bench_missing_directory(self, workdir):
        assert main(["bench", str(workdir / "nope")]) == 8

    def test_console_entry_point(self, workdir):
        proc = subprocess.run(
            [sys.executable, "-m", "rpdlp.cli", "solve", "wyndor.mps"], capture_output=True, text=True
        )
        assert proc.returncode == 0, proc.stderr
