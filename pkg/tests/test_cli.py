import pytest

from aeroflex.sim.cli import EXIT_INPUT, EXIT_OK, EXIT_SOLVER, main
from aeroflex.sim.output import parse_timing_counters, read_timeseries

TINY = ["--preset", "reduced", "--mesh", "4,4,1", "--t-final", "0.0278"]


def test_unknown_flag():
    assert main(["--warp"]) == EXIT_INPUT


@pytest.mark.parametrize("mesh", ["4,4", "a,b,c", "4,0,1"])
def test_bad_mesh(mesh, tmp_path):
    assert main(["--mesh", mesh, "--out", str(tmp_path)]) == EXIT_INPUT


def test_invalid_config_file(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[flow]\nv_inf = -3\n[time]\ndt = 0.01\n")
    assert main(["--config", str(p)]) == EXIT_INPUT
    assert main(["--config", str(tmp_path / "missing.ini")]) == EXIT_INPUT


def test_bad_forcing():
    assert main(["--forcing", "sometimes"]) == EXIT_INPUT


def test_small_run_writes_outputs(tmp_path, capsys):
    assert main(TINY + ["--solver", "quasi", "--out", str(tmp_path)]) == EXIT_OK
    series = read_timeseries(tmp_path / "timeseries.csv")
    assert len(series) == 5
    counters = parse_timing_counters((tmp_path / "timing.txt").read_text())
    assert counters["Time steps"] == ["5"]
    assert counters["Newton steps"] == [str(sum(series.newton_steps))]
    assert counters["Refinement steps"] == ["---"]
    assert "5 steps" in capsys.readouterr().out


def test_solver_failure_exit_code(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[flow]\nv_inf = 45\n[time]\ndelta_l = 0.25\nt_final = 0.02\n"
                 "[mesh]\nm_s = 4\nm_a = 4\nn_a = 1\n[solver]\nmax_steps = 1\n")
    assert main(["--config", str(p), "--out", str(tmp_path / "o")]) == EXIT_SOLVER
    assert (tmp_path / "o" / "failure_step1.json").exists()


def test_compare_solvers(tmp_path, capsys):
    assert main(TINY + ["--compare-solvers", "--out", str(tmp_path)]) == EXIT_OK
    text = (tmp_path / "comparison.txt").read_text()
    traces = [l for l in text.splitlines() if l.startswith("Traces vs exact")][0]
    assert traces.split()[3:] == ["match"] * 4
    for sub in ("exact", "quasi", "inexact_1", "inexact_2"):
        assert (tmp_path / sub / "timeseries.csv").exists()
        assert (tmp_path / sub / "timing.txt").exists()
    assert "Runtimes in seconds" in capsys.readouterr().out
