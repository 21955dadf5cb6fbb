import numpy as np
import pytest

from aeroflex.sim.output import (parse_timing_counters, read_timeseries, timing_table,
                                 write_timeseries, write_timing_report, write_wake)
from aeroflex.sim.runner import TimeSeriesOutput, TimingLedger
from aeroflex import uvlm


def _series(n):
    rng = np.random.default_rng(n)
    out = TimeSeriesOutput()
    for k in range(n):
        out.append((k + 1) * 0.1, rng.standard_normal(3), rng.standard_normal(), rng.random() * 1e-9,
                   rng.integers(1, 9), rng.integers(0, 30))
    return out


def test_header_only_for_empty_run(tmp_path):
    p = write_timeseries(TimeSeriesOutput(), tmp_path / "ts.csv")
    assert p.read_text() == "time,ux,uy,uz,cl,res_norm,newton_steps,refine_steps\n"


def test_round_trip(tmp_path):
    s = _series(7)
    back = read_timeseries(write_timeseries(s, tmp_path / "ts.csv"))
    assert len(back) == 7
    np.testing.assert_allclose(back.as_array(), s.as_array(), rtol=1e-14, atol=0)
    assert back.newton_steps == s.newton_steps and back.refine_steps == s.refine_steps


def test_output_deterministic(tmp_path):
    a = write_timeseries(_series(5), tmp_path / "a.csv").read_bytes()
    b = write_timeseries(_series(5), tmp_path / "b.csv").read_bytes()
    assert a == b


def test_timing_report_zero_steps(tmp_path):
    text = write_timing_report(TimingLedger(), tmp_path / "t.txt").read_text()
    assert "n/a" in text and "Average per time step" in text


def test_timing_report_counters_echoed(tmp_path):
    led = TimingLedger(integration_total=3.0, eval_uvlm_total=1.0, newton_total=1.5, newton_eval_uvlm=0.7,
                       newton_eval_structure=0.1, newton_linear_solver=0.2, time_steps=4,
                       newton_steps=17, refinement_steps=123)
    text = write_timing_report(led, tmp_path / "t.txt").read_text()
    c = parse_timing_counters(text)
    assert c == {"Time steps": ["4"], "Newton steps": ["17"], "Refinement steps": ["123"]}
    assert not led.violations()


def test_timing_table_columns_and_dashes():
    led = TimingLedger(time_steps=2, newton_steps=5)
    text = timing_table({"Exact": led, "Inexact 1": led}, {"Exact": False, "Inexact 1": True})
    row = [l for l in text.splitlines() if l.startswith("Refinement steps")][0]
    assert row.split()[-2:] == ["---", "0"]


def test_ledger_violations():
    assert TimingLedger(newton_total=2.0, integration_total=1.0).violations()
    assert TimingLedger(newton_total=1.0, integration_total=2.0, newton_eval_uvlm=1.5).violations()


def test_wake_dump(tmp_path):
    lat = uvlm.LatticeState(uvlm.plate_grid(2.0, 1.0, 2, 1))
    wake = uvlm.shed_wake(lat, uvlm.WakeState())
    lines = write_wake(wake, lat, tmp_path / "w.csv").read_text().splitlines()
    assert lines[0] == "kind,row,i,x,y,z"
    assert len(lines) == 1 + 6 + 3
