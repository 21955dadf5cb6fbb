"""Text outputs: time series CSV, timing report, wake node dumps."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .runner import TimeSeriesOutput, TimingLedger

TIMESERIES_HEADER = ["time", "ux", "uy", "uz", "cl", "res_norm", "newton_steps", "refine_steps"]


def _fmt(x: float) -> str:
    return f"{x:.14e}"


def write_timeseries(out: TimeSeriesOutput, path) -> Path:
    """One row per completed step, floats with 15 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TIMESERIES_HEADER)
        for k in range(len(out)):
            u = out.displacement[k]
            w.writerow([_fmt(out.time[k]), _fmt(u[0]), _fmt(u[1]), _fmt(u[2]), _fmt(out.cl[k]),
                        _fmt(out.res_norm[k]), out.newton_steps[k], out.refine_steps[k]])
    return path


def read_timeseries(path) -> TimeSeriesOutput:
    out = TimeSeriesOutput()
    with Path(path).open(newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows)
        if header != TIMESERIES_HEADER:
            raise ValueError(f"unexpected header {header}")
        for r in rows:
            out.append(float(r[0]), [float(r[1]), float(r[2]), float(r[3])], float(r[4]),
                       float(r[5]), int(r[6]), int(r[7]))
    return out


# (label, attribute, indent level, shown in the per-step section)
_ROWS = [
    ("Integration", "integration_total", 0, True),
    ("Eval UVLM", "eval_uvlm_total", 1, True),
    ("Eval structure", "eval_structure_total", 1, False),
    ("Newton", "newton_total", 1, True),
    ("Eval UVLM", "newton_eval_uvlm", 2, True),
    ("Eval structure", "newton_eval_structure", 2, True),
    ("Linear solver", "newton_linear_solver", 2, True),
]


def timing_table(columns: dict[str, TimingLedger], refinement: dict[str, bool] | None = None) -> str:
    """Side-by-side runtime and counter report for one or more ledgers.

    ``refinement[name]`` False prints ``---`` for the refinement counter,
    mirroring variants that never refine.
    """
    names = list(columns)
    refinement = refinement or {}
    label_w = 22
    col_w = max(14, *(len(n) + 2 for n in names))

    def line(label, level, cells):
        return (". " * level + label).ljust(label_w) + "".join(c.rjust(col_w) for c in cells)

    out = ["Runtimes in seconds and iteration counts", "",
           "".ljust(label_w) + "".join(n.rjust(col_w) for n in names), "", "Total"]
    for label, attr, level, _ in _ROWS:
        out.append(line(label, level, [f"{getattr(columns[n], attr):.6f}" for n in names]))
    out.append(line("Time steps", 0, [str(columns[n].time_steps) for n in names]))
    out.append(line("Newton steps", 0, [str(columns[n].newton_steps) for n in names]))
    out.append(line("Refinement steps", 0, [str(columns[n].refinement_steps)
                                            if refinement.get(n, True) else "---" for n in names]))
    out += ["", "Average per time step"]

    def avg(led, value, digits=6):
        return f"{value / led.time_steps:.{digits}f}" if led.time_steps > 0 else "n/a"

    for label, attr, level, per_step in _ROWS:
        if per_step:
            out.append(line(label, level, [avg(columns[n], getattr(columns[n], attr)) for n in names]))
    out.append(line("Newton steps", 0, [avg(columns[n], columns[n].newton_steps, 3) for n in names]))
    out.append(line("Refinement steps", 0, [avg(columns[n], columns[n].refinement_steps, 3)
                                            if refinement.get(n, True) else "---" for n in names]))
    return "\n".join(out) + "\n"


def write_timing_report(ledger: TimingLedger, path, name: str = "Run", refinement: bool = True) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(timing_table({name: ledger}, {name: refinement}))
    return path


def parse_timing_counters(text: str) -> dict:
    """Read back the total-section counters from a timing report (for checks)."""
    counters = {}
    section = None
    for raw in text.splitlines():
        if raw.strip() in ("Total", "Average per time step"):
            section = raw.strip()
            continue
        if section != "Total":
            continue
        for key in ("Time steps", "Newton steps", "Refinement steps"):
            if raw.startswith(key):
                counters[key] = raw[len(key):].split()
    return counters


def write_wake(wake, lattice, path) -> Path:
    """Node dump ``kind,row,i,x,y,z`` of the bound lattice and the free wake."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "row", "i", "x", "y", "z"])
        grid = np.asarray(lattice.nodes)
        for i in range(grid.shape[0]):
            for j in range(grid.shape[1]):
                w.writerow(["bound", j, i, *map(_fmt, grid[i, j])])
        for r in range(wake.n_rows):
            for i in range(wake.nodes.shape[1]):
                w.writerow(["wake", r, i, *map(_fmt, wake.nodes[r, i])])
    return path
