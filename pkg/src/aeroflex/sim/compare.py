"""Running several solver variants on one configuration and comparing them."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..solvers import ForcingSequence
from .config import SimConfig
from .runner import TimeSeriesOutput, TimingLedger, run_simulation

# column name -> (variant, forcing)
VARIANTS = {
    "Exact": ("exact", None),
    "Quasi": ("quasi", None),
    "Inexact 1": ("inexact", "variant1"),
    "Inexact 2": ("inexact", "variant2"),
}


def _rel(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    diff = np.linalg.norm(a - b)
    return 0.0 if diff == 0.0 else diff / scale


def trace_deviation(a: TimeSeriesOutput, b: TimeSeriesOutput) -> float:
    """Largest per-step relative deviation of displacement vector and C_L."""
    if len(a) != len(b):
        return float("inf")
    worst = 0.0
    for k in range(len(a)):
        worst = max(worst, _rel(a.displacement[k], b.displacement[k]), _rel(a.cl[k], b.cl[k]))
    return worst


def state_deviation(a: TimeSeriesOutput, b: TimeSeriesOutput) -> float:
    """Largest per-step relative deviation of the converged generalized states."""
    if len(a.states) != len(b.states):
        return float("inf")
    return max((_rel(x, y) for x, y in zip(a.states, b.states)), default=0.0)


def step_count_mismatches(a: TimeSeriesOutput, b: TimeSeriesOutput) -> int:
    """Number of time steps on which the Newton step counts differ."""
    if len(a) != len(b):
        return max(len(a), len(b))
    return sum(x != y for x, y in zip(a.newton_steps, b.newton_steps))


def iterates_match(a: TimeSeriesOutput, b: TimeSeriesOutput, rtol: float = 1e-8) -> bool:
    """Same Newton step count on every time step and converged states within ``rtol``."""
    return a.newton_steps == b.newton_steps and state_deviation(a, b) <= rtol


@dataclass
class Comparison:
    series: dict
    ledgers: dict

    def table(self, rtol_trace: float = 1e-6, rtol_state: float = 1e-8) -> str:
        from .output import timing_table
        refine = {n: VARIANTS[n][0] == "inexact" for n in self.ledgers}
        text = timing_table(self.ledgers, refine)
        ref = self.series["Exact"]
        names = list(self.series)
        w = max(14, *(len(n) + 2 for n in names))
        rows = [
            ("Trace dev. vs exact", [f"{trace_deviation(self.series[n], ref):.2e}" for n in names]),
            ("Traces vs exact", ["match" if trace_deviation(self.series[n], ref) <= rtol_trace
                                 else "differ" for n in names]),
            ("States vs exact", ["match" if state_deviation(self.series[n], ref) <= rtol_state
                                 else "differ" for n in names]),
            ("Step-count mismatches", [str(step_count_mismatches(self.series[n], ref)) for n in names]),
        ]
        text += "\nEquivalence (traces rtol %.0e, converged states rtol %.0e)\n" % (rtol_trace, rtol_state)
        for label, cells in rows:
            text += label.ljust(22) + "".join(c.rjust(w) for c in cells) + "\n"
        return text


def run_variants(cfg: SimConfig, names=None, out_dir=None) -> Comparison:
    """Run each named variant; per-variant outputs go to ``out_dir/<slug>``."""
    series, ledgers = {}, {}
    for name in names or VARIANTS:
        variant, forcing = VARIANTS[name]
        c = cfg.with_solver(variant=variant,
                            forcing=ForcingSequence.parse(forcing) if forcing else None)
        if out_dir is not None:
            c = c.replace(output_dir=str(out_dir / name.lower().replace(" ", "_")))
        s, led = run_simulation(c)
        series[name], ledgers[name] = s, led
    return Comparison(series, ledgers)


def total_steps(ledgers: dict[str, TimingLedger]) -> dict:
    return {n: (l.newton_steps, l.refinement_steps) for n, l in ledgers.items()}
