"""Command-line entry point: ``aeroflex [options]``.

Exit codes: 0 success, 1 invalid input or usage, 2 solver failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..solvers import VARIANTS, ForcingSequence
from .compare import run_variants
from .config import PRESETS, ConfigError, load_config_file, preset
from .output import write_timeseries, write_timing_report
from .runner import SimulationError, run_simulation

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _mesh(text: str):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected <mS>,<mA>,<nA>")
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"mesh sizes must be integers: {text!r}") from None


def _forcing(text: str) -> ForcingSequence:
    try:
        return ForcingSequence.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="aeroflex", description="Strongly coupled UVLM plate simulation.")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", type=Path, help="INI configuration file")
    src.add_argument("--preset", choices=sorted(PRESETS), default=None,
                     help="built-in configuration (default: plate)")
    p.add_argument("--solver", choices=VARIANTS)
    p.add_argument("--forcing", type=_forcing, help="variant1 | variant2 | const:<v>")
    p.add_argument("--tol", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--t-final", type=float, dest="t_final")
    p.add_argument("--mesh", type=_mesh, help="<mS>,<mA>,<nA>")
    p.add_argument("--cutoff", type=float)
    p.add_argument("--transfer-radius", type=float, dest="transfer_radius")
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--seed", type=int)
    p.add_argument("--dump-wake", action="store_true", help="write wake_<step>.csv every step")
    p.add_argument("--compare-solvers", action="store_true",
                   help="run every solver variant and write a side-by-side report")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _apply_overrides(cfg, args):
    changes = {}
    for name in ("dt", "t_final", "cutoff", "transfer_radius", "seed"):
        val = getattr(args, name)
        if val is not None:
            changes[name] = val
    if args.mesh is not None:
        changes.update(m_s=args.mesh[0], m_a=args.mesh[1], n_a=args.mesh[2])
    if args.dump_wake:
        changes["dump_wake"] = True
    changes["output_dir"] = str(args.out)
    cfg = cfg.replace(**changes)
    return cfg.with_solver(variant=args.solver, forcing=args.forcing, tol=args.tol)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INPUT
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    try:
        cfg = load_config_file(args.config) if args.config else preset(args.preset or "plate")
        cfg = _apply_overrides(cfg, args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"aeroflex: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT

    out = Path(args.out)
    try:
        if args.compare_solvers:
            cmp = run_variants(cfg, out_dir=out)
            for name, series in cmp.series.items():
                sub = out / name.lower().replace(" ", "_")
                write_timeseries(series, sub / "timeseries.csv")
                write_timing_report(cmp.ledgers[name], sub / "timing.txt", name,
                                    refinement=name.startswith("Inexact"))
            out.mkdir(parents=True, exist_ok=True)
            (out / "comparison.txt").write_text(cmp.table())
            print(cmp.table())
        else:
            series, ledger = run_simulation(cfg)
            write_timeseries(series, out / "timeseries.csv")
            write_timing_report(ledger, out / "timing.txt", cfg.newton.variant.capitalize(),
                                refinement=cfg.newton.variant == "inexact")
            print(f"{ledger.time_steps} steps, {ledger.newton_steps} Newton steps, "
                  f"{ledger.refinement_steps} refinement steps; outputs in {out}")
    except SimulationError as exc:
        print(f"aeroflex: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"aeroflex: cannot write output: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
