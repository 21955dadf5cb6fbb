"""Strongly coupled time integration of the flexible plate."""
from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import coupling, solvers, structure, uvlm
from .config import SimConfig, gravity_vector

log = logging.getLogger(__name__)


class SimulationError(Exception):
    def __init__(self, msg, step=None, cause=None):
        super().__init__(f"step {step}: {msg}" if step is not None else msg)
        self.step = step
        self.cause = cause


class NonFiniteState(SimulationError):
    pass


@dataclass
class TimingLedger:
    integration_total: float = 0.0
    eval_uvlm_total: float = 0.0
    eval_structure_total: float = 0.0
    newton_total: float = 0.0
    newton_eval_uvlm: float = 0.0
    newton_eval_structure: float = 0.0
    newton_linear_solver: float = 0.0
    time_steps: int = 0
    newton_steps: int = 0
    refinement_steps: int = 0

    def add_report(self, report: solvers.NewtonReport, newton_wall: float):
        self.newton_total += newton_wall
        self.newton_eval_uvlm += report.eval_uvlm
        self.newton_eval_structure += report.eval_structure
        self.newton_linear_solver += report.linear_solver
        self.newton_steps += report.newton_steps
        self.refinement_steps += report.refinement_steps

    def violations(self) -> list[str]:
        out = []
        nested = self.newton_eval_uvlm + self.newton_eval_structure + self.newton_linear_solver
        if nested > self.newton_total:
            out.append(f"nested Newton categories {nested:.6f} s exceed Newton total {self.newton_total:.6f} s")
        if self.newton_total > self.integration_total:
            out.append(f"Newton total {self.newton_total:.6f} s exceeds integration {self.integration_total:.6f} s")
        for name in ("time_steps", "newton_steps", "refinement_steps"):
            if getattr(self, name) < 0:
                out.append(f"{name} is negative")
        return out


@dataclass
class TimeSeriesOutput:
    time: list = field(default_factory=list)
    displacement: list = field(default_factory=list)
    cl: list = field(default_factory=list)
    res_norm: list = field(default_factory=list)
    newton_steps: list = field(default_factory=list)
    refine_steps: list = field(default_factory=list)
    # in-memory extras, not written to the CSV
    states: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    contraction: list = field(default_factory=list)

    def append(self, t, disp, cl, res, n_newton, n_refine):
        self.time.append(float(t))
        self.displacement.append(np.asarray(disp, dtype=float).copy())
        self.cl.append(float(cl))
        self.res_norm.append(float(res))
        self.newton_steps.append(int(n_newton))
        self.refine_steps.append(int(n_refine))

    def __len__(self):
        return len(self.time)

    def as_array(self) -> np.ndarray:
        """Rows ``time, ux, uy, uz, cl, res_norm, newton_steps, refine_steps``."""
        if not self.time:
            return np.zeros((0, 8))
        return np.column_stack([self.time, np.array(self.displacement), self.cl, self.res_norm,
                                self.newton_steps, self.refine_steps])


class PlateProblem:
    """Structural model, aero lattice and transfer map for a configuration."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        props = structure.PlateProperties(cfg.length, cfg.chord, cfg.thickness,
                                          cfg.youngs_modulus, cfg.shear_modulus, cfg.density)
        self.model = structure.RibbonModel(props, cfg.m_s, cfg.geometric_nonlinearity, cfg.torsion_scale)
        self.flow = uvlm.FlowConditions.from_speed(cfg.v_inf, cfg.alpha, cfg.rho_f)
        self.uvlm_config = uvlm.UvlmConfig(cfg.cutoff, cfg.m_a, cfg.n_a)
        self.aero_grid = uvlm.plate_grid(cfg.length, cfg.chord, cfg.m_a, cfg.n_a)
        self.tmap = coupling.build_transfer_map(self.model.reference, self.aero_grid, cfg.transfer_radius)
        self.lift_dir = uvlm.lift_direction(self.flow)
        self.ref_area = cfg.length * cfg.chord
        self.gravity = gravity_vector(cfg)

    @property
    def n_q(self) -> int:
        return self.model.n_q

    def center_displacement(self, q) -> np.ndarray:
        u = np.asarray(q).reshape(-1, 3)
        N = self.model.n_elements
        stations = [N // 2] if N % 2 == 0 else [N // 2, N // 2 + 1]
        idx = [self.model.node_index(ch, j) for j in stations for ch in ("le", "te")]
        return u[idx].mean(axis=0)

    def lift_coefficient(self, lattice) -> float:
        """C_L of the lattice loads; NaN in still air where it is undefined."""
        total = lattice.forces.reshape(-1, 3).sum(axis=0)
        if self.flow.speed == 0.0:
            return float("nan")
        return uvlm.lift_coefficient(total, self.flow, self.ref_area, self.lift_dir)

    def step_functions(self, q_n, s_n, wake, gamma_prev, timer: solvers.SectionTimer):
        """Residual and Jacobian closures for one implicit step, timing-tagged."""
        model, tmap, n_q = self.model, self.tmap, self.model.n_q
        ctx = coupling.AeroForceContext(wake, gamma_prev, self.flow, self.cfg.dt, self.uvlm_config)
        base = structure.ResidualContext(q_n, s_n, self.cfg.dt, None, self.gravity)
        fd_eps = self.cfg.fd_eps

        def residual(y):
            st = structure.GeneralizedState.unpack(y, n_q)
            with timer.section("eval_uvlm"):
                f_ae, _ = coupling.aero_force_function(ctx, tmap, st.q, st.s)
            with timer.section("eval_structure"):
                return structure.assemble_residual(model, st, dataclasses.replace(base, f_ae=f_ae))

        def structural_jacobian(y):
            st = structure.GeneralizedState.unpack(y, n_q)
            with timer.section("eval_structure"):
                return structure.assemble_structural_jacobian(model, st, base)

        def full_jacobian(y):
            st = structure.GeneralizedState.unpack(y, n_q)
            K_str = structural_jacobian(y)
            with timer.section("eval_uvlm"):
                K_qq, K_qs = coupling.aero_jacobian(ctx, tmap, st.q, st.s, fd_eps)
            return solvers.SplitJacobian(K_str, K_qq, K_qs, n_q)

        return ctx, residual, structural_jacobian, full_jacobian


def _dump_state(out_dir, step, y, exc):
    if not out_dir:
        return None
    path = Path(out_dir) / f"failure_step{step}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"step": step, "error": str(exc),
                                "y": [float(v) if np.isfinite(v) else repr(float(v)) for v in y]}))
    return path


def run_simulation(cfg: SimConfig, on_step=None):
    """Integrate the coupled system to ``cfg.t_final``.

    Returns ``(TimeSeriesOutput, TimingLedger)``. ``on_step(n, problem,
    state, lattice, wake)`` is called after every accepted step.
    """
    ledger = TimingLedger()
    series = TimeSeriesOutput()
    t_start = time.perf_counter()

    problem = PlateProblem(cfg)
    model = problem.model
    n_q = model.n_q
    state = model.zero_state()
    wake = uvlm.WakeState()
    gamma_prev = np.zeros(cfg.m_a * cfg.n_a)
    rng = np.random.default_rng(cfg.seed)
    dump_dir = Path(cfg.output_dir) if (cfg.dump_wake and cfg.output_dir) else None

    for n in range(cfg.n_steps):
        timer = solvers.SectionTimer()
        ctx, residual, k_str, k_full = problem.step_functions(state.q, state.s, wake, gamma_prev, timer)
        y0 = state.pack()

        if cfg.estimate_contraction:
            J0 = k_full(y0)
            fac = solvers.linalg.factorize(J0.structural)
            series.contraction.append(
                solvers.estimate_contraction(fac, J0, len(y0), 50, int(rng.integers(2 ** 31))))
            timer.totals.clear()

        t0 = time.perf_counter()
        try:
            y, report = solvers.newton_solve(cfg.newton, residual, k_str, k_full, y0, cfg.forcing, timer)
        except (solvers.SolverError, solvers.linalg.LinalgError, uvlm.UvlmError) as exc:
            y_fail = getattr(exc, "y", None)
            path = _dump_state(cfg.output_dir, n + 1, y0 if y_fail is None else y_fail, exc)
            raise SimulationError(f"{type(exc).__name__}: {exc}" + (f" (state dumped to {path})" if path else ""),
                                  step=n + 1, cause=exc) from exc
        ledger.add_report(report, time.perf_counter() - t0)
        if not np.all(np.isfinite(y)):
            path = _dump_state(cfg.output_dir, n + 1, y, "non-finite state")
            raise NonFiniteState(f"non-finite converged state (dump: {path})", step=n + 1)

        state = structure.GeneralizedState.unpack(y, n_q)
        t1 = time.perf_counter()
        f_ae, lattice = coupling.aero_force_function(ctx, problem.tmap, state.q, state.s)
        cl = problem.lift_coefficient(lattice)
        gamma_prev = lattice.gamma.ravel().copy()
        wake = uvlm.shed_wake(lattice, wake)
        wake = uvlm.convect_wake(lattice, wake, problem.flow, cfg.dt, cfg.cutoff)
        t2 = time.perf_counter()
        ledger.eval_uvlm_total += t2 - t1

        disp = problem.center_displacement(state.q)
        ledger.eval_structure_total += time.perf_counter() - t2

        ledger.time_steps += 1
        series.append((n + 1) * cfg.dt, disp, cl, report.residual_history[-1],
                      report.newton_steps, report.refinement_steps)
        series.states.append(y.copy())
        series.reports.append(report)
        if dump_dir is not None:
            from .output import write_wake
            write_wake(wake, lattice, dump_dir / f"wake_{n + 1}.csv")
        if on_step is not None:
            on_step(n + 1, problem, state, lattice, wake)
        log.debug("step %d: cl=%.6f newton=%d refine=%d", n + 1, cl, report.newton_steps,
                  report.refinement_steps)

    ledger.integration_total = time.perf_counter() - t_start
    return series, ledger


def structural_time_march(model: structure.RibbonModel, state: structure.GeneralizedState, dt: float,
                          n_steps: int, cfg: solvers.NewtonConfig = solvers.NewtonConfig(), gravity=None):
    """Structure-only midpoint stepping (no aerodynamics); yields ``(step, state, report)``."""
    g = np.zeros(3) if gravity is None else np.asarray(gravity, dtype=float)
    n_q = model.n_q
    for n in range(1, n_steps + 1):
        ctx = structure.ResidualContext(state.q, state.s, dt, None, g)

        def residual(y, ctx=ctx):
            return structure.assemble_residual(model, structure.GeneralizedState.unpack(y, n_q), ctx)

        def jacobian(y, ctx=ctx):
            return structure.assemble_structural_jacobian(model, structure.GeneralizedState.unpack(y, n_q), ctx)

        y, report = solvers.newton_exact(residual, jacobian, state.pack(), cfg)
        state = structure.GeneralizedState.unpack(y, n_q)
        yield n, state, report
