"""Newton-type drivers for F(y) = 0 with a split (structure + aero) Jacobian.

Three variants share one loop:

* ``exact``   -- factorize the full Jacobian, one backsolve per step.
* ``quasi``   -- factorize only the structural part ``B_k``, one backsolve.
* ``inexact`` -- factorize ``B_k`` and refine toward the full Newton step
  until the linear residual meets the forcing test.
"""
from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import linalg
from .linalg import DenseBlock, SingularMatrix  # noqa: F401  (re-exported)

ETA_FLOOR = 1e-16
DIVERGENCE_PATIENCE = 5
ARMIJO_MAX_HALVINGS = 20


class SolverError(Exception):
    def __init__(self, msg, y=None, report=None):
        super().__init__(msg)
        self.y = y
        self.report = report


class MaxStepsExceeded(SolverError):
    pass


class Divergence(SolverError):
    pass


class RefinementStall(SolverError):
    pass


class LineSearchFailed(SolverError):
    pass


VARIANTS = ("exact", "quasi", "inexact")


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-8
    max_steps: int = 50
    variant: str = "exact"
    damping: str = "full_step"
    armijo_c: float = 1e-4
    max_refinements: int = 50

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_steps < 1 or self.max_refinements < 1:
            raise ValueError("max_steps and max_refinements must be >= 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")
        if self.damping not in ("full_step", "armijo"):
            raise ValueError(f"unknown damping {self.damping!r}")
        if not 0 < self.armijo_c < 1:
            raise ValueError(f"armijo_c must lie in (0, 1), got {self.armijo_c}")


FORCING_KINDS = ("variant1", "variant2", "constant", "custom_scale")


@dataclass(frozen=True)
class ForcingSequence:
    """``eta_k = scale * min(cap, ||F(y_k)||)``, or a constant ``value``."""

    kind: str = "variant1"
    scale: float = 1e-5
    cap: float = 0.5
    value: float | None = None

    def __post_init__(self):
        if self.kind not in FORCING_KINDS:
            raise ValueError(f"unknown forcing kind {self.kind!r}")
        if self.kind == "constant" and not (self.value is not None and 0 < self.value < 1):
            raise ValueError(f"constant forcing needs a value in (0, 1), got {self.value}")

    @classmethod
    def parse(cls, text: str) -> "ForcingSequence":
        """``variant1``, ``variant2``, ``const:<v>`` or ``scale:<v>``."""
        text = text.strip()
        if text in ("variant1", "variant2"):
            return cls(text)
        head, _, val = text.partition(":")
        if head in ("const", "constant") and val:
            return cls("constant", value=float(val))
        if head in ("scale", "custom_scale") and val:
            return cls("custom_scale", scale=float(val))
        raise ValueError(f"cannot parse forcing sequence {text!r}")

    def eta(self, k: int, norm_f: float) -> float:
        return forcing_eta(self.kind, k, norm_f, scale=self.scale, cap=self.cap, value=self.value)

    def describe(self) -> str:
        if self.kind == "constant":
            return f"const:{self.value:g}"
        if self.kind == "custom_scale":
            return f"scale:{self.scale:g}"
        return self.kind


def forcing_eta(kind: str, k: int, norm_f: float, scale: float = 1e-5, cap: float = 0.5,
                value: float | None = None) -> float:
    if norm_f < 0:
        raise ValueError("residual norm must be non-negative")
    if kind == "variant1":
        eta = min(cap, norm_f)
    elif kind == "variant2":
        eta = 1e-5 * min(cap, norm_f)
    elif kind == "custom_scale":
        eta = scale * min(cap, norm_f)
    elif kind == "constant":
        eta = float(value)
    else:
        raise ValueError(f"unknown forcing kind {kind!r}")
    return min(max(eta, ETA_FLOOR), 1.0 - 1e-12)


class SectionTimer:
    """Wall-clock accumulator keyed by category name."""

    def __init__(self):
        self.totals: dict[str, float] = {}

    @contextmanager
    def section(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.totals[name] = self.totals.get(name, 0.0) + time.perf_counter() - t0

    def get(self, name: str) -> float:
        return self.totals.get(name, 0.0)


class SplitJacobian:
    """``K_str`` plus the dense aero blocks in the dynamic-equilibrium rows."""

    def __init__(self, structural, aero_qq=None, aero_qs=None, n_q: int | None = None):
        self.structural = sp.csr_matrix(structural)
        n = self.structural.shape[0]
        if self.structural.shape != (n, n):
            raise linalg.DimensionMismatch("structural Jacobian must be square")
        self.blocks: list[DenseBlock] = []
        if aero_qq is not None or aero_qs is not None:
            if n_q is None:
                n_q = np.shape(aero_qq if aero_qq is not None else aero_qs)[0]
            if aero_qq is not None:
                self.blocks.append(DenseBlock(0, 0, np.asarray(aero_qq, dtype=float)))
            if aero_qs is not None:
                self.blocks.append(DenseBlock(0, n_q, np.asarray(aero_qs, dtype=float)))
        for b in self.blocks:
            b.check_fits(self.shape)
        self.n_q = n_q

    @property
    def shape(self):
        return self.structural.shape

    @property
    def aero_present(self) -> bool:
        return bool(self.blocks)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        out = self.structural @ x
        for b in self.blocks:
            b.matvec(x, out)
        return out

    def materialize(self) -> sp.csr_matrix:
        A = self.structural.tocoo()
        rows, cols, vals = [A.row], [A.col], [A.data]
        for b in self.blocks:
            r, c = np.indices(b.shape)
            rows.append((r + b.row_offset).ravel())
            cols.append((c + b.col_offset).ravel())
            vals.append(b.data.ravel())
        return linalg.assemble_sparse(np.concatenate(rows), np.concatenate(cols),
                                      np.concatenate(vals), self.shape)


@dataclass
class NewtonReport:
    converged: bool = False
    newton_steps: int = 0
    refinement_steps: int = 0
    residual_history: list = field(default_factory=list)
    step_lengths: list = field(default_factory=list)
    refinement_ratios: list = field(default_factory=list)
    forcing: list = field(default_factory=list)
    eval_uvlm: float = 0.0
    eval_structure: float = 0.0
    linear_solver: float = 0.0

    def absorb_times(self, timer: SectionTimer):
        self.eval_uvlm = timer.get("eval_uvlm")
        self.eval_structure = timer.get("eval_structure")
        self.linear_solver = timer.get("linear_solver")


def _norm(v) -> float:
    return float(np.linalg.norm(v))


def _refine(dy, fac, r):
    return dy - linalg.solve(fac, r)


def _armijo(residual_fn, y, d, c, norm0):
    target = (1.0 - 0.5 * c) * norm0 ** 2
    alpha = 1.0
    for _ in range(ARMIJO_MAX_HALVINGS + 1):
        y_new = y + alpha * d
        F_new = residual_fn(y_new)
        n_new = _norm(F_new)
        if np.isfinite(n_new) and n_new ** 2 <= target:
            return alpha, y_new, F_new
        alpha *= 0.5
    raise LineSearchFailed(f"no step length down to 2^-{ARMIJO_MAX_HALVINGS} satisfies sufficient decrease")


def line_search_armijo(residual_fn, y, d, c: float = 1e-4) -> float:
    """Largest ``alpha`` in ``{1, 1/2, ..., 2^-20}`` with
    ``||F(y + alpha d)||^2 <= (1 - c/2) ||F(y)||^2``."""
    y = np.asarray(y, dtype=float)
    alpha, _, _ = _armijo(residual_fn, y, np.asarray(d, dtype=float), c, _norm(residual_fn(y)))
    return alpha


def _newton_loop(residual_fn, y0, cfg: NewtonConfig, step_fn, timer, watch_divergence=False):
    timer = timer if timer is not None else SectionTimer()
    report = NewtonReport()
    y = np.array(y0, dtype=float)
    F = residual_fn(y)
    nf = _norm(F)
    report.residual_history.append(nf)
    best = (nf, y.copy())
    increases = 0
    k = 0
    while not nf <= cfg.tol:
        if not np.isfinite(nf):
            report.absorb_times(timer)
            raise Divergence(f"non-finite residual at Newton step {k}", best[1], report)
        if k >= cfg.max_steps:
            report.absorb_times(timer)
            raise MaxStepsExceeded(
                f"no convergence in {cfg.max_steps} steps, ||F|| = {nf:.3e}", best[1], report)
        dy = step_fn(y, F, nf, k, report, timer)
        if cfg.damping == "armijo":
            alpha, y, F = _armijo(residual_fn, y, dy, cfg.armijo_c, nf)
        else:
            alpha = 1.0
            y = y + dy
            F = residual_fn(y)
        nf_new = _norm(F)
        report.step_lengths.append(alpha)
        report.residual_history.append(nf_new)
        k += 1
        increases = increases + 1 if nf_new > nf else 0
        nf = nf_new
        if nf < best[0]:
            best = (nf, y.copy())
        if watch_divergence and increases >= DIVERGENCE_PATIENCE:
            report.absorb_times(timer)
            raise Divergence(f"||F|| increased for {increases} consecutive steps", best[1], report)
    report.converged = True
    report.newton_steps = k
    report.absorb_times(timer)
    return y, report


def newton_exact(residual_fn, full_jacobian_fn, y0, cfg: NewtonConfig = NewtonConfig(), timer=None):
    """Newton iteration with the full Jacobian factorized at every step."""
    def step(y, F, nf, k, report, timer):
        J = full_jacobian_fn(y)
        with timer.section("linear_solver"):
            fac = linalg.factorize(J)
            return _refine(np.zeros_like(F), fac, F)

    return _newton_loop(residual_fn, y0, cfg, step, timer)


def newton_quasi(residual_fn, structural_jacobian_fn, y0, cfg: NewtonConfig = NewtonConfig(), timer=None):
    """Fixed-approximation Newton: steps solve ``B_k dy = -F`` with ``B_k = K_str(y_k)``."""
    def step(y, F, nf, k, report, timer):
        B = structural_jacobian_fn(y)
        with timer.section("linear_solver"):
            fac = linalg.factorize(B)
            return _refine(np.zeros_like(F), fac, F)

    return _newton_loop(residual_fn, y0, cfg, step, timer, watch_divergence=True)


def refine_step(fac, J, F, eta: float, max_refinements: int):
    """Iterative refinement of ``J dy = -F`` preconditioned by the factorized ``B``.

    Returns ``(dy, residual_norms)`` where ``residual_norms[0] = ||F||``.
    """
    nf = _norm(F)
    target = eta * nf
    dy = np.zeros_like(F)
    r = F
    norms = [nf]
    while True:
        dy = _refine(dy, fac, r)
        r = linalg.matvec(J, dy) + F
        nr = _norm(r)
        norms.append(nr)
        if nr <= target or len(norms) - 1 >= max_refinements:
            return dy, norms
        if nr >= norms[-2]:
            raise RefinementStall(
                f"refinement residual stopped decreasing ({norms[-2]:.3e} -> {nr:.3e}); "
                f"contraction factor >= 1")


def newton_inexact(residual_fn, structural_jacobian_fn, full_jacobian_fn, y0,
                   cfg: NewtonConfig = NewtonConfig(), forcing: ForcingSequence = ForcingSequence(),
                   timer=None):
    """Inexact Newton with iterative refinement on the structural factorization."""
    def step(y, F, nf, k, report, timer):
        J = full_jacobian_fn(y)
        B = J.structural if isinstance(J, SplitJacobian) else structural_jacobian_fn(y)
        eta = forcing.eta(k, nf)
        with timer.section("linear_solver"):
            fac = linalg.factorize(B)
            try:
                dy, norms = refine_step(fac, J, F, eta, cfg.max_refinements)
            except RefinementStall as exc:
                report.absorb_times(timer)
                exc.y, exc.report = y, report
                raise
        report.forcing.append(eta)
        report.refinement_steps += len(norms) - 1
        report.refinement_ratios.extend(b / a for a, b in zip(norms[:-1], norms[1:]) if a > 0)
        return dy

    return _newton_loop(residual_fn, y0, cfg, step, timer)


def newton_solve(cfg: NewtonConfig, residual_fn, structural_jacobian_fn, full_jacobian_fn, y0,
                 forcing: ForcingSequence = ForcingSequence(), timer=None):
    """Dispatch on ``cfg.variant``."""
    if cfg.variant == "exact":
        return newton_exact(residual_fn, full_jacobian_fn, y0, cfg, timer)
    if cfg.variant == "quasi":
        return newton_quasi(residual_fn, structural_jacobian_fn, y0, cfg, timer)
    return newton_inexact(residual_fn, structural_jacobian_fn, full_jacobian_fn, y0, cfg, forcing, timer)


def estimate_contraction(structural_factorization, split_jacobian, n: int, iters: int = 100,
                         seed: int = 0) -> float:
    """Power-iteration estimate of the spectral radius of ``B^-1 J - I``."""
    if iters < 1:
        raise ValueError("iters must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x /= _norm(x)
    lam = 0.0
    for _ in range(iters):
        z = linalg.solve(structural_factorization, linalg.matvec(split_jacobian, x)) - x
        lam = float(x @ z)
        nz = _norm(z)
        if nz == 0.0:
            return 0.0
        x = z / nz
    return abs(lam)
