"""Structure <-> aerodynamics transfer and the strongly coupled aero force.

Kinematics go from structural nodes to aerodynamic lattice nodes through
a fixed weight matrix ``W`` built from compactly supported bump functions
on the reference configuration; loads go back through ``W.T`` so the
virtual work of both load sets agrees.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import uvlm
from .linalg import DimensionMismatch


class CouplingError(Exception):
    pass


class UncoveredAeroNode(CouplingError):
    pass


class NonFiniteDerivative(CouplingError):
    pass


def bump_weight(r, gamma_ref: float):
    """C-infinity bump ``exp(1 - 1/(1 - (r/gamma_ref)^2))``, zero for ``r >= gamma_ref``."""
    if not gamma_ref > 0:
        raise ValueError(f"transfer radius must be positive, got {gamma_ref}")
    r = np.asarray(r, dtype=float)
    x2 = (r / gamma_ref) ** 2
    out = np.zeros_like(x2)
    inside = x2 < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - x2[inside]))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class TransferMap:
    weights: np.ndarray            # (n_aero_nodes, n_struct_nodes)
    gamma_ref: float
    struct_reference: np.ndarray   # (n_struct_nodes, 3)
    aero_reference: np.ndarray     # (m+1, n+1, 3)

    @property
    def grid_shape(self):
        return self.aero_reference.shape[:2]


def build_transfer_map(struct_ref_nodes, aero_ref_nodes, gamma_ref: float) -> TransferMap:
    """Row-normalized bump-function weights on reference distances.

    ``aero_ref_nodes`` is the surface grid ``(m+1, n+1, 3)``.
    """
    S = np.asarray(struct_ref_nodes, dtype=float).reshape(-1, 3)
    grid = np.asarray(aero_ref_nodes, dtype=float)
    A = grid.reshape(-1, 3)
    dist = np.linalg.norm(A[:, None, :] - S[None, :, :], axis=-1)
    W = bump_weight(dist, gamma_ref)
    sums = W.sum(axis=1)
    bad = np.flatnonzero(sums == 0.0)
    if bad.size:
        raise UncoveredAeroNode(
            f"{bad.size} aero node(s) have no structural node within {gamma_ref} m, "
            f"first at {A[bad[0]].tolist()}")
    return TransferMap(W / sums[:, None], float(gamma_ref), S, grid)


def surface_kinematics(tmap: TransferMap, q, s):
    """Aero node positions and velocities, both shaped like the surface grid."""
    n_s = tmap.struct_reference.shape[0]
    q = np.asarray(q, dtype=float)
    s = np.asarray(s, dtype=float)
    if q.shape != (3 * n_s,) or s.shape != (3 * n_s,):
        raise DimensionMismatch(f"expected q, s of length {3 * n_s}")
    shape = tmap.aero_reference.shape
    pos = tmap.aero_reference + (tmap.weights @ q.reshape(-1, 3)).reshape(shape)
    vel = (tmap.weights @ s.reshape(-1, 3)).reshape(shape)
    return pos, vel


def generalized_aero_forces(tmap: TransferMap, panel_forces) -> np.ndarray:
    """Spread panel forces to their four corners, then pull back with ``W.T``."""
    m, n = tmap.grid_shape[0] - 1, tmap.grid_shape[1] - 1
    F = np.asarray(panel_forces, dtype=float)
    if F.size != 3 * m * n:
        raise DimensionMismatch(f"expected {m}x{n} panel forces, got shape {F.shape}")
    F = 0.25 * F.reshape(m, n, 3)
    nodal = np.zeros((m + 1, n + 1, 3))
    nodal[:-1, :-1] += F
    nodal[1:, :-1] += F
    nodal[1:, 1:] += F
    nodal[:-1, 1:] += F
    return (tmap.weights.T @ nodal.reshape(-1, 3)).ravel()


@dataclass
class AeroForceContext:
    """Everything the aero force needs besides ``(q, s)``; fixed during one solve."""

    wake: uvlm.WakeState
    gamma_prev: np.ndarray
    flow: uvlm.FlowConditions
    dt: float
    config: uvlm.UvlmConfig
    frozen: uvlm.FrozenWakeField = field(init=False, repr=False)

    def __post_init__(self):
        self.gamma_prev = np.asarray(self.gamma_prev, dtype=float)
        if self.gamma_prev.size != self.config.m_a * self.config.n_a:
            raise DimensionMismatch("gamma_prev length does not match the ring count")
        self.frozen = uvlm.FrozenWakeField(self.wake, self.config.cutoff_delta)


def aero_force_function(ctx: AeroForceContext, tmap: TransferMap, q, s):
    """Generalized aero forces at ``(q, s)`` and the solved lattice.

    The returned lattice carries the per-ring forces as ``lattice.forces``.
    """
    delta = ctx.config.cutoff_delta
    pos, vel = surface_kinematics(tmap, q, s)
    lattice = uvlm.LatticeState(pos)
    v_s = uvlm.panel_points(vel)
    pts = lattice.collocation.reshape(-1, 3)
    v_w = ctx.frozen.total_velocity(lattice.trailing_edge, pts)
    A = uvlm.assemble_influence_matrix(lattice, delta)
    rhs = uvlm.circulation_rhs(lattice, ctx.wake, ctx.flow, v_s, delta, wake_velocity=v_w)
    lattice = lattice.with_gamma(uvlm.solve_circulations(A, rhs))
    forces = uvlm.compute_loads(lattice, ctx.gamma_prev, ctx.flow, ctx.dt, v_s, wake_velocity=v_w)
    lattice.forces = forces
    lattice.wake_velocity = v_w.reshape(lattice.shape + (3,))
    return generalized_aero_forces(tmap, forces), lattice


def aero_jacobian(ctx: AeroForceContext, tmap: TransferMap, q, s, fd_eps: float = 1e-6):
    """Central-difference blocks ``(-df_ae/dq, -df_ae/ds)``."""
    q = np.asarray(q, dtype=float)
    s = np.asarray(s, dtype=float)
    n = q.size
    K_qq = np.empty((n, n))
    K_qs = np.empty((n, n))
    for vec, out, is_q in ((q, K_qq, True), (s, K_qs, False)):
        for i in range(n):
            h = fd_eps * (1.0 + abs(vec[i]))
            vp = vec.copy()
            vm = vec.copy()
            vp[i] += h
            vm[i] -= h
            if is_q:
                fp, _ = aero_force_function(ctx, tmap, vp, s)
                fm, _ = aero_force_function(ctx, tmap, vm, s)
            else:
                fp, _ = aero_force_function(ctx, tmap, q, vp)
                fm, _ = aero_force_function(ctx, tmap, q, vm)
            out[:, i] = -(fp - fm) / (vp[i] - vm[i])
    if not (np.all(np.isfinite(K_qq)) and np.all(np.isfinite(K_qs))):
        raise NonFiniteDerivative("aerodynamic Jacobian has non-finite entries")
    return K_qq, K_qs
