"""Rotation-free ribbon model of a thin plate strip.

Two span-wise chains of point masses (leading edge and trailing edge) are
connected by stretch, chord, diagonal-shear, bending and twist springs.
Generalized coordinates ``q`` are nodal displacements from the flat
reference configuration, stacked node by node as ``(x, y, z)``. Node
``j`` of the leading-edge chain has index ``j``; node ``j`` of the
trailing-edge chain has index ``N + 1 + j``.

The discrete residual is the implicit midpoint rule for a constrained
Hamiltonian system in primal-dual form: unknowns ``y = (q, s, lam)`` at the
new time level.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linalg import DimensionMismatch, assemble_sparse


@dataclass(frozen=True)
class PlateProperties:
    length: float = 10.0
    chord: float = 1.0
    thickness: float = 0.008
    youngs_modulus: float = 7.0e10
    shear_modulus: float = 2.63e10
    density: float = 2.7e3


@dataclass
class GeneralizedState:
    q: np.ndarray
    s: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.s = np.asarray(self.s, dtype=float)
        self.lam = np.asarray(self.lam, dtype=float)
        if self.q.shape != self.s.shape:
            raise DimensionMismatch(f"q {self.q.shape} and s {self.s.shape} differ")

    def pack(self) -> np.ndarray:
        return np.concatenate([self.q, self.s, self.lam])

    @classmethod
    def unpack(cls, y, n_q: int) -> "GeneralizedState":
        y = np.asarray(y, dtype=float)
        return cls(y[:n_q], y[n_q:2 * n_q], y[2 * n_q:])


@dataclass
class ResidualContext:
    q_prev: np.ndarray
    s_prev: np.ndarray
    dt: float
    f_ae: np.ndarray | None = None
    gravity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"time step must be positive, got {self.dt}")


class RibbonModel:
    """Mass-spring ribbon with pinned mid-chord stations at both ends.

    Parameters
    ----------
    props : PlateProperties
        Geometry and material data of the strip.
    n_elements : int
        Number of span-wise elements ``N``; each chain has ``N + 1`` nodes.
    geometric_nonlinearity : bool
        If False the stretch-type springs are linearized about the reference
        direction, making the whole potential quadratic in ``q``.
    torsion_scale : float
        Multiplier on the calibrated twist-spring stiffness.
    """

    def __init__(self, props: PlateProperties = PlateProperties(), n_elements: int = 10,
                 geometric_nonlinearity: bool = True, torsion_scale: float = 1.0,
                 supports: bool = True):
        if n_elements < 2:
            raise ValueError("need at least two span-wise elements")
        self.props = props
        self.n_elements = N = n_elements
        self.geometric_nonlinearity = geometric_nonlinearity
        h = props.length / N
        c, t = props.chord, props.thickness
        E, G = props.youngs_modulus, props.shear_modulus
        self.h = h

        y = np.linspace(0.0, props.length, N + 1)
        le = np.stack([np.zeros(N + 1), y, np.zeros(N + 1)], axis=1)
        te = le + np.array([c, 0.0, 0.0])
        self.reference = np.concatenate([le, te])
        self.n_nodes = 2 * (N + 1)
        self.n_q = 3 * self.n_nodes

        m_line = props.density * c * t / 2.0
        w = np.full(N + 1, h)
        w[[0, -1]] = h / 2.0
        self.nodal_mass = np.concatenate([m_line * w, m_line * w])

        LE = np.arange(N + 1)
        TE = LE + N + 1
        k_stretch = E * (c / 2.0) * t / h
        k_shear = G * t * h
        pairs = [(LE[:-1], LE[1:], k_stretch), (TE[:-1], TE[1:], k_stretch),
                 (LE, TE, k_shear), (LE[:-1], TE[1:], k_shear), (TE[:-1], LE[1:], k_shear)]
        self.spring_a = np.concatenate([p[0] for p in pairs])
        self.spring_b = np.concatenate([p[1] for p in pairs])
        self.spring_k = np.concatenate([np.full(len(p[0]), p[2]) for p in pairs])
        D = self.reference[self.spring_b] - self.reference[self.spring_a]
        self.spring_rest = np.linalg.norm(D, axis=1)
        self.spring_ref_vec = D

        # quadratic terms 0.5 k |P sum_a c_a u_a|^2
        k_bend = E * (c / 2.0) * t ** 3 / 12.0 / h ** 3
        bend_nodes = np.concatenate([np.stack([ch[:-2], ch[1:-1], ch[2:]], axis=1) for ch in (LE, TE)])
        self.bend_nodes = bend_nodes
        self.bend_coef = np.array([1.0, -2.0, 1.0])
        self.bend_k = k_bend

        J_t = c * t ** 3 / 3.0
        self.twist_k = torsion_scale * G * J_t / (c ** 2 * h)
        self.twist_nodes = np.stack([LE[:-1], TE[:-1], LE[1:], TE[1:]], axis=1)
        self.twist_coef = np.array([1.0, -1.0, -1.0, 1.0])
        self.twist_axis = np.array([0.0, 0.0, 1.0])

        self._H = self._constraint_matrix(supports)
        self._M = sp.diags(np.repeat(self.nodal_mass, 3)).tocsr()

    # -- bookkeeping -------------------------------------------------------

    @property
    def n_constraints(self) -> int:
        return self._H.shape[0]

    @property
    def n_y(self) -> int:
        return 2 * self.n_q + self.n_constraints

    def node_index(self, chain: str, j: int) -> int:
        return j if chain == "le" else self.n_elements + 1 + j

    def positions(self, q) -> np.ndarray:
        return self.reference + np.asarray(q).reshape(-1, 3)

    def zero_state(self) -> GeneralizedState:
        return GeneralizedState(np.zeros(self.n_q), np.zeros(self.n_q), np.zeros(self.n_constraints))

    def _check_q(self, q):
        q = np.asarray(q, dtype=float)
        if q.shape != (self.n_q,):
            raise DimensionMismatch(f"expected q of length {self.n_q}, got {q.shape}")
        return q

    def _constraint_matrix(self, supports: bool) -> sp.csr_matrix:
        if not supports:
            return sp.csr_matrix((0, self.n_q))
        N = self.n_elements
        rows, cols, vals = [], [], []
        r = 0
        for j in (0, N):
            le, te = self.node_index("le", j), self.node_index("te", j)
            for d in range(3):
                rows += [r, r]
                cols += [3 * le + d, 3 * te + d]
                vals += [0.5, 0.5]
                r += 1
            if j == 0:
                rows += [r, r]
                cols += [3 * te + 2, 3 * le + 2]
                vals += [1.0, -1.0]
                r += 1
        return assemble_sparse(rows, cols, vals, (r, self.n_q))

    # -- energies and forces ----------------------------------------------

    def _stretch(self, q):
        u = q.reshape(-1, 3)
        e = u[self.spring_b] - u[self.spring_a]
        D = self.spring_ref_vec
        l0 = self.spring_rest
        if self.geometric_nonlinearity:
            d = D + e
            ell = np.linalg.norm(d, axis=1)
            # ell - l0 without cancellation
            ext = (2.0 * np.einsum("ij,ij->i", D, e) + np.einsum("ij,ij->i", e, e)) / (ell + l0)
            dirs = d / ell[:, None]
        else:
            dirs = D / l0[:, None]
            ext = np.einsum("ij,ij->i", dirs, e)
            ell = l0 + ext
        return ext, dirs, ell

    def _quad_terms(self):
        P_twist = np.outer(self.twist_axis, self.twist_axis)
        return [(self.bend_nodes, self.bend_coef, self.bend_k, np.eye(3)),
                (self.twist_nodes, self.twist_coef, self.twist_k, P_twist)]

    def potential_energy(self, q) -> float:
        q = self._check_q(q)
        ext, _, _ = self._stretch(q)
        V = 0.5 * np.sum(self.spring_k * ext ** 2)
        u = q.reshape(-1, 3)
        for nodes, coef, k, P in self._quad_terms():
            w = np.einsum("a,tai->ti", coef, u[nodes]) @ P.T
            V += 0.5 * k * np.sum(w * w)
        return float(V)

    def kinetic_energy(self, s) -> float:
        s = np.asarray(s).reshape(-1, 3)
        return float(0.5 * np.sum(self.nodal_mass[:, None] * s * s))

    def internal_forces(self, q) -> np.ndarray:
        """Gradient of the elastic potential."""
        q = self._check_q(q)
        f = np.zeros((self.n_nodes, 3))
        ext, dirs, _ = self._stretch(q)
        fs = (self.spring_k * ext)[:, None] * dirs
        np.add.at(f, self.spring_b, fs)
        np.add.at(f, self.spring_a, -fs)
        u = q.reshape(-1, 3)
        for nodes, coef, k, P in self._quad_terms():
            w = np.einsum("a,tai->ti", coef, u[nodes]) @ P.T
            g = k * (w @ P)
            for a, ca in enumerate(coef):
                np.add.at(f, nodes[:, a], ca * g)
        return f.ravel()

    def internal_stiffness(self, q) -> sp.csr_matrix:
        """Hessian of the elastic potential (constant sparsity pattern)."""
        q = self._check_q(q)
        rows, cols, vals = [], [], []
        ii = np.arange(3)

        ext, dirs, ell = self._stretch(q)
        dd = np.einsum("si,sj->sij", dirs, dirs)
        if self.geometric_nonlinearity:
            Ke = self.spring_k[:, None, None] * (dd + (ext / ell)[:, None, None] * (np.eye(3) - dd))
        else:
            Ke = self.spring_k[:, None, None] * dd
        for na, nb, sign in ((self.spring_a, self.spring_a, 1.0), (self.spring_b, self.spring_b, 1.0),
                             (self.spring_a, self.spring_b, -1.0), (self.spring_b, self.spring_a, -1.0)):
            r = (3 * na)[:, None, None] + ii[None, :, None]
            c = (3 * nb)[:, None, None] + ii[None, None, :]
            rows.append(np.broadcast_to(r, Ke.shape).ravel())
            cols.append(np.broadcast_to(c, Ke.shape).ravel())
            vals.append((sign * Ke).ravel())

        for nodes, coef, k, P in self._quad_terms():
            PtP = P.T @ P
            for a, ca in enumerate(coef):
                for b, cb in enumerate(coef):
                    blk = np.broadcast_to(k * ca * cb * PtP, (len(nodes), 3, 3))
                    r = (3 * nodes[:, a])[:, None, None] + ii[None, :, None]
                    c = (3 * nodes[:, b])[:, None, None] + ii[None, None, :]
                    rows.append(np.broadcast_to(r, blk.shape).ravel())
                    cols.append(np.broadcast_to(c, blk.shape).ravel())
                    vals.append(blk.ravel())
        return assemble_sparse(np.concatenate(rows), np.concatenate(cols),
                               np.concatenate(vals), (self.n_q, self.n_q))

    def mass_matrix(self) -> sp.csr_matrix:
        return self._M

    def constraints(self, q) -> np.ndarray:
        return self._H @ self._check_q(q)

    def constraint_jacobian(self, q=None) -> sp.csr_matrix:
        return self._H

    def energy(self, state: GeneralizedState) -> float:
        return self.potential_energy(state.q) + self.kinetic_energy(state.s)


def mass_matrix(model: RibbonModel) -> sp.csr_matrix:
    return model.mass_matrix()


def internal_forces(model: RibbonModel, q) -> np.ndarray:
    return model.internal_forces(q)


def internal_stiffness(model: RibbonModel, q) -> sp.csr_matrix:
    return model.internal_stiffness(q)


def constraints(model: RibbonModel, q) -> np.ndarray:
    return model.constraints(q)


def constraint_jacobian(model: RibbonModel, q=None) -> sp.csr_matrix:
    return model.constraint_jacobian(q)


def gravity_forces(model: RibbonModel, gravity) -> np.ndarray:
    return (model.nodal_mass[:, None] * np.asarray(gravity, dtype=float)[None, :]).ravel()


def _check_state(model: RibbonModel, state: GeneralizedState, ctx: ResidualContext):
    n = model.n_q
    if (state.q.shape != (n,) or state.s.shape != (n,)
            or state.lam.shape != (model.n_constraints,)
            or np.shape(ctx.q_prev) != (n,) or np.shape(ctx.s_prev) != (n,)):
        raise DimensionMismatch("state or context does not match the model dimensions")
    if ctx.f_ae is not None and np.shape(ctx.f_ae) != (n,):
        raise DimensionMismatch(f"aero force has shape {np.shape(ctx.f_ae)}, expected ({n},)")


def assemble_residual(model: RibbonModel, state: GeneralizedState, ctx: ResidualContext) -> np.ndarray:
    """Midpoint-rule residual: dynamic equilibrium, momentum equivalence, constraints."""
    _check_state(model, state, ctx)
    M = model.mass_matrix()
    H = model.constraint_jacobian()
    q_mid = 0.5 * (ctx.q_prev + state.q)
    s_mid = 0.5 * (ctx.s_prev + state.s)
    row1 = M @ (state.s - ctx.s_prev) / ctx.dt + model.internal_forces(q_mid) + H.T @ state.lam
    if ctx.f_ae is not None:
        row1 = row1 - ctx.f_ae
    if np.any(ctx.gravity):
        row1 = row1 - gravity_forces(model, ctx.gravity)
    row2 = M @ s_mid - M @ (state.q - ctx.q_prev) / ctx.dt
    row3 = model.constraints(state.q)
    return np.concatenate([row1, row2, row3])


def assemble_structural_jacobian(model: RibbonModel, state: GeneralizedState,
                                 ctx: ResidualContext) -> sp.csr_matrix:
    """Derivative of :func:`assemble_residual` with the aero force frozen."""
    _check_state(model, state, ctx)
    M = model.mass_matrix()
    H = model.constraint_jacobian()
    q_mid = 0.5 * (ctx.q_prev + state.q)
    K = 0.5 * model.internal_stiffness(q_mid)
    Z = sp.csr_matrix((model.n_constraints, model.n_constraints))
    J = sp.bmat([[K, M / ctx.dt, H.T],
                 [-M / ctx.dt, 0.5 * M, None],
                 [H, None, Z]], format="csr")
    J.sort_indices()
    return J
