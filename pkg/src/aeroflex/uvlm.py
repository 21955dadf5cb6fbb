"""Unsteady vortex-lattice aerodynamics.

Conventions
-----------
Lattice grids are indexed ``[i, j]`` with ``i`` running span-wise and ``j``
chord-wise (leading edge at ``j = 0``). Vortex rings follow the
Katz-Plotkin layout: ring corners sit a quarter panel chord behind the
panel corners, collocation points sit on the three-quarter chord line at
mid-span of each panel. Ring ``(i, j)`` is traversed
``[i, j] -> [i+1, j] -> [i+1, j+1] -> [i, j+1]``, so a positive circulation
on a wing whose normal points up produces lift along the normal.

The wake is a list of shed rows. Its most upstream edge is always attached
to the current trailing edge of the bound ring lattice; only the free
(shed) nodes are stored and convected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import linalg

FOUR_PI = 4.0 * math.pi


class UvlmError(Exception):
    pass


class DegenerateSegment(UvlmError):
    pass


class ZeroDynamicPressure(UvlmError):
    pass


# ---------------------------------------------------------------------------
# Biot-Savart kernels


@njit(cache=True)
def _bs_single(px, py, pz, ax, ay, az, bx, by, bz, gamma, delta):
    r0x = bx - ax
    r0y = by - ay
    r0z = bz - az
    r1x = px - ax
    r1y = py - ay
    r1z = pz - az
    r2x = px - bx
    r2y = py - by
    r2z = pz - bz
    cx = r1y * r2z - r1z * r2y
    cy = r1z * r2x - r1x * r2z
    cz = r1x * r2y - r1y * r2x
    c2 = cx * cx + cy * cy + cz * cz
    l0 = r0x * r0x + r0y * r0y + r0z * r0z
    # d^2 = c2 / l0; zero inside the cut-off (and exactly on the segment line)
    if c2 <= delta * delta * l0 or c2 == 0.0:
        return 0.0, 0.0, 0.0
    n1 = math.sqrt(r1x * r1x + r1y * r1y + r1z * r1z)
    n2 = math.sqrt(r2x * r2x + r2y * r2y + r2z * r2z)
    proj = (r0x * r1x + r0y * r1y + r0z * r1z) / n1 - (r0x * r2x + r0y * r2y + r0z * r2z) / n2
    k = gamma * proj / (FOUR_PI * c2)
    return k * cx, k * cy, k * cz


@njit(cache=True)
def _bs_sum(points, a, b, gamma, delta, out):
    for p in range(points.shape[0]):
        vx = 0.0
        vy = 0.0
        vz = 0.0
        px = points[p, 0]
        py = points[p, 1]
        pz = points[p, 2]
        for s in range(a.shape[0]):
            g = gamma[s]
            if g == 0.0:
                continue
            ux, uy, uz = _bs_single(px, py, pz, a[s, 0], a[s, 1], a[s, 2],
                                    b[s, 0], b[s, 1], b[s, 2], g, delta)
            vx += ux
            vy += uy
            vz += uz
        out[p, 0] = vx
        out[p, 1] = vy
        out[p, 2] = vz


@njit(cache=True)
def _bs_pairwise(points, a, b, delta, out):
    for p in range(points.shape[0]):
        px = points[p, 0]
        py = points[p, 1]
        pz = points[p, 2]
        for s in range(a.shape[0]):
            ux, uy, uz = _bs_single(px, py, pz, a[s, 0], a[s, 1], a[s, 2],
                                    b[s, 0], b[s, 1], b[s, 2], 1.0, delta)
            out[p, s, 0] = ux
            out[p, s, 1] = uy
            out[p, s, 2] = uz


def _as_points(x) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(x, dtype=float).reshape(-1, 3))


def segment_induced_velocity(a, b, p, gamma: float, delta: float = 0.0) -> np.ndarray:
    """Velocity induced at ``p`` by the straight vortex segment ``a -> b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.linalg.norm(b - a) < 1e-14:
        raise DegenerateSegment(f"segment length {np.linalg.norm(b - a):.3e} below 1e-14")
    return np.array(_bs_single(p[0], p[1], p[2], a[0], a[1], a[2],
                               b[0], b[1], b[2], float(gamma), float(delta)))


def ring_induced_velocity(corners, gamma: float, p, delta: float = 0.0) -> np.ndarray:
    """Velocity induced at ``p`` by a closed four-segment vortex ring."""
    corners = np.asarray(corners, dtype=float)
    v = np.zeros(3)
    for k in range(4):
        v += segment_induced_velocity(corners[k], corners[(k + 1) % 4], p, gamma, delta)
    return v


def induced_velocity(points, seg_a, seg_b, seg_gamma, delta: float) -> np.ndarray:
    """Summed velocity of many segments at many points, shape ``(P, 3)``."""
    pts = _as_points(points)
    a = _as_points(seg_a)
    b = _as_points(seg_b)
    g = np.ascontiguousarray(np.asarray(seg_gamma, dtype=float).ravel())
    out = np.zeros_like(pts)
    if len(pts) and len(a):
        _bs_sum(pts, a, b, g, float(delta), out)
    return out


def unit_segment_velocities(points, seg_a, seg_b, delta: float) -> np.ndarray:
    """Per-segment unit-circulation velocities, shape ``(P, S, 3)``."""
    pts = _as_points(points)
    a = _as_points(seg_a)
    b = _as_points(seg_b)
    out = np.zeros((len(pts), len(a), 3))
    _bs_pairwise(pts, a, b, float(delta), out)
    return out


# ---------------------------------------------------------------------------
# Grid helpers


def grid_segments(nodes: np.ndarray):
    """Unique segments of a ring grid with nodes ``(I+1, J+1, 3)``.

    Returns ``(span_a, span_b, chord_a, chord_b)`` with span segments of
    shape ``(I, J+1, 3)`` and chord segments of shape ``(I+1, J, 3)``.
    """
    return nodes[:-1, :], nodes[1:, :], nodes[:, :-1], nodes[:, 1:]


def grid_segment_gamma(gamma: np.ndarray):
    """Net circulation on each unique grid segment for ring strengths ``(I, J)``."""
    I, J = gamma.shape
    span = np.zeros((I, J + 1))
    span[:, :J] += gamma
    span[:, 1:] -= gamma
    chord = np.zeros((I + 1, J))
    chord[1:, :] += gamma
    chord[:-1, :] -= gamma
    return span, chord


def panel_points(grid: np.ndarray, chord_frac: float = 0.75, span_frac: float = 0.5) -> np.ndarray:
    """Bilinear interpolation of per-node data at a fixed panel location."""
    front = (1.0 - chord_frac) * grid[:, :-1] + chord_frac * grid[:, 1:]
    return (1.0 - span_frac) * front[:-1] + span_frac * front[1:]


# ---------------------------------------------------------------------------
# State containers


@dataclass(frozen=True)
class FlowConditions:
    v_inf: np.ndarray
    rho: float

    def __post_init__(self):
        object.__setattr__(self, "v_inf", np.asarray(self.v_inf, dtype=float).reshape(3))
        if not self.rho > 0:
            raise ValueError(f"fluid density must be positive, got {self.rho}")

    @classmethod
    def from_speed(cls, speed: float, alpha: float, rho: float) -> "FlowConditions":
        """Free stream in the x-z plane at angle of attack ``alpha`` [rad]."""
        return cls(speed * np.array([math.cos(alpha), 0.0, math.sin(alpha)]), rho)

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.v_inf))


@dataclass(frozen=True)
class UvlmConfig:
    cutoff_delta: float = 0.0
    m_a: int = 1
    n_a: int = 1

    def __post_init__(self):
        if self.cutoff_delta < 0 or self.m_a < 1 or self.n_a < 1:
            raise ValueError(f"invalid UVLM configuration {self}")


class LatticeState:
    """Bound vortex-ring lattice built from the surface (panel corner) grid."""

    def __init__(self, nodes, gamma=None):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 3 or nodes.shape[2] != 3 or min(nodes.shape[:2]) < 2:
            raise UvlmError(f"surface grid must have shape (m+1, n+1, 3), got {nodes.shape}")
        self.nodes = nodes
        I, J = nodes.shape[0] - 1, nodes.shape[1] - 1
        self.shape = (I, J)
        self.gamma = np.zeros((I, J)) if gamma is None else np.asarray(gamma, dtype=float).reshape(I, J)

        rings = np.empty_like(nodes)
        rings[:, :-1] = nodes[:, :-1] + 0.25 * (nodes[:, 1:] - nodes[:, :-1])
        rings[:, -1] = nodes[:, -1] + 0.25 * (nodes[:, -1] - nodes[:, -2])
        self.ring_nodes = rings

        self.collocation = panel_points(nodes)
        d1 = nodes[1:, 1:] - nodes[:-1, :-1]
        d2 = nodes[1:, :-1] - nodes[:-1, 1:]
        cr = np.cross(d1, d2)
        norm = np.linalg.norm(cr, axis=-1)
        self.areas = 0.5 * norm
        with np.errstate(invalid="ignore", divide="ignore"):
            self.normals = cr / norm[..., None]

        le_mid = 0.5 * (nodes[:-1, :-1] + nodes[1:, :-1])
        te_mid = 0.5 * (nodes[:-1, 1:] + nodes[1:, 1:])
        left_mid = 0.5 * (nodes[:-1, :-1] + nodes[:-1, 1:])
        right_mid = 0.5 * (nodes[1:, :-1] + nodes[1:, 1:])
        chord_vec = te_mid - le_mid
        span_vec = right_mid - left_mid
        self.chord_length = np.linalg.norm(chord_vec, axis=-1)
        self.span_length = np.linalg.norm(span_vec, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            self.tangent_chord = chord_vec / self.chord_length[..., None]
            self.tangent_span = span_vec / self.span_length[..., None]

    @property
    def n_rings(self) -> int:
        return self.shape[0] * self.shape[1]

    @property
    def trailing_edge(self) -> np.ndarray:
        """Ring-lattice trailing-edge nodes, where the wake attaches."""
        return self.ring_nodes[:, -1]

    def ring_corners(self, i: int, j: int) -> np.ndarray:
        r = self.ring_nodes
        return np.array([r[i, j], r[i + 1, j], r[i + 1, j + 1], r[i, j + 1]])

    def with_gamma(self, gamma) -> "LatticeState":
        out = object.__new__(LatticeState)
        out.__dict__.update(self.__dict__)
        out.gamma = np.asarray(gamma, dtype=float).reshape(self.shape)
        return out

    def segments(self):
        """Flattened unique segments ``(a, b, gamma)`` of the bound rings."""
        sa, sb, ca, cb = grid_segments(self.ring_nodes)
        sg, cg = grid_segment_gamma(self.gamma)
        a = np.concatenate([sa.reshape(-1, 3), ca.reshape(-1, 3)])
        b = np.concatenate([sb.reshape(-1, 3), cb.reshape(-1, 3)])
        return a, b, np.concatenate([sg.ravel(), cg.ravel()])

    def induced_velocity(self, points, delta: float) -> np.ndarray:
        a, b, g = self.segments()
        return induced_velocity(points, a, b, g, delta)


@dataclass(frozen=True)
class WakeState:
    """Shed wake rows, newest first. ``nodes`` has shape ``(R, m+1, 3)``."""

    nodes: np.ndarray = field(default_factory=lambda: np.zeros((0, 0, 3)))
    gamma: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    @property
    def n_rows(self) -> int:
        return int(self.gamma.shape[0])

    def grid(self, trailing_edge: np.ndarray) -> np.ndarray:
        """Full wake node grid ``(m+1, R+1, 3)`` with the attached edge first."""
        return np.concatenate([trailing_edge[None], self.nodes], axis=0).transpose(1, 0, 2)

    def segments(self, trailing_edge: np.ndarray, attached: bool | None = None):
        """Unique wake segments ``(a, b, gamma)``.

        ``attached=True`` keeps only segments touching the trailing edge,
        ``attached=False`` only the free ones, ``None`` all of them.
        """
        if self.n_rows == 0:
            empty = np.zeros((0, 3))
            return empty, empty, np.zeros(0)
        grid = self.grid(np.asarray(trailing_edge, dtype=float))
        sa, sb, ca, cb = grid_segments(grid)
        sg, cg = grid_segment_gamma(self.gamma.T)
        if attached is None:
            parts = [(sa, sb, sg), (ca, cb, cg)]
        elif attached:
            parts = [(sa[:, :1], sb[:, :1], sg[:, :1]), (ca[:, :1], cb[:, :1], cg[:, :1])]
        else:
            parts = [(sa[:, 1:], sb[:, 1:], sg[:, 1:]), (ca[:, 1:], cb[:, 1:], cg[:, 1:])]
        a = np.concatenate([p[0].reshape(-1, 3) for p in parts])
        b = np.concatenate([p[1].reshape(-1, 3) for p in parts])
        g = np.concatenate([p[2].ravel() for p in parts])
        return a, b, g

    def induced_velocity(self, trailing_edge, points, delta: float) -> np.ndarray:
        a, b, g = self.segments(trailing_edge)
        return induced_velocity(points, a, b, g, delta)


class FrozenWakeField:
    """Velocity of the free part of a frozen wake, memoized per target point.

    Only the segments touching the trailing edge depend on the lattice
    geometry; everything downstream is fixed during a nonlinear solve.
    """

    def __init__(self, wake: WakeState, delta: float):
        self.wake = wake
        self.delta = delta
        dummy_te = np.zeros((wake.nodes.shape[1], 3)) if wake.n_rows else None
        self._a, self._b, self._g = wake.segments(dummy_te, attached=False)
        self._cache: dict[bytes, np.ndarray] = {}

    def velocity(self, points) -> np.ndarray:
        pts = _as_points(points)
        out = np.empty_like(pts)
        if self.wake.n_rows == 0:
            out[:] = 0.0
            return out
        keys = [p.tobytes() for p in pts]
        missing = [k for k, key in enumerate(keys) if key not in self._cache]
        if missing:
            vals = induced_velocity(pts[missing], self._a, self._b, self._g, self.delta)
            for k, v in zip(missing, vals):
                self._cache[keys[k]] = v
        for k, key in enumerate(keys):
            out[k] = self._cache[key]
        return out

    def total_velocity(self, trailing_edge, points) -> np.ndarray:
        """Free part (cached) plus the attached part for ``trailing_edge``."""
        v = self.velocity(points)
        if self.wake.n_rows:
            a, b, g = self.wake.segments(trailing_edge, attached=True)
            v += induced_velocity(points, a, b, g, self.delta)
        return v


# ---------------------------------------------------------------------------
# Operations


def assemble_influence_matrix(lattice: LatticeState, delta: float) -> np.ndarray:
    """Normal velocity at each collocation point per unit ring circulation."""
    I, J = lattice.shape
    sa, sb, ca, cb = grid_segments(lattice.ring_nodes)
    pts = lattice.collocation.reshape(-1, 3)
    us = unit_segment_velocities(pts, sa, sb, delta).reshape(-1, I, J + 1, 3)
    uc = unit_segment_velocities(pts, ca, cb, delta).reshape(-1, I + 1, J, 3)
    ring_v = us[:, :, :-1] - us[:, :, 1:] + uc[:, 1:, :] - uc[:, :-1, :]
    normals = lattice.normals.reshape(-1, 3)
    return np.einsum("pijk,pk->pij", ring_v, normals).reshape(len(pts), I * J)


def circulation_rhs(lattice: LatticeState, wake: WakeState, flow: FlowConditions,
                    surface_velocity, delta: float = 0.0, wake_velocity=None) -> np.ndarray:
    """Right-hand side of the non-penetration system.

    ``surface_velocity`` holds one vector per collocation point. A
    precomputed ``wake_velocity`` at the collocation points may be passed.
    """
    I, J = lattice.shape
    v_s = np.asarray(surface_velocity, dtype=float)
    if v_s.size != 3 * I * J:
        raise linalg.DimensionMismatch(
            f"expected {I * J} surface velocities, got shape {v_s.shape}")
    v_s = v_s.reshape(I * J, 3)
    pts = lattice.collocation.reshape(-1, 3)
    if wake_velocity is None:
        wake_velocity = wake.induced_velocity(lattice.trailing_edge, pts, delta)
    rel = flow.v_inf + np.asarray(wake_velocity).reshape(-1, 3) - v_s
    return -np.einsum("pk,pk->p", rel, lattice.normals.reshape(-1, 3))


def solve_circulations(A, rhs) -> np.ndarray:
    rhs = np.asarray(rhs, dtype=float)
    return linalg.solve(linalg.factorize(A), rhs)


def shed_wake(lattice: LatticeState, wake: WakeState) -> WakeState:
    """Append a row carrying the current trailing-edge circulation."""
    te = lattice.trailing_edge.copy()
    g_te = lattice.gamma[:, -1].copy()
    if wake.n_rows == 0:
        return WakeState(te[None], g_te[None])
    return WakeState(np.concatenate([te[None], wake.nodes]),
                     np.concatenate([g_te[None], wake.gamma]))


def convect_wake(lattice: LatticeState, wake: WakeState, flow: FlowConditions,
                 dt: float, delta: float = 0.0) -> WakeState:
    """Forward-Euler free-wake convection with the full induced field."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if wake.n_rows == 0:
        return wake
    pts = wake.nodes.reshape(-1, 3)
    v = flow.v_inf + lattice.induced_velocity(pts, delta)
    v += wake.induced_velocity(lattice.trailing_edge, pts, delta)
    return WakeState((pts + dt * v).reshape(wake.nodes.shape), wake.gamma)


def compute_loads(lattice: LatticeState, gamma_prev, flow: FlowConditions, dt: float,
                  surface_velocity, wake_velocity=None) -> np.ndarray:
    """Per-ring force vectors from the discrete unsteady Bernoulli equation.

    Relative velocities are taken at the collocation points. Returns an
    array of shape ``(m, n, 3)``.
    """
    I, J = lattice.shape
    gamma_prev = np.asarray(gamma_prev, dtype=float)
    v_s = np.asarray(surface_velocity, dtype=float)
    if gamma_prev.size != I * J or v_s.size != 3 * I * J:
        raise linalg.DimensionMismatch("gamma_prev / surface_velocity do not match the lattice")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    gamma_prev = gamma_prev.reshape(I, J)
    v_w = np.zeros((I, J, 3)) if wake_velocity is None else np.asarray(wake_velocity).reshape(I, J, 3)
    rel = flow.v_inf + v_w - v_s.reshape(I, J, 3)

    g = lattice.gamma
    dg_chord = g.copy()
    dg_chord[:, 1:] -= g[:, :-1]
    dg_span = g.copy()
    dg_span[1:, :] -= g[:-1, :]
    dp = flow.rho * (
        np.einsum("ijk,ijk->ij", rel, lattice.tangent_chord) * dg_chord / lattice.chord_length
        + np.einsum("ijk,ijk->ij", rel, lattice.tangent_span) * dg_span / lattice.span_length
        + (g - gamma_prev) / dt)
    return (dp * lattice.areas)[..., None] * lattice.normals


def lift_coefficient(total_force, flow: FlowConditions, ref_area: float, lift_direction) -> float:
    q = 0.5 * flow.rho * flow.speed ** 2
    if not q > 0 or not ref_area > 0:
        raise ZeroDynamicPressure(f"dynamic pressure {q} or reference area {ref_area} not positive")
    return float(np.dot(total_force, lift_direction) / (q * ref_area))


def lift_direction(flow: FlowConditions, span_axis=(0.0, 1.0, 0.0)) -> np.ndarray:
    """Unit vector perpendicular to the free stream and the span axis."""
    d = np.cross(flow.v_inf, np.asarray(span_axis, dtype=float))
    n = np.linalg.norm(d)
    if n == 0:
        return np.array([0.0, 0.0, 1.0])
    return d / n


def plate_grid(span: float, chord: float, m: int, n: int) -> np.ndarray:
    """Flat rectangular surface grid in the x-y plane, x chord-wise, y span-wise."""
    y = np.linspace(0.0, span, m + 1)
    x = np.linspace(0.0, chord, n + 1)
    g = np.zeros((m + 1, n + 1, 3))
    g[..., 0] = x[None, :]
    g[..., 1] = y[:, None]
    return g


def normal_relative_velocity(lattice: LatticeState, flow: FlowConditions, wake: WakeState,
                             surface_velocity=None, delta: float = 0.0) -> np.ndarray:
    """Normal component of the relative flow at each collocation point after a solve."""
    pts = lattice.collocation.reshape(-1, 3)
    v = flow.v_inf + lattice.induced_velocity(pts, delta) + wake.induced_velocity(lattice.trailing_edge, pts, delta)
    if surface_velocity is not None:
        v = v - np.asarray(surface_velocity, dtype=float).reshape(-1, 3)
    return np.einsum("pk,pk->p", v, lattice.normals.reshape(-1, 3))


def rigid_time_march(grid, flow: FlowConditions, dt: float, n_steps: int, delta: float = 0.0):
    """Impulsively started rigid lattice; yields ``(step, lattice, forces, wake_before)`` per step.

    ``wake_before`` is the wake the step's circulations were solved against.
    """
    lattice = LatticeState(grid)
    A = assemble_influence_matrix(lattice, delta)
    fac = linalg.factorize(A)
    wake = WakeState()
    gamma_prev = np.zeros(lattice.n_rings)
    v_s = np.zeros(lattice.shape + (3,))
    pts = lattice.collocation.reshape(-1, 3)
    for step in range(1, n_steps + 1):
        v_w = wake.induced_velocity(lattice.trailing_edge, pts, delta)
        rhs = circulation_rhs(lattice, wake, flow, v_s, delta, wake_velocity=v_w)
        lattice = lattice.with_gamma(linalg.solve(fac, rhs))
        forces = compute_loads(lattice, gamma_prev, flow, dt, v_s, wake_velocity=v_w)
        yield step, lattice, forces, wake
        gamma_prev = lattice.gamma.ravel().copy()
        wake = convect_wake(lattice, shed_wake(lattice, wake), flow, dt, delta)
