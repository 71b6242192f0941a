"""Measured quantities: moments, Maxwellian targets, error norms, entropy.

Moment orders follow the kinetic convention m_k(f) = int |f| |v|^{lam k} dv,
so the "order" is coupled to the potential exponent lam; at lam = 0 all m_k
collapse to m_0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .grid import State, VelocityGrid, sobolev_norm


@dataclass
class MomentSet:
    mass: float
    momentum: np.ndarray
    energy: float
    generalized: dict[int, float] = field(default_factory=dict)
    t: float = 0.0

    @property
    def mean_velocity(self) -> np.ndarray:
        return self.momentum / self.mass

    @property
    def temperature(self) -> float:
        """T = (1/(d m)) int f |v - u|^2 dv."""
        d = len(self.momentum)
        return (self.energy - self.momentum @ self.momentum / self.mass) / (d * self.mass)


def maxwellian(grid: VelocityGrid, m0: float, u0, T0: float) -> State:
    """Equilibrium Maxwellian M[m0, u0, T0] sampled on the grid."""
    if m0 <= 0:
        raise ValueError("mass must be positive")
    if T0 <= 0:
        raise ValueError("temperature must be positive")
    u0 = np.atleast_1d(np.asarray(u0, dtype=float))
    if u0.size == 1:
        u0 = np.full(grid.d, u0.item())
    sq = sum((x - u0[i]) ** 2 for i, x in enumerate(grid.node_mesh))
    vals = m0 * (2.0 * np.pi * T0) ** (-grid.d / 2) * np.exp(-sq / (2.0 * T0))
    return State(grid, vals)


def moments(s: State, k_list=(), lam: float = 1.0) -> MomentSet:
    """Midpoint-rule moments; generalized m_k uses |f| and exponent lam*k."""
    g = s.grid
    w = g.cell_weight
    vals = s.values
    mass = float(np.sum(vals) * w)
    mom = np.array([float(np.sum(vals * mesh) * w) for mesh in g.node_mesh])
    energy = float(np.sum(vals * g.speed_sq) * w)
    gen = {}
    if k_list:
        speed = np.sqrt(g.speed_sq)
        absf = np.abs(vals)
        for k in k_list:
            gen[k] = float(np.sum(absf * speed ** (lam * k)) * w)
    return MomentSet(mass=mass, momentum=mom, energy=energy, generalized=gen, t=s.t)


def generalized_moment(s: State, k: float, lam: float) -> float:
    speed = np.sqrt(s.grid.speed_sq)
    return float(np.sum(np.abs(s.values) * speed ** (lam * k)) * s.grid.cell_weight)


def z_moment(s: State, k: int, lam: float) -> float:
    """Z_k(f) = sum_{j<k} C(k,j) m_{j+1} m_{k-j}."""
    ms = {j: generalized_moment(s, j, lam) for j in range(k + 2)}
    return sum(comb(k, j) * ms[j + 1] * ms[k - j] for j in range(k))


def negative_part_norm(s: State) -> float:
    """L2 norm of the negative part g^- = min(g, 0)."""
    return s.grid.l2_norm(np.minimum(s.values, 0.0))


def entropy(s: State) -> float:
    """int g+ log g+ dv over the support of the positive part.

    The scheme admits small negative values, so the H-functional is evaluated
    on the positive part only; its monotonicity is a soft diagnostic.
    """
    pos = s.values[s.values > 0]
    return float(np.sum(pos * np.log(pos)) * s.grid.cell_weight)


def error_norms(s: State, ref: State, k: float = 0.0, alpha=0) -> tuple[float, float]:
    """(L2_k, H^alpha_k) distances between two states on the same grid."""
    if s.grid != ref.grid:
        raise ValueError("states live on different grids")
    diff = State(s.grid, s.values - ref.values, s.t)
    l2k = sobolev_norm(diff, 0, k)
    halpha = sobolev_norm(diff, alpha, k)
    return l2k, halpha


@dataclass
class TailBoundReport:
    lhs: float
    rhs: float
    inner_L: float
    k: int

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else np.inf


def tail_moment_bound_check(s: State, qu_field: np.ndarray, k: int, lam: float, inner_L: float) -> TailBoundReport:
    """Collision-tail estimate: |int_{outside Omega_L'} Q_u| vs the moment bound.

    The right side is 2 ||b||_1 L'^{-lam k} (m_{k+1} m_0 + Z_k) with the
    Grad-normalized ||b||_1 = 1.
    """
    g = s.grid
    outside = np.max(np.abs(np.stack(g.node_mesh)), axis=0) > inner_L
    lhs = abs(float(np.sum(qu_field[outside]) * g.cell_weight))
    m0 = generalized_moment(s, 0, lam)
    mk1 = generalized_moment(s, k + 1, lam)
    zk = z_moment(s, k, lam)
    rhs = 2.0 * inner_L ** (-lam * k) * (mk1 * m0 + zk)
    return TailBoundReport(lhs=lhs, rhs=rhs, inner_L=inner_L, k=k)
