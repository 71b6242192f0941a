"""Velocity-space grid, Fourier series machinery and domain-size selection.

The computational domain is the cube ``(-L, L)^d`` with a uniform
cell-centered grid of ``n`` points per axis.  Spectral modes are
``zeta_k = pi*k/L`` for ``k = -n/2, ..., n/2-1``, which makes the discrete
transform an exact (invertible) map between nodal values and coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import product

import numpy as np
from scipy.special import erf

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class VelocityGrid:
    """Uniform cell-centered velocity grid on ``(-L, L)^d`` with matched modes."""

    d: int
    L: float
    n: int

    def __post_init__(self) -> None:
        if self.d not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.d}")
        if self.L <= 0:
            raise ValueError(f"half-width L must be positive, got {self.L}")
        if self.n < 8 or self.n % 2 != 0:
            raise ValueError(f"points per axis must be even and >= 8, got {self.n}")

    @property
    def dv(self) -> float:
        return 2.0 * self.L / self.n

    @cached_property
    def nodes(self) -> np.ndarray:
        """Axis coordinates v_i = -L + (i + 1/2) dv."""
        return -self.L + (np.arange(self.n) + 0.5) * self.dv

    @cached_property
    def mode_numbers(self) -> np.ndarray:
        """Integer wavenumbers k = -n/2 .. n/2-1 per axis."""
        return np.arange(-self.n // 2, self.n // 2)

    @cached_property
    def modes(self) -> np.ndarray:
        """Spectral wavenumbers zeta_k = pi*k/L per axis."""
        return np.pi * self.mode_numbers / self.L

    @property
    def dzeta(self) -> float:
        """Mode spacing pi/L."""
        return np.pi / self.L

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def cell_weight(self) -> float:
        """Uniform midpoint quadrature weight dv^d."""
        return self.dv**self.d

    @cached_property
    def node_mesh(self) -> tuple[np.ndarray, ...]:
        return np.meshgrid(*([self.nodes] * self.d), indexing="ij")

    @cached_property
    def mode_mesh(self) -> tuple[np.ndarray, ...]:
        return np.meshgrid(*([self.modes] * self.d), indexing="ij")

    @cached_property
    def speed_sq(self) -> np.ndarray:
        """|v|^2 at every node."""
        return sum(x**2 for x in self.node_mesh)

    @cached_property
    def mode_vectors(self) -> np.ndarray:
        """Integer mode vectors, shape (n^d, d), row-major over the mode box."""
        grids = np.meshgrid(*([self.mode_numbers] * self.d), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1).astype(np.int32)

    @cached_property
    def _fft_phase(self) -> np.ndarray:
        # Per-axis phase from cell-centered nodes: e^{-i zeta_k v_j} =
        # e^{i pi k (1 - 1/n)} e^{-2 pi i k j / n}.
        k = self.mode_numbers
        p = np.exp(1j * np.pi * k * (1.0 - 1.0 / self.n))
        full = p
        for _ in range(self.d - 1):
            full = np.multiply.outer(full, p)
        return full

    def integrate(self, values: np.ndarray) -> float:
        """Midpoint-rule integral over the domain."""
        return float(np.sum(values) * self.cell_weight)

    def l2_norm(self, values: np.ndarray) -> float:
        """Discrete L2(Omega_L) norm."""
        return float(np.sqrt(np.sum(np.abs(values) ** 2) * self.cell_weight))

    def forward(self, values: np.ndarray) -> np.ndarray:
        """Discrete Fourier transform with the 1/(2 pi)^{d/2} normalization."""
        F = np.fft.fftshift(np.fft.fftn(values))
        scale = self.cell_weight / TWO_PI ** (self.d / 2)
        return scale * self._fft_phase * F

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`forward`; returns complex nodal values."""
        A = np.fft.ifftshift(coeffs * np.conj(self._fft_phase))
        scale = TWO_PI ** (self.d / 2) / (2.0 * self.L) ** self.d * self.size
        return scale * np.fft.ifftn(A)


class State:
    """Distribution g on a velocity grid at time t, with cached coefficients."""

    def __init__(self, grid: VelocityGrid, values: np.ndarray, t: float = 0.0):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ValueError(f"values shape {values.shape} != grid shape {grid.shape}")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise ValueError(f"non-finite value at node index {tuple(int(i) for i in bad)}")
        self.grid = grid
        self.values = values
        self.values.flags.writeable = False
        self.t = float(t)
        self._coeffs: np.ndarray | None = None

    @classmethod
    def from_coeffs(cls, grid: VelocityGrid, coeffs: np.ndarray, t: float = 0.0) -> "State":
        values = grid.inverse(coeffs)
        s = cls(grid, values.real, t)
        s._coeffs = np.asarray(coeffs, dtype=complex)
        return s

    @property
    def coeffs(self) -> np.ndarray:
        if self._coeffs is None:
            self._coeffs = self.grid.forward(self.values)
        return self._coeffs

    def with_values(self, values: np.ndarray, t: float | None = None) -> "State":
        return State(self.grid, values, self.t if t is None else t)

    def l2_norm(self) -> float:
        return self.grid.l2_norm(self.values)


def forward_transform(s: State) -> np.ndarray:
    """Fourier coefficients of the state (dv^d-weighted discrete sum)."""
    return s.coeffs


def project(s: State, n_keep: int) -> State:
    """Truncate to modes with sup-norm |k| <= n_keep (projection Pi^N)."""
    if not 0 <= n_keep <= s.grid.n // 2:
        raise ValueError(f"mode cutoff {n_keep} out of range [0, {s.grid.n // 2}]")
    k = s.grid.mode_numbers
    keep1 = np.abs(k) <= n_keep
    mask = keep1
    for _ in range(s.grid.d - 1):
        mask = np.multiply.outer(mask, keep1)
    return State.from_coeffs(s.grid, s.coeffs * mask, s.t)


def _derivative_field(s: State, beta: tuple[int, ...]) -> np.ndarray:
    zmesh = s.grid.mode_mesh
    mult = np.ones(s.grid.shape, dtype=complex)
    for ax, b in enumerate(beta):
        if b:
            mult = mult * (1j * zmesh[ax]) ** b
    return s.grid.inverse(s.coeffs * mult).real


def sobolev_norm(s: State, alpha, k: float = 0.0) -> float:
    """Discrete H^alpha_k(Omega_L) norm.

    ``alpha`` may be a multi-index (sum over componentwise beta <= alpha) or an
    int (sum over all multi-indices of total order <= alpha).  Derivatives are
    applied spectrally, the weight <v>^k in physical space.
    """
    g = s.grid
    if isinstance(alpha, (int, np.integer)):
        betas = [b for b in product(*(range(alpha + 1) for _ in range(g.d))) if sum(b) <= alpha]
    else:
        alpha = tuple(int(a) for a in alpha)
        betas = list(product(*(range(a + 1) for a in alpha)))
    weight = (1.0 + g.speed_sq) ** (k / 2.0)
    total = 0.0
    for beta in betas:
        df = _derivative_field(s, beta) if any(beta) else s.values
        total += np.sum((df * weight) ** 2) * g.cell_weight
    return float(np.sqrt(total))


@dataclass
class DomainChoice:
    """Result of :func:`choose_domain`."""

    L: float
    supp_limited: bool = False
    tail_fraction: float = field(default=np.nan)


def _gaussian_box_mass_energy(L: float, u0: np.ndarray, T0: float, d: int) -> tuple[float, float]:
    """(mass, second moment of |v|) of the unit Gaussian N(u0, T0 I) inside (-L,L)^d."""
    sd = np.sqrt(T0)
    an = (-L - u0) / sd
    bn = (L - u0) / sd
    m1 = 0.5 * (erf(bn / np.sqrt(2.0)) - erf(an / np.sqrt(2.0)))  # per-axis mass
    pdf_an = np.exp(-0.5 * an**2) / np.sqrt(2 * np.pi)
    pdf_bn = np.exp(-0.5 * bn**2) / np.sqrt(2 * np.pi)
    # E[x^2 1_{(-L,L)}] for x ~ N(u, T), standard truncated-normal identities
    ex2 = (u0**2 + T0) * m1 + T0 * (an * pdf_an - bn * pdf_bn) + 2 * u0 * sd * (pdf_an - pdf_bn)
    mass = float(np.prod(m1))
    # |v|^2 moment over the box: sum over axes of (axis second moment) * prod(other masses)
    e2 = 0.0
    for i in range(d):
        others = np.prod(np.delete(m1, i))
        e2 += ex2[i] * others
    return mass, float(e2)


def choose_domain(
    m0: float,
    u0,
    T0: float,
    C: float = 1.0,
    mu: float = 1e-4,
    supp_radius: float = 0.0,
    d: int = 3,
) -> DomainChoice:
    """Smallest L with supp(f0) in Omega_L and Gaussian-control tail below mu.

    The controlling Maxwellian is ``C * m0 * (2 pi T0)^{-d/2} exp(-|v-u0|^2 / (2 T0))``
    (stretching constant r fixed to 1); the requirement is
    ``int_{Omega_L^c} M <v>^2 dv <= mu (m0 + T0)``.
    """
    if m0 <= 0:
        raise ValueError("mass must be positive")
    if T0 <= 0:
        raise ValueError("temperature must be positive")
    if not 0 < mu < 1:
        raise ValueError("tail tolerance mu must be in (0, 1)")
    if C < 1:
        raise ValueError("dilating constant C must be >= 1")
    u0 = np.atleast_1d(np.asarray(u0, dtype=float))
    if u0.size == 1:
        u0 = np.full(d, u0.item())

    total_mass = C * m0
    total_e2 = C * m0 * (d * T0 + float(u0 @ u0))
    budget = mu * (m0 + T0)

    def tail(L: float) -> float:
        mass_in, e2_in = _gaussian_box_mass_energy(L, u0, T0, d)
        inside = C * m0 * (mass_in + e2_in)
        return (total_mass + total_e2) - inside

    lo = max(np.max(np.abs(u0)) + 1e-12, 1e-12)
    hi = max(lo, np.sqrt(T0)) * 2.0
    for _ in range(200):
        if tail(hi) <= budget:
            break
        hi *= 1.5
    else:
        raise RuntimeError("could not bracket the domain half-width")
    if tail(lo) <= budget:
        # constraint already met by any box containing the support
        return DomainChoice(L=max(lo, supp_radius), supp_limited=True, tail_fraction=tail(max(lo, supp_radius)) / (m0 + T0))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if tail(mid) <= budget:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-12 * max(1.0, hi):
            break
    L = hi
    if supp_radius > L:
        return DomainChoice(L=supp_radius, supp_limited=True, tail_fraction=tail(supp_radius) / (m0 + T0))
    return DomainChoice(L=L, supp_limited=False, tail_fraction=tail(L) / (m0 + T0))
