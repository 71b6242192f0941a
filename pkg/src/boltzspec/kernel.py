"""Collision-kernel specification and the Fourier weight G-hat.

The kernel is ``B(|u|, cos theta) = |u|^lambda b(cos theta)`` with the angular
part normalized to unit mass on the sphere.  The weight

    G(u, zeta) = |u|^lambda int_S b(uhat.sigma) (e^{-i (beta/2) zeta.(|u|sigma - u)} - 1) dsigma

drives the Fourier-space weighted convolution through its u-transform
``Ghat(xi, zeta)`` truncated to the ball |u| <= 2 sqrt(d) L.  For isotropic
kernels Ghat is real and depends only on (|zeta|, |xi|, |beta/2 zeta - xi|),
which the reduced table exploits through exact integer triple keys.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import quad
from scipy.special import j0, roots_legendre

from .grid import VelocityGrid

_SPHERE_AREA = {2: 2.0 * np.pi, 3: 4.0 * np.pi}


def _sinc(x):
    """sin(x)/x with the removable singularity filled."""
    return np.sinc(np.asarray(x) / np.pi)


# ---------------------------------------------------------------------------
# angular law


class AngularLaw:
    """Normalized angular cross-section b(cos theta) on [-1, 1]."""

    def __init__(self, d: int, values=None, nodes=None, constant: float | None = None):
        self.d = d
        self.isotropic = constant is not None
        if self.isotropic:
            self.constant = float(constant)
            self.nodes = None
            self.values = None
        else:
            self.nodes = np.asarray(nodes, dtype=float)
            self.values = np.asarray(values, dtype=float)
            self.constant = None

    def __call__(self, s):
        if self.isotropic:
            return np.full_like(np.asarray(s, dtype=float), self.constant)
        return np.interp(s, self.nodes, self.values)

    def sphere_integral(self) -> float:
        """|S^{d-2}| * int b(s) (1-s^2)^{(d-3)/2} ds, = 1 after normalization."""
        return _angular_mass(self, self.d)

    def digest(self) -> str:
        if self.isotropic:
            return f"iso:{self.constant:.17g}"
        h = hashlib.sha256()
        h.update(self.nodes.tobytes())
        h.update(self.values.tobytes())
        return "tab:" + h.hexdigest()[:16]


def _angular_mass(b, d: int, order: int = 256) -> float:
    if d == 3:
        x, w = roots_legendre(order)
        return 2.0 * np.pi * float(np.sum(w * b(x)))
    # d == 2: Chebyshev-Gauss handles the (1-s^2)^{-1/2} weight
    i = np.arange(1, order + 1)
    x = np.cos((2 * i - 1) * np.pi / (2 * order))
    return 2.0 * (np.pi / order) * float(np.sum(b(x)))


def isotropic_angular(d: int) -> AngularLaw:
    """Constant b = 1/|S^{d-1}|, already Grad-normalized."""
    return AngularLaw(d, constant=1.0 / _SPHERE_AREA[d])


def normalize_angular(b_raw, d: int, nodes=None) -> AngularLaw:
    """Scale an angular law so its sphere integral is one.

    ``b_raw`` is either a callable on [-1, 1] or an array of samples at
    ``nodes`` (defaults to Gauss-Legendre points for d=3, Chebyshev for d=2).
    """
    if callable(b_raw):
        probe = b_raw
    else:
        b_raw = np.asarray(b_raw, dtype=float)
        if np.any(b_raw < 0):
            raise ValueError("angular samples must be nonnegative")
        if not np.any(b_raw > 0):
            raise ValueError("angular law is identically zero")
        if nodes is None:
            m = len(b_raw)
            if d == 3:
                nodes, _ = roots_legendre(m)
            else:
                i = np.arange(1, m + 1)
                nodes = np.sort(np.cos((2 * i - 1) * np.pi / (2 * m)))
                b_raw = b_raw  # caller supplies samples in node order
        order = np.argsort(nodes)
        nodes = np.asarray(nodes)[order]
        b_vals = b_raw[order]
        probe = lambda s: np.interp(s, nodes, b_vals)  # noqa: E731

    mass = _angular_mass(probe, d)
    if mass <= 0:
        raise ValueError("angular law has zero sphere integral")
    if callable(b_raw):
        x, _ = roots_legendre(512)
        return AngularLaw(d, values=np.asarray(b_raw(x)) / mass, nodes=x)
    return AngularLaw(d, values=b_vals / mass, nodes=nodes)


# ---------------------------------------------------------------------------
# kernel spec


@dataclass(frozen=True)
class KernelSpec:
    """Potential exponent, restitution and angular law for one interaction."""

    lam: float
    beta: float = 1.0
    d: int = 3
    angular: AngularLaw = None

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"potential exponent lambda must be in [0, 1], got {self.lam}")
        if not 0.5 < self.beta <= 1.0:
            raise ValueError(f"restitution beta must be in (1/2, 1], got {self.beta}")
        if self.d not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.d}")
        if self.angular is None:
            object.__setattr__(self, "angular", isotropic_angular(self.d))
        mass = self.angular.sphere_integral()
        if abs(mass - 1.0) > 1e-10:
            raise ValueError(f"angular law not Grad-normalized: sphere integral {mass}")

    @property
    def taxonomy(self) -> str:
        if self.lam == 0.0:
            return "MM"
        if self.lam == 1.0:
            return "HS"
        return "VHP"

    @property
    def isotropic(self) -> bool:
        return self.angular.isotropic

    def digest(self) -> str:
        return f"lam={self.lam:.17g},beta={self.beta:.17g},d={self.d},ang={self.angular.digest()}"


# ---------------------------------------------------------------------------
# pointwise weight G(u, zeta)


def _orthonormal_frame(uhat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ref = np.array([1.0, 0.0, 0.0]) if abs(uhat[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(uhat, ref)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(uhat, e1)
    return e1, e2


def weight_G(u, zeta, spec: KernelSpec, order: int = 32):
    """The spherical-integral weight G(u, zeta).

    Vectorized over a trailing batch of ``u`` vectors (shape (..., d)) at a
    single ``zeta``.  Uses the closed form for isotropic kernels, otherwise a
    Gauss-Legendre x azimuth product rule of the given order.
    """
    u = np.asarray(u, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    single = u.ndim == 1
    u2 = u.reshape(-1, u.shape[-1])
    r = np.linalg.norm(u2, axis=-1)
    out = np.zeros(len(u2), dtype=complex)
    nz = r > 0
    if spec.isotropic:
        zdotu = u2[nz] @ zeta
        znorm = np.linalg.norm(zeta)
        arg = 0.5 * spec.beta * r[nz] * znorm
        kern = _sinc(arg) if spec.d == 3 else j0(arg)
        out[nz] = r[nz] ** spec.lam * (np.exp(0.5j * spec.beta * zdotu) * kern - 1.0)
    else:
        for i in np.flatnonzero(nz):
            out[i] = _weight_G_aniso_single(u2[i], zeta, spec, order)
    # r == 0: integrand vanishes identically (e^0 - 1)
    return out[0] if single else out.reshape(u.shape[:-1])


def _weight_G_aniso_single(u, zeta, spec: KernelSpec, order: int) -> complex:
    r = np.linalg.norm(u)
    uhat = u / r
    if spec.d == 3:
        s, w = roots_legendre(order)
        phi = np.arange(2 * order) * (np.pi / order)
        e1, e2 = _orthonormal_frame(uhat)
        sin_t = np.sqrt(np.clip(1.0 - s**2, 0.0, None))
        # sigma grid (order x 2*order, 3)
        sigma = (
            s[:, None, None] * uhat
            + sin_t[:, None, None] * (np.cos(phi)[None, :, None] * e1 + np.sin(phi)[None, :, None] * e2)
        )
        phase = np.exp(-0.5j * spec.beta * (r * sigma - u) @ zeta)
        bw = (w * spec.angular(s))[:, None]
        val = np.sum(bw * (phase - 1.0)) * (np.pi / order)
    else:
        m = 4 * order
        theta = np.arange(m) * (2.0 * np.pi / m)
        eperp = np.array([-uhat[1], uhat[0]])
        sigma = np.cos(theta)[:, None] * uhat + np.sin(theta)[:, None] * eperp
        phase = np.exp(-0.5j * spec.beta * (r * sigma - u) @ zeta)
        val = np.sum(spec.angular(np.cos(theta)) * (phase - 1.0)) * (2.0 * np.pi / m)
    return r**spec.lam * complex(val)


# ---------------------------------------------------------------------------
# closed-form radial integrals for lambda in {0, 1} (d = 3)

_SERIES_J = 14


def _series(x, coeff):
    acc = np.zeros_like(x)
    for j in range(_SERIES_J, -1, -1):
        acc = acc * (x * x) + coeff(j)
    return acc


def _fact(m: int) -> float:
    out = 1.0
    for i in range(2, m + 1):
        out *= i
    return out


def _F1(c, R):
    """int_0^R r cos(cr) dr."""
    c = np.asarray(c, dtype=float)
    x = c * R
    with np.errstate(divide="ignore", invalid="ignore"):
        closed = (np.cos(x) + x * np.sin(x) - 1.0) / (c * c)
    series = R * R * _series(x, lambda j: (-1.0) ** j / (_fact(2 * j) * (2 * j + 2)))
    return np.where(np.abs(x) < 0.5, series, closed)


def _F2(c, R):
    """int_0^R r^2 sin(cr) dr."""
    c = np.asarray(c, dtype=float)
    x = c * R
    with np.errstate(divide="ignore", invalid="ignore"):
        closed = (2.0 * x * np.sin(x) + (2.0 - x * x) * np.cos(x) - 2.0) / (c**3)
    series = R**3 * x * _series(x, lambda j: (-1.0) ** j / (_fact(2 * j + 1) * (2 * j + 4)))
    return np.where(np.abs(x) < 0.5, series, closed)


def _F3(c, R):
    """int_0^R r sin(cr) dr."""
    c = np.asarray(c, dtype=float)
    x = c * R
    with np.errstate(divide="ignore", invalid="ignore"):
        closed = (np.sin(x) - x * np.cos(x)) / (c * c)
    series = R * R * x * _series(x, lambda j: (-1.0) ** j / (_fact(2 * j + 1) * (2 * j + 3)))
    return np.where(np.abs(x) < 0.5, series, closed)


def _G1(c, R):
    """int_0^R cos(cr) dr."""
    c = np.asarray(c, dtype=float)
    x = c * R
    with np.errstate(divide="ignore", invalid="ignore"):
        closed = np.sin(x) / c
    series = R * _series(x, lambda j: (-1.0) ** j / _fact(2 * j + 1))
    return np.where(np.abs(x) < 0.5, series, closed)


def _radial_integral_closed(a, b, c, R: float, lam: float):
    """int_0^R r^{lam+2} (sinc(ar) sinc(br) - sinc(cr)) dr for lam in {0, 1}."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    az = a == 0
    bz = b == 0
    cz = c == 0
    ab = np.where(az | bz, 1.0, a * b)
    if lam == 1.0:
        t1 = 0.5 * (_F1(a - b, R) - _F1(a + b, R)) / ab
        t1 = np.where(az & bz, R**4 / 4.0, np.where(az, _F2(b, R) / np.where(bz, 1.0, b), np.where(bz, _F2(a, R) / np.where(az, 1.0, a), t1)))
        t2 = np.where(cz, R**4 / 4.0, _F2(c, R) / np.where(cz, 1.0, c))
    elif lam == 0.0:
        t1 = 0.5 * (_G1(a - b, R) - _G1(a + b, R)) / ab
        t1 = np.where(az & bz, R**3 / 3.0, np.where(az, _F3(b, R) / np.where(bz, 1.0, b), np.where(bz, _F3(a, R) / np.where(az, 1.0, a), t1)))
        t2 = np.where(cz, R**3 / 3.0, _F3(c, R) / np.where(cz, 1.0, c))
    else:  # pragma: no cover - guarded by caller
        raise ValueError("closed form only for lambda 0 or 1")
    return t1 - t2


def _radial_integral_quad(a, b, c, R: float, lam: float, d: int, order: int = 8, panel_scale: float = 1.0):
    """Composite Gauss-Legendre evaluation of the radial weight integral.

    Handles any lambda; the panel count tracks the fastest oscillation so the
    rule stays accurate for large |zeta| L.  Works for d=3 (sinc kernels) and
    d=2 (Bessel J0 kernels).
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    c = np.atleast_1d(np.asarray(c, dtype=float))
    freq = np.maximum(np.maximum(a, b), c) * R
    out = np.empty(a.shape, dtype=float)
    x0, w0 = roots_legendre(order)
    # bucket entries by required panel count to keep the evaluation vectorized
    panels_needed = np.maximum(4, np.ceil(panel_scale * freq / 1.5).astype(int))
    buckets = np.unique(panels_needed)
    kern = _sinc if d == 3 else j0
    p = lam + (2 if d == 3 else 1)
    for npan in buckets:
        sel = panels_needed == npan
        edges = np.linspace(0.0, R, npan + 1)
        half = 0.5 * (edges[1:] - edges[:-1])
        mid = 0.5 * (edges[1:] + edges[:-1])
        r = (mid[:, None] + half[:, None] * x0).ravel()  # (npan*order,)
        wr = (half[:, None] * w0).ravel()
        aa = a[sel][:, None]
        bb = b[sel][:, None]
        cc = c[sel][:, None]
        vals = r**p * (kern(aa * r) * kern(bb * r) - kern(cc * r))
        out[sel] = vals @ wr
    return out


def weight_G_hat(xi, zeta, spec: KernelSpec, umax: float, epsabs: float = 1e-10) -> complex:
    """Single entry of the truncated u-transform of G.

    Isotropic kernels use the 1-D radial reduction evaluated by adaptive
    quadrature; anisotropic kernels fall back to a sphere x radius product
    rule refined until stable.
    """
    xi = np.asarray(xi, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    if spec.isotropic:
        a = 0.5 * spec.beta * np.linalg.norm(zeta)
        bb = np.linalg.norm(0.5 * spec.beta * zeta - xi)
        cc = np.linalg.norm(xi)
        kern = _sinc if spec.d == 3 else j0
        p = spec.lam + (2 if spec.d == 3 else 1)

        def f(r):
            return r**p * (kern(a * r) * kern(bb * r) - kern(cc * r))

        val, err = quad(f, 0.0, umax, epsabs=epsabs, epsrel=1e-12, limit=400)
        if err > max(epsabs * 10, 1e-8 * max(1.0, abs(val))):
            raise RuntimeError(f"radial quadrature did not converge for xi={xi}, zeta={zeta}: err={err}")
        return complex(_SPHERE_AREA[spec.d] * val)
    return _weight_G_hat_generic(xi, zeta, spec, umax)


def _weight_G_hat_generic(xi, zeta, spec: KernelSpec, umax: float, tol: float = 1e-9) -> complex:
    prev = None
    for order in (32, 64, 128):
        x0, w0 = roots_legendre(order)
        r = 0.5 * umax * (x0 + 1.0)
        wr = 0.5 * umax * w0
        if spec.d == 3:
            s, ws = roots_legendre(order)
            phi = np.arange(2 * order) * (np.pi / order)
            sin_t = np.sqrt(np.clip(1.0 - s**2, 0.0, None))
            omega = np.concatenate(
                [
                    (sin_t[:, None] * np.cos(phi)).reshape(-1, 1),
                    (sin_t[:, None] * np.sin(phi)).reshape(-1, 1),
                    np.broadcast_to(s[:, None], (order, 2 * order)).reshape(-1, 1),
                ],
                axis=1,
            )
            wo = (np.broadcast_to(ws[:, None], (order, 2 * order)) * (np.pi / order)).ravel()
        else:
            m = 4 * order
            theta = np.arange(m) * (2.0 * np.pi / m)
            omega = np.stack([np.cos(theta), np.sin(theta)], axis=1)
            wo = np.full(m, 2.0 * np.pi / m)
        total = 0.0 + 0.0j
        for ri, wri in zip(r, wr):
            u = ri * omega
            g = weight_G(u, zeta, spec)
            phase = np.exp(-1j * (u @ xi))
            total += wri * ri ** (spec.d - 1) * np.sum(wo * g * phase)
        if prev is not None and abs(total - prev) < tol * max(1.0, abs(total)):
            return complex(total)
        prev = total
    return complex(prev)


# ---------------------------------------------------------------------------
# weight table


@dataclass(frozen=True)
class TableQuadrature:
    """Quadrature parameters for bulk table construction."""

    order: int = 8
    panel_scale: float = 1.0

    def digest(self) -> str:
        return f"gl{self.order}x{self.panel_scale:.6g}"


@dataclass
class WeightTable:
    """Precomputed Ghat(zeta_m, zeta_k) over all realized mode pairs.

    ``full`` stores the dense (K, K) complex array indexed [output mode k,
    convolution mode m]; ``reduced`` (isotropic only) stores one value per
    distinct invariant triple plus an int32 index of the same (K, K) shape.
    """

    mode: str
    umax: float
    key: str
    values: np.ndarray
    index: np.ndarray | None = None
    unique_keys: np.ndarray | None = None

    def as_dense(self) -> np.ndarray:
        if self.mode == "full":
            return self.values
        return self.values[self.index]

    @property
    def n_unique(self) -> int:
        return len(self.values) if self.mode == "reduced" else self.values.size


def table_key(grid: VelocityGrid, spec: KernelSpec, quad_spec: TableQuadrature, umax: float) -> str:
    raw = f"d={grid.d},n={grid.n},L={grid.L:.17g},umax={umax:.17g},{spec.digest()},{quad_spec.digest()}"
    return hashlib.sha256(raw.encode()).hexdigest()


def _pair_triples(grid: VelocityGrid):
    """Integer invariants (|k|^2, |m|^2, k.m) for every (output, conv) pair."""
    kv = grid.mode_vectors.astype(np.int64)
    t1 = np.sum(kv * kv, axis=1)
    s = kv @ kv.T  # (K, K)
    return t1, s


def build_weight_table(
    grid: VelocityGrid,
    spec: KernelSpec,
    mode: str = "reduced",
    quad_spec: TableQuadrature | None = None,
    budget_bytes: int = 1 << 30,
    umax: float | None = None,
) -> WeightTable:
    """Tabulate Ghat at every realized (xi_m, zeta_k) mode pair.

    ``umax`` defaults to L: the mode-space convolution acts as a periodic
    (period-2L) convolution in u, so the kernel support must fit inside the
    fundamental cell or periodic images contaminate the loss term.  The
    continuum-analysis radius 2*sqrt(d)*L can still be requested explicitly
    (it is only meaningful for the untruncated transform, not for solving).
    """
    if mode not in ("full", "reduced"):
        raise ValueError(f"unknown table mode {mode!r}")
    quad_spec = quad_spec or TableQuadrature()
    K = grid.size
    if umax is None:
        umax = grid.L
    key = table_key(grid, spec, quad_spec, umax)

    if mode == "full" and K * K * 16 > budget_bytes:
        raise MemoryError(
            f"full table needs {K * K * 16 / 2**20:.0f} MiB > budget; use mode='reduced' or a smaller n"
        )
    if not spec.isotropic:
        if mode == "reduced":
            raise ValueError("reduced tables require an isotropic kernel")
        return _build_full_aniso(grid, spec, umax, key)

    t1, s = _pair_triples(grid)
    # encode (t1[k], t1[m], s[k,m]) into a single int64 for exact dedup
    smax = int(np.max(t1))
    base = 2 * smax + 1
    enc = (t1[:, None] * (smax + 1) + t1[None, :]) * base + (s + smax)
    uniq, inverse = np.unique(enc, return_inverse=True)
    idx = inverse.reshape(K, K).astype(np.int32)
    u_t1k = uniq // ((smax + 1) * base)
    rem = uniq % ((smax + 1) * base)
    u_t1m = rem // base
    u_s = rem % base - smax

    dz = grid.dzeta
    zk = dz * np.sqrt(u_t1k.astype(float))  # |zeta|
    xm = dz * np.sqrt(u_t1m.astype(float))  # |xi|
    dot = dz * dz * u_s.astype(float)  # zeta . xi
    a = 0.5 * spec.beta * zk
    bsq = (0.5 * spec.beta) ** 2 * zk**2 - spec.beta * dot + xm**2
    b = np.sqrt(np.clip(bsq, 0.0, None))
    c = xm

    if spec.d == 3 and spec.lam in (0.0, 1.0):
        radial = _radial_integral_closed(a, b, c, umax, spec.lam)
    else:
        radial = _radial_integral_quad(a, b, c, umax, spec.lam, spec.d, quad_spec.order, quad_spec.panel_scale)
    # isotropic entries are real (radial integral of real sinc/J0 products)
    vals = _SPHERE_AREA[spec.d] * radial
    keys3 = np.stack([u_t1k, u_t1m, u_s], axis=1)

    table = WeightTable(mode="reduced", umax=umax, key=key, values=vals, index=idx, unique_keys=keys3)
    if mode == "full":
        return WeightTable(mode="full", umax=umax, key=key, values=table.as_dense())
    return table


def _build_full_aniso(grid: VelocityGrid, spec: KernelSpec, umax: float, key: str) -> WeightTable:
    K = grid.size
    if K > 4096:
        raise MemoryError("anisotropic full tables are only supported for small grids (n^d <= 4096)")
    dz = grid.dzeta
    zvecs = grid.mode_vectors.astype(float) * dz
    vals = np.empty((K, K), dtype=complex)
    for k in range(K):
        zeta = zvecs[k]
        if not np.any(zeta):
            vals[k, :] = 0.0
            continue
        for m in range(K):
            vals[k, m] = _weight_G_hat_generic(zvecs[m], zeta, spec, umax)
    return WeightTable(mode="full", umax=umax, key=key, values=vals)


# ---------------------------------------------------------------------------
# on-disk cache

_MAGIC = b"BWTB"
_VERSION = 2


def save_table(table: WeightTable, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        kb = table.key.encode()
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(kb)))
        fh.write(kb)
        fh.write(struct.pack("<Bd", 0 if table.mode == "full" else 1, table.umax))
        if table.mode == "full":
            K = table.values.shape[0]
            fh.write(struct.pack("<Q", K))
            _write_complex(fh, table.values)
        else:
            fh.write(struct.pack("<Q", len(table.values)))
            fh.write(np.ascontiguousarray(table.unique_keys, dtype="<i8").tobytes())
            _write_complex(fh, table.values)


def _write_complex(fh, arr: np.ndarray) -> None:
    inter = np.empty(arr.size * 2, dtype="<f8")
    inter[0::2] = arr.real.ravel()
    inter[1::2] = arr.imag.ravel()
    fh.write(inter.tobytes())


def load_table(path: str | Path, grid: VelocityGrid, expected_key: str) -> WeightTable | None:
    """Load a cached table; returns None on key mismatch or malformed file."""
    path = Path(path)
    if not path.exists():
        return None
    try:
        with open(path, "rb") as fh:
            if fh.read(4) != _MAGIC:
                return None
            version, klen = struct.unpack("<II", fh.read(8))
            if version != _VERSION:
                return None
            key = fh.read(klen).decode()
            if key != expected_key:
                return None
            mode_flag, umax = struct.unpack("<Bd", fh.read(9))
            (count,) = struct.unpack("<Q", fh.read(8))
            if mode_flag == 0:
                K = count
                raw = np.frombuffer(fh.read(K * K * 16), dtype="<f8")
                vals = (raw[0::2] + 1j * raw[1::2]).reshape(K, K)
                if not np.any(vals.imag):
                    vals = np.ascontiguousarray(vals.real)
                return WeightTable(mode="full", umax=umax, key=key, values=vals)
            keys3 = np.frombuffer(fh.read(count * 3 * 8), dtype="<i8").reshape(count, 3)
            raw = np.frombuffer(fh.read(count * 16), dtype="<f8")
            vals = raw[0::2] + 1j * raw[1::2]
            if not np.any(vals.imag):
                vals = np.ascontiguousarray(vals.real)
    except (OSError, ValueError, struct.error):
        return None
    # rebuild the (K, K) index from the grid's integer invariants
    t1, s = _pair_triples(grid)
    smax = int(np.max(t1))
    base = 2 * smax + 1
    enc = (t1[:, None] * (smax + 1) + t1[None, :]) * base + (s + smax)
    key_enc = (keys3[:, 0] * (smax + 1) + keys3[:, 1]) * base + (keys3[:, 2] + smax)
    order = np.argsort(key_enc)
    pos = np.searchsorted(key_enc[order], enc.ravel())
    if np.any(pos >= len(key_enc)) or np.any(key_enc[order][np.clip(pos, 0, len(key_enc) - 1)] != enc.ravel()):
        return None
    idx = order[pos].reshape(grid.size, grid.size).astype(np.int32)
    return WeightTable(mode="reduced", umax=umax, key=key, values=vals, index=idx, unique_keys=keys3)
