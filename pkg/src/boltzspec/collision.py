"""Spectral evaluation of the unconserved collision operator Q_u.

In Fourier space the operator is a weighted convolution

    Qhat(zeta_k) = (2 pi)^{-d/2} sum_m ghat(zeta_k - zeta_m) ghat(zeta_m)
                   Ghat(zeta_m, zeta_k) (dzeta)^d

over the symmetric mode band |k|_inf <= n/2 - 1.  The difference mode
zeta_k - zeta_m may leave the band; on the cell-centered grid the exact
discrete identity folds it back with period n and a sign flip per wrapped
axis (e^{-i zeta_{k+-n} v_j} = -e^{-i zeta_k v_j} at the midpoint nodes), so
the convolution reproduces the nodal product g * (g conv G) exactly.  The
unpaired -n/2 planes are projected out of input and output, which keeps
Qhat conjugate-symmetric and Q_u real to rounding.

The direct O(K^2) sum is the baseline; a numba-parallel kernel computes the
same sum and is validated against it in the tests.
"""

from __future__ import annotations

import numpy as np

from .grid import State, VelocityGrid
from .kernel import WeightTable

try:
    from numba import njit, prange

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

TWO_PI = 2.0 * np.pi


class CollisionWorkspace:
    """Grid + kernel table bundle with scratch data for repeated evaluations."""

    def __init__(self, grid: VelocityGrid, table: WeightTable, use_fast_kernel: bool = True, alias: str = "wrap"):
        if alias not in ("wrap", "zero"):
            raise ValueError(f"alias must be 'wrap' or 'zero', got {alias!r}")
        self.grid = grid
        self.table = table
        self.alias = alias
        self.kvecs = grid.mode_vectors  # (K, d) int32
        self.scale = grid.dzeta**grid.d / TWO_PI ** (grid.d / 2)
        self.use_fast_kernel = use_fast_kernel and _HAVE_NUMBA
        self._diff_index: np.ndarray | None = None
        self._diff_sign: np.ndarray | None = None
        # The -n/2 mode planes have no conjugate partner in the fft box; they
        # are excluded from the convolution so Q_u stays real to rounding.
        half = grid.n // 2
        self.band_mask = np.all(np.abs(self.kvecs) <= half - 1, axis=1)

    def _build_diff(self) -> None:
        kv = self.kvecs.astype(np.int64)
        n = self.grid.n
        half = n // 2
        K = self.grid.size
        diff = kv[:, None, :] - kv[None, :, :]  # (K, K, d)
        sign = np.ones((K, K))
        if self.alias == "wrap":
            wrapped = (diff < -half) | (diff >= half)
            sign = np.where(np.sum(wrapped, axis=-1) % 2 == 1, -1.0, 1.0)
            diff = (diff + half) % n - half
            inside = np.ones((K, K), dtype=bool)
        else:
            inside = np.all((diff >= -half) & (diff < half), axis=-1)
            diff = np.clip(diff, -half, half - 1)
        flat = np.zeros((K, K), dtype=np.int64)
        for ax in range(self.grid.d):
            flat = flat * n + (diff[:, :, ax] + half)
        self._diff_index = np.where(inside, flat, K).astype(np.int64)
        self._diff_sign = sign

    @property
    def diff_index(self) -> np.ndarray:
        """Flat index of ghat(zeta_k - zeta_m); sentinel K when zeroed out."""
        if self._diff_index is None:
            self._build_diff()
        return self._diff_index

    @property
    def diff_sign(self) -> np.ndarray:
        if self._diff_sign is None:
            self._build_diff()
        return self._diff_sign

    def q_hat(self, g_hat: np.ndarray) -> np.ndarray:
        """Fourier coefficients of Q_u(g) from synchronized coefficients."""
        ghat_flat = np.ascontiguousarray(g_hat.reshape(-1) * self.band_mask)
        if self.use_fast_kernel:
            wrap = self.alias == "wrap"
            if self.table.mode == "reduced":
                out = _conv_reduced(
                    ghat_flat, self.kvecs, self.table.index, self.table.values, self.grid.n, self.grid.d, wrap
                )
            else:
                out = _conv_full(ghat_flat, self.kvecs, self.table.values, self.grid.n, self.grid.d, wrap)
        else:
            out = self.q_hat_direct(ghat_flat)
        return (out * self.band_mask * self.scale).reshape(self.grid.shape)

    def q_hat_direct(self, ghat_flat: np.ndarray) -> np.ndarray:
        """Vectorized numpy evaluation of the same direct sum (reference path)."""
        ghat_pad = np.concatenate([ghat_flat, [0.0]])
        shifted = ghat_pad[self.diff_index] * self.diff_sign  # (K, K)
        return (shifted * self.table.as_dense()) @ ghat_flat


if _HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def _conv_reduced(ghat, kvecs, index, values, n, d, wrap):
        K = ghat.shape[0]
        half = n // 2
        out = np.empty(K, dtype=np.complex128)
        for k in prange(K):
            acc = 0.0 + 0.0j
            for m in range(K):
                flat = 0
                sign = 1.0
                ok = True
                for ax in range(d):
                    c = kvecs[k, ax] - kvecs[m, ax]
                    if c < -half:
                        if not wrap:
                            ok = False
                            break
                        c += n
                        sign = -sign
                    elif c >= half:
                        if not wrap:
                            ok = False
                            break
                        c -= n
                        sign = -sign
                    flat = flat * n + (c + half)
                if ok:
                    acc += sign * ghat[flat] * ghat[m] * values[index[k, m]]
            out[k] = acc
        return out

    @njit(cache=True, parallel=True)
    def _conv_full(ghat, kvecs, values, n, d, wrap):
        K = ghat.shape[0]
        half = n // 2
        out = np.empty(K, dtype=np.complex128)
        for k in prange(K):
            acc = 0.0 + 0.0j
            for m in range(K):
                flat = 0
                sign = 1.0
                ok = True
                for ax in range(d):
                    c = kvecs[k, ax] - kvecs[m, ax]
                    if c < -half:
                        if not wrap:
                            ok = False
                            break
                        c += n
                        sign = -sign
                    elif c >= half:
                        if not wrap:
                            ok = False
                            break
                        c -= n
                        sign = -sign
                    flat = flat * n + (c + half)
                if ok:
                    acc += sign * ghat[flat] * ghat[m] * values[k, m]
            out[k] = acc
        return out


def q_hat(s: State, ws: CollisionWorkspace) -> np.ndarray:
    """Fourier coefficients of the unconserved collision operator."""
    if s.grid is not ws.grid and s.grid != ws.grid:
        raise ValueError("state grid does not match workspace grid")
    return ws.q_hat(s.coeffs)


def q_u(s: State, ws: CollisionWorkspace) -> np.ndarray:
    """Physical-space Q_u(g) on the grid (real nodal field)."""
    qh = q_hat(s, ws)
    field = ws.grid.inverse(qh)
    scale = max(float(np.max(np.abs(field.real))), 1e-300)
    imag = float(np.max(np.abs(field.imag)))
    if imag > 1e-8 * scale:
        raise RuntimeError(f"collision output has non-negligible imaginary part ({imag:.3e})")
    return field.real
