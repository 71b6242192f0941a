"""Slow reference implementations used only by the test-suite.

``collision_direct`` evaluates Q(f, f) by quadrature in physical space
(sphere rule x velocity grid sum), independent of the spectral pipeline.
``nearest_conservative_dense`` solves the constrained least-squares problem
by dense KKT assembly.  The quadrature loops are numba-compiled so the
oracle stays usable at n=10, but the algorithm is plain direct summation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange
from scipy.special import roots_legendre

from .grid import State
from .kernel import KernelSpec


def sphere_rule(d: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes/weights on S^{d-1}; weights sum to |S^{d-1}|."""
    if d == 3:
        s, w = roots_legendre(order)
        phi = (np.arange(2 * order) + 0.5) * (np.pi / order)
        sin_t = np.sqrt(np.clip(1.0 - s**2, 0.0, None))
        nodes = np.stack(
            [
                np.outer(sin_t, np.cos(phi)).ravel(),
                np.outer(sin_t, np.sin(phi)).ravel(),
                np.outer(s, np.ones_like(phi)).ravel(),
            ],
            axis=1,
        )
        weights = np.outer(w, np.full(2 * order, np.pi / order)).ravel()
        return nodes, weights
    m = 4 * order
    theta = (np.arange(m) + 0.5) * (2.0 * np.pi / m)
    return np.stack([np.cos(theta), np.sin(theta)], axis=1), np.full(m, 2.0 * np.pi / m)


@dataclass(frozen=True)
class QuadratureSpec:
    sphere_order: int = 8
    stride: int = 1
    tol_estimate: float = 1e-3


@njit(cache=True)
def _interp_point(values, pt, L, dv, n, d):
    """Multilinear interpolation on the cell-centered grid; zero outside."""
    base = np.empty(d, dtype=np.int64)
    frac = np.empty(d)
    for ax in range(d):
        t = (pt[ax] + L) / dv - 0.5
        i0 = int(np.floor(t))
        base[ax] = i0
        frac[ax] = t - i0
    out = 0.0
    for corner in range(1 << d):
        w = 1.0
        flat = 0
        ok = True
        for ax in range(d):
            bit = (corner >> ax) & 1
            ia = base[ax] + bit
            if ia < 0 or ia >= n:
                ok = False
                break
            w *= frac[ax] if bit else 1.0 - frac[ax]
            flat = flat * n + ia
        if ok:
            out += w * values[flat]
    return out


@njit(cache=True, parallel=True)
def _direct_elastic(fvals, nodes, wnodes, fw, sigma, wsig, lam, beta, L, dv, n, d,
                    iso, bconst, bnodes, bvals):
    K = nodes.shape[0]
    Kw = wnodes.shape[0]
    S = sigma.shape[0]
    out = np.empty(K)
    half_beta = 0.5 * beta
    for i in prange(K):
        acc = 0.0
        fi = fvals[i]
        vp = np.empty(d)
        wp = np.empty(d)
        for j in range(Kw):
            r2 = 0.0
            for ax in range(d):
                du = nodes[i, ax] - wnodes[j, ax]
                r2 += du * du
            if r2 == 0.0:
                continue
            r = np.sqrt(r2)
            gain = 0.0
            for si in range(S):
                cos_t = 0.0
                for ax in range(d):
                    cos_t += (nodes[i, ax] - wnodes[j, ax]) * sigma[si, ax]
                cos_t /= r
                b = bconst if iso else np.interp(cos_t, bnodes, bvals)
                for ax in range(d):
                    dvp = half_beta * (r * sigma[si, ax] - (nodes[i, ax] - wnodes[j, ax]))
                    vp[ax] = nodes[i, ax] + dvp
                    wp[ax] = wnodes[j, ax] - dvp
                gain += wsig[si] * b * _interp_point(fvals, vp, L, dv, n, d) * _interp_point(fvals, wp, L, dv, n, d)
            acc += r**lam * (gain - fi * fw[j])
        out[i] = acc
    return out


@njit(cache=True)
def _scatter_point(target, pt, amount, L, dv, n, d):
    """Deposit via multilinear (hat-function) weights; drops mass outside."""
    base = np.empty(d, dtype=np.int64)
    frac = np.empty(d)
    for ax in range(d):
        t = (pt[ax] + L) / dv - 0.5
        i0 = int(np.floor(t))
        base[ax] = i0
        frac[ax] = t - i0
    for corner in range(1 << d):
        w = 1.0
        flat = 0
        ok = True
        for ax in range(d):
            bit = (corner >> ax) & 1
            ia = base[ax] + bit
            if ia < 0 or ia >= n:
                ok = False
                break
            w *= frac[ax] if bit else 1.0 - frac[ax]
            flat = flat * n + ia
        if ok:
            target[flat] += w * amount


@njit(cache=True)
def _direct_inelastic(fvals, nodes, wnodes, fw, sigma, wsig, lam, beta, L, dv, n, d,
                      iso, bconst, bnodes, bvals):
    K = nodes.shape[0]
    Kw = wnodes.shape[0]
    S = sigma.shape[0]
    deposit = np.zeros(K)
    loss = np.zeros(K)
    half_beta = 0.5 * beta
    vp = np.empty(d)
    for i in range(K):
        fi = fvals[i]
        if fi == 0.0:
            continue
        for j in range(Kw):
            r2 = 0.0
            for ax in range(d):
                du = nodes[i, ax] - wnodes[j, ax]
                r2 += du * du
            if r2 == 0.0:
                continue
            r = np.sqrt(r2)
            rl = r**lam
            for si in range(S):
                cos_t = 0.0
                for ax in range(d):
                    cos_t += (nodes[i, ax] - wnodes[j, ax]) * sigma[si, ax]
                cos_t /= r
                b = bconst if iso else np.interp(cos_t, bnodes, bvals)
                for ax in range(d):
                    vp[ax] = nodes[i, ax] + half_beta * (r * sigma[si, ax] - (nodes[i, ax] - wnodes[j, ax]))
                _scatter_point(deposit, vp, fi * fw[j] * rl * b * wsig[si], L, dv, n, d)
            loss[i] += fi * fw[j] * rl
    return deposit - loss


def collision_direct(f: State, spec: KernelSpec, q: QuadratureSpec | None = None) -> np.ndarray:
    """Direct-quadrature Q(f, f) on the grid nodes.

    Elastic kernels use the strong form with multilinear interpolation of f at
    the off-grid post-collision velocities; inelastic kernels use the
    weak-form transfer against nodal hat functions (no pre-image Jacobians).
    """
    q = q or QuadratureSpec()
    grid = f.grid
    d, n, L, dv = grid.d, grid.n, grid.L, grid.dv
    sigma, wsig = sphere_rule(d, q.sphere_order)
    nodes = np.stack([m.ravel() for m in grid.node_mesh], axis=1)  # (K, d)
    fvals = np.ascontiguousarray(f.values.reshape(-1))
    if q.stride > 1:
        keep = np.all(((nodes + L) / dv - 0.5).astype(int) % q.stride == 0, axis=1)
        wnodes = np.ascontiguousarray(nodes[keep])
        fw = np.ascontiguousarray(fvals[keep])
    else:
        wnodes = nodes
        fw = fvals
    wcell = (dv * q.stride) ** d  # w-integration cell volume
    law = spec.angular
    iso = law.isotropic
    bconst = law.constant if iso else 0.0
    bnodes = law.nodes if not iso else np.zeros(1)
    bvals = law.values if not iso else np.zeros(1)
    args = (fvals, nodes, wnodes, fw, sigma, wsig, spec.lam, spec.beta, L, dv, n, d,
            iso, bconst, bnodes, bvals)
    if spec.beta == 1.0:
        out = _direct_elastic(*args)
    else:
        out = _direct_inelastic(*args)
    return (out * wcell).reshape(grid.shape)


def nearest_conservative_dense(Qu: np.ndarray, C: np.ndarray) -> np.ndarray:
    """min ||Qu - X||_2 s.t. C X = 0 by dense KKT assembly."""
    Qu = np.asarray(Qu, dtype=float).reshape(-1)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if C.size == 0 or C.shape[0] == 0:
        return Qu.copy()
    r, M = C.shape
    if np.linalg.matrix_rank(C) < r:
        raise ValueError("constraint matrix is rank deficient")
    KKT = np.zeros((M + r, M + r))
    KKT[:M, :M] = 2.0 * np.eye(M)
    KKT[:M, M:] = C.T
    KKT[M:, :M] = C
    rhs = np.concatenate([2.0 * Qu, np.zeros(r)])
    sol = np.linalg.solve(KKT, rhs)
    return sol[:M]
