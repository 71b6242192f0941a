import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from boltzspec import VelocityGrid, project, sobolev_norm
from boltzspec.diagnostics import maxwellian
from boltzspec.grid import State, choose_domain

TWO_PI = 2.0 * np.pi


def random_band_limited(grid, seed, n_keep=None):
    rng = np.random.default_rng(seed)
    n_keep = n_keep if n_keep is not None else grid.n // 2 - 1
    coeffs = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    kv = grid.mode_numbers
    mask = np.abs(kv) <= n_keep
    full = mask
    for _ in range(grid.d - 1):
        full = np.multiply.outer(full, mask)
    vals = grid.inverse(coeffs * full).real
    return State(grid, vals)


class TestForwardTransform:
    def test_constant_field(self, grid8):
        c = 0.7
        s = State(grid8, np.full(grid8.shape, c))
        ghat = s.coeffs
        zero = (grid8.n // 2,) * 3
        expected = c * (2 * grid8.L) ** 3 / TWO_PI ** 1.5
        assert abs(ghat[zero] - expected) < 1e-12 * expected
        rest = ghat.copy()
        rest[zero] = 0.0
        assert np.max(np.abs(rest)) < 1e-10 * expected

    def test_maxwellian_matches_analytic_gaussian(self):
        grid = VelocityGrid(3, 8.0, 32)
        T0 = 0.5
        s = maxwellian(grid, 1.0, 0.0, T0)
        zsq = sum(z**2 for z in np.meshgrid(*(grid.modes,) * 3, indexing="ij"))
        analytic = TWO_PI ** (-1.5) * np.exp(-T0 * zsq / 2.0)
        # resolved modes only: near the band edge the periodized-transform
        # images of the sampled Gaussian dominate
        kv = grid.mode_numbers
        resolved = np.abs(kv) <= grid.n // 4
        mask = np.einsum("i,j,k->ijk", resolved, resolved, resolved).astype(bool)
        assert np.max(np.abs((s.coeffs - analytic)[mask])) < 1e-7

    def test_round_trip(self, grid8):
        for seed in range(3):
            s = random_band_limited(grid8, seed)
            back = grid8.inverse(grid8.forward(s.values)).real
            assert np.max(np.abs(back - s.values)) < 1e-12 * np.max(np.abs(s.values))

    def test_non_finite_rejected(self, grid8):
        vals = np.zeros(grid8.shape)
        vals[1, 2, 3] = np.nan
        with pytest.raises(ValueError, match=r"\(1, 2, 3\)"):
            State(grid8, vals)

    def test_parseval(self, grid8):
        s = random_band_limited(grid8, 7)
        lhs = np.sum(np.abs(s.coeffs) ** 2) * grid8.dzeta**3
        rhs = grid8.l2_norm(s.values) ** 2
        assert abs(lhs - rhs) < 1e-12 * rhs


class TestProject:
    def test_identity_on_band_limited(self, grid8):
        s = random_band_limited(grid8, 1, n_keep=2)
        p = project(s, 2)
        assert np.max(np.abs(p.values - s.values)) < 1e-12 * np.max(np.abs(s.values))

    def test_idempotent_and_contraction(self, grid8):
        s = random_band_limited(grid8, 2)
        p = project(s, 2)
        pp = project(p, 2)
        assert np.max(np.abs(pp.values - p.values)) < 1e-12
        assert p.l2_norm() <= s.l2_norm() + 1e-12

    def test_out_of_range(self, grid8):
        s = random_band_limited(grid8, 3)
        with pytest.raises(ValueError):
            project(s, grid8.n // 2 + 1)

    def test_projection_estimate_gaussian(self):
        # smooth g decays at least as fast as the (L/(pi N))^alpha bound shape:
        # the truncation error ratio between N and 2N beats 2^alpha
        grid = VelocityGrid(3, 6.0, 16)
        s = maxwellian(grid, 1.0, 0.0, 1.2)
        alpha = 2
        err4 = grid.l2_norm(s.values - project(s, 4 - 1).values)
        err8 = grid.l2_norm(s.values - project(s, 8 - 1).values)
        assert err8 < err4
        assert err4 / err8 >= 2**alpha


class TestSobolevNorm:
    def test_reduces_to_l2(self, grid8):
        s = random_band_limited(grid8, 4)
        assert abs(sobolev_norm(s, 0, 0.0) - s.l2_norm()) < 1e-12 * s.l2_norm()

    def test_single_mode_derivative(self, grid8):
        v1 = grid8.node_mesh[0]
        s = State(grid8, np.sin(np.pi * v1 / grid8.L))
        ds = sobolev_norm(s, (1, 0, 0))
        cos = np.cos(np.pi * v1 / grid8.L)
        expected = np.sqrt(s.l2_norm() ** 2 + (np.pi / grid8.L) ** 2 * grid8.l2_norm(cos) ** 2)
        assert abs(ds - expected) < 1e-10 * expected

    def test_spectral_vs_finite_difference(self):
        errs = []
        for n in (16, 32):
            grid = VelocityGrid(3, 6.0, n)
            s = maxwellian(grid, 1.0, 0.0, 1.5)
            spec_d = grid.inverse(s.coeffs * 1j * grid.mode_mesh[0]).real
            fd = np.gradient(s.values, grid.dv, axis=0)
            errs.append(np.max(np.abs(spec_d - fd)))
        # central differences converge at O(dv^2) toward the spectral derivative
        assert errs[1] < errs[0] / 2.5


class TestChooseDomain:
    def test_tail_budget_met(self):
        choice = choose_domain(1.0, 0.0, 1.0, C=1.0, mu=1e-6, d=3)
        L = choice.L

        def tail_1d(a):  # Gaussian tail mass outside (-a, a), one axis
            return 2.0 * quad(lambda x: np.exp(-x * x / 2) / np.sqrt(TWO_PI), a, np.inf)[0]

        # independent check: total (mass + energy) outside the box below budget
        assert choice.tail_fraction <= 1e-6 + 1e-12
        assert 3 * tail_1d(L) < 2e-6  # mass part alone is under twice the budget

    def test_temperature_scaling(self):
        L1 = choose_domain(1.0, 0.0, 1.0, mu=1e-6, d=3).L
        L2 = choose_domain(1.0, 0.0, 2.0, mu=1e-6, d=3).L
        assert abs(L2 / L1 - np.sqrt(2.0)) < 0.03

    def test_monotone_in_mu_and_T(self):
        Ls = [choose_domain(1.0, 0.0, 1.0, mu=mu, d=3).L for mu in (1e-2, 1e-4, 1e-6)]
        assert Ls[0] <= Ls[1] <= Ls[2]
        LT = [choose_domain(1.0, 0.0, T, mu=1e-4, d=3).L for T in (0.5, 1.0, 2.0)]
        assert LT[0] <= LT[1] <= LT[2]

    def test_support_dominates_for_loose_mu(self):
        choice = choose_domain(1.0, 0.0, 1e-6, mu=0.999, supp_radius=3.0, d=3)
        assert choice.supp_limited
        assert choice.L == 3.0

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            choose_domain(0.0, 0.0, 1.0)
        with pytest.raises(ValueError):
            choose_domain(1.0, 0.0, -1.0)
        with pytest.raises(ValueError):
            choose_domain(1.0, 0.0, 1.0, mu=1.5)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), n_keep=st.integers(0, 3))
def test_projection_contraction_property(seed, n_keep):
    grid = VelocityGrid(3, 5.0, 8)
    s = random_band_limited(grid, seed)
    p = project(s, n_keep)
    assert p.l2_norm() <= s.l2_norm() + 1e-12
    pp = project(p, n_keep)
    assert np.max(np.abs(pp.values - p.values)) < 1e-12
