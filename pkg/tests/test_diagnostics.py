import numpy as np
import pytest

from boltzspec import VelocityGrid, maxwellian, moments
from boltzspec.collision import q_u
from boltzspec.diagnostics import (
    entropy,
    error_norms,
    generalized_moment,
    negative_part_norm,
    tail_moment_bound_check,
    z_moment,
)
from boltzspec.grid import State


@pytest.fixture(scope="module")
def fine_gauss():
    grid = VelocityGrid(3, 8.0, 32)
    return maxwellian(grid, 1.0, 0.0, 1.0)


class TestMaxwellian:
    def test_mass(self, fine_gauss):
        m = moments(fine_gauss)
        assert abs(m.mass - 1.0) < 1e-6

    def test_mean(self):
        grid = VelocityGrid(3, 8.0, 32)
        s = maxwellian(grid, 1.0, [0.5, -0.25, 0.0], 1.0)
        m = moments(s)
        assert np.max(np.abs(m.momentum / m.mass - [0.5, -0.25, 0.0])) < 1e-5

    def test_variance(self, fine_gauss):
        m = moments(fine_gauss)
        assert abs(m.energy / 3.0 - 1.0) < 1e-5  # (1/d) int M |v|^2 = T0 m0

    def test_invalid_parameters(self, fine_gauss):
        with pytest.raises(ValueError):
            maxwellian(fine_gauss.grid, -1.0, 0.0, 1.0)
        with pytest.raises(ValueError):
            maxwellian(fine_gauss.grid, 1.0, 0.0, 0.0)


class TestMoments:
    def test_constant_field_mass(self, grid8):
        c = 0.4
        m = moments(State(grid8, np.full(grid8.shape, c)))
        assert m.mass == pytest.approx(c * (2 * grid8.L) ** 3, rel=1e-13)

    def test_gaussian_second_moment(self, fine_gauss):
        m2 = generalized_moment(fine_gauss, 2.0, 1.0)
        assert abs(m2 - 3.0) < 1e-5  # int M |v|^2 = d T0

    def test_zk_bound(self, fine_gauss):
        # Z_k(f) <= 2^k m_1 m_k for probability densities
        for k in (1, 2, 3):
            zk = z_moment(fine_gauss, k, 1.0)
            m1 = generalized_moment(fine_gauss, 1, 1.0)
            mk = generalized_moment(fine_gauss, k, 1.0)
            assert zk <= 2**k * m1 * mk + 1e-12

    def test_requested_k_list(self, fine_gauss):
        m = moments(fine_gauss, k_list=(1, 2), lam=1.0)
        assert set(m.generalized) == {1, 2}
        assert m.generalized[2] == pytest.approx(3.0, abs=1e-5)


class TestNegativePartNorm:
    def test_nonnegative_field(self, gauss8):
        assert negative_part_norm(gauss8) == 0.0

    def test_single_negative_cell(self, grid8):
        vals = np.zeros(grid8.shape)
        vals[2, 3, 4] = -1.0
        s = State(grid8, vals)
        assert negative_part_norm(s) == pytest.approx(grid8.dv ** 1.5)

    def test_bounded_by_l2(self, grid8):
        rng = np.random.default_rng(0)
        s = State(grid8, rng.normal(size=grid8.shape))
        assert negative_part_norm(s) <= s.l2_norm()


class TestEntropy:
    def test_gaussian_entropy(self, fine_gauss):
        expected = -1.5 * (1.0 + np.log(2.0 * np.pi))
        assert abs(entropy(fine_gauss) - expected) < 1e-4

    def test_scaling_identity(self, fine_gauss):
        c = 2.5
        scaled = State(fine_gauss.grid, c * fine_gauss.values)
        m0 = moments(fine_gauss).mass
        expected = c * entropy(fine_gauss) + c * np.log(c) * m0
        assert abs(entropy(scaled) - expected) < 1e-8


class TestErrorNorms:
    def test_zero_for_equal(self, gauss8):
        assert error_norms(gauss8, gauss8) == (0.0, 0.0)

    def test_reduces_to_l2(self, grid8, gauss8, twog8):
        l2k, _ = error_norms(twog8, gauss8, k=0.0, alpha=0)
        assert l2k == pytest.approx(grid8.l2_norm(twog8.values - gauss8.values))

    def test_triangle_inequality(self, grid8):
        rng = np.random.default_rng(1)
        a, b, c = (State(grid8, rng.normal(size=grid8.shape)) for _ in range(3))
        dab, _ = error_norms(a, b, k=1.0, alpha=1)
        dbc, _ = error_norms(b, c, k=1.0, alpha=1)
        dac, _ = error_norms(a, c, k=1.0, alpha=1)
        assert dac <= dab + dbc + 1e-12

    def test_grid_mismatch(self, gauss8):
        other = maxwellian(VelocityGrid(3, 5.0, 8), 1.0, 0.0, 1.0)
        with pytest.raises(ValueError):
            error_norms(gauss8, other)


class TestTailBound:
    def test_compact_support(self, grid8, ws8_hs):
        # field supported strictly inside the inner window
        vals = np.zeros(grid8.shape)
        center = grid8.n // 2
        vals[center - 1 : center + 1, center - 1 : center + 1, center - 1 : center + 1] = 1.0
        s = State(grid8, vals)
        qu = q_u(s, ws8_hs)
        report = tail_moment_bound_check(s, qu, k=2, lam=1.0, inner_L=grid8.L / 2)
        assert report.ratio <= 1.0

    def test_gaussian_half_window(self, gauss8, ws8_hs):
        qu = q_u(gauss8, ws8_hs)
        report = tail_moment_bound_check(gauss8, qu, k=2, lam=1.0, inner_L=gauss8.grid.L / 2)
        assert report.ratio < 1.0

    def test_rhs_monotone_in_window(self, gauss8, ws8_hs):
        qu = q_u(gauss8, ws8_hs)
        r1 = tail_moment_bound_check(gauss8, qu, k=2, lam=1.0, inner_L=2.0)
        r2 = tail_moment_bound_check(gauss8, qu, k=2, lam=1.0, inner_L=4.0)
        assert r2.rhs < r1.rhs
