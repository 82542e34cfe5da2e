"""Unit tests for the Lax-Friedrichs reference scheme and the Hopf-Lax formula."""
import math

import numpy as np
import pytest

from hjminimax.contact.hamiltonian import discount_hamiltonian
from hjminimax.core.exceptions import CFLViolation, ConfigurationError, DomainError
from hjminimax.nonsmooth.grid_function import GridFunction
from hjminimax.solvers.reference import (
    convexity_defect,
    hopf_lax_discount,
    lax_friedrichs_solve,
    legendre_transform,
    lf_monotone_check,
    lf_refinement_study,
    lf_time_step,
)


class TestTimeStep:
    """Test the CFL-limited step."""

    def test_step_divides_horizon(self, discount_H):
        dt, n = lf_time_step(discount_H, 0.05, 0.5, 0.9)
        assert dt * n == pytest.approx(0.5)
        assert dt * discount_H.norm_dyH <= 0.9 * 0.05 / 2 + 1e-12

    def test_slow_hamiltonian_uses_speed_floor(self, zero_H):
        dt, _ = lf_time_step(zero_H, 0.1, 1.0, 0.9)
        assert dt <= 0.9 * 0.1 / (2 * 0.5) + 1e-12

    @pytest.mark.unit
    def test_cfl_out_of_range(self, zero_H):
        with pytest.raises(CFLViolation):
            lf_time_step(zero_H, 0.1, 1.0, 1.0)
        with pytest.raises(CFLViolation):
            lf_time_step(zero_H, 0.1, 1.0, 0.0)

    def test_monotone_at_default_step(self, discount_H):
        dt, _ = lf_time_step(discount_H, 0.05, 0.5, 0.9)
        assert lf_monotone_check(discount_H, 0.05, dt)


class TestLaxFriedrichs:
    """Test the scheme against solutions known in closed form."""

    def test_zero_hamiltonian_keeps_data(self, zero_H, sin_v):
        sol = lax_friedrichs_solve(zero_H, sin_v, 0.5)
        np.testing.assert_allclose(sol.final.values, sin_v.values, atol=1e-12)

    def test_pure_discount_decays(self, pure_discount_H, sin_v):
        """H = z gives u = (1 - dt)^n v on the grid and e^-T v in the limit."""
        T = 0.5
        sol = lax_friedrichs_solve(pure_discount_H, sin_v, T)
        steps = len(sol.times) - 1
        np.testing.assert_allclose(sol.final.values, (1 - sol.dt) ** steps * sin_v.values, atol=1e-12)
        np.testing.assert_allclose(sol.final.values, math.exp(-T) * sin_v.values, atol=1e-2)

    def test_transport(self, transport_H, sin_v):
        T = 0.25
        sol = lax_friedrichs_solve(transport_H, sin_v, T, dx=0.01)
        x = np.linspace(-2.0, 2.0, 41)
        np.testing.assert_allclose(sol.final(x), np.sin(x - T), atol=0.02)

    def test_zero_horizon(self, discount_H, sin_v):
        sol = lax_friedrichs_solve(discount_H, sin_v, 0.0)
        assert sol.values.shape[0] == 2
        np.testing.assert_array_equal(sol.values[0], sol.values[1])

    def test_store_every(self, discount_H, sin_v):
        sol = lax_friedrichs_solve(discount_H, sin_v, 0.2, store_every=5)
        assert sol.times[0] == 0.0
        assert sol.T == pytest.approx(0.2)
        assert len(sol.times) < 0.2 / sol.dt

    def test_interpolation_in_time(self, pure_discount_H, sin_v):
        sol = lax_friedrichs_solve(pure_discount_H, sin_v, 0.5)
        mid = 0.5 * (sol.times[1] + sol.times[2])
        np.testing.assert_allclose(sol.at(mid).values, 0.5 * (sol.values[1] + sol.values[2]))
        with pytest.raises(DomainError):
            sol.at(0.75)

    def test_frame(self, discount_H, sin_v):
        sol = lax_friedrichs_solve(discount_H, sin_v, 0.1, domain=(-1.0, 1.0))
        frame = sol.to_frame()
        assert list(frame.columns) == ["t", "x", "u"]
        assert len(frame) == len(sol.times) * sol.grid.n

    @pytest.mark.unit
    def test_rejects_bad_input(self, discount_H, sin_v):
        with pytest.raises(ConfigurationError):
            lax_friedrichs_solve(discount_H, sin_v, -1.0)
        with pytest.raises(ConfigurationError):
            lax_friedrichs_solve(discount_H, sin_v, 0.5, dx=10.0)
        with pytest.raises(ConfigurationError):
            lax_friedrichs_solve(discount_hamiltonian(k=2), sin_v, 0.5)

    def test_refinement_study(self, discount_H, sin_v):
        frame = lf_refinement_study(discount_H, sin_v, 0.2, 0.1, levels=3, domain=(-1.0, 1.0))
        assert list(frame.columns) == ["dx", "dt", "change", "constant"]
        assert len(frame) == 2
        assert frame["change"].iloc[-1] < frame["change"].iloc[0]


class TestLegendre:
    def test_quadratic_is_self_dual(self):
        ell = legendre_transform(lambda p: 0.5 * p ** 2, (-3.0, 3.0))
        q = np.array([-1.5, 0.0, 0.4, 2.0])
        np.testing.assert_allclose(ell(q), 0.5 * q ** 2, atol=1e-9)

    def test_convexity_defect(self):
        assert convexity_defect(lambda p: p ** 2, (-1.0, 1.0)) == 0.0
        assert convexity_defect(lambda p: -p ** 2, (-1.0, 1.0)) == pytest.approx(-2.0, rel=1e-6)


class TestHopfLax:
    """Test the discounted Hopf-Lax formula."""

    def test_matches_exact_solution(self, discount_H, linear_v):
        t = 0.5
        x = np.linspace(-1.0, 1.0, 5)
        profile = discount_H.profile
        u = hopf_lax_discount(profile.scalar, profile.scalar_derivative, linear_v, t, x)
        expected = math.exp(-t) * 0.5 * x - 0.125 * math.exp(-t) * (1 - math.exp(-t))
        np.testing.assert_allclose(u, expected, atol=1e-5)

    def test_zero_time(self, discount_H, sin_v):
        profile = discount_H.profile
        assert hopf_lax_discount(profile.scalar, profile.scalar_derivative, sin_v, 0.0, 0.3) == \
            pytest.approx(float(sin_v(0.3)))

    def test_undiscounted_initial_data(self, discount_H):
        """Dropping the e^-t factor on v changes only the data term for constant v."""
        profile = discount_H.profile
        v = GridFunction.from_callable(lambda x: np.ones_like(x), -3.0, 3.0, 61)
        u = hopf_lax_discount(profile.scalar, profile.scalar_derivative, v, 0.4, 0.0,
                              discount_initial=False)
        assert u == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.unit
    def test_nonconvex_rejected(self, nonconvex_H, abs_v):
        profile = nonconvex_H.profile
        with pytest.raises(DomainError):
            hopf_lax_discount(profile.scalar, profile.scalar_derivative, abs_v, 0.5, 0.0)
