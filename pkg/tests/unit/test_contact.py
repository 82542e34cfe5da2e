"""Unit tests for Hamiltonians and their contact characteristic flow."""
import math

import numpy as np
import pytest

from hjminimax.contact.flow import (
    contact_vector_field,
    delta_H,
    flow_between,
    flow_contraction_check,
    flow_jacobian,
    flow_map,
    flow_trajectory,
    integrate_states,
    max_step,
)
from hjminimax.contact.hamiltonian import (
    HAMILTONIAN_KEYS,
    HamiltonianSpec,
    JetPoint,
    build_hamiltonian,
    bump_profile,
    grad_consistency,
    sample_support_violation,
)
from hjminimax.core.exceptions import (
    ConfigurationError,
    DomainError,
    EvaluationError,
    IntegrationError,
    UnknownRegistryKey,
)
from hjminimax.core.models import TimeInterval


class TestJetPoint:
    """Test jet points and their stacked state."""

    def test_single_point(self):
        p = JetPoint(x=0.5, y=-1.0, z=2.0)
        assert p.k == 1
        assert p.batch_shape == ()
        np.testing.assert_array_equal(p.state, [0.5, -1.0, 2.0])

    def test_batch_round_trip(self):
        state = np.arange(15.0).reshape(3, 5)
        p = JetPoint.from_state(state, k=2)
        assert p.batch_shape == (3,)
        np.testing.assert_array_equal(p.state, state)

    @pytest.mark.unit
    def test_mismatched_shapes(self):
        with pytest.raises(DomainError):
            JetPoint(x=np.zeros(2), y=np.zeros(3), z=0.0)

    @pytest.mark.unit
    def test_non_finite(self):
        with pytest.raises(DomainError):
            JetPoint(x=0.0, y=np.nan, z=0.0)


class TestBumpProfile:
    """Test the C^2 cutoff in momentum."""

    def test_plateau_and_support(self):
        beta, dbeta = bump_profile(np.array([0.0, 1.0, 2.0, 3.0, 5.0]), plateau=1.0, support=3.0)
        np.testing.assert_allclose(beta, [1.0, 1.0, 0.5, 0.0, 0.0])
        assert dbeta[0] == 0.0 and dbeta[-1] == 0.0
        assert dbeta[2] < 0

    def test_derivative_matches_difference(self):
        r = np.linspace(1.1, 2.9, 7)
        h = 1e-6
        _, dbeta = bump_profile(r, 1.0, 3.0)
        numeric = (bump_profile(r + h, 1.0, 3.0)[0] - bump_profile(r - h, 1.0, 3.0)[0]) / (2 * h)
        np.testing.assert_allclose(dbeta, numeric, atol=1e-6)

    @pytest.mark.unit
    def test_invalid_radii(self):
        with pytest.raises(ConfigurationError):
            bump_profile(np.zeros(1), plateau=2.0, support=1.0)


class TestRegistry:
    """Test construction of built-in Hamiltonians by key."""

    def test_all_keys_build(self):
        for key in HAMILTONIAN_KEYS:
            H = build_hamiltonian(key)
            assert H.k == 1
            assert H.admits_global_generating_function

    def test_unknown_key(self):
        with pytest.raises(UnknownRegistryKey) as exc:
            build_hamiltonian("eikonal")
        assert "discount" in exc.value.details["known"]

    def test_bad_parameter(self):
        with pytest.raises(ConfigurationError) as exc:
            build_hamiltonian("discount", curvature=2.0)
        assert exc.value.details["setting"] == "hamiltonian.params"

    def test_discount_bounds(self, discount_H):
        """H_z = 1 and |H_y| reaches at least the plateau slope."""
        assert discount_H.z_coefficient == 1.0
        assert discount_H.norm_dzH == pytest.approx(1.02)
        assert discount_H.norm_dyH >= 2.0
        assert not discount_H.compact_support

    def test_support_is_respected(self, transport_H, discount_H, bump_H):
        for H in (transport_H, discount_H, bump_H):
            assert sample_support_violation(H) == 0.0

    def test_analytic_gradients(self, nonconvex_H, bump_H, transport_H):
        for H in (nonconvex_H, bump_H, transport_H):
            assert grad_consistency(H) < 1e-5


class TestHamiltonianSpec:
    """Test evaluation guards and user-supplied Hamiltonians."""

    def test_wrong_dimension(self, discount_H):
        with pytest.raises(DomainError):
            discount_H.eval(0.0, np.zeros((3, 2)), np.zeros((3, 2)), np.zeros(3))

    def test_non_finite_value(self):
        H = HamiltonianSpec(
            name="broken",
            eval_fn=lambda t, x, y, z: np.full(np.shape(z), np.nan),
            grad_fn=lambda t, x, y, z: (np.zeros_like(x), np.zeros_like(y), np.zeros(np.shape(z))),
        )
        with pytest.raises(EvaluationError):
            H.eval(0.0, np.zeros((2, 1)), np.zeros((2, 1)), np.zeros(2))

    def test_from_function_with_difference_gradient(self):
        """Bounds of H = 0.3 z + 0.1 sin(x) are estimated without an analytic gradient."""
        H = HamiltonianSpec.from_function(
            "linear-z", lambda t, x, y, z: 0.3 * z + 0.1 * np.sin(x[..., 0]), support_radius_a=1.0)
        assert H.norm_dzH == pytest.approx(0.3 * 1.02, rel=1e-4)
        assert H.norm_dxH == pytest.approx(0.1 * 1.02, rel=1e-3)
        _, _, hz = H.grad(0.0, np.array([[0.2]]), np.array([[0.1]]), np.array([0.5]))
        assert hz[0] == pytest.approx(0.3, rel=1e-6)


class TestFlow:
    """Test RK4 integration of the characteristic equations."""

    def test_zero_flow_is_identity(self, zero_H):
        p = JetPoint(x=np.array([[0.3], [-1.0]]), y=np.array([[2.0], [0.5]]), z=np.array([1.0, -2.0]))
        q = flow_map(zero_H, TimeInterval(s=0.0, t=1.0), p)
        np.testing.assert_allclose(q.state, p.state)

    def test_transport_moves_at_constant_speed(self, transport_H):
        """x' = 1 on the plateau; y and z are conserved."""
        p = JetPoint(x=np.array([[0.0], [1.0]]), y=np.array([[0.5], [-1.5]]), z=np.array([0.2, 0.4]))
        q = flow_map(transport_H, TimeInterval(s=0.0, t=0.75), p)
        np.testing.assert_allclose(q.x[:, 0], [0.75, 1.75], atol=1e-12)
        np.testing.assert_allclose(q.y, p.y, atol=1e-12)
        np.testing.assert_allclose(q.z, p.z, atol=1e-12)

    def test_discount_characteristics(self, discount_H):
        """y = y0 e^-t and x = x0 + y0 (1 - e^-t) for H = z + y^2/2."""
        y0, t = 0.5, 0.8
        q = flow_map(discount_H, TimeInterval(s=0.0, t=t), JetPoint(x=0.1, y=y0, z=0.0))
        assert q.y[0] == pytest.approx(y0 * math.exp(-t), abs=1e-9)
        assert q.x[0] == pytest.approx(0.1 + y0 * (1 - math.exp(-t)), abs=1e-9)

    def test_backward_flow_inverts(self, bump_H):
        p = JetPoint(x=0.4, y=0.3, z=-0.2)
        forward = flow_between(bump_H, 0.0, 0.2, p)
        back = flow_between(bump_H, 0.2, 0.0, forward)
        np.testing.assert_allclose(back.state, p.state, atol=1e-9)

    def test_vector_field_of_discount(self, discount_H):
        dx, dy, dz = contact_vector_field(discount_H, 0.0, JetPoint(x=0.0, y=1.0, z=0.5))
        assert dx[0] == pytest.approx(1.0)
        assert dy[0] == pytest.approx(-1.0)
        assert dz == pytest.approx(1.0 - (0.5 + 0.5))

    def test_trajectory_shape(self, discount_H):
        times, states = flow_trajectory(discount_H, TimeInterval(s=0.0, t=1.0),
                                        JetPoint(x=0.0, y=1.0, z=0.0), steps=16)
        assert times.shape == (17,)
        assert states.shape == (17, 3)

    @pytest.mark.unit
    def test_blow_up_detected(self):
        """z' = 10 z leaves the magnitude cap."""
        H = HamiltonianSpec(
            name="growth",
            eval_fn=lambda t, x, y, z: -10.0 * np.asarray(z),
            grad_fn=lambda t, x, y, z: (np.zeros_like(x), np.zeros_like(y), np.full(np.shape(z), -10.0)),
        )
        with pytest.raises(IntegrationError):
            integrate_states(H, 0.0, 3.0, np.array([0.0, 1.0, 1.0]))

    def test_jacobian_of_zero_flow(self, zero_H):
        J = flow_jacobian(zero_H, TimeInterval(s=0.0, t=1.0), JetPoint(x=0.0, y=0.0, z=0.0))
        np.testing.assert_allclose(J, np.eye(3), atol=1e-9)


class TestStepLimits:
    """Test delta_H and the single-step limit."""

    def test_zero_hamiltonian_unbounded(self, zero_H):
        assert delta_H(zero_H) == math.inf
        assert max_step(zero_H) == math.inf

    def test_builtin_admits_any_step(self, discount_H):
        assert math.isfinite(delta_H(discount_H))
        assert max_step(discount_H) == math.inf

    def test_generic_hamiltonian_limited(self, bump_H):
        expected = math.log(2.0) / ((2.0 + bump_H.support_radius_a) * bump_H.c_H)
        assert delta_H(bump_H) == pytest.approx(expected)
        assert max_step(bump_H) == delta_H(bump_H)

    def test_contraction_below_delta(self, bump_H):
        """||1 - d phi|| < 1 for steps shorter than delta_H."""
        iv = TimeInterval(s=0.0, t=0.5 * delta_H(bump_H))
        report = flow_contraction_check(bump_H, iv, samples=10)
        assert report.passed
        assert report.step_ratio == pytest.approx(0.5)
