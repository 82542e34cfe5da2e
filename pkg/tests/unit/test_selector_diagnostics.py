"""Unit tests for the selector self-checks."""
import dataclasses
import math

import numpy as np
import pytest

from hjminimax.core.exceptions import IntegrationError
from hjminimax.core.models import GridSpec, TimeInterval
from hjminimax.generating.family import FamilySpec
from hjminimax.nonsmooth.grid_function import GridFunction
from hjminimax.selector import diagnostics
from hjminimax.selector.diagnostics import (
    gradient_inclusion_check,
    lipschitz_check,
    monotonicity_check,
    multi_step_value,
    partition_independence_check,
    stability_check,
    time_lipschitz_check,
    window_consistency_check,
)
from hjminimax.selector.minimax import SelectorWindow, minimax_step

pytestmark = pytest.mark.slow

OUT = GridSpec(lo=-1.0, hi=1.0, n=9)
STEP = TimeInterval(s=0.0, t=0.3)


class TestOperatorProperties:
    """Test order, slope and continuity properties of one minimax step."""

    def test_monotone(self, discount_H, abs_v, fast_cfg):
        above = abs_v.with_values(abs_v.values + 0.1)
        report = monotonicity_check(discount_H, STEP, abs_v, above, fast_cfg, OUT)
        assert report.passed
        assert report.violations == 0

    def test_lipschitz(self, discount_H, sin_v, fast_cfg):
        report = lipschitz_check(discount_H, STEP, sin_v, fast_cfg, OUT)
        assert report.passed
        assert report.bound >= 1.0

    def test_time_lipschitz(self, discount_H, sin_v, fast_cfg):
        report = time_lipschitz_check(discount_H, 0.0, 0.3, 0.2, sin_v, fast_cfg, OUT)
        assert report.passed

    def test_stability(self, discount_H, sin_v, fast_cfg):
        shifted = sin_v.with_values(sin_v.values + 0.05)
        report = stability_check(discount_H, STEP, sin_v, shifted, (-0.5, 0.5), fast_cfg, n=5)
        assert report.passed
        assert report.difference == pytest.approx(0.05 * math.exp(-0.3), abs=0.02)

    def test_window_consistency(self, discount_H, sin_v, fast_cfg):
        report = window_consistency_check(discount_H, STEP, sin_v, [-0.4, 0.0, 0.4], fast_cfg)
        assert report.passed


class TestFamilyChecks:
    """Test checks that compare the selector with the full generating family."""

    def test_partition_independence(self, discount_H, linear_v, fast_cfg):
        report = partition_independence_check(discount_H, TimeInterval(s=0.0, t=0.5), linear_v, 0.2,
                                              [1, 2], fast_cfg)
        assert set(report.values) == {1, 2}
        assert report.converged[1]
        assert report.converged[2]
        assert report.passed

    def test_gradient_inclusion(self, discount_H, linear_v, fast_cfg):
        report = gradient_inclusion_check(discount_H, TimeInterval(s=0.0, t=0.5), linear_v, 0.2,
                                          fast_cfg, fiber_points=41)
        assert report.hull is not None
        assert report.derivative == pytest.approx(0.5 * math.exp(-0.5), abs=report.tol)
        assert report.passed


class TestMultiStepValue:
    """Test the full-fiber search of multi-step families."""

    @pytest.fixture
    def kink_v(self):
        """v(x) = |x| on a coarse grid of [-2, 2]."""
        return GridFunction.from_callable(np.abs, -2.0, 2.0, 21)

    def test_kinked_data_does_not_diverge(self, zero_H, kink_v):
        report = partition_independence_check(zero_H, TimeInterval(s=0.0, t=0.25), kink_v, 0.0, [1, 2, 3])
        assert set(report.values) == {1, 2, 3}
        assert all(report.converged.values())
        assert report.spread <= report.tol
        assert report.passed

    def test_value_off_the_kink(self, zero_H, kink_v):
        fs = FamilySpec.with_steps(zero_H, TimeInterval(s=0.0, t=0.25), kink_v, 2)
        window = SelectorWindow(pad=0.3, y_bound=1.5, lip_bound=1.0)
        result = multi_step_value(fs, 0.5, window)
        assert result.converged
        assert result.value == pytest.approx(0.5, abs=result.grid_tol)
        np.testing.assert_allclose(result.fiber.x_prev[:, 0], 0.5, atol=0.05)

    def test_independent_of_single_step_result(self, mocker, discount_H, linear_v, fast_cfg):
        """A shifted single-step value shows up as spread instead of being reproduced."""
        def shifted(*args, **kwargs):
            result = minimax_step(*args, **kwargs)
            return dataclasses.replace(result, value=result.value + 5.0)

        iv = TimeInterval(s=0.0, t=0.5)
        honest = partition_independence_check(discount_H, iv, linear_v, 0.2, [1, 2], fast_cfg)
        mocker.patch.object(diagnostics, "minimax_step", side_effect=shifted)
        report = partition_independence_check(discount_H, iv, linear_v, 0.2, [1, 2], fast_cfg)
        assert report.values[2] == pytest.approx(honest.values[2], abs=1e-12)
        assert report.spread == pytest.approx(5.0, abs=honest.spread + 1e-9)
        assert not report.passed

    def test_solver_failure_reported(self, mocker, zero_H, kink_v):
        fs = FamilySpec.with_steps(zero_H, TimeInterval(s=0.0, t=0.25), kink_v, 2)
        mocker.patch.object(diagnostics, "family_eval", side_effect=IntegrationError(1, 1e9, 1e8))
        result = multi_step_value(fs, 0.0, SelectorWindow(pad=0.1, y_bound=1.45, lip_bound=1.0))
        assert not result.converged
        assert math.isnan(result.value)
        assert result.reason == "IntegrationError"
