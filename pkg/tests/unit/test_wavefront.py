"""Unit tests for wave-front propagation, fold location and the section check."""
import math

import numpy as np
import pandas as pd
import pytest

from hjminimax.contact.hamiltonian import zero_hamiltonian
from hjminimax.core.exceptions import DomainError
from hjminimax.solvers.wavefront import (
    FRONT_COLUMNS,
    locate_first_fold,
    propagate_front,
    section_check,
)


def smoothed_cone(x):
    return -np.sqrt(np.asarray(x) ** 2 + 0.01)


class TestPropagation:
    """Test fronts of Hamiltonians with explicit characteristics."""

    def test_zero_hamiltonian_front_is_the_graph(self, zero_H, sin_v):
        x0 = np.linspace(-2.0, 2.0, 41)
        front = propagate_front(zero_H, sin_v, [0.3, 0.6], x0)
        sample = front.at(0.6)
        np.testing.assert_allclose(sample.x, x0)
        np.testing.assert_allclose(sample.z, np.sin(x0), atol=1e-12)
        assert np.all(sample.fold_flag == 1)
        assert front.first_folded_sample() is None

    def test_pure_discount_scales_values(self, pure_discount_H, sin_v):
        x0 = np.linspace(-1.0, 1.0, 21)
        sample = propagate_front(pure_discount_H, sin_v, [0.5], x0).samples[0]
        np.testing.assert_allclose(sample.x, x0, atol=1e-12)
        np.testing.assert_allclose(sample.z, math.exp(-0.5) * np.sin(x0), atol=1e-8)

    def test_discount_fan_overturns(self, discount_H):
        """dx/dx0 = 1 + v''(x0)(1 - e^-t) turns negative where v is concave."""
        x0 = np.linspace(-2.0, 2.0, 401)
        front = propagate_front(discount_H, smoothed_cone, [0.05, 0.3], x0)
        assert not front.at(0.05).folded
        late = front.at(0.3)
        assert late.folded
        assert np.any(late.fold_flag == -1)
        assert late.fold_positions().size >= 2
        assert front.first_folded_sample() is late

    def test_unsorted_times_are_sorted(self, zero_H, sin_v):
        front = propagate_front(zero_H, sin_v, [0.4, 0.1], np.linspace(-1, 1, 5))
        np.testing.assert_allclose(front.times, [0.1, 0.4])

    def test_explicit_slopes(self, pure_discount_H, sin_v):
        x0 = np.linspace(-1.0, 1.0, 5)
        sample = propagate_front(pure_discount_H, sin_v, [0.2], x0, slopes=np.full(5, 0.5)).samples[0]
        np.testing.assert_allclose(sample.y, 0.5 * math.exp(-0.2), atol=1e-9)

    @pytest.mark.unit
    def test_rejects_bad_input(self, zero_H, sin_v):
        with pytest.raises(DomainError):
            propagate_front(zero_hamiltonian(k=2), sin_v, [0.1], np.linspace(-1, 1, 5))
        with pytest.raises(DomainError):
            propagate_front(zero_H, sin_v, [0.1], np.array([0.0, 1.0]))
        with pytest.raises(DomainError):
            propagate_front(zero_H, sin_v, [0.1], np.linspace(-1, 1, 5), t0=0.2)

    @pytest.mark.unit
    def test_missing_sample_time(self, zero_H, sin_v):
        front = propagate_front(zero_H, sin_v, [0.1], np.linspace(-1, 1, 5))
        with pytest.raises(DomainError):
            front.at(0.2)


class TestFirstFold:
    def test_fold_time_of_smoothed_cone(self, discount_H):
        """The fan first overturns at 1 - e^-t = 1 / max|v''|, i.e. t = ln(1/0.9)."""
        x0 = np.linspace(-2.0, 2.0, 801)
        lo, hi = locate_first_fold(discount_H, smoothed_cone, x0, t_max=0.5)
        assert hi - lo <= 1e-3
        # central differences on the seed grid soften v''(0) slightly
        assert lo - 2e-3 <= -math.log(0.9) <= hi + 2e-3

    def test_no_fold_for_zero_hamiltonian(self, zero_H, sin_v):
        assert locate_first_fold(zero_H, sin_v, np.linspace(-2, 2, 41), t_max=1.0) is None


class TestSectionCheck:
    """Test that solution graphs are checked against the front."""

    def test_graph_lies_on_front(self, zero_H, sin_v):
        sample = propagate_front(zero_H, sin_v, [0.5], sin_v.nodes()).samples[0]
        report = section_check(sample, sin_v)
        assert report.fraction == pytest.approx(1.0)
        assert report.eligible == sin_v.n
        assert report.passed

    def test_shifted_graph_misses_front(self, zero_H, sin_v):
        sample = propagate_front(zero_H, sin_v, [0.5], sin_v.nodes()).samples[0]
        report = section_check(sample, sin_v.with_values(sin_v.values + 1.0))
        assert report.fraction == 0.0
        assert not report.passed
        assert report.misses.size == sin_v.n


class TestFrontExport:
    def test_csv_columns(self, tmp_path, zero_H, sin_v):
        front = propagate_front(zero_H, sin_v, [0.1, 0.2], np.linspace(-1, 1, 11))
        path = tmp_path / "front" / "front.csv"
        front.to_csv(path)
        frame = pd.read_csv(path)
        assert list(frame.columns) == FRONT_COLUMNS
        assert len(frame) == 22
