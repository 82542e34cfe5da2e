"""Unit tests for iterated minimax solutions and the convergence harness."""
import json
from types import SimpleNamespace

import numpy as np
import pandas as pd
import pytest

from hjminimax.contact.flow import max_step
from hjminimax.core.exceptions import NodeError, WindowError
from hjminimax.core.models import GridSpec, MinimaxConfig, Partition
from hjminimax.solvers import iterated
from hjminimax.solvers.iterated import (
    admissible_partition,
    convergence_study,
    iterated_minimax,
    lipschitz_envelope,
    sup_bound,
    trace_error,
    uniform_partition,
)
from hjminimax.solvers.reference import lax_friedrichs_solve

OUT = GridSpec(lo=-1.0, hi=1.0, n=9)
FINE = GridSpec(lo=-1.0, hi=1.0, n=201)


class TestAdmissiblePartition:
    """Test subdivision of gaps beyond the step limit."""

    def test_unbounded_step_keeps_partition(self, discount_H):
        zeta = uniform_partition(1.0, 0.5)
        assert admissible_partition(discount_H, zeta) is zeta

    def test_long_gaps_subdivided(self, bump_H):
        zeta = Partition(times=(0.0, 1.0))
        refined = admissible_partition(bump_H, zeta)
        assert refined.norm <= 0.9 * max_step(bump_H) + 1e-12
        assert (refined.start, refined.end) == (0.0, 1.0)
        assert refined.n_steps > 1


class TestIteratedMinimax:
    """Test snapshots of the iterated operator."""

    @pytest.fixture
    def trace(self, zero_H, abs_v, fast_cfg):
        return iterated_minimax(zero_H, abs_v, uniform_partition(0.5, 0.25), fast_cfg, OUT,
                                sample_times=[0.1])

    def test_snapshot_times(self, trace):
        np.testing.assert_allclose(trace.times, [0.0, 0.25, 0.5])
        assert trace.all_times() == pytest.approx([0.0, 0.1, 0.25, 0.5])
        assert len(trace.certificates) == 3

    def test_zero_hamiltonian_is_stationary(self, trace):
        for t in trace.all_times():
            np.testing.assert_allclose(trace.at(t).values, np.abs(OUT.nodes()), atol=0.05)
        assert trace.final.n == OUT.n

    def test_missing_time(self, trace):
        with pytest.raises(KeyError):
            trace.at(0.3)

    def test_frame(self, trace):
        frame = trace.to_frame()
        assert list(frame.columns) == ["t", "x", "u"]
        assert len(frame) == 4 * OUT.n

    def test_failing_node_reports_step(self, zero_H, abs_v):
        cfg = MinimaxConfig(grid_x0=21, grid_y=21, refine_levels=1, y_bound=0.3)
        with pytest.raises(NodeError) as exc:
            iterated_minimax(zero_H, abs_v, uniform_partition(0.5, 0.25), cfg, OUT)
        assert exc.value.details["step_index"] == 0
        assert isinstance(exc.value.cause, WindowError)


class TestBounds:
    def test_lipschitz_envelope(self, zero_H, discount_H, abs_v):
        assert lipschitz_envelope(zero_H, abs_v, 1.0) == pytest.approx(1.0)
        assert lipschitz_envelope(discount_H, abs_v, 1.0) > 1.0

    def test_sup_bound(self, zero_H, abs_v):
        assert sup_bound(zero_H, abs_v, 1.0, (-1.01, 1.01)) == pytest.approx(1.0)


@pytest.mark.slow
class TestConvergenceStudy:
    """Test the error table against a reference solution."""

    @pytest.fixture
    def table(self, zero_H, abs_v, fast_cfg):
        reference = lax_friedrichs_solve(zero_H, abs_v, 0.5)
        partitions = [uniform_partition(0.5, 0.25), uniform_partition(0.5, 0.5)]
        return convergence_study(zero_H, abs_v, partitions, reference, (-0.5, 0.5), fast_cfg, OUT)

    def test_rows_sorted_by_norm(self, table):
        assert table.frame["norm"].tolist() == [0.5, 0.25]
        assert table.frame["steps"].tolist() == [1, 2]

    def test_verdict(self, table):
        assert set(table.verdict) >= {"decreasing", "decreasing_fraction", "rate", "final_error",
                                      "threshold", "final_below_threshold", "ratio_ok",
                                      "coarsest_over_finest", "grid_tol", "passed"}
        assert table.verdict["final_below_threshold"]
        assert json.loads(table.verdict_json())["threshold"] == 0.05

    def test_csv(self, tmp_path, table):
        path = tmp_path / "convergence.csv"
        table.to_csv(path)
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["norm", "steps", "sup_error", "final_error", "final_lip"]

    def test_trace_error(self, zero_H, abs_v, fast_cfg):
        reference = lax_friedrichs_solve(zero_H, abs_v, 0.25)
        trace = iterated_minimax(zero_H, abs_v, uniform_partition(0.25, 0.25), fast_cfg, OUT)
        errors = trace_error(trace, reference, (-0.5, 0.5))
        assert errors["t"].tolist() == [0.0, 0.25]
        assert errors["error"].iloc[0] == pytest.approx(0.0, abs=1e-12)


class TestConvergenceVerdict:
    """Test the trend verdict on prescribed error columns."""

    NORMS = (0.5, 0.25, 0.125)

    @pytest.fixture
    def study(self, mocker):
        def run(errors, threshold=0.5):
            by_norm = dict(zip(self.NORMS, errors))
            mocker.patch.object(iterated, "iterated_minimax",
                                side_effect=lambda H, v, zeta, cfg, out: SimpleNamespace(partition=zeta,
                                                                                         certificates=(1.0,)))
            mocker.patch.object(iterated, "trace_error",
                                side_effect=lambda trace, ref, K: pd.DataFrame(
                                    {"t": [0.0, 1.0], "error": [0.0, by_norm[trace.partition.norm]]}))
            partitions = [uniform_partition(1.0, n) for n in self.NORMS]
            return convergence_study(None, None, partitions, None, (-0.5, 0.5), out_grid=FINE,
                                     threshold=threshold).verdict
        return run

    def test_tenfold_reduction_passes(self, study):
        verdict = study([1.0, 0.3, 0.1])
        assert verdict["grid_tol"] == pytest.approx(0.005)
        assert verdict["decreasing"] and verdict["ratio_ok"]
        assert verdict["coarsest_over_finest"] == pytest.approx(10.0)
        assert verdict["passed"]

    def test_small_increase_is_not_decreasing(self, study):
        verdict = study([0.4, 0.41, 0.05])
        assert verdict["decreasing_fraction"] == 0.5
        assert not verdict["decreasing"]
        assert not verdict["passed"]

    def test_fourfold_reduction_fails_ratio(self, study):
        verdict = study([0.4, 0.2, 0.1])
        assert verdict["decreasing"]
        assert not verdict["ratio_ok"]
        assert not verdict["passed"]

    def test_errors_at_grid_floor(self, study):
        verdict = study([1e-3, 2e-3, 1e-3])
        assert verdict["decreasing"] and verdict["ratio_ok"]
        assert verdict["passed"]

    def test_single_partition_has_no_ratio(self, study):
        study([0.1, 0.1, 0.1])
        verdict = convergence_study(None, None, [uniform_partition(1.0, 0.5)], None, (-0.5, 0.5),
                                    out_grid=FINE).verdict
        assert verdict["coarsest_over_finest"] is None
        assert not verdict["ratio_ok"]
