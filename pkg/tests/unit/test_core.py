"""Unit tests for settings, value objects, errors, retries and logging."""
import logging

import numpy as np
import pydantic
import pytest
import structlog

from hjminimax.core.config import Settings
from hjminimax.core.exceptions import (
    CFLViolation,
    ConfigurationError,
    DomainError,
    GridSpecError,
    HJSolverError,
    NodeError,
    NumericalError,
    ShootingError,
    UnknownRegistryKey,
    ValidationError,
    WindowError,
)
from hjminimax.core.logging_config import bind_run_context, get_logger, log_level_for, setup_logging
from hjminimax.core.models import CutoffSpec, GridSpec, MinimaxConfig, Partition, TimeInterval
from hjminimax.core.retry import retry_shooting, safe_call


class TestSettings:
    """Test environment-driven numerical defaults."""

    def test_defaults(self):
        """Test the documented defaults."""
        s = Settings(_env_file=None)
        assert s.HJ_RK4_STEPS == 64
        assert s.HJ_GRID_X0 == 41
        assert s.HJ_REFINE_LEVELS == 4
        assert s.HJ_LF_CFL == 0.9
        assert s.HJ_THREADS == 1

    def test_environment_override(self, monkeypatch):
        """Test that HJ_* variables override defaults, case-insensitively."""
        monkeypatch.setenv("hj_grid_y", "61")
        monkeypatch.setenv("HJ_LOG_JSON", "true")
        s = Settings(_env_file=None)
        assert s.HJ_GRID_Y == 61
        assert s.HJ_LOG_JSON is True


class TestTimeInterval:
    """Test time interval validation."""

    def test_length_and_split(self):
        iv = TimeInterval(s=0.5, t=1.5)
        left, right = iv.split(1.0)
        assert iv.length == 1.0
        assert (left.s, left.t, right.s, right.t) == (0.5, 1.0, 1.0, 1.5)

    def test_degenerate_interval_allowed(self):
        """s == t is the identity step."""
        assert TimeInterval(s=0.3, t=0.3).length == 0.0

    def test_reversed_interval_rejected(self):
        with pytest.raises(ValueError):
            TimeInterval(s=1.0, t=0.5)

    def test_split_outside_rejected(self):
        with pytest.raises(ValueError):
            TimeInterval(s=0.0, t=1.0).split(2.0)

    def test_frozen(self):
        iv = TimeInterval(s=0.0, t=1.0)
        with pytest.raises(ValueError):
            iv.t = 2.0


class TestPartition:
    """Test partitions and their step function."""

    def test_from_norm(self):
        """Mesh at most the requested norm."""
        p = Partition.from_norm(1.0, 0.3)
        assert p.n_steps == 4
        assert p.norm == pytest.approx(0.25)
        assert p.start == 0.0 and p.end == 1.0

    def test_step_function(self):
        p = Partition(times=(0.0, 0.25, 0.5, 1.0))
        assert p.step_fn(0.0) == 0.0
        assert p.step_fn(0.3) == 0.25
        assert p.step_fn(0.5) == 0.5
        assert p.step_fn(2.0) == 1.0

    def test_step_function_before_start(self):
        with pytest.raises(ValueError):
            Partition(times=(0.5, 1.0)).step_fn(0.1)

    def test_not_increasing_rejected(self):
        with pytest.raises(ValueError):
            Partition(times=(0.0, 0.5, 0.5))

    def test_intervals(self):
        ivs = Partition(times=(0.0, 0.4, 1.0)).intervals()
        assert [(iv.s, iv.t) for iv in ivs] == [(0.0, 0.4), (0.4, 1.0)]

    def test_refine_keeps_nodes(self):
        """Refinement subdivides long gaps and keeps every original node."""
        p = Partition(times=(0.0, 0.1, 1.0))
        refined = p.refine(0.25)
        assert set(p.times) <= set(refined.times)
        assert refined.norm <= 0.25 + 1e-12
        assert refined.n_steps == 1 + 4

    def test_refine_infinite_gap_is_identity(self):
        p = Partition(times=(0.0, 1.0))
        assert p.refine(float("inf")).times == p.times


class TestGridSpec:
    def test_nodes_and_spacing(self):
        g = GridSpec(lo=-1.0, hi=1.0, n=5)
        assert g.dx == 0.5
        np.testing.assert_allclose(g.nodes(), [-1.0, -0.5, 0.0, 0.5, 1.0])

    def test_reversed_bounds_rejected(self):
        with pytest.raises(ValueError):
            GridSpec(lo=1.0, hi=0.0, n=5)


class TestMinimaxConfig:
    def test_defaults_follow_settings(self):
        cfg = MinimaxConfig()
        assert cfg.grid_x0 == 41
        assert cfg.x0_window_pad is None

    def test_small_grid_rejected(self):
        with pytest.raises(ValueError):
            MinimaxConfig(grid_x0=5)

    @pytest.mark.parametrize("model, field, value", [
        (MinimaxConfig(), "grid_x0", 81),
        (TimeInterval(s=0.0, t=1.0), "t", 2.0),
        (GridSpec(lo=-1.0, hi=1.0, n=5), "n", 7),
        (CutoffSpec(plateau=1.0, max_slope=0.75), "plateau", 2.0),
    ])
    def test_models_are_frozen(self, model, field, value):
        with pytest.raises(pydantic.ValidationError):
            setattr(model, field, value)

    def test_cutoff_support(self):
        spec = CutoffSpec(plateau=1.0, max_slope=0.75)
        assert spec.width == pytest.approx(2.5)
        assert spec.support == pytest.approx(3.5)


class TestExceptions:
    """Test the error hierarchy and exit codes."""

    def test_exit_codes(self):
        assert NumericalError("x").exit_code == 3
        assert ValidationError("x").exit_code == 2
        assert ShootingError(5, 1.0).exit_code == 3
        assert CFLViolation(1.2, 0.9).exit_code == 2

    def test_validation_family(self):
        """CFL, registry and grid errors are configuration errors."""
        for err in (CFLViolation(1.2, 0.9), UnknownRegistryKey("hamiltonian.key", "nope", ["zero"]),
                    GridSpecError("domain", "bad")):
            assert isinstance(err, ConfigurationError)
            assert isinstance(err, HJSolverError)

    def test_unknown_key_lists_known(self):
        err = UnknownRegistryKey("initial.key", "nope", ["sin", "abs"])
        assert err.details["known"] == ["abs", "sin"]
        assert "abs, sin" in err.message

    def test_node_error_wraps_cause(self):
        cause = WindowError(0.5, "y window edge")
        err = NodeError(0.5, cause, step_index=2)
        assert err.cause is cause
        assert err.details["x"] == 0.5
        assert err.details["step_index"] == 2
        assert err.details["cause"] == "WindowError"
        assert "step 2" in err.message

    def test_domain_error_reason(self):
        err = DomainError("not convex")
        assert err.details == {"reason": "not convex"}


class TestRetry:
    """Test damped retries of shooting."""

    def test_damping_halves_each_attempt(self):
        seen = []

        @retry_shooting(max_attempts=3)
        def solve(damping=1.0):
            seen.append(damping)
            if len(seen) < 3:
                raise ShootingError(10, 1.0)
            return damping

        assert solve() == 0.25
        assert seen == [1.0, 0.5, 0.25]

    def test_reraises_after_last_attempt(self):
        @retry_shooting(max_attempts=2)
        def solve(damping=1.0):
            raise ShootingError(10, 1.0)

        with pytest.raises(ShootingError):
            solve()

    def test_explicit_damping_bypasses_retry(self):
        calls = []

        @retry_shooting(max_attempts=3)
        def solve(damping=1.0):
            calls.append(damping)
            raise ShootingError(1, 1.0)

        with pytest.raises(ShootingError):
            solve(damping=0.1)
        assert calls == [0.1]

    def test_other_errors_not_retried(self):
        calls = []

        @retry_shooting(max_attempts=3)
        def solve(damping=1.0):
            calls.append(damping)
            raise DomainError("bad")

        with pytest.raises(DomainError):
            solve()
        assert len(calls) == 1

    def test_safe_call_default(self):
        def failing():
            raise DomainError("bad")

        assert safe_call(failing, default=-1.0) == -1.0
        assert safe_call(lambda a: a + 1, 1) == 2


class TestLogging:
    def test_level_for_verbosity(self):
        assert log_level_for(0) == "WARNING"
        assert log_level_for(1) == "INFO"
        assert log_level_for(3) == "DEBUG"

    def test_setup_writes_json_file(self, tmp_path):
        log_file = tmp_path / "logs" / "run.log"
        setup_logging(log_level="INFO", json_logs=True, log_file=log_file)
        logging.getLogger("hjminimax.test").info("hello")
        for handler in logging.root.handlers:
            handler.flush()
        assert log_file.exists()
        assert '"message": "hello"' in log_file.read_text()

    def test_bind_run_context(self):
        bind_run_context(subcommand="compare", seed=3)
        ctx = structlog.contextvars.get_contextvars()
        assert ctx == {"subcommand": "compare", "seed": 3}
        structlog.contextvars.clear_contextvars()

    def test_get_logger(self):
        assert get_logger(__name__) is not None
