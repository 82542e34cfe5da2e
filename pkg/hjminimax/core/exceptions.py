"""Custom exception hierarchy for hjminimax."""

import numpy as np


def _as_list(point) -> list:
    return np.atleast_1d(np.asarray(point, dtype=float)).tolist()


class HJSolverError(Exception):
    """Base exception for all hjminimax errors."""

    exit_code = 1

    def __init__(self, message: str, details: dict | None = None):
        self.message = message
        self.details = details or {}
        super().__init__(self.message)


# Numerical errors
class NumericalError(HJSolverError):
    """Base class for failures of a numerical procedure."""

    exit_code = 3


class EvaluationError(NumericalError):
    """Hamiltonian evaluation returned a non-finite value."""

    def __init__(self, point, quantity: str = "H"):
        super().__init__(
            message=f"Non-finite {quantity} evaluation",
            details={"point": _as_list(point), "quantity": quantity}
        )


class IntegrationError(NumericalError):
    """Characteristic flow left the admissible magnitude range."""

    def __init__(self, step: int, value: float, cap: float):
        super().__init__(
            message=f"Flow blow-up at RK4 step {step}: |state| = {value:.3e} exceeds cap {cap:.1e}",
            details={"step": step, "value": value, "cap": cap}
        )


class ShootingError(NumericalError):
    """Newton shooting for the source momentum did not converge."""

    def __init__(self, iterations: int, residual: float, message: str = ""):
        super().__init__(
            message=message or (
                f"Shooting did not converge in {iterations} iterations "
                f"(residual {residual:.3e}); step too long or c_H too small"
            ),
            details={"iterations": iterations, "residual": residual}
        )


class ConditioningError(NumericalError):
    """Singular or ill-conditioned shooting Jacobian."""

    def __init__(self, cond: float):
        super().__init__(
            message=f"Shooting Jacobian is singular (condition number {cond:.3e})",
            details={"cond": cond}
        )


class TruncationError(NumericalError):
    """Truncation constants of a generating family could not be certified."""

    def __init__(self, reason: str):
        super().__init__(
            message=f"Cannot truncate generating family: {reason}",
            details={"reason": reason}
        )


class WindowError(NumericalError):
    """Minimax saddle found on the boundary of the search window."""

    def __init__(self, x: float, which: str):
        super().__init__(
            message=f"Minimax window too small at x={x:.6g} ({which}); increase x0_window_pad or y_bound",
            details={"x": x, "which": which}
        )


class NodeError(NumericalError):
    """A node of a grid sweep failed; wraps the underlying error."""

    def __init__(self, x: float, cause: HJSolverError, step_index: int | None = None):
        details = {"x": x, "cause": type(cause).__name__, **cause.details}
        if step_index is not None:
            details["step_index"] = step_index
        where = f"x={x:.6g}" if step_index is None else f"step {step_index}, x={x:.6g}"
        super().__init__(
            message=f"Node failure at {where}: {cause.message}",
            details=details
        )
        self.cause = cause


class DomainError(NumericalError):
    """Input outside the domain where a formula applies."""

    def __init__(self, reason: str):
        super().__init__(
            message=f"Domain error: {reason}",
            details={"reason": reason}
        )


# Validation errors
class ValidationError(HJSolverError):
    """Base class for invalid user input."""

    exit_code = 2


class ConfigurationError(ValidationError):
    """Configuration error."""

    def __init__(self, setting: str, message: str):
        super().__init__(
            message=f"Configuration error for {setting}: {message}",
            details={"setting": setting}
        )


class CFLViolation(ConfigurationError):
    """Courant number above the monotonicity limit of the reference scheme."""

    def __init__(self, cfl: float, limit: float):
        super().__init__(
            setting="reference.cfl",
            message=f"CFL number {cfl:.3g} exceeds limit {limit:.3g}"
        )
        self.details.update({"cfl": cfl, "limit": limit})


class UnknownRegistryKey(ConfigurationError):
    """Unknown Hamiltonian or initial-data key."""

    def __init__(self, kind: str, key: str, known: list[str]):
        super().__init__(
            setting=kind,
            message=f"Unknown key '{key}'; expected one of {', '.join(sorted(known))}"
        )
        self.details.update({"key": key, "known": sorted(known)})


class GridSpecError(ConfigurationError):
    """Malformed grid specification."""

    def __init__(self, field: str, reason: str):
        super().__init__(setting=field, message=reason)
