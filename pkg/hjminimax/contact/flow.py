"""Contact characteristic flow of a Hamiltonian.

x' = dH/dy,  y' = -dH/dx - y dH/dz,  z' = y . dH/dy - H
"""
from dataclasses import dataclass
import math

import numpy as np

from ..core.config import settings
from ..core.exceptions import IntegrationError
from ..core.logging_config import get_logger
from ..core.models import TimeInterval
from .hamiltonian import HamiltonianSpec, JetPoint

logger = get_logger(__name__)


def _vector_field(H: HamiltonianSpec, t: float, state: np.ndarray) -> np.ndarray:
    k = H.k
    x, y, z = state[..., :k], state[..., k:2 * k], state[..., 2 * k]
    value = H.eval(t, x, y, z)
    hx, hy, hz = H.grad(t, x, y, z)
    dz = np.sum(y * hy, axis=-1) - value
    return np.concatenate([hy, -hx - y * hz[..., None], dz[..., None]], axis=-1)


def contact_vector_field(H: HamiltonianSpec, t: float, p: JetPoint):
    """Characteristic velocity (dx, dy, dz) at time t and jet p."""
    field = _vector_field(H, t, p.state)
    k = p.k
    return field[..., :k], field[..., k:2 * k], field[..., 2 * k]


def rk4_step(H: HamiltonianSpec, t: float, state: np.ndarray, h: float) -> np.ndarray:
    """Takes a single 4th-order step."""
    k1 = _vector_field(H, t, state)
    k2 = _vector_field(H, t + 0.5 * h, state + 0.5 * h * k1)
    k3 = _vector_field(H, t + 0.5 * h, state + 0.5 * h * k2)
    k4 = _vector_field(H, t + h, state + h * k3)
    return state + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0


def integrate_states(
    H: HamiltonianSpec,
    t_from: float,
    t_to: float,
    state: np.ndarray,
    steps: int | None = None,
    keep_trajectory: bool = False,
):
    """Fixed-step RK4 from t_from to t_to (either direction) on stacked states."""
    steps = steps or settings.HJ_RK4_STEPS
    if steps < 1:
        raise ValueError("steps must be >= 1")
    state = np.array(state, dtype=float)
    if t_to == t_from:
        if keep_trajectory:
            return np.array([t_from]), state[None]
        return state

    cap = settings.HJ_BLOWUP_CAP
    h = (t_to - t_from) / steps
    trajectory = [state] if keep_trajectory else None
    for i in range(steps):
        state = rk4_step(H, t_from + i * h, state, h)
        peak = float(np.max(np.abs(state))) if state.size else 0.0
        if not math.isfinite(peak) or peak > cap:
            raise IntegrationError(step=i + 1, value=peak, cap=cap)
        if keep_trajectory:
            trajectory.append(state)

    if keep_trajectory:
        return t_from + h * np.arange(steps + 1), np.stack(trajectory)
    return state


def flow_map(H: HamiltonianSpec, iv: TimeInterval, p: JetPoint, steps: int | None = None) -> JetPoint:
    """phi^{s,t}(p) by fixed-step RK4; the identity when s == t."""
    if iv.length == 0:
        return p
    return JetPoint.from_state(integrate_states(H, iv.s, iv.t, p.state, steps), p.k)


def flow_between(H: HamiltonianSpec, t_from: float, t_to: float, p: JetPoint,
                 steps: int | None = None) -> JetPoint:
    """Flow that may run backward in time (t_to < t_from)."""
    if t_from == t_to:
        return p
    return JetPoint.from_state(integrate_states(H, t_from, t_to, p.state, steps), p.k)


def flow_trajectory(H: HamiltonianSpec, iv: TimeInterval, p: JetPoint,
                    steps: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """RK4 node times and stacked states (steps+1, ..., 2k+1) along the characteristic."""
    return integrate_states(H, iv.s, iv.t, p.state, steps, keep_trajectory=True)


def delta_H(H: HamiltonianSpec) -> float:
    """log 2 / ((2 + a) c_H); +inf for c_H = 0."""
    if H.c_H <= 0:
        return math.inf
    return math.log(2.0) / ((2.0 + H.support_radius_a) * H.c_H)


def max_step(H: HamiltonianSpec) -> float:
    """Longest step on which a single generating function of the flow is available."""
    if H.admits_global_generating_function:
        return math.inf
    return delta_H(H)


def flow_jacobian(H: HamiltonianSpec, iv: TimeInterval, p: JetPoint,
                  steps: int | None = None, rel_step: float | None = None) -> np.ndarray:
    """Central finite-difference Jacobian d(phi^{s,t})(p), shape (2k+1, 2k+1)."""
    rel = rel_step or settings.HJ_FD_STEP
    base = p.state
    dim = base.shape[-1]
    eps = rel * (1.0 + np.abs(base))
    shifts = np.diag(eps)
    stacked = np.concatenate([base + shifts, base - shifts], axis=0)
    images = integrate_states(H, iv.s, iv.t, stacked, steps)
    return ((images[:dim] - images[dim:]) / (2.0 * eps[:, None])).T


@dataclass
class ContractionReport:
    max_deviation: float
    passed: bool
    samples: int
    step_ratio: float


def flow_contraction_check(H: HamiltonianSpec, iv: TimeInterval, samples: int = 50,
                           seed: int = 0) -> ContractionReport:
    """Sampled max of ||1 - d phi^{s,t}|| (spectral norm); passes when below 1."""
    dH = delta_H(H)
    if iv.length >= dH:
        logger.warning("contraction_check_beyond_delta_h", length=iv.length, delta_h=dH)

    rng = np.random.default_rng(seed)
    k = H.k
    a = H.support_radius_a if H.support_radius_a > 0 else 1.0
    worst = 0.0
    for _ in range(samples):
        p = JetPoint(x=rng.uniform(-1.0, 1.0, size=k),
                     y=rng.uniform(-1.2 * a, 1.2 * a, size=k),
                     z=rng.uniform(-1.0, 1.0))
        J = flow_jacobian(H, iv, p)
        worst = max(worst, float(np.linalg.norm(np.eye(J.shape[0]) - J, ord=2)))

    report = ContractionReport(
        max_deviation=worst,
        passed=worst < 1.0,
        samples=samples,
        step_ratio=iv.length / dH if math.isfinite(dH) else 0.0,
    )
    logger.debug("contraction_check", max_deviation=worst, passed=report.passed)
    return report
