"""Generating function Phi^{s,t}(x, Y, z) of a short-time contact flow.

Phi is evaluated by shooting: solve momentum(phi^{s,t}(x, y, z)) = Y for the
source momentum y, then read Phi = (X - x).Y - (Z - z) off the endpoint.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy.integrate import simpson

from ..contact.flow import integrate_states, max_step
from ..contact.hamiltonian import HamiltonianSpec, JetPoint
from ..core.config import settings
from ..core.exceptions import ConditioningError, DomainError, ShootingError
from ..core.logging_config import get_logger
from ..core.models import TimeInterval
from ..core.retry import retry_shooting

logger = get_logger(__name__)

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class GenFuncQuery:
    """Arguments (x, Y, z) of Phi^{s,t}."""

    x: np.ndarray
    Y: np.ndarray
    z: float
    iv: TimeInterval

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        Y = np.atleast_1d(np.asarray(self.Y, dtype=float))
        if x.shape != Y.shape or x.ndim != 1:
            raise DomainError(f"query needs matching k-vectors, got x{x.shape} Y{Y.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(Y)) and math.isfinite(self.z)):
            raise DomainError("query has non-finite components")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "z", float(self.z))


@dataclass(frozen=True)
class GenFuncValue:
    phi: float
    y_source: np.ndarray
    endpoint: JetPoint
    iterations: int = 0


def check_step(H: HamiltonianSpec, iv: TimeInterval) -> None:
    """Reject steps at or beyond the generating-function limit."""
    limit = max_step(H)
    if iv.length >= limit:
        raise DomainError(
            f"step {iv.length:.6g} is not below the generating-function limit {limit:.6g} for {H.name}"
        )


@retry_shooting()
def shoot(
    H: HamiltonianSpec,
    iv: TimeInterval,
    x: np.ndarray,
    Y: np.ndarray,
    z: np.ndarray,
    steps: int | None = None,
    damping: float = 1.0,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Batched Newton shooting for the source momenta.

    x, Y have shape (n, k) and z shape (n,). Returns the source momenta
    (n, k), flow endpoints (n, 2k+1) and the Newton iteration count.
    """
    k = H.k
    x = np.asarray(x, dtype=float).reshape(-1, k)
    Y = np.asarray(Y, dtype=float).reshape(-1, k)
    z = np.asarray(z, dtype=float).reshape(-1)
    # Phi does not depend on z when H does not; shoot from z = 0 and shift Z.
    z_shoot = np.zeros_like(z) if H.z_independent else z

    y = Y.copy()
    tol = settings.HJ_NEWTON_TOL * (1.0 + np.linalg.norm(Y, axis=1))
    rel = settings.HJ_FD_STEP
    ends = integrate_states(H, iv.s, iv.t, np.concatenate([x, y, z_shoot[:, None]], axis=1), steps)

    for iteration in range(settings.HJ_NEWTON_MAX_ITER + 1):
        residual = ends[:, k:2 * k] - Y
        norms = np.linalg.norm(residual, axis=1)
        active = np.flatnonzero(norms > tol)
        if active.size == 0:
            if H.z_independent:
                ends[:, 2 * k] += z
            return y, ends, iteration
        if iteration == settings.HJ_NEWTON_MAX_ITER:
            break

        # forward-difference Jacobian of y -> momentum(phi(x, y, z))
        xa, ya, za = x[active], y[active], z_shoot[active]
        eps = rel * (1.0 + np.abs(ya))
        perturbed = []
        for j in range(k):
            yj = ya.copy()
            yj[:, j] += eps[:, j]
            perturbed.append(np.concatenate([xa, yj, za[:, None]], axis=1))
        images = integrate_states(H, iv.s, iv.t, np.concatenate(perturbed, axis=0), steps)
        images = images.reshape(k, active.size, -1)[:, :, k:2 * k]
        J = np.transpose((images - ends[active][None, :, k:2 * k]) / eps.T[:, :, None], (1, 2, 0))

        cond = np.linalg.cond(J)
        if np.any(~np.isfinite(cond)) or np.any(cond > MAX_CONDITION):
            raise ConditioningError(float(np.max(np.where(np.isfinite(cond), cond, np.inf))))
        step = np.linalg.solve(J, -residual[active][..., None])[..., 0]
        y[active] = ya + damping * step
        ends[active] = integrate_states(
            H, iv.s, iv.t, np.concatenate([xa, y[active], za[:, None]], axis=1), steps)

    raise ShootingError(settings.HJ_NEWTON_MAX_ITER, float(norms.max()))


def phi_eval_batch(
    H: HamiltonianSpec,
    iv: TimeInterval,
    x: np.ndarray,
    Y: np.ndarray,
    z: np.ndarray,
    steps: int | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized Phi^{s,t}; returns (phi (n,), y_source (n, k), endpoints (n, 2k+1))."""
    check_step(H, iv)
    k = H.k
    x = np.asarray(x, dtype=float).reshape(-1, k)
    Y = np.asarray(Y, dtype=float).reshape(-1, k)
    z = np.asarray(z, dtype=float).reshape(-1)
    if iv.length == 0:
        return np.zeros(len(z)), Y.copy(), np.concatenate([x, Y, z[:, None]], axis=1)

    y, ends, iterations = shoot(H, iv, x, Y, z, steps)
    phi = np.sum((ends[:, :k] - x) * Y, axis=1) - (ends[:, 2 * k] - z)
    logger.debug("phi_batch_done", n=len(z), iterations=iterations, s=iv.s, t=iv.t)
    return phi, y, ends


def phi_eval(H: HamiltonianSpec, q: GenFuncQuery, steps: int | None = None) -> GenFuncValue:
    """Phi^{s,t}(x, Y, z) with the solved source momentum and flow endpoint."""
    check_step(H, q.iv)
    k = H.k
    if q.iv.length == 0:
        return GenFuncValue(phi=0.0, y_source=q.Y.copy(), endpoint=JetPoint(x=q.x, y=q.Y, z=q.z))
    y, ends, iterations = shoot(H, q.iv, q.x[None], q.Y[None], np.array([q.z]), steps)
    end = ends[0]
    phi = float(np.dot(end[:k] - q.x, q.Y) - (end[2 * k] - q.z))
    return GenFuncValue(phi=phi, y_source=y[0], endpoint=JetPoint.from_state(end, k),
                        iterations=iterations)


def phi_closed_form_discount(h, t: float, Y: np.ndarray, z0: np.ndarray, nodes: int = 96) -> np.ndarray:
    """int_0^t e^{-s} h(e^s Y) ds + z0 (1 - e^{-t}) for H = z + h(y), k = 1."""
    Y = np.asarray(Y, dtype=float)
    z0 = np.asarray(z0, dtype=float)
    if t == 0:
        return np.zeros(np.broadcast(Y, z0).shape)
    nodes_std, weights = np.polynomial.legendre.leggauss(nodes)
    s = 0.5 * t * (nodes_std + 1.0)
    w = 0.5 * t * weights
    integrand = np.exp(-s) * h(np.exp(s) * Y[..., None])
    return np.sum(w * integrand, axis=-1) + z0 * (1.0 - math.exp(-t))


@dataclass
class ActionIntegrals:
    """Quadratures along the characteristic through a source jet."""

    phi: float
    action: float
    endpoint: JetPoint


def action_integral(H: HamiltonianSpec, iv: TimeInterval, p: JetPoint,
                    steps: int | None = None) -> ActionIntegrals:
    """Phi as int (x'.(y(t) - y) + H) and the action int (x'.y - H) along phi^{s,.}(p).

    Simpson's rule over the RK4 nodes; `steps` should be even.
    """
    k = H.k
    steps = steps or settings.HJ_RK4_STEPS
    times, states = integrate_states(H, iv.s, iv.t, p.state, steps, keep_trajectory=True)
    if len(times) == 1:
        return ActionIntegrals(phi=0.0, action=0.0, endpoint=p)
    xs, ys, zs = states[:, :k], states[:, k:2 * k], states[:, 2 * k]
    values = np.array([H.eval(t, x, y, z) for t, x, y, z in zip(times, xs, ys, zs)])
    xdot = np.array([H.grad(t, x, y, z)[1] for t, x, y, z in zip(times, xs, ys, zs)])
    y_end = ys[-1]
    phi = simpson(np.sum(xdot * (y_end - ys), axis=1) + values, x=times)
    action = simpson(np.sum(xdot * ys, axis=1) - values, x=times)
    return ActionIntegrals(phi=float(phi), action=float(action),
                           endpoint=JetPoint.from_state(states[-1], k))


@dataclass
class DerivativeCheckReport:
    lhs: float
    rhs: float
    discrepancy: float
    step: float


def _fd_step(iv: TimeInterval) -> float:
    return max(1e-4, 2e-3 * iv.length)


def _time_difference(f, a: float, base: float, d: float, lo: float, hi: float = math.inf) -> float:
    """Second-order difference of f at a, one-sided where [lo, hi] cuts the stencil; base = f(a)."""
    if a - d >= lo and a + d <= hi:
        return (f(a + d) - f(a - d)) / (2 * d)
    if a + 2 * d <= hi:
        return (-3.0 * base + 4.0 * f(a + d) - f(a + 2 * d)) / (2 * d)
    return (3.0 * base - 4.0 * f(a - d) + f(a - 2 * d)) / (2 * d)


def _phi_at(H: HamiltonianSpec, q: GenFuncQuery, s: float, t: float) -> float:
    """Phi^{s,t} at the fixed arguments (x, Y, z) of q."""
    return phi_eval(H, GenFuncQuery(x=q.x, Y=q.Y, z=q.z, iv=TimeInterval(s=s, t=t))).phi


def phi_time_derivative_check(H: HamiltonianSpec, q: GenFuncQuery,
                              delta: float | None = None) -> DerivativeCheckReport:
    """Partial d/dt Phi^{s,t}(x, Y, z) at fixed (x, Y, z) versus H(t, phi^{s,t}(x, y, z))."""
    base = phi_eval(H, q)
    s, t = q.iv.s, q.iv.t
    d = delta or _fd_step(q.iv)
    lhs = _time_difference(lambda tt: _phi_at(H, q, s, tt), t, base.phi, d, lo=s)
    end = base.endpoint
    rhs = float(H.eval(t, end.x, end.y, end.z))
    return DerivativeCheckReport(lhs=lhs, rhs=rhs, discrepancy=abs(lhs - rhs), step=d)


def phi_z_derivative(H: HamiltonianSpec, q: GenFuncQuery) -> float:
    """Central difference of Phi in z."""
    if H.z_independent:
        return 0.0
    dz = 1e-4 * (1.0 + abs(q.z))
    plus = phi_eval(H, GenFuncQuery(x=q.x, Y=q.Y, z=q.z + dz, iv=q.iv)).phi
    minus = phi_eval(H, GenFuncQuery(x=q.x, Y=q.Y, z=q.z - dz, iv=q.iv)).phi
    return (plus - minus) / (2 * dz)


def phi_s_derivative_check(H: HamiltonianSpec, q: GenFuncQuery,
                           delta: float | None = None) -> DerivativeCheckReport:
    """Partial d/ds Phi^{s,t}(x, Y, z) at fixed (x, Y, z) versus H(s, x, y, z) (dPhi/dz - 1).

    (x, y, z) is the source jet solved for q. H is taken at time s; for
    autonomous H this coincides with evaluation at time t.
    """
    base = phi_eval(H, q)
    s, t = q.iv.s, q.iv.t
    d = delta or _fd_step(q.iv)
    lhs = _time_difference(lambda ss: _phi_at(H, q, ss, t), s, base.phi, d, lo=0.0, hi=t)
    rhs = float(H.eval(s, q.x, base.y_source, q.z)) * (phi_z_derivative(H, q) - 1.0)
    return DerivativeCheckReport(lhs=lhs, rhs=rhs, discrepancy=abs(lhs - rhs), step=d)


@dataclass
class GradientCheckReport:
    cx_error: float
    cy_error: float


def phi_gradient_check(H: HamiltonianSpec, q: GenFuncQuery) -> GradientCheckReport:
    """Finite-difference check of X - x = dPhi/dY and y - Y = dPhi/dx + y dPhi/dz."""
    base = phi_eval(H, q)
    k = H.k
    dPhi_dY = np.empty(k)
    dPhi_dx = np.empty(k)
    for j in range(k):
        e = np.zeros(k)
        e[j] = settings.HJ_FD_STEP * (1.0 + abs(q.Y[j]))
        dPhi_dY[j] = (phi_eval(H, GenFuncQuery(x=q.x, Y=q.Y + e, z=q.z, iv=q.iv)).phi
                      - phi_eval(H, GenFuncQuery(x=q.x, Y=q.Y - e, z=q.z, iv=q.iv)).phi) / (2 * e[j])
        e[j] = settings.HJ_FD_STEP * (1.0 + abs(q.x[j]))
        dPhi_dx[j] = (phi_eval(H, GenFuncQuery(x=q.x + e, Y=q.Y, z=q.z, iv=q.iv)).phi
                      - phi_eval(H, GenFuncQuery(x=q.x - e, Y=q.Y, z=q.z, iv=q.iv)).phi) / (2 * e[j])
    dPhi_dz = phi_z_derivative(H, q)
    y = base.y_source
    cx = float(np.abs(dPhi_dY - (base.endpoint.x - q.x)).max())
    cy = float(np.abs(dPhi_dx + y * dPhi_dz - (y - q.Y)).max())
    return GradientCheckReport(cx_error=cx, cy_error=cy)
