"""Independent viscosity-solution references.

`lax_friedrichs_solve` is a global Lax-Friedrichs monotone scheme for a
general H(t, x, u_x, u), k = 1. `hopf_lax_discount` is the optimal-control
formula for u_t + u + h(u_x) = 0 with convex h.
"""
from dataclasses import dataclass, field
import math
from typing import Callable

import numpy as np
import pandas as pd
from scipy import optimize

from ..contact.hamiltonian import HamiltonianSpec
from ..core.config import settings
from ..core.exceptions import CFLViolation, ConfigurationError, DomainError
from ..core.logging_config import get_logger
from ..core.models import GridSpec
from ..nonsmooth.grid_function import GridFunction

logger = get_logger(__name__)

CFL_LIMIT = 0.9
Z_STEP_LIMIT = 0.5
MIN_SPEED = 0.5
QUADRATURE_NODES = 96


@dataclass(frozen=True, eq=False)
class ReferenceSolution:
    """Scheme snapshots u(t_n, x_j) on a fixed output grid."""

    grid: GridSpec
    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    dt: float = 0.0

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def snapshot(self, i: int) -> GridFunction:
        return GridFunction.on_grid(self.grid, self.values[i])

    def at(self, t: float) -> GridFunction:
        """Snapshot at t, linear in time between scheme steps."""
        if not self.times[0] - 1e-12 <= t <= self.T + 1e-12:
            raise DomainError(f"t={t} outside the computed range [0, {self.T}]")
        i = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.times.size - 2))
        t0, t1 = self.times[i], self.times[i + 1]
        w = 0.0 if t1 == t0 else float(np.clip((t - t0) / (t1 - t0), 0.0, 1.0))
        return GridFunction.on_grid(self.grid, (1 - w) * self.values[i] + w * self.values[i + 1])

    @property
    def final(self) -> GridFunction:
        return self.snapshot(-1)

    def to_frame(self) -> pd.DataFrame:
        """Long format (t, x, u)."""
        x = self.grid.nodes()
        return pd.DataFrame({
            "t": np.repeat(self.times, x.size),
            "x": np.tile(x, self.times.size),
            "u": self.values.ravel(),
        })


def lf_time_step(H: HamiltonianSpec, dx: float, T: float, cfl: float) -> tuple[float, int]:
    """Largest dt dividing T with dt ||H_y|| <= cfl dx / 2 and dt ||H_z|| <= 1/2."""
    if not 0 < cfl <= CFL_LIMIT:
        raise CFLViolation(cfl, CFL_LIMIT)
    dt = cfl * dx / (2.0 * max(H.norm_dyH, MIN_SPEED))
    if H.norm_dzH > 0:
        dt = min(dt, Z_STEP_LIMIT / H.norm_dzH)
    n = max(1, math.ceil(T / dt - 1e-12))
    return T / n, n


def lf_monotone_check(H: HamiltonianSpec, dx: float, dt: float, samples: int = 512, seed: int = 0) -> bool:
    """theta = dt ||H_y|| / dx dominates dt |dH/dp| / dx on sampled points and 1 - theta - dt H_z >= 0."""
    rng = np.random.default_rng(seed)
    a = max(H.support_radius_a, 1.0)
    x = rng.uniform(-4, 4, size=(samples, 1))
    y = rng.uniform(-a, a, size=(samples, 1))
    z = rng.uniform(-2, 2, size=samples)
    _, dy, dz = H.grad(0.0, x, y, z)
    theta = dt * H.norm_dyH / dx
    dominated = np.all(theta + 1e-12 >= dt * np.abs(dy[:, 0]) / dx)
    return bool(dominated and np.all(1.0 - theta - dt * np.maximum(dz, 0.0) >= -1e-12))


def _with_ghosts(u: np.ndarray) -> np.ndarray:
    return np.concatenate([[2 * u[0] - u[1]], u, [2 * u[-1] - u[-2]]])


def lax_friedrichs_solve(H: HamiltonianSpec, v: GridFunction, T: float, dx: float | None = None,
                         cfl: float | None = None, domain: tuple[float, float] | None = None,
                         store_every: int = 1) -> ReferenceSolution:
    """Explicit global Lax-Friedrichs scheme

        u_j^{n+1} = u_j^n - dt H(t_n, x_j, (u_{j+1} - u_{j-1}) / 2dx, u_j^n)
                    + theta/2 (u_{j+1} - 2 u_j + u_{j-1}),   theta = dt ||H_y|| / dx

    on the domain widened by the numerical domain of dependence; ghost cells
    extrapolate linearly. Snapshots are cropped back to `domain`.
    """
    if H.k != 1:
        raise ConfigurationError("hamiltonian", "the reference scheme is one-dimensional")
    if T < 0:
        raise ConfigurationError("T", f"final time must be non-negative, got {T}")
    cfl = settings.HJ_LF_CFL if cfl is None else cfl
    lo, hi = domain or (v.lo, v.hi)
    dx = dx or v.dx
    n_out = int(round((hi - lo) / dx)) + 1
    if n_out < 3:
        raise ConfigurationError("dx", f"dx={dx} leaves fewer than 3 nodes on [{lo}, {hi}]")
    out = GridSpec(lo=lo, hi=hi, n=n_out)
    dx = out.dx
    if T == 0:
        return ReferenceSolution(grid=out, times=np.array([0.0, 0.0]),
                                 values=np.stack([v(out.nodes())] * 2), dt=0.0)

    dt, steps = lf_time_step(H, dx, T, cfl)
    theta = dt * H.norm_dyH / dx
    # information travels at most one cell per step
    pad = min(steps, math.ceil(T * max(H.norm_dyH, MIN_SPEED) * 4 / dx)) + 4
    x = lo + dx * np.arange(-pad, n_out + pad)
    crop = slice(pad, pad + n_out)
    u = v(x)

    times, frames = [0.0], [u[crop].copy()]
    for n in range(steps):
        t = n * dt
        g = _with_ghosts(u)
        p = (g[2:] - g[:-2]) / (2 * dx)
        lap = g[2:] - 2 * g[1:-1] + g[:-2]
        u = u - dt * H.eval(t, x[:, None], p[:, None], u) + 0.5 * theta * lap
        if (n + 1) % store_every == 0 or n + 1 == steps:
            times.append((n + 1) * dt)
            frames.append(u[crop].copy())
    logger.debug("lax_friedrichs_done", steps=steps, dt=dt, dx=dx, theta=theta, pad_cells=pad)
    return ReferenceSolution(grid=out, times=np.array(times), values=np.stack(frames), dt=dt)


def lf_refinement_study(H: HamiltonianSpec, v: GridFunction, T: float, dx: float,
                        levels: int = 3, cfl: float | None = None,
                        domain: tuple[float, float] | None = None) -> pd.DataFrame:
    """Successive differences of final snapshots under dx halving, with C = diff / dx."""
    rows = []
    previous = None
    for level in range(levels):
        h = dx / 2 ** level
        sol = lax_friedrichs_solve(H, v, T, h, cfl, domain)
        if previous is not None:
            coarse_nodes = previous.grid.nodes()
            diff = float(np.abs(sol.final(coarse_nodes) - previous.final.values).max())
            rows.append({"dx": h, "dt": sol.dt, "change": diff, "constant": diff / h})
        previous = sol
    frame = pd.DataFrame(rows, columns=["dx", "dt", "change", "constant"])
    if len(frame):
        logger.info("lf_refinement_constant", constant=float(frame["constant"].max()), levels=levels)
    return frame


@dataclass(frozen=True)
class LegendreTransform:
    """l(q) = max over p in [p_lo, p_hi] of p q - h(p), by grid search and parabolic refinement."""

    h: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    p_lo: float
    p_hi: float
    points: int = 2001

    def __call__(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        p = np.linspace(self.p_lo, self.p_hi, self.points)
        hp = np.asarray(self.h(p), dtype=float)
        flat = q.ravel()
        out = np.empty_like(flat)
        for start in range(0, flat.size, 2048):
            qc = flat[start:start + 2048]
            vals = qc[:, None] * p[None, :] - hp[None, :]
            i = np.clip(np.argmax(vals, axis=1), 1, self.points - 2)
            rows = np.arange(qc.size)
            f0, f1, f2 = vals[rows, i - 1], vals[rows, i], vals[rows, i + 1]
            denom = f0 - 2 * f1 + f2
            shift = np.where(denom < 0, 0.5 * (f0 - f2) / np.where(denom < 0, denom, -1.0), 0.0)
            shift = np.clip(shift, -1.0, 1.0)
            # parabola vertex value
            out[start:start + qc.size] = np.maximum(f1 - 0.25 * (f0 - f2) * shift, vals.max(axis=1))
        return out.reshape(q.shape)


def legendre_transform(h: Callable[[np.ndarray], np.ndarray], p_range: tuple[float, float],
                       points: int = 2001) -> LegendreTransform:
    return LegendreTransform(h=h, p_lo=float(p_range[0]), p_hi=float(p_range[1]), points=points)


def convexity_defect(h: Callable[[np.ndarray], np.ndarray], p_range: tuple[float, float],
                     points: int = 2001) -> float:
    """Most negative scaled second difference of h on p_range (0 when convex)."""
    p = np.linspace(p_range[0], p_range[1], points)
    hp = np.asarray(h(p), dtype=float)
    d2 = (hp[2:] - 2 * hp[1:-1] + hp[:-2]) / (p[1] - p[0]) ** 2
    return float(min(0.0, d2.min()))


def hopf_lax_discount(h: Callable[[np.ndarray], np.ndarray], dh: Callable[[np.ndarray], np.ndarray],
                      v: Callable[[np.ndarray], np.ndarray], t: float, x,
                      discount_initial: bool = True, lip: float | None = None,
                      y_points: int = 801, margin: float = 0.5) -> np.ndarray | float:
    """min_y int_0^t e^{-s} l(h'(e^s y)) ds + e^{-t} v(x - int_0^t h'(e^s y) ds).

    l is the numerical Legendre transform of h over the momenta reached. With
    discount_initial=False the e^{-t} factor on v is dropped.
    """
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    scalar = np.ndim(x) == 0
    if t == 0:
        out = np.asarray(v(x_arr), dtype=float)
        return float(out[0]) if scalar else out
    if lip is None:
        lip = v.lip if isinstance(v, GridFunction) else 1.0
    y_max = (lip + 1e-3) * math.exp(-t) * (1.0 + margin)
    p_range = (-y_max * math.exp(t), y_max * math.exp(t))
    defect = convexity_defect(h, p_range)
    if defect < -1e-8:
        raise DomainError(f"h is not convex on [{p_range[0]:.4g}, {p_range[1]:.4g}] (second difference {defect:.3g})")
    ell = legendre_transform(h, p_range)

    nodes, weights = np.polynomial.legendre.leggauss(QUADRATURE_NODES)
    s = 0.5 * t * (nodes + 1.0)
    w = 0.5 * t * weights
    discount = math.exp(-t) if discount_initial else 1.0

    def pieces(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        p = np.exp(s)[None, :] * np.asarray(y, dtype=float).reshape(-1, 1)
        q = np.asarray(dh(p), dtype=float)
        return (w * np.exp(-s) * ell(q)).sum(axis=1), (w * q).sum(axis=1)

    y = np.linspace(-y_max, y_max, y_points)
    running, drift = pieces(y)
    U = running[None, :] + discount * np.asarray(v(x_arr[:, None] - drift[None, :]), dtype=float)
    best = np.argmin(U, axis=1)
    hy = y[1] - y[0]

    def objective(yy: float, xx: float) -> float:
        r, d = pieces(np.array([yy]))
        return float(r[0] + discount * np.asarray(v(np.array([xx - d[0]])), dtype=float)[0])

    out = U[np.arange(x_arr.size), best]
    for i, (xx, j) in enumerate(zip(x_arr, best)):
        bounds = (max(y[0], y[j] - hy), min(y[-1], y[j] + hy))
        res = optimize.minimize_scalar(objective, bounds=bounds, args=(xx,), method="bounded",
                                       options={"xatol": 1e-10})
        if res.success and res.fun < out[i]:
            out[i] = res.fun
    return float(out[0]) if scalar else out
