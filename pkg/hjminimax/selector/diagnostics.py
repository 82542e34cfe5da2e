"""Property checks of the minimax selector.

Every check returns a report dataclass with a `passed` flag; none raise on a
failed property.
"""
from dataclasses import dataclass, field
import math
from typing import Sequence

import numpy as np

from ..contact.hamiltonian import HamiltonianSpec
from ..core.exceptions import DomainError, HJSolverError
from ..core.logging_config import get_logger
from ..core.models import GridSpec, MinimaxConfig, Partition, TimeInterval
from ..generating.family import (
    FamilySpec,
    FiberGrid,
    FiberPoint,
    family_eval,
    fiber_critical_points,
)
from ..nonsmooth.grid_function import GridFunction
from .minimax import SelectorWindow, lipschitz_bound, minimax_step, minimax_sweep, selector_window

logger = get_logger(__name__)


def _sweep(H, iv, v, grid: GridSpec, cfg) -> tuple[np.ndarray, float]:
    results = minimax_sweep(H, iv, v, grid.nodes(), cfg)
    return np.array([r.value for r in results]), max(r.grid_tol for r in results)


# partition independence

@dataclass
class PartitionIndependenceReport:
    x: float
    values: dict[int, float]
    spread: float
    tol: float
    passed: bool
    converged: dict[int, bool] = field(default_factory=dict)


@dataclass
class MultiStepValue:
    """Box inf-max of a multi-step family: inf over positions, max over momenta."""

    value: float
    fiber: FiberPoint | None
    grid_tol: float
    levels: int
    converged: bool
    reason: str = ""


COARSE_BUDGET = 20000
LOCAL_POINTS = 5


def _odd_points(N: int) -> int:
    n = int(COARSE_BUDGET ** (1.0 / (2 * N)))
    n = n if n % 2 else n - 1
    return max(3, n)


def _box_inf_max(fs: FamilySpec, x: float, p_axes: list[np.ndarray],
                 y_axes: list[np.ndarray]) -> tuple[float, np.ndarray, np.ndarray]:
    """Grid inf over the position block of the max over the momentum block."""
    N = fs.N
    P = np.stack(np.meshgrid(*p_axes, indexing="ij"), axis=-1).reshape(-1, N)
    Y = np.stack(np.meshgrid(*y_axes, indexing="ij"), axis=-1).reshape(-1, N)
    vec = np.concatenate([np.repeat(P, len(Y), axis=0), np.tile(Y, (len(P), 1))], axis=1)
    S = family_eval(fs, x, FiberPoint.from_vector(vec, N, 1)).S.reshape(len(P), len(Y))
    inner = S.max(axis=1)
    i = int(np.argmin(inner))
    j = int(np.argmax(S[i]))
    return float(inner[i]), P[i], Y[j]


def _local_axes(center: np.ndarray, spacing: np.ndarray, lo: float, hi: float) -> list[np.ndarray]:
    offsets = np.arange(LOCAL_POINTS) - LOCAL_POINTS // 2
    return [np.unique(np.clip(c + h * offsets, lo, hi)) for c, h in zip(center, spacing)]


def multi_step_value(fs: FamilySpec, x: float, window: SelectorWindow,
                     levels: int = 8) -> MultiStepValue:
    """Minimax value of a k = 1 family over the full fiber, searched on the selector window.

    Positions x_0..x_{N-1} range over [x - P, x + P], momenta y_1..y_N over
    [-Y, Y]. A coarse tensor grid is refined on nested local grids that halve
    the spacing per level.
    """
    if fs.k != 1:
        raise DomainError(f"multi-step search needs k = 1, got k={fs.k}")
    N = fs.N
    p_lo, p_hi = x - window.pad, x + window.pad
    y_lo, y_hi = -window.y_bound, window.y_bound
    n = _odd_points(N)
    h = np.array([2.0 * window.pad / (n - 1)] * N + [2.0 * window.y_bound / (n - 1)] * N)
    try:
        value, p, y = _box_inf_max(fs, x, [np.linspace(p_lo, p_hi, n)] * N,
                                   [np.linspace(y_lo, y_hi, n)] * N)
        done = 0
        for done in range(1, levels + 1):
            h = h * 2.0 / (LOCAL_POINTS - 1)
            fine, p, y = _box_inf_max(fs, x, _local_axes(p, h[:N], p_lo, p_hi),
                                      _local_axes(y, h[N:], y_lo, y_hi))
            change, value = abs(fine - value), fine
            if change < 1e-10 * (1.0 + abs(value)):
                break
    except HJSolverError as e:
        logger.warning("multi_step_search_failed", x=x, N=N, error=str(e))
        return MultiStepValue(value=math.nan, fiber=None, grid_tol=math.inf, levels=0,
                              converged=False, reason=type(e).__name__)

    edge = 1e-9 * (1.0 + window.pad)
    on_edge = bool(np.any((p <= p_lo + edge) | (p >= p_hi - edge)))
    grid_tol = 3.0 * N * (h[0] * (window.y_bound + window.lip_bound) + h[N] * window.pad)
    fiber = FiberPoint(x_prev=p.reshape(N, 1), y=y.reshape(N, 1))
    logger.debug("multi_step_value", x=x, N=N, value=value, levels=done, on_edge=on_edge)
    return MultiStepValue(value=value, fiber=fiber, grid_tol=float(grid_tol), levels=done,
                          converged=not on_edge, reason="position window edge" if on_edge else "")


def partition_independence_check(H: HamiltonianSpec, iv: TimeInterval, v: GridFunction, x: float,
                                 partitions: Sequence[Partition | int],
                                 cfg: MinimaxConfig | None = None) -> PartitionIndependenceReport:
    """Minimax values of the families built on several inner partitions of iv agree.

    Multi-step values are searched without reference to the single-step saddle.
    """
    cfg = cfg or MinimaxConfig()
    single = minimax_step(H, iv, v, x, cfg)
    window = selector_window(H, iv, v, cfg)
    values: dict[int, float] = {}
    converged: dict[int, bool] = {}
    tols = [single.grid_tol]
    for p in partitions:
        inner = Partition.uniform(iv.s, iv.t, p) if isinstance(p, int) else p
        fs = FamilySpec(H=H, iv=iv, inner_partition=inner, v=v)
        if fs.N == 1:
            values[1], converged[1] = single.value, True
            continue
        multi = multi_step_value(fs, x, window)
        values[fs.N], converged[fs.N] = multi.value, multi.converged
        tols.append(multi.grid_tol)
    finite = [val for val in values.values() if math.isfinite(val)]
    spread = max(finite) - min(finite) if finite else math.inf
    tol = 5.0 * max(tols)
    return PartitionIndependenceReport(x=float(x), values=values, spread=float(spread), tol=tol,
                                       passed=all(converged.values()) and spread <= tol,
                                       converged=converged)


# gradient inclusion

@dataclass
class GradientInclusionReport:
    x: float
    derivative: float
    hull: tuple[float, float] | None
    critical_values: list[float]
    tol: float
    passed: bool


def gradient_inclusion_check(H: HamiltonianSpec, iv: TimeInterval, v: GridFunction, x: float,
                             cfg: MinimaxConfig | None = None, h: float = 1e-2,
                             fiber_points: int = 81) -> GradientInclusionReport:
    """The difference quotient of R v at x lies in the hull of y_N over critical points at level R v(x)."""
    results = minimax_sweep(H, iv, v, np.array([x - h, x, x + h]), cfg)
    derivative = (results[2].value - results[0].value) / (2 * h)
    center = results[1]
    grid_tol = max(r.grid_tol for r in results)
    tol = 4.0 * grid_tol / h + 1e-2

    fs = FamilySpec.single_step(H, iv, v)
    grid = FiberGrid.around(x, center.window.pad, center.window.y_bound, fiber_points, fiber_points)
    crit = fiber_critical_points(fs, x, grid)
    level_tol = 5.0 * grid_tol + 1e-6 * (1.0 + abs(center.value))
    at_level = [c for c in crit if abs(float(c.value.S) - center.value) <= level_tol]
    slopes = [float(np.ravel(c.value.dS_dx)[0]) for c in at_level]
    if not slopes:
        logger.warning("no_critical_point_at_minimax_level", x=x, value=center.value,
                       critical=len(crit))
        return GradientInclusionReport(x=x, derivative=derivative, hull=None,
                                       critical_values=[float(c.value.S) for c in crit],
                                       tol=tol, passed=False)
    hull = (min(slopes), max(slopes))
    passed = hull[0] - tol <= derivative <= hull[1] + tol
    return GradientInclusionReport(x=x, derivative=float(derivative), hull=hull,
                                   critical_values=[float(c.value.S) for c in crit],
                                   tol=tol, passed=passed)


# operator properties

@dataclass
class MonotonicityReport:
    violations: int
    worst_excess: float
    grid_tol: float
    passed: bool


def monotonicity_check(H: HamiltonianSpec, iv: TimeInterval, v: GridFunction, w: GridFunction,
                       cfg: MinimaxConfig | None = None, out_grid: GridSpec | None = None) -> MonotonicityReport:
    """For v <= w, R v <= R w + 2 grid_tol at every output node."""
    out_grid = out_grid or v.grid
    if np.any(v(out_grid.nodes()) > w(out_grid.nodes()) + 1e-12):
        logger.warning("monotonicity_pair_not_ordered")
    Rv, tol_v = _sweep(H, iv, v, out_grid, cfg)
    Rw, tol_w = _sweep(H, iv, w, out_grid, cfg)
    grid_tol = max(tol_v, tol_w)
    excess = Rv - Rw - 2.0 * grid_tol
    violations = int(np.sum(excess > 0))
    return MonotonicityReport(violations=violations, worst_excess=float(excess.max()),
                              grid_tol=grid_tol, passed=violations == 0)


@dataclass
class LipschitzReport:
    observed: float
    bound: float
    passed: bool


def lipschitz_check(H: HamiltonianSpec, iv: TimeInterval, v: GridFunction,
                    cfg: MinimaxConfig | None = None, out_grid: GridSpec | None = None) -> LipschitzReport:
    """Observed slope of R v against (lip_v + |t - s| ||H_x||) exp(|t - s| ||H_z||)."""
    out_grid = out_grid or v.grid
    values, grid_tol = _sweep(H, iv, v, out_grid, cfg)
    observed = float(np.abs(np.diff(values)).max() / out_grid.dx)
    bound = lipschitz_bound(H, iv.length, v.lip)
    return LipschitzReport(observed=observed, bound=bound,
                           passed=observed <= bound + 2.0 * grid_tol / out_grid.dx)


@dataclass
class SupNormReport:
    difference: float
    allowed: float
    passed: bool


def time_lipschitz_check(H: HamiltonianSpec, s: float, t: float, tau: float, v: GridFunction,
                         cfg: MinimaxConfig | None = None, out_grid: GridSpec | None = None) -> SupNormReport:
    """||R^{s,t} v - R^{s,tau} v|| <= |t - tau| ||H|| on single steps."""
    out_grid = out_grid or v.grid
    a, tol_a = _sweep(H, TimeInterval(s=s, t=t), v, out_grid, cfg)
    b, tol_b = _sweep(H, TimeInterval(s=s, t=tau), v, out_grid, cfg)
    diff = float(np.abs(a - b).max())
    allowed = abs(t - tau) * H.norm_H + 2.0 * max(tol_a, tol_b)
    return SupNormReport(difference=diff, allowed=allowed, passed=diff <= allowed)


def stability_check(H: HamiltonianSpec, iv: TimeInterval, v0: GridFunction, v1: GridFunction,
                    K: tuple[float, float], cfg: MinimaxConfig | None = None,
                    n: int = 41) -> SupNormReport:
    """||R v0 - R v1||_K <= ||v0 - v1|| over K widened by the domain of dependence."""
    grid = GridSpec(lo=K[0], hi=K[1], n=n)
    a, tol_a = _sweep(H, iv, v0, grid, cfg)
    b, tol_b = _sweep(H, iv, v1, grid, cfg)
    reach = iv.length * H.norm_dyH
    wide = np.linspace(K[0] - reach, K[1] + reach, 8 * n)
    allowed = float(np.abs(v0(wide) - v1(wide)).max()) + 2.0 * max(tol_a, tol_b)
    diff = float(np.abs(a - b).max())
    return SupNormReport(difference=diff, allowed=allowed, passed=diff <= allowed)


def window_consistency_check(H: HamiltonianSpec, iv: TimeInterval, v: GridFunction, nodes,
                             cfg: MinimaxConfig | None = None, factor: float = 1.5) -> SupNormReport:
    """Values at interior nodes do not move when the fiber window is enlarged."""
    cfg = cfg or MinimaxConfig()
    nodes = np.atleast_1d(np.asarray(nodes, dtype=float))
    base = minimax_sweep(H, iv, v, nodes, cfg)
    window = base[0].window
    wide_cfg = cfg.model_copy(update={
        "x0_window_pad": factor * window.pad,
        "y_bound": min(factor * window.y_bound, cfg.y_bound_cap),
        "grid_x0": int(np.ceil(factor * (cfg.grid_x0 - 1))) + 1,
        "grid_y": int(np.ceil(factor * (cfg.grid_y - 1))) + 1,
    })
    wide = minimax_sweep(H, iv, v, nodes, wide_cfg)
    diff = float(max(abs(a.value - b.value) for a, b in zip(base, wide)))
    allowed = 2.0 * max(max(r.grid_tol for r in base), max(r.grid_tol for r in wide))
    return SupNormReport(difference=diff, allowed=allowed, passed=diff <= allowed)
