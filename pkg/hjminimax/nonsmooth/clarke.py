"""Numerical Clarke generalized gradients of 1-D grid functions."""
from dataclasses import dataclass

import numpy as np

from ..core.logging_config import get_logger
from .grid_function import GridFunction

logger = get_logger(__name__)


@dataclass(frozen=True)
class ClarkeInterval:
    """Convex hull [lo_slope, hi_slope] of limiting slopes."""

    lo_slope: float
    hi_slope: float

    def __post_init__(self):
        if self.lo_slope > self.hi_slope:
            raise ValueError(f"empty interval [{self.lo_slope}, {self.hi_slope}]")

    @property
    def width(self) -> float:
        return self.hi_slope - self.lo_slope

    def contains(self, g: float, tol: float = 0.0) -> bool:
        return self.lo_slope - tol <= g <= self.hi_slope + tol

    def scaled(self, factor: float) -> tuple[float, float]:
        """Image of the interval under multiplication by factor."""
        a, b = self.lo_slope * factor, self.hi_slope * factor
        return min(a, b), max(a, b)


def discretization_tol(f: GridFunction) -> float:
    return 2.0 * f.lip / f.n


def clarke_subgradient(f: GridFunction, x: float) -> ClarkeInterval:
    """Hull of the slopes of the cells touching x, widened by 2 lip / n."""
    tol = discretization_tol(f)
    slopes = f.slopes()
    u = (x - f.lo) / f.dx
    node = round(u)
    if x < f.lo or x > f.hi:
        s = float(f.slope_at(x))
        adjacent = [s]
    elif abs(u - node) < 1e-9:
        adjacent = [slopes[i] for i in (node - 1, node) if 0 <= i < slopes.size]
    else:
        adjacent = [slopes[min(int(np.floor(u)), slopes.size - 1)]]
    return ClarkeInterval(lo_slope=float(min(adjacent)) - tol, hi_slope=float(max(adjacent)) + tol)


@dataclass
class MeanValueReport:
    passed: bool
    target_slope: float
    witness: float | None
    candidates: int


def mean_value_check(f: GridFunction, x: float, y: float, tol: float = 1e-9) -> MeanValueReport:
    """Search nodes and cell midpoints between x and y for z with (f(y)-f(x))/(y-x) in the Clarke set at z."""
    if x == y:
        return MeanValueReport(passed=True, target_slope=0.0, witness=x, candidates=0)
    a, b = min(x, y), max(x, y)
    target = float((f(y) - f(x)) / (y - x))
    nodes = f.nodes()
    inner = nodes[(nodes > a) & (nodes < b)]
    mids = 0.5 * (nodes[:-1] + nodes[1:])
    mids = mids[(mids > a) & (mids < b)]
    candidates = np.sort(np.concatenate([inner, mids, [0.5 * (a + b)]]))
    for z in candidates:
        if clarke_subgradient(f, float(z)).contains(target, tol):
            return MeanValueReport(passed=True, target_slope=target, witness=float(z),
                                   candidates=candidates.size)
    logger.debug("mean_value_check_failed", x=x, y=y, target=target)
    return MeanValueReport(passed=False, target_slope=target, witness=None, candidates=candidates.size)


def usc_check(f: GridFunction, x: float, approach: np.ndarray, tol: float | None = None) -> bool:
    """Endpoints of Clarke sets at points approaching x stay inside the set at x (widened)."""
    tol = discretization_tol(f) if tol is None else tol
    limit = clarke_subgradient(f, x)
    for xi in np.asarray(approach, dtype=float):
        c = clarke_subgradient(f, float(xi))
        # only the tail of the sequence matters
        if abs(xi - x) > 2 * f.dx:
            continue
        if not (limit.contains(c.lo_slope, tol) and limit.contains(c.hi_slope, tol)):
            return False
    return True


def fermat_check(f: GridFunction) -> tuple[float, bool]:
    """At the grid argmin, 0 lies in the Clarke interval."""
    i = int(np.argmin(f.values))
    x = float(f.nodes()[i])
    return x, clarke_subgradient(f, x).contains(0.0)
