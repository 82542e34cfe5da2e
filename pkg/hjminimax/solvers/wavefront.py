"""Wave fronts: the projected characteristic fan {(t, x(t), z(t))} and its folds (k = 1)."""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from ..contact.flow import flow_between
from ..contact.hamiltonian import HamiltonianSpec, JetPoint
from ..core.exceptions import DomainError
from ..core.logging_config import get_logger
from ..generating.family import eval_initial, initial_slope
from ..nonsmooth.clarke import clarke_subgradient
from ..nonsmooth.grid_function import CSV_FLOAT_FORMAT, GridFunction

logger = get_logger(__name__)

FOLD_TOL = 1e-6
FRONT_COLUMNS = ["t", "x0", "x", "y", "z", "fold_flag"]


@dataclass(frozen=True, eq=False)
class FrontSample:
    """Flow images of all seed jets at one time.

    fold_flag is +1 where dx/dx0 > 0, -1 where the fan has turned over and
    0 where |dx/dx0| is below FOLD_TOL (degenerate, not classified).
    """

    t: float
    x0: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)
    dxdx0: np.ndarray = field(repr=False)

    @property
    def fold_flag(self) -> np.ndarray:
        return np.where(self.dxdx0 > FOLD_TOL, 1, np.where(self.dxdx0 < -FOLD_TOL, -1, 0))

    @property
    def folded(self) -> bool:
        return bool(np.any(self.dxdx0 <= FOLD_TOL))

    @property
    def jet(self) -> JetPoint:
        return JetPoint(x=self.x[:, None], y=self.y[:, None], z=self.z)

    def fold_positions(self) -> np.ndarray:
        """x where the indicator changes sign or vanishes."""
        flag = self.fold_flag
        turn = np.flatnonzero(np.diff(flag) != 0)
        return np.unique(np.concatenate([self.x[turn], self.x[turn + 1], self.x[flag == 0]]))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "t": np.full(self.x0.size, self.t), "x0": self.x0, "x": self.x,
            "y": self.y, "z": self.z, "fold_flag": self.fold_flag,
        })


@dataclass(frozen=True, eq=False)
class Front:
    samples: tuple[FrontSample, ...]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def at(self, t: float) -> FrontSample:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.samples[i].t - t) > 1e-12:
            raise DomainError(f"no front sample at t={t}")
        return self.samples[i]

    def first_folded_sample(self) -> FrontSample | None:
        return next((s for s in self.samples if s.folded), None)

    def to_frame(self) -> pd.DataFrame:
        if not self.samples:
            return pd.DataFrame(columns=FRONT_COLUMNS)
        return pd.concat([s.to_frame() for s in self.samples], ignore_index=True)[FRONT_COLUMNS]

    def to_csv(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")


def _seed_jets(v, x0: np.ndarray, slopes: np.ndarray | None) -> JetPoint:
    if slopes is None:
        slopes = initial_slope(v, x0)
        if isinstance(v, GridFunction):
            widths = np.array([clarke_subgradient(v, float(a)).width for a in x0])
            kinked = int(np.sum(widths > 4.0 * 2.0 * v.lip / v.n + 1e-12))
            if kinked:
                logger.warning("front_seeds_at_kinks", count=kinked)
    return JetPoint(x=x0[:, None], y=np.asarray(slopes, dtype=float)[:, None],
                    z=eval_initial(v, x0[:, None], 1))


def propagate_front(H: HamiltonianSpec, v, t_samples: Sequence[float], x0_grid,
                    slopes: np.ndarray | None = None, t0: float = 0.0) -> Front:
    """Flow the 1-jet of v from t0 to each sample time (sorted, >= t0)."""
    if H.k != 1:
        raise DomainError("wave fronts are computed for k = 1")
    x0 = np.asarray(x0_grid, dtype=float)
    if x0.ndim != 1 or x0.size < 3:
        raise DomainError("front seeds need a 1-D grid of at least 3 points")
    times = sorted(float(t) for t in t_samples)
    if times and times[0] < t0:
        raise DomainError(f"sample time {times[0]} precedes t0={t0}")
    jet = _seed_jets(v, x0, slopes)
    current = t0
    samples = []
    for t in times:
        jet = flow_between(H, current, t, jet)
        current = t
        x = jet.x[:, 0]
        samples.append(FrontSample(t=t, x0=x0, x=x, y=jet.y[:, 0], z=jet.z.copy(),
                                   dxdx0=np.gradient(x, x0)))
    return Front(samples=tuple(samples))


def locate_first_fold(H: HamiltonianSpec, v, x0_grid, t_max: float, tol: float = 1e-3,
                      slopes: np.ndarray | None = None) -> tuple[float, float] | None:
    """Bracket (lo, hi) with hi - lo <= tol around the first time dx/dx0 reaches 0; None before t_max."""
    def folded(t: float) -> bool:
        return propagate_front(H, v, [t], x0_grid, slopes).samples[0].folded

    if not folded(t_max):
        return None
    lo, hi = 0.0, float(t_max)
    if folded(lo):
        return lo, lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if folded(mid):
            hi = mid
        else:
            lo = mid
    logger.info("first_fold_located", lo=lo, hi=hi)
    return lo, hi


@dataclass
class SectionReport:
    fraction: float
    eligible: int
    on_front: int
    passed: bool
    misses: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))


def _densify(sample: FrontSample, spacing: float) -> np.ndarray:
    """Front branch points (x, z) resampled along the seed parameter so gaps are <= spacing."""
    pts = np.column_stack([sample.x, sample.z])
    seg = np.abs(np.diff(pts, axis=0)).max(axis=1)
    sub = np.maximum(1, np.ceil(seg / spacing)).astype(int)
    param = np.concatenate([[0.0], np.cumsum(np.ones_like(sub, dtype=float))])
    fine = np.concatenate([np.linspace(i, i + 1, k, endpoint=False) for i, k in enumerate(sub)] + [[param[-1]]])
    return np.column_stack([np.interp(fine, param, pts[:, 0]), np.interp(fine, param, pts[:, 1])])


def section_check(sample: FrontSample, u: GridFunction, cells: float = 2.0,
                  threshold: float = 0.99) -> SectionReport:
    """Fraction of grid points (x, u(x)) within `cells` grid cells of the front, away from folds."""
    dx = u.dx
    scale = np.array([dx, dx * (1.0 + u.lip)])
    front = _densify(sample, 0.5 * dx) / scale
    tree = cKDTree(front)
    x = u.nodes()
    pts = np.column_stack([x, u.values]) / scale
    dist, _ = tree.query(pts, p=np.inf)
    folds = sample.fold_positions()
    if folds.size:
        eligible = np.min(np.abs(x[:, None] - folds[None, :]), axis=1) > cells * dx
    else:
        eligible = np.ones_like(x, dtype=bool)
    on = dist <= cells
    n_eligible = int(eligible.sum())
    hits = int((on & eligible).sum())
    fraction = hits / n_eligible if n_eligible else 1.0
    return SectionReport(fraction=fraction, eligible=n_eligible, on_front=hits,
                         passed=fraction >= threshold, misses=x[eligible & ~on])
