"""Validated value objects shared across the solver modules."""
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .config import settings


class TimeInterval(BaseModel):
    """Time interval [s, t] of a flow, generating function or minimax step."""

    s: float = Field(..., ge=0.0, description="Start time")
    t: float = Field(..., ge=0.0, description="End time")

    model_config = ConfigDict(frozen=True)

    @model_validator(mode='after')
    def validate_order(self):
        """Allow s == t (identity flow), reject reversed intervals."""
        if not (math.isfinite(self.s) and math.isfinite(self.t)):
            raise ValueError("interval endpoints must be finite")
        if self.t < self.s:
            raise ValueError(f"End time ({self.t}) cannot precede start time ({self.s})")
        return self

    @property
    def length(self) -> float:
        return self.t - self.s

    def split(self, tau: float) -> tuple["TimeInterval", "TimeInterval"]:
        """Split at an interior time tau."""
        if not self.s <= tau <= self.t:
            raise ValueError(f"tau={tau} outside [{self.s}, {self.t}]")
        return TimeInterval(s=self.s, t=tau), TimeInterval(s=tau, t=self.t)


class Partition(BaseModel):
    """Subdivision t_0 < t_1 < ... < t_n of a time interval."""

    times: tuple[float, ...] = Field(..., min_length=2)

    model_config = ConfigDict(frozen=True)

    @field_validator('times')
    @classmethod
    def validate_times(cls, v):
        """Times must be finite, non-negative and strictly increasing."""
        arr = np.asarray(v, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ValueError("partition times must be finite")
        if arr[0] < 0:
            raise ValueError("partition must start at a non-negative time")
        if np.any(np.diff(arr) <= 0):
            raise ValueError("partition times must be strictly increasing")
        return tuple(float(t) for t in arr)

    @classmethod
    def uniform(cls, s: float, t: float, n: int) -> "Partition":
        """n equal sub-intervals of [s, t]; the end points are kept exact."""
        if n < 1:
            raise ValueError("n must be at least 1")
        times = np.linspace(s, t, n + 1)
        times[0], times[-1] = s, t
        return cls(times=tuple(times))

    @classmethod
    def from_norm(cls, T: float, norm: float) -> "Partition":
        """Uniform partition of [0, T] with mesh at most `norm`."""
        return cls.uniform(0.0, T, max(1, math.ceil(T / norm - 1e-12)))

    @property
    def start(self) -> float:
        return self.times[0]

    @property
    def end(self) -> float:
        return self.times[-1]

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def norm(self) -> float:
        """|zeta|: the largest gap."""
        return float(self.gaps.max())

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    def step_fn(self, s: float) -> float:
        """zeta(s) = max{t_i <= s}."""
        if s < self.start:
            raise ValueError(f"s={s} precedes the partition start {self.start}")
        idx = np.searchsorted(self.times, s, side='right') - 1
        return self.times[idx]

    def intervals(self) -> list[TimeInterval]:
        return [TimeInterval(s=a, t=b) for a, b in zip(self.times[:-1], self.times[1:])]

    def refine(self, max_gap: float) -> "Partition":
        """Subdivide every gap longer than max_gap uniformly."""
        times = [self.times[0]]
        for a, b in zip(self.times[:-1], self.times[1:]):
            n = max(1, math.ceil((b - a) / max_gap - 1e-12)) if math.isfinite(max_gap) else 1
            times.extend(np.linspace(a, b, n + 1)[1:-1])
            times.append(b)
        return Partition(times=tuple(times))


class GridSpec(BaseModel):
    """Uniform 1-D spatial grid lo = x_0 < ... < x_{n-1} = hi."""

    lo: float
    hi: float
    n: int = Field(..., ge=2, description="Number of nodes")

    model_config = ConfigDict(frozen=True)

    @model_validator(mode='after')
    def validate_bounds(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("grid bounds must be finite")
        if self.hi <= self.lo:
            raise ValueError(f"hi ({self.hi}) must exceed lo ({self.lo})")
        return self

    @property
    def dx(self) -> float:
        return (self.hi - self.lo) / (self.n - 1)

    def nodes(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)


class CutoffSpec(BaseModel):
    """Radial cutoff theta used to truncate generating families."""

    plateau: float = Field(default=1.0, gt=0, description="theta = 1 on |r| <= plateau")
    max_slope: float = Field(default=settings.HJ_CUTOFF_SLOPE, gt=0, lt=1, description="sup |theta'| < 1")

    model_config = ConfigDict(frozen=True)

    @property
    def width(self) -> float:
        """Transition length of the quintic profile; its peak slope is 15/8 per unit width."""
        return 15.0 / 8.0 / self.max_slope

    @property
    def support(self) -> float:
        return self.plateau + self.width


class MinimaxConfig(BaseModel):
    """Search window and grid resolution of the minimax selector.

    `x0_window_pad` and `y_bound` default to the a-priori domain-of-dependence
    and slope bounds when left as None.
    """

    x0_window_pad: float | None = Field(default=None, gt=0)
    y_bound: float | None = Field(default=None, gt=0)
    grid_x0: int = Field(default=settings.HJ_GRID_X0, ge=9)
    grid_y: int = Field(default=settings.HJ_GRID_Y, ge=9)
    refine_levels: int = Field(default=settings.HJ_REFINE_LEVELS, ge=0, le=8)
    refine_factor: int = Field(default=settings.HJ_REFINE_FACTOR, ge=2, le=16)
    window_margin: float = Field(default=settings.HJ_WINDOW_MARGIN, ge=0, le=5)
    y_bound_cap: float = Field(default=settings.HJ_Y_BOUND_CAP, gt=0)
    near_optimal_rtol: float = Field(default=1e-6, gt=0)
    threads: int = Field(default=settings.HJ_THREADS, ge=1, le=256)

    model_config = ConfigDict(frozen=True)
