"""JSON run configuration of the experiment runner."""
import json
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, Field, ValidationError as PydanticValidationError, model_validator

from ..core.config import settings
from ..core.exceptions import ConfigurationError, GridSpecError
from ..core.models import GridSpec, MinimaxConfig, Partition


class RegistryEntry(BaseModel):
    key: str
    params: dict[str, float | int] = Field(default_factory=dict)


class DomainConfig(BaseModel):
    """Output grid and the comparison window K (default: the middle half)."""

    lo: float
    hi: float
    n: int = Field(..., ge=3)
    window: tuple[float, float] | None = None

    @model_validator(mode='after')
    def validate_window(self):
        if self.hi <= self.lo:
            raise ValueError(f"hi ({self.hi}) must exceed lo ({self.lo})")
        if self.window is not None:
            a, b = self.window
            if not self.lo <= a < b <= self.hi:
                raise ValueError(f"window [{a}, {b}] must lie inside [{self.lo}, {self.hi}]")
        return self

    @property
    def grid(self) -> GridSpec:
        return GridSpec(lo=self.lo, hi=self.hi, n=self.n)

    @property
    def K(self) -> tuple[float, float]:
        if self.window is not None:
            return self.window
        quarter = 0.25 * (self.hi - self.lo)
        return self.lo + quarter, self.hi - quarter


class TimeConfig(BaseModel):
    T: float = Field(..., gt=0)
    partition_norms: list[float] = Field(default_factory=list)
    sample_times: list[float] = Field(default_factory=list)

    @model_validator(mode='after')
    def validate_norms(self):
        for norm in self.partition_norms:
            if not 0 < norm <= self.T:
                raise ValueError(f"partition norm {norm} must lie in (0, T={self.T}]")
        for s in self.sample_times:
            if not 0 <= s <= self.T:
                raise ValueError(f"sample time {s} must lie in [0, T={self.T}]")
        return self

    def partitions(self) -> list[Partition]:
        norms = self.partition_norms or [self.T]
        return [Partition.from_norm(self.T, norm) for norm in sorted(norms, reverse=True)]

    @property
    def finest(self) -> Partition:
        return self.partitions()[-1]


class ReferenceConfig(BaseModel):
    dx: float | None = Field(default=None, gt=0)
    cfl: float = Field(default=settings.HJ_LF_CFL, gt=0)
    threshold: float = Field(default=0.05, gt=0)
    time_levels: int = Field(default=50, ge=2)


class WavefrontConfig(BaseModel):
    seeds: int = Field(default=801, ge=3)
    seed_pad: float = Field(default=1.0, ge=0)
    t_samples: list[float] = Field(default_factory=list)
    fold_tol: float = Field(default=1e-3, gt=0)


class SelfCheckConfig(BaseModel):
    pairs: int = Field(default=50, ge=1)
    points: int = Field(default=5, ge=1)
    queries: int = Field(default=20, ge=1)
    step: float = Field(default=0.2, gt=0)


class ExperimentConfig(BaseModel):
    name: str = "experiment"
    hamiltonian: RegistryEntry
    initial: RegistryEntry
    domain: DomainConfig
    time: TimeConfig
    selector: MinimaxConfig = Field(default_factory=MinimaxConfig)
    reference: ReferenceConfig = Field(default_factory=ReferenceConfig)
    wavefront: WavefrontConfig = Field(default_factory=WavefrontConfig)
    self_check: SelfCheckConfig = Field(default_factory=SelfCheckConfig)
    plot: Literal["python", "gnuplot", "none"] = "python"
    output_dir: str = "runs/experiment"


def load_config(path: Path) -> ExperimentConfig:
    """Parse and validate a JSON run config; problems surface as ConfigurationError with a location."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError("config", f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path}:{e.lineno}:{e.colno}", e.msg) from e
    try:
        return ExperimentConfig.model_validate(raw)
    except PydanticValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(part) for part in first["loc"]) or "config"
        if where.startswith("domain"):
            raise GridSpecError(where, first["msg"]) from e
        raise ConfigurationError(where, first["msg"]) from e
