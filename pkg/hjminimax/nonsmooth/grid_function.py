"""Lipschitz functions sampled on a uniform 1-D grid."""
from dataclasses import dataclass, field
import json
from pathlib import Path
from typing import Callable, Literal

import numpy as np
import pandas as pd

from ..core.exceptions import DomainError, GridSpecError
from ..core.models import GridSpec

Extrapolation = Literal["clamped-slope", "constant"]

CSV_FLOAT_FORMAT = "%.12e"


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples `values` at lo = x_0 < ... < x_{n-1} = hi with a Lipschitz certificate.

    Evaluation interpolates linearly; outside [lo, hi] the end-cell slope is
    continued ("clamped-slope") or the end value held ("constant"), so either
    rule preserves `lip`.
    """

    lo: float
    hi: float
    values: np.ndarray = field(repr=False)
    lip: float | None = None
    extrapolation: Extrapolation = "clamped-slope"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).copy()
        values.setflags(write=False)
        if values.ndim != 1 or values.size < 2:
            raise GridSpecError("values", "need a 1-D array of at least 2 samples")
        if not self.hi > self.lo:
            raise GridSpecError("domain", f"hi ({self.hi}) must exceed lo ({self.lo})")
        if not np.all(np.isfinite(values)):
            raise DomainError("grid function has non-finite samples")
        if self.extrapolation not in ("clamped-slope", "constant"):
            raise GridSpecError("extrapolation", f"unknown rule {self.extrapolation!r}")
        object.__setattr__(self, "values", values)
        observed = self.lipschitz_estimate()
        if self.lip is None:
            object.__setattr__(self, "lip", observed)
        elif observed > self.lip * (1 + 1e-9) + 1e-12:
            raise DomainError(f"sample slopes reach {observed:.6g}, above the certificate {self.lip:.6g}")

    @classmethod
    def from_callable(cls, f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, n: int,
                      lip: float | None = None,
                      extrapolation: Extrapolation = "clamped-slope") -> "GridFunction":
        x = np.linspace(lo, hi, n)
        return cls(lo=lo, hi=hi, values=np.asarray(f(x), dtype=float), lip=lip,
                   extrapolation=extrapolation)

    @classmethod
    def on_grid(cls, grid: GridSpec, values: np.ndarray, lip: float | None = None) -> "GridFunction":
        return cls(lo=grid.lo, hi=grid.hi, values=values, lip=lip)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def dx(self) -> float:
        return (self.hi - self.lo) / (self.n - 1)

    @property
    def grid(self) -> GridSpec:
        return GridSpec(lo=self.lo, hi=self.hi, n=self.n)

    def nodes(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)

    def slopes(self) -> np.ndarray:
        """Cell slopes (n-1,)."""
        return np.diff(self.values) / self.dx

    def lipschitz_estimate(self) -> float:
        return float(np.abs(np.diff(self.values)).max() / ((self.hi - self.lo) / (self.values.size - 1)))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.nodes(), self.values)
        if self.extrapolation == "clamped-slope":
            s = self.slopes()
            out = np.where(x < self.lo, self.values[0] + s[0] * (x - self.lo), out)
            out = np.where(x > self.hi, self.values[-1] + s[-1] * (x - self.hi), out)
        return out

    def slope_at(self, x) -> np.ndarray:
        """Slope of the cell containing x (right cell at nodes, end slopes outside)."""
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.floor((x - self.lo) / self.dx).astype(int), 0, self.n - 2)
        s = self.slopes()[idx]
        if self.extrapolation == "constant":
            s = np.where((x < self.lo) | (x > self.hi), 0.0, s)
        return s

    def smooth_slope_at(self, x) -> np.ndarray:
        """Slope from node-centred differences, interpolated linearly; second order for smooth data."""
        centred = np.gradient(self.values, self.dx, edge_order=2)
        return np.interp(np.asarray(x, dtype=float), self.nodes(), centred)

    def resample(self, grid: GridSpec) -> "GridFunction":
        """Interpolate onto another grid; the certificate carries over."""
        values = self(grid.nodes())
        observed = float(np.abs(np.diff(values)).max() / grid.dx)
        return GridFunction(lo=grid.lo, hi=grid.hi, values=values, lip=max(self.lip, observed),
                            extrapolation=self.extrapolation)

    def with_values(self, values: np.ndarray, lip: float | None = None) -> "GridFunction":
        return GridFunction(lo=self.lo, hi=self.hi, values=values, lip=lip,
                            extrapolation=self.extrapolation)

    def sup_norm(self, window: tuple[float, float] | None = None) -> float:
        x = self.nodes()
        mask = np.ones_like(x, dtype=bool) if window is None else (x >= window[0]) & (x <= window[1])
        return float(np.abs(self.values[mask]).max())

    def header(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "n": self.n, "lip": self.lip,
                "extrapolation": self.extrapolation}

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"x": self.nodes(), "value": self.values})

    def to_csv(self, path: Path) -> None:
        """CSV (x, value) preceded by a one-line JSON header comment."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write("# " + json.dumps(self.header(), sort_keys=True) + "\n")
            self.to_frame().to_csv(fh, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")

    @classmethod
    def read_csv(cls, path: Path) -> "GridFunction":
        path = Path(path)
        with open(path) as fh:
            first = fh.readline()
        if not first.startswith("#"):
            raise GridSpecError(str(path), "missing JSON header line")
        header = json.loads(first[1:])
        frame = pd.read_csv(path, comment="#")
        if len(frame) != header["n"]:
            raise GridSpecError(str(path), f"header says n={header['n']}, file has {len(frame)} rows")
        return cls(lo=header["lo"], hi=header["hi"], values=frame["value"].to_numpy(),
                   lip=header["lip"], extrapolation=header.get("extrapolation", "clamped-slope"))
