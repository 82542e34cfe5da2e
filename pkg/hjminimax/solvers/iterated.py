"""Iterated minimax solutions over time partitions and their convergence harness."""
from dataclasses import dataclass, field
import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from ..contact.flow import max_step
from ..contact.hamiltonian import HamiltonianSpec
from ..core.exceptions import NodeError
from ..core.logging_config import get_logger
from ..core.models import GridSpec, MinimaxConfig, Partition, TimeInterval
from ..nonsmooth.grid_function import GridFunction
from ..selector.minimax import lipschitz_bound, minimax_operator
from .reference import ReferenceSolution

logger = get_logger(__name__)

SUBDIVISION_FACTOR = 0.9
MIN_ERROR_RATIO = 5.0


@dataclass(frozen=True, eq=False)
class SolutionTrace:
    """Snapshots R_{H,zeta}^{t_0, t_i} v at every partition time.

    `certificates[i]` is the Lipschitz certificate stored with snapshot i;
    `samples` holds R_{H,zeta}^{t_0, s} v at extra times s between nodes.
    """

    partition: Partition
    snapshots: tuple[tuple[float, GridFunction], ...]
    certificates: tuple[float, ...]
    samples: dict[float, GridFunction] = field(default_factory=dict)
    requested: Partition | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.snapshots])

    @property
    def final(self) -> GridFunction:
        return self.snapshots[-1][1]

    def at(self, t: float) -> GridFunction:
        """Snapshot or sample stored at time t."""
        for s, u in self.snapshots:
            if math.isclose(s, t, abs_tol=1e-12):
                return u
        for s, u in self.samples.items():
            if math.isclose(s, t, abs_tol=1e-12):
                return u
        raise KeyError(f"no snapshot or sample at t={t}")

    def all_times(self) -> list[float]:
        return sorted(set(self.times.tolist()) | set(self.samples))

    def to_frame(self) -> pd.DataFrame:
        """Long format (t, x, u) over snapshots and samples."""
        frames = []
        for t in self.all_times():
            u = self.at(t)
            frames.append(pd.DataFrame({"t": t, "x": u.nodes(), "u": u.values}))
        return pd.concat(frames, ignore_index=True)


def uniform_partition(T: float, norm: float) -> Partition:
    return Partition.from_norm(T, norm)


def admissible_partition(H: HamiltonianSpec, zeta: Partition) -> Partition:
    """zeta with every gap at or beyond max_step(H) subdivided."""
    limit = max_step(H)
    if not math.isfinite(limit) or zeta.norm < limit:
        return zeta
    refined = zeta.refine(SUBDIVISION_FACTOR * limit)
    logger.warning("gap_subdivided", norm=zeta.norm, limit=limit,
                   steps_before=zeta.n_steps, steps_after=refined.n_steps)
    return refined


def iterated_minimax(H: HamiltonianSpec, v: GridFunction, zeta: Partition,
                     cfg: MinimaxConfig | None = None, out_grid: GridSpec | None = None,
                     sample_times: Sequence[float] = ()) -> SolutionTrace:
    """R_H^{t_{n-1}, t_n} o ... o R_H^{t_0, t_1} v, keeping every intermediate snapshot.

    Each step's output is evaluated on the fixed `out_grid` (default: the grid
    of v) and extended by clamped-slope extrapolation for the next step.
    """
    out_grid = out_grid or v.grid
    partition = admissible_partition(H, zeta)
    u = v.resample(out_grid)
    snapshots = [(partition.start, u)]
    certificates = [u.lip]
    extra = sorted(float(s) for s in sample_times)
    samples: dict[float, GridFunction] = {}

    for step, iv in enumerate(partition.intervals()):
        try:
            for s in extra:
                if iv.s < s < iv.t:
                    samples[s] = minimax_operator(H, TimeInterval(s=iv.s, t=s), u, out_grid, cfg)
            u = minimax_operator(H, iv, u, out_grid, cfg)
        except NodeError as e:
            raise NodeError(e.details.get("x", float("nan")), e.cause, step_index=step) from e
        snapshots.append((iv.t, u))
        certificates.append(u.lip)
        logger.debug("iterated_step_done", step=step, s=iv.s, t=iv.t, lip=u.lip)

    trace = SolutionTrace(partition=partition, snapshots=tuple(snapshots),
                          certificates=tuple(certificates), samples=samples, requested=zeta)
    logger.info("iterated_minimax_done", steps=partition.n_steps, norm=partition.norm,
                final_lip=trace.certificates[-1])
    return trace


def lipschitz_envelope(H: HamiltonianSpec, v: GridFunction, s: float) -> float:
    """(||dv|| + s ||H_x||) exp(s ||H_z||): the equi-Lipschitz bound of iterated snapshots."""
    return lipschitz_bound(H, s, v.lip)


def sup_bound(H: HamiltonianSpec, v: GridFunction, s: float, K: tuple[float, float]) -> float:
    """||v||_K + s ||H||, the uniform bound of single-step snapshots."""
    return v.sup_norm(K) + s * H.norm_H


def _window_nodes(grid: GridSpec, K: tuple[float, float]) -> np.ndarray:
    x = grid.nodes()
    return x[(x >= K[0] - 1e-12) & (x <= K[1] + 1e-12)]


def trace_error(trace: SolutionTrace, reference: ReferenceSolution, K: tuple[float, float]) -> pd.DataFrame:
    """Sup-norm error over K at every snapshot time."""
    rows = []
    for t, u in trace.snapshots:
        x = _window_nodes(u.grid, K)
        rows.append({"t": t, "error": float(np.abs(u(x) - reference.at(t)(x)).max())})
    return pd.DataFrame(rows)


@dataclass
class ConvergenceTable:
    """Errors of iterated minimax against the reference, one row per partition."""

    frame: pd.DataFrame
    verdict: dict = field(default_factory=dict)

    def to_csv(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.frame.to_csv(path, index=False, float_format="%.12e", lineterminator="\n")

    def verdict_json(self) -> str:
        return json.dumps(self.verdict, indent=2, sort_keys=True)


def _trend(norms: np.ndarray, errors: np.ndarray, tol: float = 0.0) -> tuple[float, float]:
    """Fraction of strictly decreasing consecutive errors and the log-log slope error ~ norm^rate.

    A step also counts as decreasing when the finer error is within tol, the grid resolution floor.
    """
    order = np.argsort(-norms)
    e = errors[order]
    if e.size < 2:
        return 1.0, float("nan")
    fraction = float(np.mean((e[1:] < e[:-1]) | (e[1:] <= tol)))
    positive = e > 0
    if positive.sum() >= 2:
        rate = float(np.polyfit(np.log(norms[order][positive]), np.log(e[positive]), 1)[0])
    else:
        rate = float("nan")
    return fraction, rate


def _error_ratio(errors: np.ndarray, tol: float = 0.0) -> tuple[float | None, bool]:
    """Coarsest over finest error for rows sorted coarsest first; ok at MIN_ERROR_RATIO or when all within tol."""
    if errors.size < 2:
        return None, False
    coarsest, finest = float(errors[0]), float(errors[-1])
    ratio = coarsest / finest if finest > 0 else (math.inf if coarsest > 0 else None)
    ok = coarsest >= MIN_ERROR_RATIO * finest or coarsest <= tol
    return ratio, bool(ok)


def convergence_study(H: HamiltonianSpec, v: GridFunction, partitions: Sequence[Partition],
                      reference: ReferenceSolution, K: tuple[float, float],
                      cfg: MinimaxConfig | None = None, out_grid: GridSpec | None = None,
                      threshold: float = 0.05) -> ConvergenceTable:
    """Sup over [0, T] x K of |iterated minimax - reference| per partition, with a trend verdict."""
    rows = []
    for zeta in sorted(partitions, key=lambda p: -p.norm):
        trace = iterated_minimax(H, v, zeta, cfg, out_grid)
        errors = trace_error(trace, reference, K)
        rows.append({
            "norm": zeta.norm,
            "steps": trace.partition.n_steps,
            "sup_error": float(errors["error"].max()),
            "final_error": float(errors["error"].iloc[-1]),
            "final_lip": trace.certificates[-1],
        })
        logger.info("convergence_row", norm=zeta.norm, sup_error=rows[-1]["sup_error"])
    frame = pd.DataFrame(rows, columns=["norm", "steps", "sup_error", "final_error", "final_lip"])
    errors = frame["sup_error"].to_numpy()
    grid = out_grid or v.grid
    grid_tol = 0.5 * grid.dx * float(frame["final_lip"].max()) if len(frame) else 0.0
    fraction, rate = _trend(frame["norm"].to_numpy(), errors, grid_tol)
    ratio, ratio_ok = _error_ratio(errors, grid_tol)
    final = float(errors[-1]) if len(frame) else math.inf
    verdict = {
        "decreasing": bool(fraction == 1.0),
        "decreasing_fraction": fraction,
        "grid_tol": grid_tol,
        "rate": None if math.isnan(rate) else rate,
        "coarsest_over_finest": None if ratio is None or math.isinf(ratio) else ratio,
        "ratio_ok": ratio_ok,
        "final_error": final,
        "threshold": threshold,
        "final_below_threshold": bool(final <= threshold),
    }
    verdict["passed"] = verdict["decreasing"] and verdict["ratio_ok"] and verdict["final_below_threshold"]
    return ConvergenceTable(frame=frame, verdict=verdict)
