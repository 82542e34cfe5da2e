"""Minimax selector R_H^{s,t} on the single-step fiber (x0, y), k = 1.

For an output node x the family is

    S(x; x0, y) = v(x0) + (x - x0) y - Phi^{s,t}(x0, y, v(x0))

on the window [x - P, x + P] x [-Y, Y]. Near the corners (x + P, +Y) and
(x - P, -Y) S is strongly negative; the selected value is the lowest level c
at which {S <= c} joins those two corners, i.e. the inf over paths between
them of the max of S along the path. It is found by bisection over the
sampled values of a coarse grid and refined on nested local grids around the
bridging cell.
When S is convex in x0 this level agrees with the box value, the inf over x0
of the max over y.
"""
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
import math
from typing import Callable

import numpy as np
from scipy import ndimage

from ..contact.hamiltonian import HamiltonianSpec
from ..core.exceptions import HJSolverError, NodeError, WindowError
from ..core.logging_config import get_logger
from ..core.models import GridSpec, MinimaxConfig, TimeInterval
from ..generating.family import FiberPoint
from ..generating.function import check_step, phi_eval_batch
from ..nonsmooth.grid_function import GridFunction

logger = get_logger(__name__)

PAD_FLOOR = 0.1
Y_FLOOR = 0.25
TIE_RTOL = 1e-12
PHI_CHUNK = 20000
LOCAL_HALF_WIDTH = 2


def lipschitz_bound(H: HamiltonianSpec, length: float, lip_v: float) -> float:
    """(lip_v + |t - s| ||H_x||) exp(|t - s| ||H_z||)."""
    return (lip_v + length * H.norm_dxH) * math.exp(length * H.norm_dzH)


@dataclass(frozen=True)
class SelectorWindow:
    """Half-widths of the fiber window around every node."""

    pad: float
    y_bound: float
    lip_bound: float


def selector_window(H: HamiltonianSpec, iv: TimeInterval, v: GridFunction,
                    cfg: MinimaxConfig) -> SelectorWindow:
    """Domain-of-dependence pad and slope bound, widened by the configured margin."""
    margin = 1.0 + cfg.window_margin
    lip = lipschitz_bound(H, iv.length, v.lip)
    pad = cfg.x0_window_pad or margin * iv.length * H.norm_dyH + PAD_FLOOR
    y_bound = cfg.y_bound or margin * lip + Y_FLOOR
    if y_bound > cfg.y_bound_cap:
        logger.warning("y_bound_capped", requested=y_bound, cap=cfg.y_bound_cap)
        y_bound = cfg.y_bound_cap
    return SelectorWindow(pad=float(pad), y_bound=float(y_bound), lip_bound=float(lip))


class ShootingPhi:
    """Phi^{s,t}(x0, y, v(x0)) by batched shooting."""

    def __init__(self, H: HamiltonianSpec, iv: TimeInterval, v: GridFunction):
        self.H = H
        self.iv = iv
        self.v = v

    def scattered(self, x0: np.ndarray, y: np.ndarray) -> np.ndarray:
        x0 = np.ravel(np.asarray(x0, dtype=float))
        y = np.ravel(np.asarray(y, dtype=float))
        out = np.empty(x0.size)
        for start in range(0, x0.size, PHI_CHUNK):
            part = slice(start, start + PHI_CHUNK)
            out[part] = phi_eval_batch(self.H, self.iv, x0[part], y[part], self.v(x0[part]))[0]
        return out

    def table(self, x0: np.ndarray, y: np.ndarray) -> np.ndarray:
        X0, Yg = np.meshgrid(x0, y, indexing="ij")
        return self.scattered(X0, Yg).reshape(X0.shape)


class SeparablePhi(ShootingPhi):
    """Phi = A(y) + kappa z0, exact for x-independent H = c z + h(y).

    Only the momentum profile A needs shooting, once per distinct y.
    """

    def __init__(self, H: HamiltonianSpec, iv: TimeInterval, v: GridFunction):
        super().__init__(H, iv, v)
        phi, _, _ = phi_eval_batch(H, iv, np.zeros(2), np.zeros(2), np.array([0.0, 1.0]))
        self.kappa = float(phi[1] - phi[0])

    def profile(self, y: np.ndarray) -> np.ndarray:
        y = np.ravel(np.asarray(y, dtype=float))
        distinct, inverse = np.unique(y, return_inverse=True)
        zeros = np.zeros_like(distinct)
        return phi_eval_batch(self.H, self.iv, zeros, distinct, zeros)[0][inverse]

    def scattered(self, x0: np.ndarray, y: np.ndarray) -> np.ndarray:
        x0 = np.ravel(np.asarray(x0, dtype=float))
        return self.profile(y) + self.kappa * self.v(x0)

    def table(self, x0: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.kappa * self.v(np.asarray(x0, dtype=float))[:, None] + self.profile(y)[None, :]


def make_phi_source(H: HamiltonianSpec, iv: TimeInterval, v: GridFunction) -> ShootingPhi:
    if H.x_independent and (H.z_independent or H.profile is not None):
        return SeparablePhi(H, iv, v)
    return ShootingPhi(H, iv, v)


@dataclass(eq=False)
class FiberLevel:
    """S sampled on a uniform (x0, y) grid with the seeds of both ends."""

    a: np.ndarray
    y: np.ndarray
    S: np.ndarray
    seeds_plus: np.ndarray
    seeds_minus: np.ndarray

    @property
    def spacing(self) -> tuple[float, float]:
        return float(self.a[1] - self.a[0]), float(self.y[1] - self.y[0])


@dataclass(eq=False)
class Bottleneck:
    value: float
    cell: tuple[int, int]
    comp_plus: np.ndarray
    comp_minus: np.ndarray


def _joined(S: np.ndarray, c: float, plus: np.ndarray, minus: np.ndarray) -> bool:
    below = S <= c
    labels, _ = ndimage.label(below)
    common = np.intersect1d(labels[plus & below], labels[minus & below])
    return bool(np.any(common > 0))


def _component(labels: np.ndarray, seeds: np.ndarray) -> np.ndarray:
    ids = np.unique(labels[seeds])
    ids = ids[ids > 0]
    return np.isin(labels, ids)


def _bridge_cell(level: FiberLevel, c: float, comp_plus: np.ndarray,
                 comp_minus: np.ndarray) -> tuple[int, int]:
    """Cell at level c joining both ends; flattest first, then lexicographic (x0, y)."""
    S = level.S
    at_level = np.abs(S - c) <= TIE_RTOL * (1.0 + abs(c))
    near_plus = ndimage.binary_dilation(comp_plus)
    near_minus = ndimage.binary_dilation(comp_minus)
    for mask in (at_level & near_plus & near_minus, at_level & (near_plus | near_minus)):
        if mask.any():
            at_level = mask
            break
    idx = np.argwhere(at_level)
    ga, gy = np.gradient(S, level.a, level.y)
    gnorm = np.hypot(ga, gy)[idx[:, 0], idx[:, 1]]
    scale = 1e-9 * (1.0 + gnorm.max())
    order = np.lexsort((level.y[idx[:, 1]], level.a[idx[:, 0]], np.round(gnorm / scale)))
    i, j = idx[order[0]]
    return int(i), int(j)


def find_bottleneck(level: FiberLevel) -> Bottleneck | None:
    """Lowest sampled level joining the two seed sets (4-connectivity)."""
    S, plus, minus = level.S, level.seeds_plus, level.seeds_minus
    if not plus.any() or not minus.any():
        return None
    values = np.unique(S)
    lo = int(np.searchsorted(values, max(S[plus].min(), S[minus].min())))
    hi = values.size - 1
    if not _joined(S, values[hi], plus, minus):
        return None
    while lo < hi:
        mid = (lo + hi) // 2
        if _joined(S, values[mid], plus, minus):
            hi = mid
        else:
            lo = mid + 1
    c = float(values[lo])
    labels, _ = ndimage.label(S < c)
    comp_plus = _component(labels, plus)
    comp_minus = _component(labels, minus)
    return Bottleneck(value=c, cell=_bridge_cell(level, c, comp_plus, comp_minus),
                      comp_plus=comp_plus, comp_minus=comp_minus)


def _stationary(level: FiberLevel, cell: tuple[int, int]) -> bool:
    """One-sided differences along each axis bracket 0 up to their own spread."""
    S = level.S
    i, j = cell
    for axis, idx, n in ((0, i, S.shape[0]), (1, j, S.shape[1])):
        line = S[:, j] if axis == 0 else S[i, :]
        left = line[idx] - line[idx - 1] if idx > 0 else None
        right = line[idx + 1] - line[idx] if idx < n - 1 else None
        if left is None or right is None:
            continue
        if left * right > 0 and abs(left + right) > 2.0 * abs(right - left) + 1e-12:
            return False
    return True


@dataclass(frozen=True, eq=False)
class MinimaxResult:
    """Selected value at one node with its achieving fiber point and diagnostics."""

    x: float
    value: float
    arg_x0: float
    arg_y: float
    near_optimal_set: np.ndarray = field(repr=False)
    is_boundary_hit: bool = False
    boundary_reason: str = ""
    stationary: bool = True
    grid_tol: float = 0.0
    levels: int = 0
    window: SelectorWindow | None = None

    @property
    def argmin(self) -> FiberPoint:
        return FiberPoint.single(self.arg_x0, self.arg_y)

    def near_optimal_points(self) -> FiberPoint:
        pts = self.near_optimal_set
        return FiberPoint.single(pts[:, 0], pts[:, 1])


@dataclass(eq=False)
class _NodeSearch:
    x: float
    level: FiberLevel
    found: Bottleneck
    bounds: tuple[float, float]
    levels: int = 0
    active: bool = True
    boundary_reason: str = ""


def _family_values(x: float, a: np.ndarray, y: np.ndarray, va: np.ndarray,
                   phi: np.ndarray) -> np.ndarray:
    return va[:, None] + (x - a)[:, None] * y[None, :] - phi


class MinimaxEngine:
    """Coarse bottleneck search and batched refinement for a set of nodes."""

    def __init__(self, H: HamiltonianSpec, iv: TimeInterval, v: GridFunction,
                 cfg: MinimaxConfig | None = None):
        check_step(H, iv)
        self.H = H
        self.iv = iv
        self.v = v
        self.cfg = cfg or MinimaxConfig()
        self.window = selector_window(H, iv, v, self.cfg)
        self.phi = make_phi_source(H, iv, v)
        self.y_nodes = np.linspace(-self.window.y_bound, self.window.y_bound, self.cfg.grid_y)
        self.h0 = 2.0 * self.window.pad / (self.cfg.grid_x0 - 1)

    def _lattice(self, nodes: np.ndarray) -> np.ndarray:
        start = nodes.min() - self.window.pad
        count = int(math.floor((np.ptp(nodes) + 2 * self.window.pad) / self.h0 + 1e-9)) + 1
        return start + self.h0 * np.arange(count)

    def _map(self, fn: Callable[[int], object], count: int) -> list:
        if self.cfg.threads <= 1 or count <= 1:
            return [fn(i) for i in range(count)]
        out: list = [None] * count
        with ThreadPoolExecutor(max_workers=min(self.cfg.threads, count)) as executor:
            future_to_index = {executor.submit(fn, i): i for i in range(count)}
            for future in as_completed(future_to_index):
                out[future_to_index[future]] = future.result()
        return out

    def _coarse(self, x: float, lattice: np.ndarray, v_lat: np.ndarray,
                table: np.ndarray) -> _NodeSearch:
        sel = np.flatnonzero(np.abs(lattice - x) <= self.window.pad + 1e-9 * self.h0)
        a = lattice[sel]
        S = _family_values(x, a, self.y_nodes, v_lat[sel], table[sel])
        plus = np.zeros_like(S, dtype=bool)
        minus = np.zeros_like(S, dtype=bool)
        plus[-1, -1] = True
        minus[0, 0] = True
        level = FiberLevel(a=a, y=self.y_nodes, S=S, seeds_plus=plus, seeds_minus=minus)
        found = find_bottleneck(level)
        search = _NodeSearch(x=x, level=level, found=found, bounds=(float(a[0]), float(a[-1])))
        i, j = found.cell
        if i in (0, S.shape[0] - 1):
            search.boundary_reason = "x0 window edge"
        elif j in (0, S.shape[1] - 1):
            search.boundary_reason = "y window edge"
        elif not (S[-1, -1] < found.value and S[0, 0] < found.value):
            search.boundary_reason = "window corners not below the value"
        search.active = not search.boundary_reason
        return search

    def _local_axes(self, search: _NodeSearch) -> tuple[np.ndarray, np.ndarray]:
        f = self.cfg.refine_factor
        ha, hy = search.level.spacing
        i, j = search.found.cell
        steps = np.arange(-LOCAL_HALF_WIDTH * f, LOCAL_HALF_WIDTH * f + 1) / f
        a = search.level.a[i] + ha * steps
        y = search.level.y[j] + hy * steps
        tol_a, tol_y = 1e-9 * ha, 1e-9 * hy
        a = a[(a >= search.bounds[0] - tol_a) & (a <= search.bounds[1] + tol_a)]
        y = y[(y >= -self.window.y_bound - tol_y) & (y <= self.window.y_bound + tol_y)]
        return a, y

    def _refine_one(self, search: _NodeSearch, a: np.ndarray, y: np.ndarray,
                    phi: np.ndarray) -> None:
        prev, found = search.level, search.found
        ha, hy = prev.spacing
        ci = np.clip(np.rint((a - prev.a[0]) / ha).astype(int), 0, prev.a.size - 1)
        cj = np.clip(np.rint((y - prev.y[0]) / hy).astype(int), 0, prev.y.size - 1)
        level = FiberLevel(
            a=a, y=y, S=_family_values(search.x, a, y, self.v(a), phi),
            seeds_plus=found.comp_plus[np.ix_(ci, cj)],
            seeds_minus=found.comp_minus[np.ix_(ci, cj)],
        )
        fine = find_bottleneck(level)
        if fine is None:
            search.active = False
            return
        i, j = fine.cell
        on_edge = (i in (0, a.size - 1) and search.bounds[0] < a[i] < search.bounds[1]) or \
            (j in (0, y.size - 1) and abs(y[j]) < self.window.y_bound)
        if on_edge:
            # saddle left the local box; keep the previous level
            logger.debug("refinement_left_box", x=search.x, level=search.levels + 1)
            search.active = False
            return
        change = abs(fine.value - found.value)
        search.level, search.found = level, fine
        search.levels += 1
        if change < 1e-6 * (1.0 + abs(fine.value)):
            search.active = False

    def _refine(self, searches: list[_NodeSearch]) -> None:
        for _ in range(self.cfg.refine_levels):
            active = [s for s in searches if s.active]
            if not active:
                return
            axes = [self._local_axes(s) for s in active]
            x0_all = np.concatenate([np.repeat(a, y.size) for a, y in axes])
            y_all = np.concatenate([np.tile(y, a.size) for a, y in axes])
            phi_all = self.phi.scattered(x0_all, y_all)
            offsets = np.cumsum([0] + [a.size * y.size for a, y in axes])

            def refine(i: int) -> None:
                a, y = axes[i]
                block = phi_all[offsets[i]:offsets[i + 1]].reshape(a.size, y.size)
                self._refine_one(active[i], a, y, block)

            self._map(refine, len(active))

    def _result(self, search: _NodeSearch) -> MinimaxResult:
        level, found = search.level, search.found
        i, j = found.cell
        ha, hy = level.spacing
        grid_tol = 3.0 * (ha * (self.window.y_bound + self.v.lip) + hy * self.window.pad)
        near = np.abs(level.S - found.value) <= self.cfg.near_optimal_rtol * (1.0 + abs(found.value))
        idx = np.argwhere(near)
        return MinimaxResult(
            x=search.x,
            value=found.value,
            arg_x0=float(level.a[i]),
            arg_y=float(level.y[j]),
            near_optimal_set=np.column_stack([level.a[idx[:, 0]], level.y[idx[:, 1]]]),
            is_boundary_hit=bool(search.boundary_reason),
            boundary_reason=search.boundary_reason,
            stationary=_stationary(level, found.cell),
            grid_tol=float(grid_tol),
            levels=search.levels,
            window=self.window,
        )

    def run(self, nodes) -> list[MinimaxResult]:
        """Selected values at all nodes; boundary hits are flagged, not raised."""
        nodes = np.atleast_1d(np.asarray(nodes, dtype=float))
        lattice = self._lattice(nodes)
        table = self.phi.table(lattice, self.y_nodes)
        v_lat = self.v(lattice)
        searches = self._map(lambda i: self._coarse(float(nodes[i]), lattice, v_lat, table), nodes.size)
        self._refine(searches)
        results = [self._result(s) for s in searches]
        hits = sum(r.is_boundary_hit for r in results)
        logger.debug("minimax_sweep_done", nodes=nodes.size, s=self.iv.s, t=self.iv.t,
                     pad=self.window.pad, y_bound=self.window.y_bound, boundary_hits=hits)
        return results


def minimax_step(H: HamiltonianSpec, iv: TimeInterval, v: GridFunction, x: float,
                 cfg: MinimaxConfig | None = None) -> MinimaxResult:
    """R_H^{s,t} v(x) at a single point; a saddle on the window boundary raises WindowError."""
    result = MinimaxEngine(H, iv, v, cfg).run([float(x)])[0]
    if result.is_boundary_hit:
        raise WindowError(float(x), result.boundary_reason)
    return result


def minimax_sweep(H: HamiltonianSpec, iv: TimeInterval, v: GridFunction, nodes,
                  cfg: MinimaxConfig | None = None) -> list[MinimaxResult]:
    """minimax_step at many nodes sharing one Phi table; the first failing node aborts."""
    nodes = np.atleast_1d(np.asarray(nodes, dtype=float))
    engine = MinimaxEngine(H, iv, v, cfg)
    try:
        results = engine.run(nodes)
    except HJSolverError as exc:
        # the shared table failed; rerun node by node to report the culprit
        for x in nodes:
            try:
                engine.run([x])
            except HJSolverError as node_exc:
                raise NodeError(float(x), node_exc) from node_exc
        raise NodeError(float(nodes[0]), exc) from exc
    for r in results:
        if r.is_boundary_hit:
            raise NodeError(r.x, WindowError(r.x, r.boundary_reason))
    return results


def minimax_operator(H: HamiltonianSpec, iv: TimeInterval, v: GridFunction,
                     out_grid: GridSpec | None = None, cfg: MinimaxConfig | None = None) -> GridFunction:
    """R_H^{s,t} v on out_grid (default: the grid of v) with a certified Lipschitz constant."""
    out_grid = out_grid or v.grid
    if iv.length == 0:
        return v.resample(out_grid)
    results = minimax_sweep(H, iv, v, out_grid.nodes(), cfg)
    values = np.array([r.value for r in results])
    bound = lipschitz_bound(H, iv.length, v.lip)
    observed = float(np.abs(np.diff(values)).max() / out_grid.dx)
    if observed > bound * 1.05 + 1e-9:
        logger.warning("lipschitz_certificate_exceeded", observed=observed, bound=bound,
                       s=iv.s, t=iv.t)
    return GridFunction.on_grid(out_grid, values, lip=max(bound, observed))
