"""Discrete-composition generating families S(tau, x; xi) quadratic at infinity.

For an inner partition s = t_0 < ... < t_N = t and fiber variables
xi = (x_0, ..., x_{N-1}, y_1, ..., y_N):

    z_0 = v(x_0)
    z_j = z_{j-1} + (x_j - x_{j-1}).y_j - Phi^{tau_{j-1}, tau_j}(x_{j-1}, y_j, z_{j-1}),  x_N = x
    S   = z_N = Q(xi) + W(x, xi)

with tau_j = s + (tau - s)(t_j - s)/(t - s).
"""
from dataclasses import dataclass, field
import math
from typing import Callable, NamedTuple

import numpy as np
from scipy import ndimage, optimize
from scipy.spatial.distance import directed_hausdorff

from ..contact.flow import flow_between, max_step
from ..contact.hamiltonian import HamiltonianSpec, JetPoint
from ..core.config import settings
from ..core.exceptions import DomainError, TruncationError
from ..core.logging_config import get_logger
from ..core.models import CutoffSpec, Partition, TimeInterval
from ..nonsmooth.clarke import clarke_subgradient
from ..nonsmooth.grid_function import GridFunction
from .function import phi_eval_batch

logger = get_logger(__name__)

InitialData = Callable[[np.ndarray], np.ndarray]


def eval_initial(v: InitialData, x0: np.ndarray, k: int) -> np.ndarray:
    """v at positions (..., k); 1-D data takes scalar positions."""
    x0 = np.asarray(x0, dtype=float)
    return np.asarray(v(x0[..., 0]) if k == 1 else v(x0), dtype=float)


def initial_slope(v: InitialData, x0: np.ndarray) -> np.ndarray:
    """Slope selection of 1-D initial data at scalar positions."""
    if isinstance(v, GridFunction):
        return v.smooth_slope_at(x0)
    h = 1e-6 * (1.0 + np.abs(x0))
    return (np.asarray(v(x0 + h)) - np.asarray(v(x0 - h))) / (2 * h)


@dataclass(frozen=True, eq=False)
class FamilySpec:
    """Generating family of R_H^{s,tau} built on an inner partition of [s, t]."""

    H: HamiltonianSpec
    iv: TimeInterval
    inner_partition: Partition
    v: InitialData = field(repr=False)
    tau: float | None = None

    def __post_init__(self):
        if self.tau is None:
            object.__setattr__(self, "tau", self.iv.t)
        p = self.inner_partition
        if not (math.isclose(p.start, self.iv.s, abs_tol=1e-12) and math.isclose(p.end, self.iv.t, abs_tol=1e-12)):
            raise DomainError(f"inner partition [{p.start}, {p.end}] does not span [{self.iv.s}, {self.iv.t}]")
        if self.iv.length > 0 and p.norm >= max_step(self.H):
            raise DomainError(f"inner gap {p.norm:.6g} not below the step limit {max_step(self.H):.6g}")
        if not self.iv.s <= self.tau <= self.iv.t:
            raise DomainError(f"tau={self.tau} outside [{self.iv.s}, {self.iv.t}]")

    @classmethod
    def single_step(cls, H: HamiltonianSpec, iv: TimeInterval, v: InitialData,
                    tau: float | None = None) -> "FamilySpec":
        return cls(H=H, iv=iv, inner_partition=Partition(times=(iv.s, iv.t)), v=v, tau=tau)

    @classmethod
    def with_steps(cls, H: HamiltonianSpec, iv: TimeInterval, v: InitialData, n: int,
                   tau: float | None = None) -> "FamilySpec":
        return cls(H=H, iv=iv, inner_partition=Partition.uniform(iv.s, iv.t, n), v=v, tau=tau)

    @classmethod
    def default(cls, H: HamiltonianSpec, iv: TimeInterval, v: InitialData) -> "FamilySpec":
        """Uniform inner partition with gaps at most half the step limit."""
        limit = max_step(H)
        n = 1 if not math.isfinite(limit) else max(1, math.ceil(iv.length / (0.5 * limit)))
        return cls.with_steps(H, iv, v, n)

    @property
    def k(self) -> int:
        return self.H.k

    @property
    def N(self) -> int:
        return self.inner_partition.n_steps

    @property
    def fiber_dim(self) -> int:
        return 2 * self.k * self.N

    def sub_times(self) -> np.ndarray:
        """Rescaled times tau_0 = s, ..., tau_N = tau."""
        s, t = self.iv.s, self.iv.t
        if t == s:
            return np.full(self.N + 1, s)
        times = s + (self.tau - s) * (np.asarray(self.inner_partition.times) - s) / (t - s)
        times[0], times[-1] = s, self.tau
        return times

    def at_time(self, tau: float) -> "FamilySpec":
        return FamilySpec(H=self.H, iv=self.iv, inner_partition=self.inner_partition, v=self.v, tau=tau)


@dataclass(frozen=True, eq=False)
class FiberPoint:
    """xi = (x_0, ..., x_{N-1}, y_1, ..., y_N); arrays (..., N, k)."""

    x_prev: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x_prev = np.asarray(self.x_prev, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x_prev.ndim < 2 or x_prev.shape != y.shape:
            raise DomainError(f"fiber blocks need matching (..., N, k) shapes, got {x_prev.shape}, {y.shape}")
        object.__setattr__(self, "x_prev", x_prev)
        object.__setattr__(self, "y", y)

    @property
    def N(self) -> int:
        return self.x_prev.shape[-2]

    @property
    def k(self) -> int:
        return self.x_prev.shape[-1]

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.x_prev.shape[:-2]

    @property
    def vector(self) -> np.ndarray:
        b = self.batch_shape
        return np.concatenate([self.x_prev.reshape(b + (-1,)), self.y.reshape(b + (-1,))], axis=-1)

    @classmethod
    def from_vector(cls, vec: np.ndarray, N: int, k: int) -> "FiberPoint":
        vec = np.asarray(vec, dtype=float)
        b = vec.shape[:-1]
        return cls(x_prev=vec[..., :N * k].reshape(b + (N, k)), y=vec[..., N * k:].reshape(b + (N, k)))

    @classmethod
    def single(cls, x0, y) -> "FiberPoint":
        """N = 1, k = 1 fiber points from equally shaped arrays of positions and momenta."""
        x0, y = np.broadcast_arrays(np.asarray(x0, dtype=float), np.asarray(y, dtype=float))
        return cls(x_prev=x0[..., None, None], y=y[..., None, None])


@dataclass(frozen=True, eq=False)
class FamilyValue:
    S: np.ndarray
    z_chain: np.ndarray
    dS_dx: np.ndarray
    phis: np.ndarray


def _positions(x, M: int, k: int) -> np.ndarray:
    """Target positions as (M, k): one shared position or one per fiber point."""
    x = np.asarray(x, dtype=float)
    if x.size == k:
        return np.broadcast_to(x.reshape(1, k), (M, k))
    if x.size == M * k:
        return x.reshape(M, k)
    raise DomainError(f"cannot match {x.size} positions to {M} fiber points with k={k}")


def family_eval(fs: FamilySpec, x, xi: FiberPoint) -> FamilyValue:
    """S(tau, x; xi) by running the z-recursion with one Phi batch per sub-step."""
    k, N = fs.k, fs.N
    if xi.N != N or xi.k != k:
        raise DomainError(f"fiber point has N={xi.N}, k={xi.k}; family needs N={N}, k={k}")
    batch = xi.batch_shape
    xp = xi.x_prev.reshape(-1, N, k)
    ys = xi.y.reshape(-1, N, k)
    M = xp.shape[0]
    x = _positions(x, M, k)

    taus = fs.sub_times()
    z = eval_initial(fs.v, xp[:, 0], k)
    chain = [z]
    phis = []
    for j in range(N):
        x_from = xp[:, j]
        x_to = xp[:, j + 1] if j + 1 < N else x
        Y = ys[:, j]
        iv = TimeInterval(s=taus[j], t=taus[j + 1])
        phi = phi_eval_batch(fs.H, iv, x_from, Y, z)[0]
        z = z + np.sum((x_to - x_from) * Y, axis=1) - phi
        chain.append(z)
        phis.append(phi)

    return FamilyValue(
        S=z.reshape(batch),
        z_chain=np.stack(chain, axis=1).reshape(batch + (N + 1,)),
        dS_dx=ys[:, -1].reshape(batch + (k,)),
        phis=np.stack(phis, axis=1).reshape(batch + (N,)),
    )


def quadratic_part(xi: FiberPoint) -> np.ndarray:
    """Q(xi) = -y_N.x_{N-1} + sum_{i<N} y_i.(x_i - x_{i-1})."""
    xp, ys = xi.x_prev, xi.y
    Q = -np.sum(ys[..., -1, :] * xp[..., -1, :], axis=-1)
    if xi.N > 1:
        Q = Q + np.sum(ys[..., :-1, :] * (xp[..., 1:, :] - xp[..., :-1, :]), axis=(-2, -1))
    return Q


def quadratic_split(fs: FamilySpec, x, xi: FiberPoint) -> tuple[np.ndarray, np.ndarray]:
    """(Q, W) with Q + W = S; W = v(x_0) + x.y_N - sum Phi."""
    value = family_eval(fs, x, xi)
    Q = quadratic_part(xi)
    M = int(np.prod(xi.batch_shape, dtype=int))
    pos = _positions(x, M, fs.k).reshape(xi.batch_shape + (fs.k,))
    W = (eval_initial(fs.v, xi.x_prev[..., 0, :], fs.k)
         + np.sum(pos * value.dS_dx, axis=-1)
         - np.sum(value.phis, axis=-1))
    return Q, W


def quadratic_form_matrix(N: int, k: int) -> np.ndarray:
    """Symmetric B with Q(xi) = xi^T B xi / 2, recovered by polarization."""
    q = 2 * k * N
    eye = np.eye(q)

    def Q(vec):
        return quadratic_part(FiberPoint.from_vector(vec, N, k))

    diag = Q(eye)
    pair = Q(eye[:, None, :] + eye[None, :, :])
    return pair - diag[:, None] - diag[None, :]


def fiber_gradient(fs: FamilySpec, x, vectors: np.ndarray, rel_step: float | None = None) -> np.ndarray:
    """Central-difference gradient of S in xi for a batch of fiber vectors (M, 2kN)."""
    rel = rel_step or settings.HJ_FD_STEP
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    M, q = vectors.shape
    eps = rel * (1.0 + np.abs(vectors))
    shifts = np.eye(q)[None, :, :] * eps[:, None, :]
    stacked = np.concatenate([vectors[:, None, :] + shifts, vectors[:, None, :] - shifts], axis=1)
    S = family_eval(fs, x, FiberPoint.from_vector(stacked, fs.N, fs.k)).S
    return (S[:, :q] - S[:, q:]) / (2 * eps)


def cutoff_profile(r: np.ndarray, spec: CutoffSpec) -> np.ndarray:
    """theta(r): 1 on [0, plateau], quintic descent of peak slope spec.max_slope, 0 beyond."""
    u = np.clip((np.abs(np.asarray(r, dtype=float)) - spec.plateau) / spec.width, 0.0, 1.0)
    return 1.0 - u ** 3 * (10.0 - 15.0 * u + 6.0 * u ** 2)


def _k_samples(K: tuple[float, float], k: int, rng, n: int) -> np.ndarray:
    lo, hi = K
    if k == 1:
        return np.linspace(lo, hi, n)[:, None]
    return rng.uniform(lo, hi, size=(n, k))


def fiber_lipschitz_samples(fs: FamilySpec, K: tuple[float, float], radii=(1.0, 4.0, 16.0),
                            samples: int = 48, seed: int = 0) -> dict[float, float]:
    """Sampled sup |d_xi W| = |d_xi (S - Q)| on rings |xi| ~ r over x in K."""
    rng = np.random.default_rng(seed)
    q = fs.fiber_dim
    xs = _k_samples(K, fs.k, rng, 7)
    out = {}
    B = quadratic_form_matrix(fs.N, fs.k)
    for r in radii:
        directions = rng.normal(size=(samples, q))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        vectors = directions * r * rng.uniform(0.5, 1.0, size=(samples, 1))
        worst = 0.0
        for x in xs:
            gS = fiber_gradient(fs, x, vectors)
            gW = gS - vectors @ B
            worst = max(worst, float(np.linalg.norm(gW, axis=1).max()))
        out[float(r)] = worst
    return out


@dataclass
class GfqiReport:
    ring_bounds: dict[float, float]
    bound: float
    growth: float
    passed: bool


def gfqi_check(fs: FamilySpec, K: tuple[float, float], seed: int = 0) -> GfqiReport:
    """|d_xi (S - Q)| stays bounded over growing fiber rings (S is quadratic at infinity)."""
    rings = fiber_lipschitz_samples(fs, K, seed=seed)
    radii = sorted(rings)
    growth = rings[radii[-1]] / max(rings[radii[0]], 1e-12)
    bound = max(rings.values())
    passed = math.isfinite(bound) and (bound <= 1.0 or growth <= 1.5)
    return GfqiReport(ring_bounds=rings, bound=bound, growth=growth, passed=passed)


@dataclass(frozen=True, eq=False)
class TruncatedFamily:
    """S_K(x, xi) = theta(|xi| / a_K) W(x, xi) + Q(xi), equal to S on |xi| <= b_K."""

    family: FamilySpec
    K: tuple[float, float]
    cutoff: CutoffSpec
    a_K: float
    b_K: float
    c_K: float
    beta: float

    def value(self, x, xi: FiberPoint) -> np.ndarray:
        Q, W = quadratic_split(self.family, x, xi)
        r = np.linalg.norm(xi.vector, axis=-1)
        return cutoff_profile(r / self.a_K, self.cutoff) * W + Q

    @property
    def quadratic_radius(self) -> float:
        """S_K equals Q beyond this fiber radius."""
        return self.a_K * self.cutoff.support

    def gradient(self, x, vectors: np.ndarray) -> np.ndarray:
        vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
        eps = settings.HJ_FD_STEP * (1.0 + np.abs(vectors))
        q = vectors.shape[1]
        out = np.empty_like(vectors)
        for j in range(q):
            e = np.zeros(q)
            e[j] = 1.0
            plus = FiberPoint.from_vector(vectors + eps[:, j:j + 1] * e, self.family.N, self.family.k)
            minus = FiberPoint.from_vector(vectors - eps[:, j:j + 1] * e, self.family.N, self.family.k)
            out[:, j] = (self.value(x, plus) - self.value(x, minus)) / (2 * eps[:, j])
        return out


def truncate_family(fs: FamilySpec, K: tuple[float, float], theta: CutoffSpec | None = None,
                    seed: int = 0) -> TruncatedFamily:
    """Compact truncation with constants from the bounds b_K, c_K and beta = ||B^-1||.

    b_K is enlarged until c_K <= b_K^2 / (2 beta (b_K + c_K + 1)); a_K is the
    smallest power of two above max(2 beta (b_K + c_K + 1), b_K / plateau).
    """
    theta = theta or CutoffSpec()
    B = quadratic_form_matrix(fs.N, fs.k)
    try:
        beta = float(np.linalg.norm(np.linalg.inv(B), ord=2))
    except np.linalg.LinAlgError as e:
        raise TruncationError("quadratic part is degenerate") from e

    rng = np.random.default_rng(seed)
    xs = _k_samples(K, fs.k, rng, 101)
    zero = FiberPoint(x_prev=np.zeros((len(xs), fs.N, fs.k)), y=np.zeros((len(xs), fs.N, fs.k)))
    _, W0 = quadratic_split(fs, xs, zero)
    b = float(np.abs(W0).max())

    ring = fiber_lipschitz_samples(fs, K, seed=seed)
    radii = sorted(ring)
    growth = ring[radii[-1]] / max(ring[radii[-2]], 1e-12)
    if not all(math.isfinite(v) for v in ring.values()) or (ring[radii[-1]] > 1.0 and growth > 1.5):
        raise TruncationError(f"fiber Lipschitz bound of W keeps growing (x{growth:.2f} per ring)")
    c = 1.1 * max(ring.values())

    b_needed = beta * c + math.sqrt((beta * c) ** 2 + 2 * beta * c * (c + 1.0))
    b = max(b, b_needed, 1.0)
    bound = max(2.0 * beta * (b + c + 1.0), b / theta.plateau)
    a = 2.0 ** math.floor(math.log2(bound) + 1.0)
    logger.debug("family_truncated", a_K=a, b_K=b, c_K=c, beta=beta)
    return TruncatedFamily(family=fs, K=K, cutoff=theta, a_K=a, b_K=b, c_K=c, beta=beta)


def critical_exclusion_check(tf: TruncatedFamily, samples: int = 64, seed: int = 0) -> float:
    """Smallest sampled |d_xi S_K| over |xi| >= b_K (positive means no critical point found there)."""
    rng = np.random.default_rng(seed)
    q = tf.family.fiber_dim
    directions = rng.normal(size=(samples, q))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = tf.b_K * np.exp(rng.uniform(0.0, math.log(2.0 * tf.quadratic_radius / tf.b_K + 2.0), size=(samples, 1)))
    vectors = directions * radii
    worst = math.inf
    for x in _k_samples(tf.K, tf.family.k, rng, 5):
        worst = min(worst, float(np.linalg.norm(tf.gradient(x, vectors), axis=1).min()))
    return worst


@dataclass(frozen=True)
class FiberGrid:
    """Rectangular (x_0, y) grid for N = 1, k = 1 critical-point bracketing."""

    x0_nodes: tuple[float, ...]
    y_nodes: tuple[float, ...]

    @classmethod
    def around(cls, x: float, pad: float, y_bound: float, n_x0: int = 81, n_y: int = 81) -> "FiberGrid":
        return cls(x0_nodes=tuple(np.linspace(x - pad, x + pad, n_x0)),
                   y_nodes=tuple(np.linspace(-y_bound, y_bound, n_y)))

    @property
    def hx(self) -> float:
        return self.x0_nodes[1] - self.x0_nodes[0]

    @property
    def hy(self) -> float:
        return self.y_nodes[1] - self.y_nodes[0]


class CriticalPoint(NamedTuple):
    xi: FiberPoint
    value: FamilyValue
    grad_norm: float
    refined: bool


def refine_critical_point(fs: FamilySpec, x, seed_vec: np.ndarray):
    def residual(vec):
        return fiber_gradient(fs, x, vec[None])[0]

    sol = optimize.root(residual, seed_vec, method="hybr", options={"xtol": 1e-12})
    return sol.x, bool(sol.success), float(np.linalg.norm(residual(sol.x)))


def _accept(fs: FamilySpec, x, vec: np.ndarray, refined: bool, gnorm: float) -> CriticalPoint:
    xi = FiberPoint.from_vector(vec, fs.N, fs.k)
    return CriticalPoint(xi=xi, value=family_eval(fs, x, xi), grad_norm=gnorm, refined=refined)


def _clarke_condition(fs: FamilySpec, x: float, x0: float, y: float, tol: float) -> bool:
    """0 in (1 - dPhi/dz) dv(x0) - y - dPhi/dx and x = X for N = 1, k = 1."""
    iv = TimeInterval(s=fs.iv.s, t=fs.tau)
    z0 = float(eval_initial(fs.v, np.array([[x0]]), 1)[0])
    h = settings.HJ_FD_STEP * (1.0 + abs(x0))
    hz = settings.HJ_FD_STEP * (1.0 + abs(z0))
    xs = np.array([[x0], [x0 + h], [x0 - h], [x0], [x0]])
    zs = np.array([z0, z0, z0, z0 + hz, z0 - hz])
    phi, _, ends = phi_eval_batch(fs.H, iv, xs, np.full((5, 1), y), zs)
    dphi_dx = (phi[1] - phi[2]) / (2 * h)
    dphi_dz = (phi[3] - phi[4]) / (2 * hz)
    if isinstance(fs.v, GridFunction):
        lo, hi = clarke_subgradient(fs.v, x0).scaled(1.0 - dphi_dz)
    else:
        g = float(initial_slope(fs.v, np.array(x0))) * (1.0 - dphi_dz)
        lo, hi = g, g
    target = y + dphi_dx
    return lo - tol <= target <= hi + tol and abs(ends[0, 0] - x) <= tol


def _dedupe(points: list[CriticalPoint], scale: np.ndarray) -> list[CriticalPoint]:
    kept: list[CriticalPoint] = []
    for p in sorted(points, key=lambda c: c.grad_norm):
        vec = p.xi.vector
        if all(np.max(np.abs(vec - q.xi.vector) / scale) > 2.0 for q in kept):
            kept.append(p)
    return sorted(kept, key=lambda c: tuple(c.xi.vector))


def _single_step_critical_points(fs: FamilySpec, x: float, grid: FiberGrid) -> list[CriticalPoint]:
    X0, Yg = np.meshgrid(np.asarray(grid.x0_nodes), np.asarray(grid.y_nodes), indexing="ij")
    S = family_eval(fs, x, FiberPoint.single(X0, Yg)).S
    gx, gy = np.gradient(S, grid.hx, grid.hy)

    def brackets(g):
        corners = np.stack([g[:-1, :-1], g[1:, :-1], g[:-1, 1:], g[1:, 1:]])
        return (corners.min(axis=0) <= 0) & (corners.max(axis=0) >= 0)

    mask = brackets(gx) & brackets(gy)
    labels, count = ndimage.label(mask, structure=np.ones((3, 3)))
    scale = np.array([grid.hx, grid.hy])
    gnorm = np.hypot(gx, gy)
    points = []
    for label in range(1, count + 1):
        cells = np.argwhere(labels == label)
        corner_norms = [min(gnorm[i, j], gnorm[i + 1, j], gnorm[i, j + 1], gnorm[i + 1, j + 1]) for i, j in cells]
        i, j = cells[int(np.argmin(corner_norms))]
        seed = np.array([X0[i, j] + 0.5 * grid.hx, Yg[i, j] + 0.5 * grid.hy])
        vec, ok, res = refine_critical_point(fs, x, seed)
        if ok and np.all(np.abs(vec - seed) <= 2.0 * scale):
            points.append(_accept(fs, x, vec, True, res))
            continue
        # kinked data: keep the best grid corner if the Clarke condition holds there
        block = [(a, b) for a in (i, i + 1) for b in (j, j + 1)]
        a, b = min(block, key=lambda ab: gnorm[ab])
        if _clarke_condition(fs, x, X0[a, b], Yg[a, b], tol=2.0 * max(grid.hx, grid.hy) * (1.0 + fs.H.norm_dyH)):
            points.append(_accept(fs, x, np.array([X0[a, b], Yg[a, b]]), False, float(gnorm[a, b])))
    return _dedupe(points, scale)


def characteristic_fiber(fs: FamilySpec, x0: np.ndarray, y0: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Fiber vectors (M, 2N) of the broken characteristics through the 1-jet at x0 (k = 1).

    Returns the vectors and the final positions x_N(x0).
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    y0 = initial_slope(fs.v, x0) if y0 is None else np.asarray(y0, dtype=float).reshape(-1)
    z0 = eval_initial(fs.v, x0[:, None], 1)
    jet = JetPoint(x=x0[:, None], y=np.asarray(y0)[:, None], z=z0)
    taus = fs.sub_times()
    xs, ys = [x0], []
    for j in range(fs.N):
        jet = flow_between(fs.H, taus[j], taus[j + 1], jet)
        ys.append(jet.y[:, 0])
        xs.append(jet.x[:, 0])
    vectors = np.stack(xs[:-1] + ys, axis=1)
    return vectors, xs[-1]


def _multi_step_critical_points(fs: FamilySpec, x: float, grid: FiberGrid) -> list[CriticalPoint]:
    x0 = np.asarray(grid.x0_nodes)
    vectors, ends = characteristic_fiber(fs, x0)
    r = ends - x
    points = []
    for i in np.flatnonzero(np.sign(r[:-1]) * np.sign(r[1:]) <= 0):
        w = r[i] / (r[i] - r[i + 1]) if r[i] != r[i + 1] else 0.5
        seed = (1 - w) * vectors[i] + w * vectors[i + 1]
        vec, ok, res = refine_critical_point(fs, x, seed)
        if ok:
            points.append(_accept(fs, x, vec, True, res))
    scale = np.full(fs.fiber_dim, grid.hx)
    return _dedupe(points, scale)


def fiber_critical_points(fs: FamilySpec, x: float, grid: FiberGrid) -> list[CriticalPoint]:
    """Critical points of xi -> S(tau, x; xi), lexicographically ordered.

    N = 1 brackets sign changes of the gradient on the (x_0, y) grid; longer
    chains bracket x_N(x_0) - x along the characteristic parametrization by
    the grid's x_0 nodes. Both refine with a root solve of d_xi S = 0.
    """
    if fs.k != 1:
        raise DomainError("critical-point bracketing is implemented for k = 1")
    if fs.N == 1:
        return _single_step_critical_points(fs, float(x), grid)
    return _multi_step_critical_points(fs, float(x), grid)


@dataclass
class LegendrianReport:
    distance: float
    cell: float
    passed: bool


def legendrian_distance(fs: FamilySpec, x_nodes: np.ndarray, grid_for: Callable[[float], FiberGrid],
                        seeds: int = 801) -> LegendrianReport:
    """Hausdorff distance between {(x, y_N, S)} at critical points and the flowed 1-jet of v."""
    crit = []
    for x in np.asarray(x_nodes, dtype=float):
        for c in fiber_critical_points(fs, x, grid_for(x)):
            crit.append((x, float(c.value.dS_dx.ravel()[0]), float(c.value.S)))
    crit = np.array(crit)

    lo, hi = float(np.min(x_nodes)), float(np.max(x_nodes))
    pad = (hi - lo) + (fs.tau - fs.iv.s) * fs.H.norm_dyH + 1.0
    x0 = np.linspace(lo - pad, hi + pad, seeds)
    y0 = initial_slope(fs.v, x0)
    jet = flow_between(fs.H, fs.iv.s, fs.tau,
                       JetPoint(x=x0[:, None], y=y0[:, None], z=eval_initial(fs.v, x0[:, None], 1)))
    front = np.stack([jet.x[:, 0], jet.y[:, 0], jet.z], axis=1)
    front = front[(front[:, 0] >= lo) & (front[:, 0] <= hi)]

    d = max(directed_hausdorff(crit, front)[0], directed_hausdorff(front, crit)[0]) if len(crit) and len(front) else math.inf
    cell = float(np.max(np.diff(np.sort(np.asarray(x_nodes))))) if len(x_nodes) > 1 else 0.0
    slope = float(np.abs(front[:, 1]).max()) if len(front) else 0.0
    return LegendrianReport(distance=d, cell=cell, passed=d <= 2.0 * cell * (1.0 + slope))
