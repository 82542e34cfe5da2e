"""Hamiltonians H(t, x, y, z) on the 1-jet space J^1 R^k.

Arrays follow one convention throughout the package: positions and momenta
have shape (..., k), values and times broadcast over the leading shape (...).
"""
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..core.config import settings
from ..core.exceptions import (
    ConfigurationError,
    DomainError,
    EvaluationError,
    UnknownRegistryKey,
)
from ..core.logging_config import get_logger

logger = get_logger(__name__)

EvalFn = Callable[[float, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
GradFn = Callable[[float, np.ndarray, np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]]


@dataclass(frozen=True, eq=False)
class JetPoint:
    """Point (x, y, z) of J^1 R^k, or a batch of them."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        z = np.asarray(self.z, dtype=float)
        if x.shape != y.shape or x.shape[:-1] != z.shape:
            raise DomainError(f"inconsistent jet shapes x{x.shape} y{y.shape} z{z.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and np.all(np.isfinite(z))):
            raise DomainError("jet point has non-finite components")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    @property
    def k(self) -> int:
        return self.x.shape[-1]

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.z.shape

    @property
    def state(self) -> np.ndarray:
        """Stacked state vector (..., 2k+1)."""
        return np.concatenate([self.x, self.y, self.z[..., None]], axis=-1)

    @classmethod
    def from_state(cls, state: np.ndarray, k: int) -> "JetPoint":
        state = np.asarray(state, dtype=float)
        return cls(x=state[..., :k], y=state[..., k:2 * k], z=state[..., 2 * k])


def bump_profile(r: np.ndarray, plateau: float, support: float) -> tuple[np.ndarray, np.ndarray]:
    """C^2 bump beta(r) and its derivative: 1 for |r| <= plateau, 0 for |r| >= support."""
    if not 0 <= plateau < support:
        raise ConfigurationError("bump", f"need 0 <= plateau < support, got {plateau}, {support}")
    r = np.asarray(r, dtype=float)
    width = support - plateau
    u = np.clip((np.abs(r) - plateau) / width, 0.0, 1.0)
    step = u ** 3 * (10.0 - 15.0 * u + 6.0 * u ** 2)
    dstep = 30.0 * u ** 2 * (1.0 - u) ** 2 / width
    return 1.0 - step, -dstep * np.sign(r)


@dataclass(frozen=True)
class MomentumProfile:
    """h(y) = core(y) * beta(|y|), the y-dependence of the built-in Hamiltonians."""

    name: str
    core: Callable[[np.ndarray], np.ndarray]
    dcore: Callable[[np.ndarray], np.ndarray]
    plateau: float
    support: float

    def __call__(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        beta, _ = bump_profile(np.linalg.norm(y, axis=-1), self.plateau, self.support)
        return self.core(y) * beta

    def grad(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        r = np.linalg.norm(y, axis=-1)
        beta, dbeta = bump_profile(r, self.plateau, self.support)
        safe_r = np.where(r > 0, r, 1.0)
        radial = (dbeta / safe_r)[..., None] * y
        return self.dcore(y) * beta[..., None] + self.core(y)[..., None] * radial

    def scalar(self, y: np.ndarray) -> np.ndarray:
        """h on scalar momenta (k = 1)."""
        return self(np.asarray(y, dtype=float)[..., None])

    def scalar_derivative(self, y: np.ndarray) -> np.ndarray:
        """h' on scalar momenta (k = 1)."""
        return self.grad(np.asarray(y, dtype=float)[..., None])[..., 0]


@dataclass(frozen=True)
class HamiltonianSpec:
    """A C^2 Hamiltonian with its partial derivatives and sup-norm bounds.

    Bounds are sampled over |y| <= support_radius_a and the x/z sampling boxes;
    Hamiltonians with a linear z term (compact_support=False) have norm_H
    measured over the z box only.
    """

    name: str
    eval_fn: EvalFn = field(repr=False)
    grad_fn: GradFn = field(repr=False)
    k: int = 1
    support_radius_a: float = 0.0
    norm_H: float = 0.0
    c_H: float = 0.0
    norm_dxH: float = 0.0
    norm_dyH: float = 0.0
    norm_dzH: float = 0.0
    z_independent: bool = False
    x_independent: bool = False
    compact_support: bool = True
    admits_global_generating_function: bool = False
    profile: MomentumProfile | None = field(default=None, repr=False, compare=False)
    z_coefficient: float = 0.0
    params: dict = field(default_factory=dict, compare=False, hash=False)

    def _coerce(self, x, y, z):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        if x.shape[-1:] != (self.k,) or y.shape[-1:] != (self.k,):
            raise DomainError(f"{self.name}: expected trailing dimension k={self.k}")
        return x, y, z

    def eval(self, t: float, x: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
        """H(t, x, y, z), vectorized over leading axes."""
        x, y, z = self._coerce(x, y, z)
        value = np.asarray(self.eval_fn(t, x, y, z), dtype=float)
        if not np.all(np.isfinite(value)):
            bad = np.argwhere(~np.isfinite(np.broadcast_to(value, z.shape)))
            idx = tuple(bad[0]) if bad.size else ()
            raise EvaluationError(np.concatenate([[t], x[idx], y[idx], [z[idx]]]))
        return value

    def grad(self, t: float, x: np.ndarray, y: np.ndarray, z: np.ndarray):
        """(dH/dx, dH/dy, dH/dz) with shapes (..., k), (..., k), (...)."""
        x, y, z = self._coerce(x, y, z)
        hx, hy, hz = self.grad_fn(t, x, y, z)
        hx = np.broadcast_to(np.asarray(hx, dtype=float), x.shape)
        hy = np.broadcast_to(np.asarray(hy, dtype=float), y.shape)
        hz = np.broadcast_to(np.asarray(hz, dtype=float), z.shape)
        if not (np.all(np.isfinite(hx)) and np.all(np.isfinite(hy)) and np.all(np.isfinite(hz))):
            raise EvaluationError(np.concatenate([[t], x.ravel()[:self.k], y.ravel()[:self.k]]),
                                  quantity="grad H")
        return hx, hy, hz

    @classmethod
    def from_function(
        cls,
        name: str,
        eval_fn: EvalFn,
        support_radius_a: float,
        k: int = 1,
        grad_fn: GradFn | None = None,
        x_box: tuple[float, float] = (-1.0, 1.0),
        z_box: tuple[float, float] = (-1.0, 1.0),
        **flags,
    ) -> "HamiltonianSpec":
        """Wrap a user Hamiltonian, estimating its bounds by sampling.

        Without `grad_fn`, partial derivatives come from central differences.
        """
        if grad_fn is None:
            grad_fn = finite_difference_gradient(eval_fn)
        bounds = estimate_bounds(
            eval_fn, grad_fn, k, support_radius_a, x_box=x_box, z_box=z_box,
            x_independent=flags.get("x_independent", False),
            z_independent=flags.get("z_independent", False),
        )
        return cls(name=name, eval_fn=eval_fn, grad_fn=grad_fn, k=k,
                   support_radius_a=support_radius_a, **bounds, **flags)


def finite_difference_gradient(eval_fn: EvalFn, step: float | None = None) -> GradFn:
    """Central-difference partials of eval_fn with step h*(1 + |argument|)."""
    h = step or settings.HJ_FD_FALLBACK_STEP

    def grad_fn(t, x, y, z):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        hx = np.empty_like(x)
        hy = np.empty_like(y)
        for i in range(x.shape[-1]):
            e = np.zeros(x.shape[-1])
            e[i] = 1.0
            dx = h * (1.0 + np.abs(x[..., i]))
            hx[..., i] = (eval_fn(t, x + dx[..., None] * e, y, z)
                          - eval_fn(t, x - dx[..., None] * e, y, z)) / (2 * dx)
            dy = h * (1.0 + np.abs(y[..., i]))
            hy[..., i] = (eval_fn(t, x, y + dy[..., None] * e, z)
                          - eval_fn(t, x, y - dy[..., None] * e, z)) / (2 * dy)
        dz = h * (1.0 + np.abs(z))
        hz = (eval_fn(t, x, y, z + dz) - eval_fn(t, x, y, z - dz)) / (2 * dz)
        return hx, hy, hz

    return grad_fn


def _sample_points(k, y_radius, x_box, z_box, x_independent, z_independent, rng=None):
    if k == 1:
        xs = np.array([0.0]) if x_independent else np.linspace(*x_box, 25)
        zs = np.array([0.0]) if z_independent else np.linspace(*z_box, 9)
        ys = np.linspace(-1.05 * y_radius, 1.05 * y_radius, 481)
        X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
        return X.reshape(-1, 1), Y.reshape(-1, 1), Z.ravel()
    rng = rng or np.random.default_rng(0)
    n = 20000
    x = np.zeros((n, k)) if x_independent else rng.uniform(*x_box, size=(n, k))
    direction = rng.normal(size=(n, k))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    y = direction * rng.uniform(0, 1.05 * y_radius, size=(n, 1))
    z = np.zeros(n) if z_independent else rng.uniform(*z_box, size=n)
    return x, y, z


def estimate_bounds(
    eval_fn: EvalFn,
    grad_fn: GradFn,
    k: int,
    y_radius: float,
    x_box: tuple[float, float] = (-1.0, 1.0),
    z_box: tuple[float, float] = (-1.0, 1.0),
    x_independent: bool = False,
    z_independent: bool = False,
    safety: float = 1.02,
) -> dict:
    """Sampled sup norms of H, its partials, |DH| and |D^2 H| at t = 0."""
    x, y, z = _sample_points(k, max(y_radius, 1e-3), x_box, z_box, x_independent, z_independent)
    H = np.asarray(eval_fn(0.0, x, y, z), dtype=float)
    hx, hy, hz = (np.broadcast_to(np.asarray(g, dtype=float), s.shape)
                  for g, s in zip(grad_fn(0.0, x, y, z), (x, y, z)))
    full = np.concatenate([hx, hy, hz[:, None]], axis=1)

    # Hessian columns by central differences of the gradient
    h = 1e-5
    dim = 2 * k + 1
    hess = np.empty((len(z), dim, dim))
    for j in range(dim):
        shift = np.zeros(dim)
        shift[j] = h
        cols = []
        for sign in (1.0, -1.0):
            xs = x + sign * shift[:k]
            ys = y + sign * shift[k:2 * k]
            zs = z + sign * shift[2 * k]
            gx, gy, gz = (np.broadcast_to(np.asarray(g, dtype=float), s.shape)
                          for g, s in zip(grad_fn(0.0, xs, ys, zs), (xs, ys, zs)))
            cols.append(np.concatenate([gx, gy, gz[:, None]], axis=1))
        hess[:, :, j] = (cols[0] - cols[1]) / (2 * h)
    hess = 0.5 * (hess + np.swapaxes(hess, 1, 2))

    d1 = float(np.linalg.norm(full, axis=1).max())
    d2 = float(np.linalg.norm(hess, ord=2, axis=(1, 2)).max())
    return {
        "norm_H": safety * float(np.abs(H).max()),
        "norm_dxH": safety * float(np.abs(hx).max()),
        "norm_dyH": safety * float(np.abs(hy).max()),
        "norm_dzH": safety * float(np.abs(hz).max()),
        "c_H": safety * max(d1, d2),
    }


def _momentum_hamiltonian(
    name: str,
    profile: MomentumProfile,
    k: int,
    z_coefficient: float,
    z_range: float,
    params: dict,
) -> HamiltonianSpec:
    """H(t, x, y, z) = z_coefficient * z + h(y)."""

    def eval_fn(t, x, y, z):
        return z_coefficient * np.asarray(z, dtype=float) + profile(y)

    def grad_fn(t, x, y, z):
        return np.zeros_like(x), profile.grad(y), np.full(np.shape(z), z_coefficient)

    z_independent = z_coefficient == 0.0
    bounds = estimate_bounds(eval_fn, grad_fn, k, profile.support,
                             z_box=(-z_range, z_range),
                             x_independent=True, z_independent=z_independent)
    return HamiltonianSpec(
        name=name, eval_fn=eval_fn, grad_fn=grad_fn, k=k,
        support_radius_a=profile.support,
        z_independent=z_independent,
        x_independent=True,
        compact_support=z_independent,
        admits_global_generating_function=True,
        profile=profile,
        z_coefficient=z_coefficient,
        params=params,
        **bounds,
    )


def zero_hamiltonian(k: int = 1) -> HamiltonianSpec:
    """H = 0; its flow is the identity."""
    def eval_fn(t, x, y, z):
        return np.zeros(np.shape(z))

    def grad_fn(t, x, y, z):
        return np.zeros_like(x), np.zeros_like(y), np.zeros(np.shape(z))

    return HamiltonianSpec(
        name="zero", eval_fn=eval_fn, grad_fn=grad_fn, k=k,
        z_independent=True, x_independent=True,
        admits_global_generating_function=True,
    )


def discount_hamiltonian(amplitude: float = 1.0, plateau: float = 2.0, support: float = 3.0,
                         z_range: float = 2.0, k: int = 1) -> HamiltonianSpec:
    """H = z + h(y) with h(y) = amplitude |y|^2/2 on the plateau."""
    profile = MomentumProfile(
        name="quadratic",
        core=lambda y: 0.5 * amplitude * np.sum(y * y, axis=-1),
        dcore=lambda y: amplitude * y,
        plateau=plateau, support=support,
    )
    return _momentum_hamiltonian("discount", profile, k, 1.0, z_range,
                                 dict(amplitude=amplitude, plateau=plateau, support=support))


def discount_nonconvex_hamiltonian(amplitude: float = 1.0, well: float = 1.0, plateau: float = 2.0,
                                   support: float = 3.0, z_range: float = 2.0,
                                   k: int = 1) -> HamiltonianSpec:
    """H = z + h(y), h a double well amplitude (|y|^2 - well^2)^2 / 4 on the plateau."""
    profile = MomentumProfile(
        name="double-well",
        core=lambda y: 0.25 * amplitude * (np.sum(y * y, axis=-1) - well ** 2) ** 2,
        dcore=lambda y: amplitude * (np.sum(y * y, axis=-1) - well ** 2)[..., None] * y,
        plateau=plateau, support=support,
    )
    return _momentum_hamiltonian("discount-nonconvex", profile, k, 1.0, z_range,
                                 dict(amplitude=amplitude, well=well, plateau=plateau, support=support))


def transport_bump_hamiltonian(speed: float = 1.0, plateau: float = 2.0, support: float = 3.0,
                               k: int = 1) -> HamiltonianSpec:
    """H = speed * y_1 on the plateau: transport at constant speed along the first axis."""
    def dcore(y):
        g = np.zeros_like(y)
        g[..., 0] = speed
        return g

    profile = MomentumProfile(
        name="transport",
        core=lambda y: speed * y[..., 0],
        dcore=dcore,
        plateau=plateau, support=support,
    )
    return _momentum_hamiltonian("transport-bump", profile, k, 0.0, 1.0,
                                 dict(speed=speed, plateau=plateau, support=support))


def quadratic_bump_hamiltonian(amplitude: float = 1.0, plateau: float = 2.0, support: float = 3.0,
                               k: int = 1) -> HamiltonianSpec:
    """H = amplitude |y|^2 / 2 on the plateau (the bumped Hopf-Lax Hamiltonian)."""
    profile = MomentumProfile(
        name="quadratic",
        core=lambda y: 0.5 * amplitude * np.sum(y * y, axis=-1),
        dcore=lambda y: amplitude * y,
        plateau=plateau, support=support,
    )
    return _momentum_hamiltonian("quadratic-bump", profile, k, 0.0, 1.0,
                                 dict(amplitude=amplitude, plateau=plateau, support=support))


def random_bump_hamiltonian(seed: int, plateau: float = 0.75, support: float = 1.5) -> HamiltonianSpec:
    """x-, y- and z-dependent compactly supported 1-D Hamiltonian with random coefficients.

    H = beta(|y|) (a1 y + a2 y^2 + c sin x + d sin z)
    """
    rng = np.random.default_rng(seed)
    a1, a2 = rng.uniform(-1.0, 1.0), rng.uniform(-0.5, 0.5)
    c, d = rng.uniform(-0.5, 0.5, size=2)

    def core(x, y, z):
        return a1 * y[..., 0] + a2 * y[..., 0] ** 2 + c * np.sin(x[..., 0]) + d * np.sin(z)

    def eval_fn(t, x, y, z):
        beta, _ = bump_profile(y[..., 0], plateau, support)
        return beta * core(x, y, z)

    def grad_fn(t, x, y, z):
        beta, dbeta = bump_profile(y[..., 0], plateau, support)
        hx = (beta * c * np.cos(x[..., 0]))[..., None]
        hy = (dbeta * core(x, y, z) + beta * (a1 + 2 * a2 * y[..., 0]))[..., None]
        hz = beta * d * np.cos(z)
        return hx, hy, hz

    bounds = estimate_bounds(eval_fn, grad_fn, 1, support,
                             x_box=(-np.pi, np.pi), z_box=(-np.pi, np.pi))
    return HamiltonianSpec(
        name=f"random-bump-{seed}", eval_fn=eval_fn, grad_fn=grad_fn, k=1,
        support_radius_a=support,
        params=dict(seed=seed, a1=a1, a2=a2, c=c, d=d, plateau=plateau, support=support),
        **bounds,
    )


HAMILTONIAN_REGISTRY: dict[str, Callable[..., HamiltonianSpec]] = {
    "zero": zero_hamiltonian,
    "discount": discount_hamiltonian,
    "discount-nonconvex": discount_nonconvex_hamiltonian,
    "transport-bump": transport_bump_hamiltonian,
    "quadratic-bump": quadratic_bump_hamiltonian,
}

HAMILTONIAN_KEYS = tuple(HAMILTONIAN_REGISTRY)


def build_hamiltonian(key: str, **params) -> HamiltonianSpec:
    """Construct a registry Hamiltonian by key."""
    try:
        factory = HAMILTONIAN_REGISTRY[key]
    except KeyError:
        raise UnknownRegistryKey("hamiltonian.key", key, list(HAMILTONIAN_REGISTRY)) from None
    try:
        H = factory(**params)
    except TypeError as e:
        raise ConfigurationError("hamiltonian.params", str(e)) from e
    logger.debug("hamiltonian_built", key=key, c_H=H.c_H, a=H.support_radius_a)
    return H


def sample_support_violation(H: HamiltonianSpec, samples: int = 2000, seed: int = 0) -> float:
    """Largest |H| sampled at |y| > a (z = 0 when H has a linear z term)."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2.0, 2.0, size=(samples, H.k))
    direction = rng.normal(size=(samples, H.k))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    a = H.support_radius_a
    y = direction * rng.uniform(a * 1.0001 + 1e-9, 2.0 * a + 1.0, size=(samples, 1))
    z = np.zeros(samples) if not H.compact_support else rng.uniform(-2.0, 2.0, size=samples)
    return float(np.abs(H.eval(0.0, x, y, z)).max())


def grad_consistency(H: HamiltonianSpec, samples: int = 200, seed: int = 0) -> float:
    """Max relative mismatch between H.grad and central differences of H.eval."""
    rng = np.random.default_rng(seed)
    a = max(H.support_radius_a, 1.0)
    x = rng.uniform(-1.0, 1.0, size=(samples, H.k))
    y = rng.uniform(-a, a, size=(samples, H.k))
    z = rng.uniform(-1.0, 1.0, size=samples)
    t = float(rng.uniform(0.0, 1.0))
    hx, hy, hz = H.grad(t, x, y, z)
    analytic = np.concatenate([hx, hy, hz[:, None]], axis=1)
    fd = finite_difference_gradient(lambda *args: H.eval(*args))(t, x, y, z)
    numeric = np.concatenate([fd[0], fd[1], fd[2][:, None]], axis=1)
    return float((np.abs(analytic - numeric) / (1.0 + np.abs(analytic))).max())
