"""Registry of Lipschitz initial data used by experiment configs."""
from typing import Callable

import numpy as np

from ..core.exceptions import ConfigurationError, UnknownRegistryKey
from ..core.models import GridSpec
from ..nonsmooth.grid_function import GridFunction


def zero(x):
    return np.zeros_like(x)


def absolute(x, scale: float = 1.0, center: float = 0.0):
    return scale * np.abs(x - center)


def neg_abs_smooth(x, eps: float = 0.1, scale: float = 1.0):
    """-scale sqrt(x^2 + eps^2): a concave kink smoothed at width eps."""
    return -scale * np.sqrt(x * x + eps * eps)


def smooth_bump(x, amplitude: float = 1.0, width: float = 0.5, center: float = 0.0):
    return amplitude * np.exp(-0.5 * ((x - center) / width) ** 2)


def sine(x, amplitude: float = 1.0, frequency: float = 1.0, phase: float = 0.0):
    return amplitude * np.sin(frequency * x + phase)


def linear(x, slope: float = 1.0, offset: float = 0.0):
    return slope * x + offset


def quadratic(x, curvature: float = 1.0, center: float = 0.0):
    return 0.5 * curvature * (x - center) ** 2


INITIAL_REGISTRY: dict[str, Callable[..., np.ndarray]] = {
    "zero": zero,
    "abs": absolute,
    "neg-abs-smooth": neg_abs_smooth,
    "smooth-bump": smooth_bump,
    "sin": sine,
    "linear": linear,
    "quadratic": quadratic,
}

INITIAL_KEYS = tuple(INITIAL_REGISTRY)


def build_initial(key: str, grid: GridSpec, **params) -> GridFunction:
    """Sample registry data `key` on grid; the Lipschitz constant is the observed one."""
    try:
        fn = INITIAL_REGISTRY[key]
    except KeyError:
        raise UnknownRegistryKey("initial.key", key, list(INITIAL_REGISTRY)) from None
    try:
        return GridFunction.from_callable(lambda x: fn(x, **params), grid.lo, grid.hi, grid.n)
    except TypeError as e:
        raise ConfigurationError("initial.params", str(e)) from e
