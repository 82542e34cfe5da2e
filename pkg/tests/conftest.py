"""Shared pytest fixtures for hjminimax tests."""
import json

import numpy as np
import pytest

from hjminimax.contact.hamiltonian import build_hamiltonian, random_bump_hamiltonian
from hjminimax.core.models import GridSpec, MinimaxConfig
from hjminimax.nonsmooth.grid_function import GridFunction


@pytest.fixture
def rng():
    """Seeded generator for reproducible random cases."""
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def zero_H():
    return build_hamiltonian("zero")


@pytest.fixture(scope="session")
def discount_H():
    """H = z + |y|^2/2 on the plateau |y| <= 2."""
    return build_hamiltonian("discount")


@pytest.fixture(scope="session")
def pure_discount_H():
    """H = z (h identically zero)."""
    return build_hamiltonian("discount", amplitude=0.0)


@pytest.fixture(scope="session")
def nonconvex_H():
    return build_hamiltonian("discount-nonconvex")


@pytest.fixture(scope="session")
def transport_H():
    return build_hamiltonian("transport-bump", speed=1.0)


@pytest.fixture(scope="session")
def bump_H():
    """x-, y- and z-dependent compactly supported Hamiltonian with a finite step limit."""
    return random_bump_hamiltonian(seed=3)


@pytest.fixture
def grid():
    return GridSpec(lo=-3.0, hi=3.0, n=121)


@pytest.fixture
def abs_v(grid):
    """v(x) = |x| sampled on [-3, 3]."""
    return GridFunction.from_callable(np.abs, grid.lo, grid.hi, grid.n)


@pytest.fixture
def linear_v(grid):
    """v(x) = x / 2."""
    return GridFunction.from_callable(lambda x: 0.5 * x, grid.lo, grid.hi, grid.n)


@pytest.fixture
def sin_v(grid):
    return GridFunction.from_callable(np.sin, grid.lo, grid.hi, grid.n)


@pytest.fixture
def fast_cfg():
    """Small selector grids for quick sweeps."""
    return MinimaxConfig(grid_x0=21, grid_y=21, refine_levels=2, refine_factor=4)


@pytest.fixture
def write_config(tmp_path):
    """Write a run config dict to a JSON file and return its path."""
    def _write(payload: dict, name: str = "config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(payload, indent=2))
        return path
    return _write


@pytest.fixture
def zero_run_config():
    """Tiny zero-Hamiltonian experiment."""
    return {
        "name": "zero-test",
        "hamiltonian": {"key": "zero"},
        "initial": {"key": "abs"},
        "domain": {"lo": -2.0, "hi": 2.0, "n": 21},
        "time": {"T": 0.25, "partition_norms": [0.25]},
        "selector": {"grid_x0": 11, "grid_y": 11, "refine_levels": 1},
        "plot": "python",
    }
