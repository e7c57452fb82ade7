"""Shared fixtures: small deterministic grids and experiment configs."""

import numpy as np
import pytest

from stforecast.grid import SpatioTemporalGrid
from stforecast.systems import HenonLatticeConfig, simulate_henon

CONFIG_DIR = "configs"
PRESETS = ("henon", "lorenz96", "ks", "sunspots")


@pytest.fixture(scope="session")
def small_henon_grid() -> SpatioTemporalGrid:
    """A 150 x 40 lattice grid, large enough for selection and training."""
    return simulate_henon(HenonLatticeConfig(sites=40, steps=150, seed=5))


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture()
def wavy_grid() -> SpatioTemporalGrid:
    """A smooth deterministic grid with distinct temporal/spatial structure."""
    n = np.arange(80)[:, None]
    m = np.arange(12)[None, :]
    values = np.sin(0.3 * n + 0.9 * m) + 0.05 * m
    return SpatioTemporalGrid(values)


def write_config(path, body: str) -> str:
    """Write an experiment config file and return its path as str."""
    path.write_text(body, encoding="utf-8")
    return str(path)
