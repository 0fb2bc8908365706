# tests/conftest.py
from __future__ import annotations

import math

import numpy as np
import pytest

from kawahara_lab.families import BumpSet
from kawahara_lab.spectral import DispersionParams, GridSpec, SpaceTimeLattice, SpectralField1D


@pytest.fixture
def params() -> DispersionParams:
    return DispersionParams(1.0, 0.0)


@pytest.fixture
def soft_params() -> DispersionParams:
    """Weak dispersion: lattice time steps resolve the phases of the data band."""
    return DispersionParams(0.01, 0.0)


@pytest.fixture
def small_grid() -> GridSpec:
    # dxi = 1/8, max frequency 4
    return GridSpec(8.0 * math.pi, 64)


@pytest.fixture
def grid() -> GridSpec:
    # dxi = 1/16, max frequency 4
    return GridSpec(16.0 * math.pi, 128)


@pytest.fixture
def lattice(small_grid: GridSpec) -> SpaceTimeLattice:
    return SpaceTimeLattice(small_grid, 2.0, 64)


@pytest.fixture
def bump(grid: GridSpec) -> SpectralField1D:
    return BumpSet((0.0, 3.0), (0.5, -0.25), band=2.0).field(grid)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
