"""Shared fixtures: grids and reference Hamiltonians reused across tests."""

import numpy as np
import pytest

from gkpsim import quadratures


@pytest.fixture(scope="session")
def grid_small():
    """Coarse grid for cheap operator checks, 1/dx an integer."""
    return quadratures.build_grid(256, 8)


@pytest.fixture(scope="session")
def grid_mid():
    """Mid-size grid resolving J/h = 150 wells."""
    return quadratures.build_grid(512, 8)


@pytest.fixture(scope="session")
def grid_full():
    """Production grid used by the gate protocol."""
    return quadratures.build_grid(1024, 12)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260815)
