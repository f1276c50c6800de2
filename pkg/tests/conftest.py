"""Shared fixtures for the elastomap test suite."""

import pytest

from elastomap.config import RunConfig
from elastomap.error_handling import error_handler
from elastomap.fields import BoundedGrid, PeriodicGrid
from elastomap.green import ReferenceMedium
from elastomap.microstructure import gen_smooth_aniso


@pytest.fixture(autouse=True)
def reset_error_handler():
    """Start every test with empty error statistics."""
    error_handler.reset()
    yield
    error_handler.reset()


@pytest.fixture
def grid2d():
    """Small periodic 2D grid."""
    return PeriodicGrid((32, 32))


@pytest.fixture
def bounded_grid():
    """Small bounded node grid."""
    return BoundedGrid(9, 9)


@pytest.fixture
def unit_ref2d():
    """Unit reference medium in 2D."""
    return ReferenceMedium(2, 1.0, 1.0)


@pytest.fixture
def unit_ref3d():
    """Unit reference medium in 3D."""
    return ReferenceMedium(3, 1.0, 1.0)


@pytest.fixture
def smooth_maps():
    """Smooth anisotropic maps at weak contrast on a 32x32 cell."""
    return gen_smooth_aniso(PeriodicGrid((32, 32)), 1e-2, seed=7)


@pytest.fixture
def make_config(tmp_path):
    """Factory for small run configurations writing below tmp_path."""

    def factory(name: str = "run", **overrides) -> RunConfig:
        values = {
            "dimension": 2,
            "grid": (16, 16),
            "contrast": 1e-2,
            "seed": 3,
            "generator": "smooth",
            "solver": "spectral",
            "output_dir": tmp_path / name,
            "tol": 1e-12,
        }
        values.update(overrides)
        return RunConfig(**values)

    return factory
