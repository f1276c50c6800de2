"""Regular grids and the scalar/tensor fields living on them."""

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .error_handling import DimensionMismatch, GridMismatch, UnsupportedDimension
from .tensor_core import SymTensor2, check_dim, mandel_size


@dataclass(frozen=True)
class PeriodicGrid:
    """Regular grid on the unit cell [0,1)^d with spacing 1/N_i."""

    shape: tuple[int, ...]

    periodic = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        check_dim(len(self.shape))
        if any(n < 2 for n in self.shape):
            raise DimensionMismatch(f"Every grid axis needs at least 2 points, got {self.shape}")

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(1.0 / n for n in self.shape)

    def axes(self) -> list[NDArray[np.float64]]:
        return [np.arange(n) / n for n in self.shape]

    def coordinates(self) -> NDArray[np.float64]:
        """Point coordinates, shape (*shape, d)."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def frequencies(self) -> NDArray[np.float64]:
        """Integer reciprocal-lattice frequencies in FFT order, shape (*shape, d)."""
        freqs = [np.fft.fftfreq(n, d=1.0 / n) for n in self.shape]
        return np.stack(np.meshgrid(*freqs, indexing="ij"), axis=-1)


@dataclass(frozen=True)
class BoundedGrid:
    """Node grid on [0,1]×[0,1] with nx × ny nodes (2D only)."""

    nx: int
    ny: int

    periodic = False

    def __post_init__(self) -> None:
        if self.nx < 2 or self.ny < 2:
            raise DimensionMismatch(f"BoundedGrid needs at least 2 nodes per axis, got {self.nx}x{self.ny}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def dim(self) -> int:
        return 2

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def spacing(self) -> tuple[float, float]:
        return (1.0 / (self.nx - 1), 1.0 / (self.ny - 1))

    @property
    def element_shape(self) -> tuple[int, int]:
        return (self.nx - 1, self.ny - 1)

    def axes(self) -> list[NDArray[np.float64]]:
        return [np.linspace(0.0, 1.0, self.nx), np.linspace(0.0, 1.0, self.ny)]

    def coordinates(self) -> NDArray[np.float64]:
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def boundary_mask(self) -> NDArray[np.bool_]:
        mask = np.zeros(self.shape, dtype=bool)
        mask[0, :] = mask[-1, :] = mask[:, 0] = mask[:, -1] = True
        return mask


Grid = PeriodicGrid | BoundedGrid


def make_grid(shape: tuple[int, ...], periodic: bool = True) -> Grid:
    if periodic:
        return PeriodicGrid(shape)
    if len(shape) != 2:
        raise UnsupportedDimension("Bounded grids are 2D only")
    return BoundedGrid(*shape)


@dataclass(eq=False)
class ScalarField:
    """One real value per grid point."""

    grid: Grid
    values: NDArray[np.float64]
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise DimensionMismatch(
                f"Scalar field values have shape {self.values.shape}, grid is {self.grid.shape}"
            )

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    @property
    def ncomp(self) -> int:
        return 1

    def mean(self) -> float:
        return float(self.values.mean())


@dataclass(eq=False)
class TensorField:
    """One SymTensor2 (Mandel vector) per grid point, values shape (*grid.shape, m)."""

    grid: Grid
    values: NDArray[np.float64]
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        expected = (*self.grid.shape, mandel_size(self.grid.dim))
        if self.values.shape != expected:
            raise DimensionMismatch(f"Tensor field values have shape {self.values.shape}, expected {expected}")

    @classmethod
    def uniform(cls, grid: Grid, tensor: SymTensor2) -> "TensorField":
        if tensor.dim != grid.dim:
            raise DimensionMismatch(f"Tensor of dimension {tensor.dim} on a {grid.dim}D grid")
        return cls(grid, np.broadcast_to(tensor.comps, (*grid.shape, tensor.comps.size)).copy())

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def ncomp(self) -> int:
        return mandel_size(self.grid.dim)

    def at(self, index: tuple[int, ...]) -> SymTensor2:
        return SymTensor2(self.dim, self.values[index])

    def mean(self) -> SymTensor2:
        return SymTensor2(self.dim, self.values.reshape(-1, self.ncomp).mean(axis=0))


def check_same_grid(*fields: ScalarField | TensorField) -> Grid:
    """Return the common grid or raise GridMismatch."""
    grid = fields[0].grid
    for other in fields[1:]:
        if other.grid != grid:
            raise GridMismatch(f"Grid mismatch: {grid} vs {other.grid}")
    return grid
