"""Seeded generation of modulus maps: smooth anisotropic fields, Voronoi cells, inclusions.

Random streams come from numpy's Philox bit generator seeded by SeedSequence(seed).spawn(3):
stream 0 drives κ, stream 1 drives μ and stream 2 drives geometry (seed points).
"""

import logging
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from numpy.typing import NDArray
from sklearn.metrics import pairwise_distances_argmin

from .config import settings
from .error_handling import InputError, InvalidContrast, NonPositiveModulus, UnsupportedDimension
from .fields import Grid, ScalarField

logger = logging.getLogger(__name__)

KAPPA_STREAM, MU_STREAM, GEOMETRY_STREAM = 0, 1, 2


@dataclass(eq=False)
class ModulusMaps:
    """Bulk and shear modulus maps with their generation parameters."""

    kappa: ScalarField
    mu: ScalarField
    c: float
    seed: int
    kind: str
    cell_kappa: NDArray[np.float64] | None = None
    cell_mu: NDArray[np.float64] | None = None
    labels: NDArray[np.int64] | None = None
    params: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if np.any(self.kappa.values <= 0) or np.any(self.mu.values <= 0):
            raise NonPositiveModulus(f"Generated {self.kind} maps contain non-positive moduli")
        metadata = {"kind": self.kind, "seed": str(self.seed), "c": repr(float(self.c)), **self.params}
        self.kappa.metadata.update({**metadata, "quantity": "kappa"})
        self.mu.metadata.update({**metadata, "quantity": "mu"})


def rng_streams(seed: int) -> list[np.random.Generator]:
    """Independent κ, μ and geometry generators derived from one seed."""
    return [np.random.Generator(np.random.Philox(child)) for child in np.random.SeedSequence(seed).spawn(3)]


def _check_contrast(c: float) -> float:
    if not 0.0 < c <= 1.0:
        raise InvalidContrast(f"Contrast must lie in (0, 1], got {c}")
    return float(c)


def rescale_to_contrast(raw: NDArray[np.float64], eta0: float, c: float) -> NDArray[np.float64]:
    """Map raw values to mean η0 with the largest deviation equal to η0·c/2."""
    deviation = raw - raw.mean()
    largest = float(np.abs(deviation).max())
    if largest == 0.0:
        return np.full(raw.shape, float(eta0))
    values = eta0 + deviation * (eta0 * c / 2.0 / largest)
    if values.min() <= 0:
        raise InvalidContrast(f"Contrast {c} yields non-positive moduli")
    return values


def gaussian_filter_fourier(
    noise: NDArray[np.float64], spacing: tuple[float, ...], corr_lengths: tuple[float, ...]
) -> NDArray[np.float64]:
    """Periodic convolution with an anisotropic Gaussian kernel, applied in Fourier space."""
    freqs = np.meshgrid(
        *[np.fft.fftfreq(n, d=h) for n, h in zip(noise.shape, spacing)], indexing="ij"
    )
    exponent = sum((length * f) ** 2 for length, f in zip(corr_lengths, freqs))
    kernel = np.exp(-2.0 * np.pi**2 * exponent)
    filtered: NDArray[np.float64] = np.fft.ifftn(np.fft.fftn(noise) * kernel).real
    return filtered


def gen_smooth_aniso(
    grid: Grid,
    c: float,
    seed: int,
    corr_lengths: tuple[float, float] | None = None,
    eta0: tuple[float, float] | None = None,
) -> ModulusMaps:
    """Smooth, geometrically anisotropic maps (Gaussian-filtered white noise)."""
    if grid.dim != 2:
        raise UnsupportedDimension("Smooth anisotropic maps are generated in 2D")
    c = _check_contrast(c)
    lengths = corr_lengths or (settings.corr_length_x, settings.corr_length_y)
    kappa0, mu0 = eta0 or (settings.eta0, settings.eta0)
    streams = rng_streams(seed)

    maps = []
    for stream, nominal in ((KAPPA_STREAM, kappa0), (MU_STREAM, mu0)):
        noise = streams[stream].standard_normal(grid.shape)
        smooth = gaussian_filter_fourier(noise, grid.spacing, lengths)
        maps.append(ScalarField(grid, rescale_to_contrast(smooth, nominal, c)))

    logger.info(f"Generated smooth anisotropic maps on {grid.shape} (c={c}, seed={seed})")
    return ModulusMaps(
        maps[0], maps[1], c, seed, "smooth",
        params={"corr_lengths": ",".join(repr(float(x)) for x in lengths)},
    )


def periodic_offsets(dim: int) -> NDArray[np.float64]:
    """The 3^d lattice shifts used to tile seed points."""
    return np.array(list(product((-1.0, 0.0, 1.0), repeat=dim)))


def assign_cells(points: NDArray[np.float64], seeds: NDArray[np.float64], periodic: bool) -> NDArray[np.int64]:
    """Index of the nearest seed of every point (Euclidean, optional periodic wrap)."""
    n_cells = seeds.shape[0]
    if periodic:
        offsets = periodic_offsets(seeds.shape[1])
        candidates = (offsets[:, None, :] + seeds[None, :, :]).reshape(-1, seeds.shape[1])
    else:
        candidates = seeds
    nearest = pairwise_distances_argmin(points, candidates)
    labels: NDArray[np.int64] = (nearest % n_cells).astype(np.int64)
    return labels


def gen_voronoi(
    grid: Grid,
    n_cells: int,
    c: float,
    seed: int,
    periodic: bool = True,
    eta0: tuple[float, float] | None = None,
) -> ModulusMaps:
    """Piecewise-constant maps on a Voronoi tessellation with uniform per-cell moduli."""
    c = _check_contrast(c)
    if n_cells < 1:
        raise InputError(f"n_cells must be positive, got {n_cells}")
    kappa0, mu0 = eta0 or (settings.eta0, settings.eta0)
    streams = rng_streams(seed)

    seeds = streams[GEOMETRY_STREAM].random((n_cells, grid.dim))
    points = grid.coordinates().reshape(-1, grid.dim)
    labels = assign_cells(points, seeds, periodic and grid.periodic).reshape(grid.shape)

    cells = {}
    for stream, nominal, name in ((KAPPA_STREAM, kappa0, "kappa"), (MU_STREAM, mu0, "mu")):
        draws = nominal * (1.0 + c * (streams[stream].random(n_cells) - 0.5))
        cells[name] = _recenter_cells(draws, labels, nominal, c)

    logger.info(f"Generated Voronoi maps with {n_cells} cells on {grid.shape} (c={c}, seed={seed})")
    return ModulusMaps(
        ScalarField(grid, cells["kappa"][labels]),
        ScalarField(grid, cells["mu"][labels]),
        c,
        seed,
        "voronoi",
        cell_kappa=cells["kappa"],
        cell_mu=cells["mu"],
        labels=labels,
        params={"n_cells": str(n_cells), "periodic": str(bool(periodic)).lower()},
    )


def _recenter_cells(
    draws: NDArray[np.float64], labels: NDArray[np.int64], eta0: float, c: float
) -> NDArray[np.float64]:
    """Shift (and shrink if needed) cell values so the grid mean is η0 within the contrast band."""
    sampled = draws[labels]
    mean = float(sampled.mean())
    largest = float(np.abs(sampled - mean).max())
    scale = 1.0 if largest == 0.0 else min(1.0, eta0 * c / 2.0 / largest)
    result: NDArray[np.float64] = eta0 + (draws - mean) * scale
    return result


def gen_inclusion(
    grid: Grid,
    radius: float,
    center: tuple[float, ...] | None = None,
    matrix: tuple[float, float] = (1.0, 1.0),
    inclusion: tuple[float, float] = (1.0, 1.0),
    seed: int = 0,
) -> ModulusMaps:
    """Single disk/ball inclusion with a pixel-sharp interface.

    The geometry is deterministic; `seed` is only recorded with the maps.
    """
    if not 0.0 <= radius < 0.5:
        raise InputError(f"Inclusion radius must lie in [0, 0.5), got {radius}")
    if min(*matrix, *inclusion) <= 0:
        raise NonPositiveModulus("Inclusion and matrix moduli must be positive")
    centre = np.asarray(center if center is not None else (0.5,) * grid.dim, dtype=np.float64)
    offset = grid.coordinates() - centre
    if grid.periodic:
        offset -= np.round(offset)
    inside = np.einsum("...i,...i->...", offset, offset) < radius**2

    kappa = np.where(inside, inclusion[0], matrix[0])
    mu = np.where(inside, inclusion[1], matrix[1])
    contrast = max(abs(inclusion[0] - matrix[0]) / matrix[0], abs(inclusion[1] - matrix[1]) / matrix[1])
    logger.info(f"Generated inclusion of radius {radius} covering {inside.mean():.4f} of the cell")
    return ModulusMaps(
        ScalarField(grid, kappa),
        ScalarField(grid, mu),
        contrast,
        seed,
        "inclusion",
        labels=inside.astype(np.int64),
        params={"radius": repr(float(radius))},
    )


def gen_homogeneous(grid: Grid, kappa0: float = 1.0, mu0: float = 1.0, seed: int = 0) -> ModulusMaps:
    """Constant maps (zero contrast)."""
    return ModulusMaps(
        ScalarField.constant(grid, kappa0), ScalarField.constant(grid, mu0), 0.0, seed, "homogeneous"
    )


def hs_phase_moduli(eta0: float, delta_eta: float, f1: float) -> tuple[float, float]:
    """Two-phase moduli η1 = η0 − f2·δη, η2 = η0 + f1·δη with mean η0 and jump δη."""
    if not 0.0 < f1 < 1.0:
        raise InputError(f"Volume fraction must lie in (0, 1), got {f1}")
    f2 = 1.0 - f1
    eta1 = eta0 - f2 * delta_eta
    eta2 = eta0 + f1 * delta_eta
    if eta1 <= 0 or eta2 <= 0:
        raise NonPositiveModulus(f"Phase moduli ({eta1}, {eta2}) are not positive")
    return eta1, eta2
