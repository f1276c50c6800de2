"""Periodic forward solver: basic fixed-point scheme for the Lippmann–Schwinger equation.

ε^{k+1} = ε̄ − Γ0(δL:ε^k), ε^0 = ε̄, with δL = L − L0 and Γ0 applied frequency-wise through
discrete Fourier transforms of each Mandel component.
"""

import logging
import time

import numpy as np
from numpy.typing import NDArray

from .config import settings
from .error_handling import DimensionMismatch, InputError, NonPositiveModulus, NotConverged
from .fields import PeriodicGrid, ScalarField, TensorField, check_same_grid
from .green import ReferenceMedium, green_coeffs, green_hat_field
from .models import SolveReport
from .tensor_core import (
    FullTensor4,
    IsoTensor4,
    ProjectorDims,
    SymTensor2,
    field_to_matrix,
    iso_apply_field,
    mandel_size,
    projector_j,
    projector_k,
)

logger = logging.getLogger(__name__)


def _spatial_axes(dim: int) -> tuple[int, ...]:
    return tuple(range(dim))


def _check_moduli(kappa: ScalarField, mu: ScalarField) -> PeriodicGrid:
    grid = check_same_grid(kappa, mu)
    if not isinstance(grid, PeriodicGrid):
        raise DimensionMismatch("The spectral solver needs fields on a PeriodicGrid")
    if np.any(kappa.values <= 0) or np.any(mu.values <= 0):
        raise NonPositiveModulus("Moduli must be strictly positive everywhere")
    return grid


def _resolve_reference(
    kappa: ScalarField, mu: ScalarField, ref: ReferenceMedium | None
) -> ReferenceMedium:
    if ref is None:
        ref = ReferenceMedium.from_fields(kappa.values, mu.values, kappa.grid.dim)
        logger.debug(f"Reference medium from field means: kappa0={ref.kappa0}, mu0={ref.mu0}")
    elif ref.dim != kappa.grid.dim:
        raise DimensionMismatch(f"{ref.dim}D reference medium for {kappa.grid.dim}D fields")
    return ref


def polarization(
    kappa: ScalarField, mu: ScalarField, ref: ReferenceMedium, strain: NDArray[np.float64]
) -> NDArray[np.float64]:
    """τ = δL:ε pointwise, with δL = dδκJ + 2δμK."""
    d = ref.dim
    return iso_apply_field(
        d * (kappa.values - ref.kappa0), 2.0 * (mu.values - ref.mu0), strain, d
    )


def stress(kappa: ScalarField, mu: ScalarField, strain: NDArray[np.float64]) -> NDArray[np.float64]:
    """σ = L:ε pointwise."""
    d = kappa.grid.dim
    return iso_apply_field(d * kappa.values, 2.0 * mu.values, strain, d)


class GreenOperator:
    """Γ0 on a periodic grid, with Γ̂0 cached for every lattice frequency."""

    def __init__(self, grid: PeriodicGrid, ref: ReferenceMedium):
        if grid.dim != ref.dim:
            raise DimensionMismatch(f"{ref.dim}D reference medium on a {grid.dim}D grid")
        self.grid = grid
        self.ref = ref
        start = time.time()
        self.gamma_hat = green_hat_field(grid.frequencies(), ref)
        logger.debug(
            f"Assembled Green operator on grid {grid.shape} in {(time.time() - start) * 1000:.1f}ms"
        )

    def apply(self, tau: NDArray[np.float64]) -> NDArray[np.float64]:
        """Γ0τ for Mandel values of shape (*grid.shape, m); the zero mode is dropped."""
        expected = (*self.grid.shape, mandel_size(self.grid.dim))
        if tau.shape != expected:
            raise DimensionMismatch(f"Polarization shape {tau.shape} does not match {expected}")
        axes = _spatial_axes(self.grid.dim)
        tau_hat = np.fft.fftn(tau, axes=axes)
        out_hat = np.einsum("...ab,...b->...a", self.gamma_hat, tau_hat)
        result: NDArray[np.float64] = np.fft.ifftn(out_hat, axes=axes).real
        return result


def apply_green(tau: TensorField, ref: ReferenceMedium) -> TensorField:
    """Zero-mean compatible strain Γ0τ."""
    if not isinstance(tau.grid, PeriodicGrid):
        raise DimensionMismatch("apply_green needs a field on a PeriodicGrid")
    if tau.dim != ref.dim:
        raise DimensionMismatch(f"{tau.dim}D polarization for a {ref.dim}D reference medium")
    return TensorField(tau.grid, GreenOperator(tau.grid, ref).apply(tau.values))


def equilibrium_residual(
    kappa: ScalarField, mu: ScalarField, strain: NDArray[np.float64]
) -> float:
    """Relative Fourier divergence of σ = L:ε: sqrt(Σ|σ̂(ξ)·ξ/|ξ||²) / |σ̂(0)|."""
    grid = kappa.grid
    d = grid.dim
    axes = _spatial_axes(d)
    sigma_hat = np.fft.fftn(stress(kappa, mu, strain), axes=axes) / grid.size
    sigma_mat = field_to_matrix(sigma_hat, d)
    xi = grid.frequencies()
    norm = np.sqrt(np.einsum("...i,...i->...", xi, xi))
    unit = xi / np.where(norm > 0, norm, 1.0)[..., None]
    divergence = np.einsum("...ij,...j->...i", sigma_mat, unit)
    mean_stress = float(np.sqrt(np.sum(np.abs(sigma_hat[(0,) * d]) ** 2)))
    total = float(np.sqrt(np.sum(np.abs(divergence) ** 2)))
    if mean_stress == 0.0:
        return total
    return total / mean_stress


class SpectralSolver:
    """Basic-scheme Lippmann–Schwinger solver bound to one grid and reference medium."""

    def __init__(
        self,
        grid: PeriodicGrid,
        ref: ReferenceMedium,
        tol: float | None = None,
        max_iter: int | None = None,
    ):
        self.grid = grid
        self.ref = ref
        self.tol = tol if tol is not None else settings.spectral_tol
        self.max_iter = max_iter if max_iter is not None else settings.spectral_max_iter
        if self.tol <= 0:
            raise InputError(f"Tolerance must be positive, got {self.tol}")
        self.green = GreenOperator(grid, ref)

    def solve(
        self, kappa: ScalarField, mu: ScalarField, eps_bar: SymTensor2
    ) -> tuple[TensorField, SolveReport]:
        """Iterate to the fixed point for macroscopic strain ε̄."""
        grid = _check_moduli(kappa, mu)
        if grid != self.grid:
            raise DimensionMismatch(f"Solver grid {self.grid.shape} vs field grid {grid.shape}")
        if eps_bar.dim != self.ref.dim:
            raise DimensionMismatch(f"{eps_bar.dim}D macroscopic strain on a {grid.dim}D grid")

        eps = TensorField.uniform(grid, eps_bar).values
        bar_norm = eps_bar.norm()
        if bar_norm == 0.0:
            logger.info("Zero macroscopic strain: the solution vanishes identically")
            return TensorField(grid, eps), SolveReport(
                solver="spectral", iterations=0, converged=True, equilibrium_residual=0.0
            )

        start = time.time()
        history: list[float] = []
        for iteration in range(1, self.max_iter + 1):
            updated = eps_bar.comps - self.green.apply(polarization(kappa, mu, self.ref, eps))
            residual = float(np.sqrt(np.mean(np.sum((updated - eps) ** 2, axis=-1)))) / bar_norm
            eps = updated
            history.append(residual)
            logger.debug(f"Iteration {iteration}: residual {residual:.3e}")

            if not np.isfinite(residual) or residual > settings.divergence_factor * max(history[0], self.tol):
                raise NotConverged(
                    f"Fixed-point iteration diverged at iteration {iteration} (residual {residual:.3e})",
                    iterations=iteration,
                    residual=residual,
                )
            if len(history) > 1 and residual > history[-2]:
                logger.warning(f"Residual increased at iteration {iteration}: {residual:.3e}")
            if residual <= self.tol:
                break
        else:
            raise NotConverged(
                f"No convergence after {self.max_iter} iterations (residual {history[-1]:.3e})",
                iterations=self.max_iter,
                residual=history[-1],
            )

        eq_residual = equilibrium_residual(kappa, mu, eps)
        logger.info(
            f"Spectral solve converged in {len(history)} iterations "
            f"(residual {history[-1]:.3e}, equilibrium {eq_residual:.3e}, "
            f"{(time.time() - start):.2f}s)"
        )
        report = SolveReport(
            solver="spectral",
            iterations=len(history),
            residual_history=history,
            converged=True,
            equilibrium_residual=eq_residual,
        )
        return TensorField(grid, eps), report


def solve_ls(
    kappa: ScalarField,
    mu: ScalarField,
    eps_bar: SymTensor2,
    ref: ReferenceMedium | None = None,
    tol: float | None = None,
    max_iter: int | None = None,
) -> tuple[TensorField, SolveReport]:
    """Solve the periodic problem for one macroscopic strain."""
    grid = _check_moduli(kappa, mu)
    ref = _resolve_reference(kappa, mu, ref)
    return SpectralSolver(grid, ref, tol, max_iter).solve(kappa, mu, eps_bar)


def first_order_strain(
    kappa: ScalarField, mu: ScalarField, eps_bar: SymTensor2, ref: ReferenceMedium | None = None
) -> TensorField:
    """ε̄ − Γ0(δL:ε̄), the strain at first order in δL."""
    grid = _check_moduli(kappa, mu)
    ref = _resolve_reference(kappa, mu, ref)
    if eps_bar.dim != grid.dim:
        raise DimensionMismatch(f"{eps_bar.dim}D macroscopic strain on a {grid.dim}D grid")
    uniform = TensorField.uniform(grid, eps_bar).values
    fluctuation = GreenOperator(grid, ref).apply(polarization(kappa, mu, ref, uniform))
    return TensorField(grid, uniform - fluctuation)


def homogenize(
    kappa: ScalarField,
    mu: ScalarField,
    ref: ReferenceMedium | None = None,
    tol: float | None = None,
    max_iter: int | None = None,
) -> FullTensor4:
    """Effective tensor L̃ assembled column-wise from ⟨σ⟩ under the Mandel unit loads."""
    grid = _check_moduli(kappa, mu)
    ref = _resolve_reference(kappa, mu, ref)
    solver = SpectralSolver(grid, ref, tol, max_iter)
    size = mandel_size(grid.dim)
    columns = []
    for b in range(size):
        strain, _ = solver.solve(kappa, mu, SymTensor2(grid.dim, np.eye(size)[b]))
        columns.append(stress(kappa, mu, strain.values).reshape(-1, size).mean(axis=0))
    effective = FullTensor4(grid.dim, np.stack(columns, axis=1))
    asymmetry = float(np.abs(effective.mandel - effective.mandel.T).max())
    logger.info(f"Homogenized tensor on grid {grid.shape} (asymmetry {asymmetry:.2e})")
    return effective


def _contrast_spectra(
    kappa: ScalarField, mu: ScalarField, ref: ReferenceMedium
) -> tuple[NDArray[np.complex128], NDArray[np.complex128]]:
    """Normalized transforms of dδκ and 2δμ (Plancherel: Σ|f̂|² = ⟨f²⟩)."""
    d = ref.dim
    axes = _spatial_axes(d)
    size = kappa.grid.size
    a_hat = np.fft.fftn(d * (kappa.values - ref.kappa0), axes=axes) / size
    b_hat = np.fft.fftn(2.0 * (mu.values - ref.mu0), axes=axes) / size
    return a_hat, b_hat


def quadratic_term(
    kappa: ScalarField, mu: ScalarField, ref: ReferenceMedium | None = None
) -> FullTensor4:
    """⟨δL:Γ0δL⟩ as the spectral sum Σ_ξ δL̂(ξ)*:Γ̂0(ξ):δL̂(ξ)."""
    grid = _check_moduli(kappa, mu)
    ref = _resolve_reference(kappa, mu, ref)
    d = grid.dim
    a_hat, b_hat = _contrast_spectra(kappa, mu, ref)
    gamma = green_hat_field(grid.frequencies(), ref)
    g_aa = np.einsum("...,...ij->ij", np.abs(a_hat) ** 2, gamma)
    g_bb = np.einsum("...,...ij->ij", np.abs(b_hat) ** 2, gamma)
    g_ab = np.einsum("...,...ij->ij", (a_hat * np.conj(b_hat)).real, gamma)
    pj, pk = projector_j(d), projector_k(d)
    total = pj @ g_aa @ pj + pk @ g_bb @ pk + pj @ g_ab @ pk + pk @ g_ab @ pj
    return FullTensor4(d, total)


def isotropic_quadratic_term(
    kappa: ScalarField, mu: ScalarField, ref: ReferenceMedium | None = None
) -> IsoTensor4:
    """Σ_{ξ≠0} |dδκ̂|²(λ_J/n_J) J + |2δμ̂|²(λ_K/n_K) K."""
    grid = _check_moduli(kappa, mu)
    ref = _resolve_reference(kappa, mu, ref)
    coeffs = green_coeffs(ref)
    dims = ProjectorDims.for_dim(grid.dim)
    a_hat, b_hat = _contrast_spectra(kappa, mu, ref)
    zero = (0,) * grid.dim
    power_a = float(np.sum(np.abs(a_hat) ** 2) - np.abs(a_hat[zero]) ** 2)
    power_b = float(np.sum(np.abs(b_hat) ** 2) - np.abs(b_hat[zero]) ** 2)
    return IsoTensor4(
        grid.dim, power_a * coeffs.lambda_j / dims.n_j, power_b * coeffs.lambda_k / dims.n_k
    )


def second_order_homogenize(
    kappa: ScalarField, mu: ScalarField, ref: ReferenceMedium | None = None
) -> FullTensor4:
    """L0 + ⟨δL⟩ − ⟨δL:Γ0δL⟩."""
    grid = _check_moduli(kappa, mu)
    ref = _resolve_reference(kappa, mu, ref)
    d = grid.dim
    mean_contrast = IsoTensor4(
        d, d * (kappa.mean() - ref.kappa0), 2.0 * (mu.mean() - ref.mu0)
    )
    first_order = IsoTensor4(
        d, ref.stiffness().a + mean_contrast.a, ref.stiffness().b + mean_contrast.b
    ).to_full()
    return first_order - quadratic_term(kappa, mu, ref)
