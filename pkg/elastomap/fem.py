"""2D bounded-domain forward solver: bilinear quadrilaterals with affine Dirichlet data.

Displacements u = ε̄·x are imposed on every boundary node of the structured [0,1]² grid; the
interior correction w = u − ε̄·x solves K_ff w_f = −(K u_lin)_f with Jacobi-preconditioned CG.
"""

import logging
import time
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy import sparse
from scipy.sparse.linalg import cg

from .config import settings
from .error_handling import (
    DimensionMismatch,
    InputError,
    NonPositiveModulus,
    NotConverged,
    UnsupportedDimension,
)
from .fields import BoundedGrid, ScalarField, TensorField, check_same_grid
from .models import SolveReport
from .tensor_core import SQRT2, SymTensor2, projector_j, projector_k

logger = logging.getLogger(__name__)

GAUSS_POINTS = (-1.0 / np.sqrt(3.0), 1.0 / np.sqrt(3.0))

# Corner offsets (di, dj) in counterclockwise order and their natural coordinates.
_CORNERS = ((0, 0), (1, 0), (1, 1), (0, 1))
_NATURAL = np.array([(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)])


@dataclass(eq=False)
class DisplacementField:
    """Nodal displacement vectors, values shape (nx, ny, 2)."""

    grid: BoundedGrid
    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        if self.values.shape != (*self.grid.shape, 2):
            raise DimensionMismatch(
                f"Displacement values have shape {self.values.shape}, grid is {self.grid.shape}"
            )


def strain_displacement(hx: float, hy: float, xi: float, eta: float) -> NDArray[np.float64]:
    """Mandel B matrix (3×8) of the bilinear element at natural point (ξ, η)."""
    b = np.zeros((3, 8))
    for a, (xa, ya) in enumerate(_NATURAL):
        dn_dx = xa * (1.0 + ya * eta) / 4.0 * (2.0 / hx)
        dn_dy = ya * (1.0 + xa * xi) / 4.0 * (2.0 / hy)
        b[0, 2 * a] = dn_dx
        b[1, 2 * a + 1] = dn_dy
        b[2, 2 * a] = dn_dy / SQRT2
        b[2, 2 * a + 1] = dn_dx / SQRT2
    return b


def element_matrices(hx: float, hy: float) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Element stiffness parts (K_J, K_K) so that K_e = 2κ_e K_J + 2μ_e K_K (2×2 Gauss)."""
    det_j = hx * hy / 4.0
    pj, pk = projector_j(2), projector_k(2)
    kj = np.zeros((8, 8))
    kk = np.zeros((8, 8))
    for xi in GAUSS_POINTS:
        for eta in GAUSS_POINTS:
            b = strain_displacement(hx, hy, xi, eta)
            kj += b.T @ pj @ b * det_j
            kk += b.T @ pk @ b * det_j
    return kj, kk


def element_moduli(nodal: NDArray[np.float64]) -> NDArray[np.float64]:
    """Per-element values as the mean of the four corner nodes."""
    result: NDArray[np.float64] = 0.25 * (
        nodal[:-1, :-1] + nodal[1:, :-1] + nodal[1:, 1:] + nodal[:-1, 1:]
    )
    return result


def nodal_average(element_values: NDArray[np.float64]) -> NDArray[np.float64]:
    """Average of adjacent element values at every node, shape (nex+1, ney+1, ...)."""
    nex, ney = element_values.shape[:2]
    tail = element_values.shape[2:]
    total = np.zeros((nex + 1, ney + 1, *tail))
    count = np.zeros((nex + 1, ney + 1))
    for di, dj in _CORNERS:
        total[di:di + nex, dj:dj + ney] += element_values
        count[di:di + nex, dj:dj + ney] += 1.0
    result: NDArray[np.float64] = total / count.reshape(count.shape + (1,) * len(tail))
    return result


def nodal_strains(element_strains: NDArray[np.float64]) -> TensorField:
    """Nodal strains averaged over the 4 (interior), 2 (edge) or 1 (corner) adjacent elements."""
    values = np.asarray(element_strains, dtype=np.float64)
    if values.ndim != 3 or values.shape[-1] != 3:
        raise DimensionMismatch(f"Expected element strains of shape (nex, ney, 3), got {values.shape}")
    grid = BoundedGrid(values.shape[0] + 1, values.shape[1] + 1)
    return TensorField(grid, nodal_average(values))


class FEMSolver:
    """Bilinear-quad elasticity on a structured grid with per-element isotropic moduli."""

    def __init__(
        self,
        grid: BoundedGrid,
        kappa_e: NDArray[np.float64],
        mu_e: NDArray[np.float64],
        tol: float | None = None,
        max_iter: int | None = None,
    ):
        if kappa_e.shape != grid.element_shape or mu_e.shape != grid.element_shape:
            raise DimensionMismatch(
                f"Element moduli must have shape {grid.element_shape}, "
                f"got {kappa_e.shape} and {mu_e.shape}"
            )
        if np.any(kappa_e <= 0) or np.any(mu_e <= 0):
            raise NonPositiveModulus("Element moduli must be strictly positive")
        self.grid = grid
        self.tol = tol if tol is not None else settings.fem_tol
        self.kappa_e = kappa_e
        self.mu_e = mu_e
        self.element_dofs = self._element_dofs()
        self.stiffness = self._assemble()

        boundary = grid.boundary_mask().reshape(-1)
        node_free = np.flatnonzero(~boundary)
        self.free_dofs = np.sort(np.concatenate([2 * node_free, 2 * node_free + 1]))
        cap = max_iter if max_iter is not None else settings.fem_max_iter
        self.max_iter: int = cap if cap is not None else max(10 * self.free_dofs.size, 1)
        if self.max_iter < 1:
            raise InputError(f"CG iteration cap must be positive, got {self.max_iter}")

    def _element_dofs(self) -> NDArray[np.int64]:
        nx, ny = self.grid.shape
        ei, ej = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1), indexing="ij")
        nodes = np.stack([(ei + di) * ny + (ej + dj) for di, dj in _CORNERS], axis=-1).reshape(-1, 4)
        dofs = np.empty((nodes.shape[0], 8), dtype=np.int64)
        dofs[:, 0::2] = 2 * nodes
        dofs[:, 1::2] = 2 * nodes + 1
        return dofs

    def _assemble(self) -> sparse.csr_matrix:
        start = time.time()
        hx, hy = self.grid.spacing
        kj, kk = element_matrices(hx, hy)
        ke = (
            2.0 * self.kappa_e.reshape(-1)[:, None, None] * kj
            + 2.0 * self.mu_e.reshape(-1)[:, None, None] * kk
        )
        rows = np.repeat(self.element_dofs, 8, axis=1).reshape(-1)
        cols = np.tile(self.element_dofs, (1, 8)).reshape(-1)
        ndof = 2 * self.grid.size
        matrix = sparse.coo_matrix((ke.reshape(-1), (rows, cols)), shape=(ndof, ndof)).tocsr()
        logger.debug(f"Assembled {ndof}x{ndof} stiffness in {(time.time() - start) * 1000:.1f}ms")
        return matrix

    def free_stiffness(self) -> sparse.csr_matrix:
        """Stiffness restricted to the unconstrained degrees of freedom."""
        return self.stiffness[self.free_dofs][:, self.free_dofs]

    def affine_displacement(self, eps_bar: SymTensor2) -> NDArray[np.float64]:
        """u = ε̄·x at every node, shape (nx, ny, 2)."""
        result: NDArray[np.float64] = self.grid.coordinates() @ eps_bar.to_matrix().T
        return result

    def element_strains(self, displacement: NDArray[np.float64]) -> NDArray[np.float64]:
        """Element-centre strains in Mandel form, shape (nex, ney, 3)."""
        hx, hy = self.grid.spacing
        b_centre = strain_displacement(hx, hy, 0.0, 0.0)
        u_e = displacement.reshape(-1)[self.element_dofs]
        return (u_e @ b_centre.T).reshape(*self.grid.element_shape, 3)

    def solve(
        self, eps_bar: SymTensor2
    ) -> tuple[DisplacementField, TensorField, SolveReport]:
        """Nodal displacements, nodal strains and the solve report for boundary data ε̄·x."""
        if eps_bar.dim != 2:
            raise UnsupportedDimension("The FEM solver is 2D only")
        start = time.time()
        u_lin = self.affine_displacement(eps_bar).reshape(-1)
        rhs = -(self.stiffness @ u_lin)[self.free_dofs]
        correction = np.zeros_like(u_lin)
        history: list[float] = []
        rhs_norm = float(np.linalg.norm(rhs))

        if self.free_dofs.size and rhs_norm > 0.0:
            k_ff = self.free_stiffness()
            jacobi = sparse.diags(1.0 / k_ff.diagonal())

            def record(xk: NDArray[np.float64]) -> None:
                history.append(float(np.linalg.norm(rhs - k_ff @ xk)) / rhs_norm)

            w_free, info = cg(
                k_ff, rhs, rtol=self.tol, atol=0.0, maxiter=self.max_iter, M=jacobi, callback=record
            )
            residual = float(np.linalg.norm(rhs - k_ff @ w_free)) / rhs_norm
            if info != 0:
                raise NotConverged(
                    f"CG did not converge (info={info}, residual {residual:.3e})",
                    iterations=len(history),
                    residual=residual,
                )
            correction[self.free_dofs] = w_free
        else:
            residual = 0.0

        displacement = (u_lin + correction).reshape(*self.grid.shape, 2)
        strains = nodal_strains(self.element_strains(displacement))
        logger.info(
            f"FEM solve on {self.grid.nx}x{self.grid.ny} nodes: {len(history)} CG iterations, "
            f"residual {residual:.3e}, {(time.time() - start):.2f}s"
        )
        report = SolveReport(
            solver="fem",
            iterations=len(history),
            residual_history=history,
            converged=True,
            equilibrium_residual=residual,
        )
        return DisplacementField(self.grid, displacement), strains, report


def solve_dirichlet(
    kappa: ScalarField,
    mu: ScalarField,
    eps_bar: SymTensor2,
    tol: float | None = None,
    max_iter: int | None = None,
) -> tuple[DisplacementField, TensorField]:
    """Solve with u = ε̄·x on ∂V for nodal moduli maps on a BoundedGrid."""
    grid = check_same_grid(kappa, mu)
    if grid.dim != 2 or eps_bar.dim != 2:
        raise UnsupportedDimension("The FEM solver is 2D only")
    if not isinstance(grid, BoundedGrid):
        raise DimensionMismatch("solve_dirichlet needs fields on a BoundedGrid")
    if np.any(kappa.values <= 0) or np.any(mu.values <= 0):
        raise NonPositiveModulus("Moduli must be strictly positive everywhere")
    solver = FEMSolver(grid, element_moduli(kappa.values), element_moduli(mu.values), tol, max_iter)
    displacement, strains, _ = solver.solve(eps_bar)
    return displacement, strains
