"""Periodic Green's tensor of an isotropic reference medium in Fourier space.

Frequencies are integer reciprocal-lattice vectors of the unit cell with the e^{2πi x·ξ}
convention. Γ̂0(0) = 0, and Γ̂0 is even and homogeneous of degree 0 in ξ.
"""

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict

from .error_handling import DimensionMismatch, NonPositiveModulus, ZeroFrequency
from .tensor_core import (
    FullTensor4,
    IsoTensor4,
    ProjectorDims,
    SymTensor2,
    check_dim,
    index_to_mandel,
    mandel_size,
)

logger = logging.getLogger(__name__)

# Frequencies evaluated per block when assembling Γ̂0 densely.
CHUNK_SIZE = 32768


@dataclass(frozen=True)
class ReferenceMedium:
    """Isotropic reference medium (κ0, μ0)."""

    dim: int
    kappa0: float
    mu0: float

    def __post_init__(self) -> None:
        check_dim(self.dim)
        if not (self.kappa0 > 0 and self.mu0 > 0):
            raise NonPositiveModulus(
                f"Reference moduli must be positive, got kappa0={self.kappa0}, mu0={self.mu0}"
            )

    @classmethod
    def from_fields(cls, kappa: NDArray[np.float64], mu: NDArray[np.float64], dim: int) -> "ReferenceMedium":
        """Reference medium at the spatial means of the moduli."""
        return cls(dim, float(np.mean(kappa)), float(np.mean(mu)))

    def stiffness(self) -> IsoTensor4:
        """L0 = dκ0J + 2μ0K."""
        return IsoTensor4.stiffness(self.dim, self.kappa0, self.mu0)

    def scaled(self, factor: float) -> "ReferenceMedium":
        return ReferenceMedium(self.dim, self.kappa0 * factor, self.mu0 * factor)

    @property
    def ratio(self) -> float:
        return self.kappa0 / self.mu0


class GreenCoefficients(BaseModel):
    """Scalar coefficients of Γ̂0 and its frequency-independent J/K projections."""

    model_config = ConfigDict(frozen=True)

    dim: int
    alpha0: float
    beta0: float
    lambda_j: float
    lambda_k: float

    @property
    def inv_lambda_j(self) -> float:
        return 1.0 / self.lambda_j

    @property
    def inv_lambda_k(self) -> float:
        return 1.0 / self.lambda_k


def inv_lambda_j_closed(ref: ReferenceMedium) -> float:
    """1/λ_J = dκ0 + 2(d−1)μ0."""
    d = ref.dim
    return d * ref.kappa0 + 2 * (d - 1) * ref.mu0


def inv_lambda_k_closed(ref: ReferenceMedium) -> float:
    """1/λ_K = 2μ0(dκ0 + 2(d−1)μ0) / (d(d−1)(κ0 + 2μ0))."""
    d = ref.dim
    return (
        2 * ref.mu0 * (d * ref.kappa0 + 2 * (d - 1) * ref.mu0)
        / (d * (d - 1) * (ref.kappa0 + 2 * ref.mu0))
    )


def green_coeffs(ref: ReferenceMedium) -> GreenCoefficients:
    """α0, β0 of Γ̂0 and the projections λ_J = Γ̂0::J, λ_K = Γ̂0::K."""
    d, kappa0, mu0 = ref.dim, ref.kappa0, ref.mu0
    alpha0 = 1.0 / (4.0 * mu0)
    beta0 = -(d * kappa0 + (d - 2) * mu0) / (mu0 * (d * kappa0 + 2 * (d - 1) * mu0))
    lambda_j = (4 * alpha0 + beta0) / d
    lambda_k = ((2 * d * (d + 1) - 4) * alpha0 + (d - 1) * beta0) / d

    for name, value, closed in (
        ("1/lambda_J", 1.0 / lambda_j, inv_lambda_j_closed(ref)),
        ("1/lambda_K", 1.0 / lambda_k, inv_lambda_k_closed(ref)),
    ):
        if not np.isclose(value, closed, rtol=1e-12, atol=0.0):
            logger.warning(f"Green coefficient {name} disagrees with closed form: {value} vs {closed}")

    return GreenCoefficients(dim=d, alpha0=alpha0, beta0=beta0, lambda_j=lambda_j, lambda_k=lambda_k)


def green_iso(ref: ReferenceMedium) -> IsoTensor4:
    """Frequency-independent isotropic part (λ_J/n_J)J + (λ_K/n_K)K."""
    coeffs = green_coeffs(ref)
    dims = ProjectorDims.for_dim(ref.dim)
    return IsoTensor4(ref.dim, coeffs.lambda_j / dims.n_j, coeffs.lambda_k / dims.n_k)


def _green_block(xi: NDArray[np.float64], coeffs: GreenCoefficients) -> NDArray[np.float64]:
    """Γ̂0 in index form for frequencies xi of shape (P, d)."""
    d = xi.shape[-1]
    delta = np.eye(d)
    norm2 = np.einsum("pi,pi->p", xi, xi)
    nonzero = norm2 > 0
    safe = np.where(nonzero, norm2, 1.0)

    # Σ_m ψ_m⊗ψ_m with ψ_m = ξ⊗e_m + e_m⊗ξ
    outer = np.einsum("pi,pk->pik", xi, xi)
    sym_sum = (
        np.einsum("pik,jl->pijkl", outer, delta)
        + np.einsum("pil,jk->pijkl", outer, delta)
        + np.einsum("pjk,il->pijkl", outer, delta)
        + np.einsum("pjl,ik->pijkl", outer, delta)
    )
    quartic = np.einsum("pij,pkl->pijkl", outer, outer)
    gamma = (
        (coeffs.alpha0 / safe)[:, None, None, None, None] * sym_sum
        + (coeffs.beta0 / safe**2)[:, None, None, None, None] * quartic
    )
    gamma[~nonzero] = 0.0
    return gamma


def green_hat_field(freqs: ArrayLike, ref: ReferenceMedium) -> NDArray[np.float64]:
    """Γ̂0 as Mandel matrices for an array of frequencies (..., d) -> (..., m, m)."""
    xi_all = np.asarray(freqs, dtype=np.float64)
    d = ref.dim
    if xi_all.shape[-1] != d:
        raise DimensionMismatch(f"Frequencies of dimension {xi_all.shape[-1]} for a {d}D medium")
    coeffs = green_coeffs(ref)
    m = mandel_size(d)
    flat = xi_all.reshape(-1, d)
    out = np.empty((flat.shape[0], m, m))
    for start in range(0, flat.shape[0], CHUNK_SIZE):
        block = flat[start:start + CHUNK_SIZE]
        out[start:start + CHUNK_SIZE] = index_to_mandel(_green_block(block, coeffs), d)
    return out.reshape(*xi_all.shape[:-1], m, m)


def green_hat(xi: ArrayLike, ref: ReferenceMedium) -> FullTensor4:
    """Γ̂0(ξ) for one integer frequency; the zero tensor at ξ = 0."""
    vec = np.asarray(xi, dtype=np.float64).reshape(-1)
    return FullTensor4(ref.dim, green_hat_field(vec[None, :], ref)[0])


def green_orthogonal(xi: ArrayLike, ref: ReferenceMedium) -> FullTensor4:
    """Γ̂0⊥(ξ) = Γ̂0(ξ) − Γ0iso, whose J and K projections vanish."""
    vec = np.asarray(xi, dtype=np.float64).reshape(-1)
    if not np.any(vec):
        raise ZeroFrequency("The orthogonal part of the Green tensor is undefined at xi = 0")
    return green_hat(vec, ref) - green_iso(ref).to_full()


def green_displacement(xi: ArrayLike, tau_hat: SymTensor2, ref: ReferenceMedium) -> NDArray[np.float64]:
    """2πi·û of the auxiliary problem for a polarization mode τ̂ at frequency ξ ≠ 0."""
    vec = np.asarray(xi, dtype=np.float64).reshape(-1)
    norm2 = float(vec @ vec)
    if norm2 == 0.0:
        raise ZeroFrequency("Displacement mode undefined at xi = 0")
    if tau_hat.dim != ref.dim or vec.size != ref.dim:
        raise DimensionMismatch("Frequency, polarization and medium dimensions differ")
    d, kappa0, mu0 = ref.dim, ref.kappa0, ref.mu0
    tau = tau_hat.to_matrix()
    traction = tau @ vec
    ratio = (d * kappa0 + (d - 2) * mu0) / (d * kappa0 + 2 * (d - 1) * mu0)
    result: NDArray[np.float64] = (
        -traction / (mu0 * norm2) + ratio / mu0 * float(vec @ traction) * vec / norm2**2
    )
    return result
