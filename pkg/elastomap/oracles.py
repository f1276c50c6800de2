"""Closed-form ground truth: dilute spherical inclusions and two-phase Hashin–Shtrikman media."""

import logging

from pydantic import BaseModel, ConfigDict

from .error_handling import InputError, MixedMacroStrain, NonPositiveModulus, ZeroMacroStrain
from .green import ReferenceMedium, green_coeffs
from .tensor_core import (
    IsoTensor4,
    ProjectorDims,
    SymTensor2,
    check_dim,
    iso_apply,
    sph_dev_split,
    strain_invariants,
)

logger = logging.getLogger(__name__)

# Relative step of the central finite differences.
FD_STEP = 1e-6
PURITY_TOL = 1e-12


class EshelbyCoeffs(BaseModel):
    """Strain concentration defects of a spherical inclusion in an infinite matrix."""

    model_config = ConfigDict(frozen=True)

    kappa_s: float
    mu_s: float
    theta0: float


class HSResult(BaseModel):
    """Effective moduli of the two-phase medium and, if requested, phase-1 strain moments."""

    model_config = ConfigDict(frozen=True)

    kappa_eff: float
    mu_eff: float
    theta1: float
    moments: tuple[float, float] | None = None


class HSDerivatives(BaseModel):
    """Partial derivatives of the effective moduli with respect to the phase-1 moduli."""

    model_config = ConfigDict(frozen=True)

    dkappa_dkappa1: float
    dkappa_dmu1: float
    dmu_dkappa1: float
    dmu_dmu1: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.dkappa_dkappa1, self.dkappa_dmu1, self.dmu_dkappa1, self.dmu_dmu1)


def theta(kappa: float, mu: float, dim: int) -> float:
    """θ = μ(d²κ + 2(d+1)(d−2)μ)/(2d(κ + 2μ))."""
    d = check_dim(dim)
    return mu * (d * d * kappa + 2 * (d + 1) * (d - 2) * mu) / (2 * d * (kappa + 2 * mu))


def eshelby_coeffs(ref: ReferenceMedium, kappa1: float, mu1: float) -> EshelbyCoeffs:
    if kappa1 <= 0 or mu1 <= 0:
        raise NonPositiveModulus(f"Inclusion moduli must be positive, got ({kappa1}, {mu1})")
    d = ref.dim
    theta0 = theta(ref.kappa0, ref.mu0, d)
    return EshelbyCoeffs(
        kappa_s=(kappa1 - ref.kappa0) / (kappa1 + 2 * (d - 1) * ref.mu0 / d),
        mu_s=(mu1 - ref.mu0) / (mu1 + theta0),
        theta0=theta0,
    )


def eshelby_interior(
    ref: ReferenceMedium, kappa1: float, mu1: float, eps_bar: SymTensor2
) -> SymTensor2:
    """Uniform strain inside the inclusion: [(1 − κs)J + (1 − μs)K]:ε̄."""
    coeffs = eshelby_coeffs(ref, kappa1, mu1)
    return iso_apply(IsoTensor4(ref.dim, 1.0 - coeffs.kappa_s, 1.0 - coeffs.mu_s), eps_bar)


def _load_type(eps_bar: SymTensor2) -> str:
    """'spherical' or 'deviatoric'; anything else is a mixed load."""
    total = eps_bar.norm()
    if total == 0.0:
        raise ZeroMacroStrain("Macroscopic strain has zero norm")
    sph, dev = sph_dev_split(eps_bar)
    if dev.norm() <= PURITY_TOL * total:
        return "spherical"
    if sph.norm() <= PURITY_TOL * total:
        return "deviatoric"
    raise MixedMacroStrain("Load is neither purely spherical nor purely deviatoric")


def eshelby_first_order_check(
    interior: SymTensor2, eps_bar: SymTensor2, ref: ReferenceMedium
) -> tuple[float | None, float | None]:
    """Inclusion moduli recovered from its interior strain at first order.

    Returns (κ_rec, None) for a spherical load and (None, μ_rec) for a deviatoric one.
    """
    coeffs = green_coeffs(ref)
    n_k = ProjectorDims.for_dim(ref.dim).n_k
    if _load_type(eps_bar) == "spherical":
        ratio = interior.trace / eps_bar.trace
        return ref.kappa0 + coeffs.inv_lambda_j / ref.dim * (1.0 - ratio), None
    _, dev = sph_dev_split(interior)
    ratio = dev.ddot(eps_bar) / eps_bar.norm() ** 2
    return None, ref.mu0 + n_k * coeffs.inv_lambda_k / 2.0 * (1.0 - ratio)


def _check_phases(f1: float, kappa1: float, kappa2: float, mu1: float, mu2: float) -> None:
    if not 0.0 < f1 < 1.0:
        raise InputError(f"Volume fraction must lie in (0, 1), got {f1}")
    if min(kappa1, kappa2, mu1, mu2) <= 0:
        raise NonPositiveModulus("Phase moduli must be positive")


def hs_effective(
    f1: float, kappa1: float, kappa2: float, mu1: float, mu2: float, dim: int
) -> HSResult:
    """Hashin–Shtrikman effective moduli with phase 1 as the comparison medium."""
    _check_phases(f1, kappa1, kappa2, mu1, mu2)
    d = check_dim(dim)
    f2 = 1.0 - f1
    theta1 = theta(kappa1, mu1, d)
    kappa_eff = f1 * kappa1 + f2 * kappa2 - f1 * f2 * (kappa1 - kappa2) ** 2 / (
        f2 * kappa1 + f1 * kappa2 + 2 * (d - 1) / d * mu1
    )
    mu_eff = f1 * mu1 + f2 * mu2 - f1 * f2 * (mu1 - mu2) ** 2 / (f2 * mu1 + f1 * mu2 + theta1)
    return HSResult(kappa_eff=kappa_eff, mu_eff=mu_eff, theta1=theta1)


def hs_derivatives(
    f1: float, kappa1: float, kappa2: float, mu1: float, mu2: float, dim: int
) -> HSDerivatives:
    """Analytic ∂κ̃/∂κ1, ∂κ̃/∂μ1, ∂μ̃/∂κ1, ∂μ̃/∂μ1."""
    _check_phases(f1, kappa1, kappa2, mu1, mu2)
    d = check_dim(dim)
    f2 = 1.0 - f1
    c_d = 2 * (d - 1) / d

    n_k = f1 * f2 * (kappa1 - kappa2) ** 2
    d_k = f2 * kappa1 + f1 * kappa2 + c_d * mu1
    dk_dk1 = f1 - (2 * f1 * f2 * (kappa1 - kappa2) * d_k - n_k * f2) / d_k**2
    dk_dm1 = n_k * c_d / d_k**2

    stiff = (kappa1 + 2 * mu1) ** 2
    g = (d * d * kappa1 + 2 * (d + 1) * (d - 2) * mu1) / (2 * d * (kappa1 + 2 * mu1))
    dtheta_dk1 = mu1**2 * (d + 2) / (d * stiff)
    dtheta_dm1 = g - mu1 * kappa1 * (d + 2) / (d * stiff)

    n_m = f1 * f2 * (mu1 - mu2) ** 2
    e_m = f2 * mu1 + f1 * mu2 + mu1 * g
    dm_dk1 = n_m * dtheta_dk1 / e_m**2
    dm_dm1 = f1 - (2 * f1 * f2 * (mu1 - mu2) * e_m - n_m * (f2 + dtheta_dm1)) / e_m**2
    return HSDerivatives(
        dkappa_dkappa1=dk_dk1, dkappa_dmu1=dk_dm1, dmu_dkappa1=dm_dk1, dmu_dmu1=dm_dm1
    )


def hs_derivatives_fd(
    f1: float,
    kappa1: float,
    kappa2: float,
    mu1: float,
    mu2: float,
    dim: int,
    step: float = FD_STEP,
) -> HSDerivatives:
    """Central finite-difference counterpart of hs_derivatives."""
    hk, hm = step * kappa1, step * mu1

    def eff(k1: float, m1: float) -> HSResult:
        return hs_effective(f1, k1, kappa2, m1, mu2, dim)

    plus_k, minus_k = eff(kappa1 + hk, mu1), eff(kappa1 - hk, mu1)
    plus_m, minus_m = eff(kappa1, mu1 + hm), eff(kappa1, mu1 - hm)
    return HSDerivatives(
        dkappa_dkappa1=(plus_k.kappa_eff - minus_k.kappa_eff) / (2 * hk),
        dkappa_dmu1=(plus_m.kappa_eff - minus_m.kappa_eff) / (2 * hm),
        dmu_dkappa1=(plus_k.mu_eff - minus_k.mu_eff) / (2 * hk),
        dmu_dmu1=(plus_m.mu_eff - minus_m.mu_eff) / (2 * hm),
    )


def hs_second_moments(
    f1: float,
    kappa1: float,
    kappa2: float,
    mu1: float,
    mu2: float,
    eps_bar: SymTensor2,
) -> HSResult:
    """Effective moduli plus the phase-1 averages ⟨ε0²⟩₁ and ⟨ε_eq²⟩₁ under load ε̄.

    Obtained by differentiating the effective energy ε̄:L̃:ε̄ with respect to κ1 and μ1.
    """
    d = eps_bar.dim
    result = hs_effective(f1, kappa1, kappa2, mu1, mu2, d)
    der = hs_derivatives(f1, kappa1, kappa2, mu1, mu2, d)
    eps0, eps_eq = strain_invariants(eps_bar)
    mean_eps0_sq = (eps0**2 * der.dkappa_dkappa1 + 2.0 / (d * (d - 1)) * eps_eq**2 * der.dmu_dkappa1) / f1
    mean_eq_sq = (d * (d - 1) / 2.0 * eps0**2 * der.dkappa_dmu1 + eps_eq**2 * der.dmu_dmu1) / f1
    return result.model_copy(update={"moments": (mean_eps0_sq, mean_eq_sq)})


def hs_recover_moduli(
    moments: tuple[float, float], eps_bar: SymTensor2, ref: ReferenceMedium
) -> tuple[float | None, float | None]:
    """Phase-1 modulus from its second strain moment: (κ1_rec, None) or (None, μ1_rec)."""
    coeffs = green_coeffs(ref)
    dims = ProjectorDims.for_dim(ref.dim)
    eps0, eps_eq = strain_invariants(eps_bar)
    mean_eps0_sq, mean_eq_sq = moments
    if _load_type(eps_bar) == "spherical":
        prefactor = dims.n_j * coeffs.inv_lambda_j / (2 * ref.dim)
        return ref.kappa0 + prefactor * (1.0 - mean_eps0_sq / eps0**2), None
    prefactor = dims.n_k * coeffs.inv_lambda_k / 4.0
    return None, ref.mu0 + prefactor * (1.0 - mean_eq_sq / eps_eq**2)
