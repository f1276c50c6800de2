"""Modulus maps from strain maps through first-order local identities.

Every formula is evaluated pointwise per grid node, without smoothing. The reference medium
(κ0, μ0) enters only through the constants 1/λ_J and 1/λ_K of its Green tensor.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import NDArray

from .config import settings
from .error_handling import (
    DimensionMismatch,
    IncompleteBasis,
    InputError,
    InvalidContrast,
    MixedMacroStrain,
    ZeroMacroStrain,
)
from .fields import Grid, ScalarField, TensorField, check_same_grid
from .green import ReferenceMedium, green_coeffs
from .models import ErrorStats
from .tensor_core import (
    ProjectorDims,
    SymTensor2,
    check_dim,
    field_ddot,
    field_invariants,
    field_trace,
    mandel_size,
    projector_j,
    projector_k,
    sph_dev_split,
    strain_invariants,
)

logger = logging.getLogger(__name__)

# Relative size below which a macroscopic strain part counts as zero.
PURITY_TOL = 1e-12
BASIS_TOL = 1e-14


class Projector(str, Enum):
    J = "J"
    K = "K"

    def matrix(self, dim: int) -> NDArray[np.float64]:
        return projector_j(dim) if self is Projector.J else projector_k(dim)

    def rank(self, dim: int) -> int:
        dims = ProjectorDims.for_dim(dim)
        return dims.n_j if self is Projector.J else dims.n_k


class ModulusKind(str, Enum):
    BULK = "bulk"
    SHEAR = "shear"


class ReconMethod(str, Enum):
    GENERIC = "generic"
    GENERIC_SINGLE = "generic_single"
    ISOTROPIC = "isotropic"
    BOUNDED = "bounded"


class Anchoring(str, Enum):
    MEAN = "mean"
    NONE = "none"


@dataclass(frozen=True)
class LoadBasis:
    """Orthogonal macroscopic loads whose normalized outer products sum to a projector."""

    projector: Projector
    dim: int
    strains: tuple[SymTensor2, ...]

    def __post_init__(self) -> None:
        check_dim(self.dim)
        p = self.projector.matrix(self.dim)
        for i, eps in enumerate(self.strains):
            if eps.dim != self.dim:
                raise DimensionMismatch(f"Load {i} is {eps.dim}D in a {self.dim}D basis")
            if eps.norm() == 0.0:
                raise ZeroMacroStrain(f"Load {i} has zero norm")
            if not np.allclose(p @ eps.comps, eps.comps, rtol=0.0, atol=PURITY_TOL * eps.norm()):
                raise InputError(f"Load {i} does not lie in the range of {self.projector.value}")

    def __len__(self) -> int:
        return len(self.strains)

    def assembly(self) -> NDArray[np.float64]:
        """Σᵢ ε̄⁽ⁱ⁾⊗ε̄⁽ⁱ⁾/‖ε̄⁽ⁱ⁾‖² as a Mandel matrix."""
        total = np.zeros((mandel_size(self.dim),) * 2)
        for eps in self.strains:
            total += np.outer(eps.comps, eps.comps) / eps.norm() ** 2
        return total

    def assembly_error(self) -> float:
        """Largest entrywise deviation from the projector, including cross-load overlaps."""
        error = float(np.abs(self.assembly() - self.projector.matrix(self.dim)).max())
        for i, a in enumerate(self.strains):
            for b in self.strains[i + 1:]:
                error = max(error, abs(a.ddot(b)))
        return error

    def check(self, tol: float = BASIS_TOL) -> None:
        error = self.assembly_error()
        if error > tol:
            raise IncompleteBasis(
                f"{self.projector.value}-basis assembly off by {error:.2e} (tolerance {tol:.0e})"
            )


def make_load_basis(projector: Projector | str, dim: int) -> LoadBasis:
    """Canonical spherical (J) or deviatoric (K) load set."""
    projector = Projector(projector)
    check_dim(dim)
    if projector is Projector.J:
        strains = [SymTensor2.identity(dim)]
    elif dim == 2:
        strains = [
            SymTensor2.from_matrix([[0.0, 1.0], [1.0, 0.0]]),
            SymTensor2.from_matrix([[1.0, 0.0], [0.0, -1.0]]),
        ]
    else:
        shears = []
        for i, j in ((1, 2), (0, 2), (0, 1)):
            mat = np.zeros((3, 3))
            mat[i, j] = mat[j, i] = 1.0
            shears.append(SymTensor2.from_matrix(mat))
        strains = [
            *shears,
            SymTensor2.from_matrix(np.diag([1.0, -1.0, 0.0])),
            SymTensor2.from_matrix(np.diag([1.0, 1.0, -2.0]) / np.sqrt(3.0)),
        ]
    basis = LoadBasis(projector, dim, tuple(strains))
    basis.check()
    return basis


@dataclass(eq=False)
class ExperimentSet:
    """Strain maps measured (or simulated) under the loads of a basis, in basis order.

    A set may hold fewer fields than loads; only the single-load diagnostics accept that.
    """

    basis: LoadBasis
    strain_fields: list[TensorField]
    ref: ReferenceMedium

    def __post_init__(self) -> None:
        if not self.strain_fields:
            raise IncompleteBasis("An experiment set needs at least one strain field")
        if len(self.strain_fields) > len(self.basis):
            raise DimensionMismatch(
                f"{len(self.strain_fields)} strain fields for a basis of {len(self.basis)} loads"
            )
        check_same_grid(*self.strain_fields)
        if self.grid.dim != self.basis.dim or self.ref.dim != self.basis.dim:
            raise DimensionMismatch(
                f"Fields are {self.grid.dim}D, basis {self.basis.dim}D, reference {self.ref.dim}D"
            )

    @property
    def grid(self) -> Grid:
        return self.strain_fields[0].grid

    @property
    def complete(self) -> bool:
        return len(self.strain_fields) == len(self.basis)

    def pairs(self) -> list[tuple[TensorField, SymTensor2]]:
        return list(zip(self.strain_fields, self.basis.strains))


@dataclass(eq=False)
class ReconResult:
    """A reconstructed modulus map and how it was obtained."""

    modulus_map: ScalarField
    kind: ModulusKind
    method: ReconMethod
    anchoring: Anchoring | None = None
    notes: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.modulus_map.metadata.update(
            {
                "quantity": "kappa" if self.kind is ModulusKind.BULK else "mu",
                "method": self.method.value,
                "anchoring": self.anchoring.value if self.anchoring else "implicit",
            }
        )

    @property
    def grid(self) -> Grid:
        return self.modulus_map.grid


def _projection_bracket(strain: TensorField, eps_bar: SymTensor2) -> NDArray[np.float64]:
    """1 − ε(x):ε̄/‖ε̄‖² for a load lying in one projector's range."""
    bar_norm2 = eps_bar.norm() ** 2
    if bar_norm2 == 0.0:
        raise ZeroMacroStrain("Macroscopic strain has zero norm")
    result: NDArray[np.float64] = 1.0 - field_ddot(strain.values, eps_bar.comps) / bar_norm2
    return result


def _require_basis(exp: ExperimentSet, projector: Projector) -> None:
    if exp.basis.projector is not projector:
        raise InputError(
            f"Expected a {projector.value}-basis experiment, got {exp.basis.projector.value}"
        )


def _result(
    grid: Grid,
    values: NDArray[np.float64],
    kind: ModulusKind,
    method: ReconMethod,
    ref: ReferenceMedium,
    anchoring: Anchoring | None = None,
    notes: list[str] | None = None,
) -> ReconResult:
    modulus = ScalarField(grid, values, metadata={"kappa0": repr(ref.kappa0), "mu0": repr(ref.mu0)})
    return ReconResult(modulus, kind, method, anchoring, notes or [])


def bulk_from_traces(
    traces: NDArray[np.float64], eps_bar_trace: float, ref: ReferenceMedium
) -> NDArray[np.float64]:
    """κ(x) = κ0 + (1/λ_J)/d·[1 − tr ε(x)/tr ε̄]."""
    if eps_bar_trace == 0.0:
        raise ZeroMacroStrain("Macroscopic strain has zero trace")
    coeffs = green_coeffs(ref)
    result: NDArray[np.float64] = ref.kappa0 + coeffs.inv_lambda_j / ref.dim * (
        1.0 - np.asarray(traces) / eps_bar_trace
    )
    return result


def reconstruct_bulk(exp: ExperimentSet, form: str = "hydrostatic") -> ReconResult:
    """Bulk modulus map from the spherical-load strain field.

    `hydrostatic` uses ε0(x)/ε̄0; `trace` uses tr ε(x)/tr ε̄. Both are the same identity.
    """
    _require_basis(exp, Projector.J)
    ref, d = exp.ref, exp.ref.dim
    strain, eps_bar = exp.pairs()[0]
    if form == "hydrostatic":
        eps0_bar, _ = strain_invariants(eps_bar)
        if eps0_bar == 0.0:
            raise ZeroMacroStrain("Spherical macroscopic strain has zero trace")
        eps0, _ = field_invariants(strain.values, d)
        values = ref.kappa0 + green_coeffs(ref).inv_lambda_j / d * (1.0 - eps0 / eps0_bar)
    elif form == "trace":
        values = bulk_from_traces(field_trace(strain.values, d), eps_bar.trace, ref)
    else:
        raise InputError(f"Unknown bulk reconstruction form '{form}'")
    logger.debug(f"Bulk map ({form}) on {exp.grid.shape}: mean {values.mean():.6g}")
    return _result(exp.grid, values, ModulusKind.BULK, ReconMethod.GENERIC, ref)


def reconstruct_shear(
    exp: ExperimentSet, form: str = "projection", single_load: int | None = None
) -> ReconResult:
    """Shear modulus map from the deviatoric-load strain fields.

    `projection` sums 1 − dev ε⁽ⁱ⁾:dev ε̄⁽ⁱ⁾/‖ε̄⁽ⁱ⁾‖²; `equivalent` sums 1 − ε_eq⁽ⁱ⁾/ε̄_eq⁽ⁱ⁾,
    which agrees at first order. With `single_load=i` only the i-th field is used and the
    bracket is weighted by n_K, the one-load form.
    """
    _require_basis(exp, Projector.K)
    ref, d = exp.ref, exp.ref.dim
    n_k = ProjectorDims.for_dim(d).n_k
    prefactor = green_coeffs(ref).inv_lambda_k / 2.0

    if single_load is not None:
        if not 0 <= single_load < len(exp.strain_fields):
            raise IncompleteBasis(f"No strain field for deviatoric load {single_load}")
        pairs = [exp.pairs()[single_load]]
        weight, method = float(n_k), ReconMethod.GENERIC_SINGLE
    else:
        if not exp.complete:
            raise IncompleteBasis(
                f"Shear reconstruction needs {n_k} deviatoric fields, got {len(exp.strain_fields)}"
            )
        pairs = exp.pairs()
        weight, method = 1.0, ReconMethod.GENERIC

    bracket = np.zeros(exp.grid.shape)
    for strain, eps_bar in pairs:
        if form == "projection":
            bracket += _projection_bracket(strain, eps_bar)
        elif form == "equivalent":
            _, eq_bar = strain_invariants(eps_bar)
            _, eq = field_invariants(strain.values, d)
            bracket += 1.0 - eq / eq_bar
        else:
            raise InputError(f"Unknown shear reconstruction form '{form}'")

    values = ref.mu0 + weight * prefactor * bracket
    notes = [f"single deviatoric load {single_load}"] if single_load is not None else []
    return _result(exp.grid, values, ModulusKind.SHEAR, method, ref, notes=notes)


def _macro_parts(eps_bar: SymTensor2) -> tuple[float, float, float]:
    """(‖sph ε̄‖, ‖dev ε̄‖, ‖ε̄‖)."""
    sph, dev = sph_dev_split(eps_bar)
    total = eps_bar.norm()
    if total == 0.0:
        raise ZeroMacroStrain("Macroscopic strain has zero norm")
    return sph.norm(), dev.norm(), total


def reconstruct_bulk_iso(
    strain: TensorField, eps_bar: SymTensor2, ref: ReferenceMedium
) -> ReconResult:
    """κ(x) = κ0 + n_J(1/λ_J)/(2d)·[1 − ε0(x)²/ε̄0²] for a purely spherical load."""
    _, dev_norm, total = _macro_parts(eps_bar)
    if dev_norm > PURITY_TOL * total:
        raise MixedMacroStrain("The isotropic bulk identity needs a purely spherical load")
    d = ref.dim
    n_j = ProjectorDims.for_dim(d).n_j
    eps0_bar, _ = strain_invariants(eps_bar)
    eps0, _ = field_invariants(strain.values, d)
    values = ref.kappa0 + n_j * green_coeffs(ref).inv_lambda_j / (2 * d) * (1.0 - eps0**2 / eps0_bar**2)
    return _result(strain.grid, values, ModulusKind.BULK, ReconMethod.ISOTROPIC, ref)


def reconstruct_shear_iso(
    strain: TensorField, eps_bar: SymTensor2, ref: ReferenceMedium
) -> ReconResult:
    """μ(x) = μ0 + n_K(1/λ_K)/4·[1 − ε_eq(x)²/ε̄_eq²] for a purely deviatoric load."""
    sph_norm, _, total = _macro_parts(eps_bar)
    if sph_norm > PURITY_TOL * total:
        raise MixedMacroStrain("The isotropic shear identity needs a purely deviatoric load")
    d = ref.dim
    n_k = ProjectorDims.for_dim(d).n_k
    _, eq_bar = strain_invariants(eps_bar)
    _, eq = field_invariants(strain.values, d)
    values = ref.mu0 + n_k * green_coeffs(ref).inv_lambda_k / 4.0 * (1.0 - eq**2 / eq_bar**2)
    return _result(strain.grid, values, ModulusKind.SHEAR, ReconMethod.ISOTROPIC, ref)


def reconstruct_bounded(exp: ExperimentSet, anchoring: Anchoring | str = Anchoring.MEAN) -> ReconResult:
    """Particular solution of the bounded-domain modulus equations.

    Bulk: δκ(x) = −((dκ0 + 2(d−1)μ0)/d)·δε(x):ε̄/‖ε̄‖². Shear: δμ(x) = −(1/λ_K)/2·Σᵢ δε⁽ⁱ⁾(x):ε̄⁽ⁱ⁾/‖ε̄⁽ⁱ⁾‖².
    Here δε = ε − ε̄. The equations behind them involve ω0 = (dκ0 + (d−2)μ0)/d and
    τ0 = ω0/(μ0(ω0 + μ0)); their solutions are unique only up to an added biharmonic field,
    which mean anchoring fixes by matching the spatial mean to the reference modulus.
    """
    anchoring = Anchoring(anchoring)
    ref = exp.ref
    coeffs = green_coeffs(ref)
    if exp.basis.projector is Projector.J:
        kind, nominal, prefactor = ModulusKind.BULK, ref.kappa0, coeffs.inv_lambda_j / ref.dim
    else:
        if not exp.complete:
            raise IncompleteBasis(
                f"Shear reconstruction needs {len(exp.basis)} deviatoric fields, "
                f"got {len(exp.strain_fields)}"
            )
        kind, nominal, prefactor = ModulusKind.SHEAR, ref.mu0, coeffs.inv_lambda_k / 2.0

    perturbation = np.zeros(exp.grid.shape)
    for strain, eps_bar in exp.pairs():
        perturbation += _projection_bracket(strain, eps_bar)
    perturbation *= prefactor

    logger.info(f"Bounded {kind.value} reconstruction, anchoring={anchoring.value}")
    result = _result(
        exp.grid, nominal + perturbation, kind, ReconMethod.BOUNDED, ref,
        anchoring=Anchoring.NONE, notes=["defined up to an additive biharmonic field"],
    )
    return anchor_mean(result, nominal) if anchoring is Anchoring.MEAN else result


def anchor_mean(result: ReconResult, nominal: float) -> ReconResult:
    """Shift a map by a constant so that its spatial mean equals the reference modulus."""
    values = result.modulus_map.values
    shift = float(values.mean()) - nominal
    modulus = ScalarField(result.grid, values - shift, dict(result.modulus_map.metadata))
    notes = [*result.notes, f"mean-anchored (shift {shift:.6e})"]
    return ReconResult(modulus, result.kind, result.method, Anchoring.MEAN, notes)


def _axis_positions(grid: Grid) -> list[NDArray[np.float64]]:
    """Per-axis node positions scaled to [0, 1]."""
    if grid.periodic:
        return [np.arange(n) / max(n - 1, 1) for n in grid.shape]
    return grid.axes()


def window_masks(
    grid: Grid, interior_fraction: float, band: float
) -> tuple[NDArray[np.bool_], NDArray[np.bool_]]:
    """Central window (fraction of each axis) and boundary band masks, both non-empty."""
    positions = _axis_positions(grid)
    interior = np.ones(grid.shape, dtype=bool)
    boundary = np.zeros(grid.shape, dtype=bool)
    for axis, (p, n) in enumerate(zip(positions, grid.shape)):
        half_step = 0.5 / max(n - 1, 1)
        inner = np.abs(p - 0.5) <= max(interior_fraction / 2.0, half_step) + 1e-12
        edge = np.minimum(p, 1.0 - p) <= max(band, 2 * half_step) - 1e-12
        shape = [1] * grid.dim
        shape[axis] = n
        interior &= inner.reshape(shape)
        boundary |= edge.reshape(shape)
    return interior, boundary


def error_map(
    ref_map: ScalarField,
    recon: ReconResult | ScalarField,
    c: float,
    interior_fraction: float | None = None,
    band: float | None = None,
) -> tuple[ScalarField, ErrorStats]:
    """|ref(x) − recon(x)|/c with sup/median statistics overall, in the central window and near ∂V."""
    if c <= 0:
        raise InvalidContrast(f"Error maps are normalized by c > 0, got {c}")
    recon_map = recon.modulus_map if isinstance(recon, ReconResult) else recon
    grid = check_same_grid(ref_map, recon_map)
    values = np.abs(ref_map.values - recon_map.values) / c
    interior, boundary = window_masks(
        grid,
        settings.interior_fraction if interior_fraction is None else interior_fraction,
        settings.boundary_band if band is None else band,
    )
    stats = ErrorStats(
        sup=float(values.max()),
        median=float(np.median(values)),
        interior_sup=float(values[interior].max()),
        interior_median=float(np.median(values[interior])),
        boundary_sup=float(values[boundary].max()),
        boundary_median=float(np.median(values[boundary])),
    )
    return ScalarField(grid, values, metadata={"quantity": "normalized_error", "c": repr(float(c))}), stats


def estimate_reference(
    bulk: ExperimentSet, shear: ExperimentSet, guess: ReferenceMedium | None = None
) -> ReferenceMedium:
    """Reference medium from the spatial means of a first-pass reconstruction.

    Strain maps fix only relative perturbations, so the estimate inherits the scale of the
    guess (default: unit moduli) and corrects it by the mean first-pass perturbation.
    """
    d = bulk.basis.dim
    guess = guess or ReferenceMedium(d, settings.eta0, settings.eta0)
    first_bulk = ExperimentSet(bulk.basis, bulk.strain_fields, guess)
    first_shear = ExperimentSet(shear.basis, shear.strain_fields, guess)
    kappa0 = reconstruct_bulk(first_bulk).modulus_map.mean()
    mu0 = reconstruct_shear(first_shear).modulus_map.mean()
    logger.info(f"Estimated reference medium: kappa0={kappa0:.6g}, mu0={mu0:.6g}")
    return ReferenceMedium(d, kappa0, mu0)


@dataclass(eq=False)
class StrainDiagnostics:
    """Pointwise strain invariants relative to one macroscopic load."""

    eps_par: NDArray[np.float64]
    eps_perp: NDArray[np.float64]
    eps0: NDArray[np.float64]
    eps_eq: NDArray[np.float64]


def strain_diagnostics(strain: TensorField, eps_bar: SymTensor2) -> StrainDiagnostics:
    """ε_par, ε_perp (components along and across ε̄), ε0 and ε_eq at every grid point."""
    if eps_bar.dim != strain.dim:
        raise DimensionMismatch(f"{eps_bar.dim}D load for a {strain.dim}D field")
    bar_norm = eps_bar.norm()
    if bar_norm == 0.0:
        raise ZeroMacroStrain("Macroscopic strain has zero norm")
    direction = eps_bar.comps / bar_norm
    par = field_ddot(strain.values, direction)
    remainder = strain.values - par[..., None] * direction
    eps0, eps_eq = field_invariants(strain.values, strain.dim)
    return StrainDiagnostics(par, np.linalg.norm(remainder, axis=-1), eps0, eps_eq)

