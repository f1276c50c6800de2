"""Timed oracle checks run by the `validate` command."""

import logging
import time
from collections.abc import Callable

import numpy as np

from .fields import PeriodicGrid, ScalarField
from .green import (
    ReferenceMedium,
    green_coeffs,
    green_hat_field,
    inv_lambda_j_closed,
    inv_lambda_k_closed,
)
from .microstructure import hs_phase_moduli, rng_streams
from .models import CheckResult, ValidationSummary
from .oracles import (
    eshelby_first_order_check,
    eshelby_interior,
    hs_derivatives,
    hs_derivatives_fd,
    hs_recover_moduli,
    hs_second_moments,
)
from .reconstruction import (
    ExperimentSet,
    Projector,
    make_load_basis,
    reconstruct_bulk,
    reconstruct_shear,
)
from .spectral import solve_ls
from .tensor_core import SymTensor2, projector_j, projector_k

logger = logging.getLogger(__name__)

QUADRATIC_RATIO = (50.0, 200.0)
CONTRASTS = (1e-2, 1e-3)


class OracleValidator:
    """Runs every closed-form check and collects a ValidationSummary."""

    def __init__(self, seed: int = 0, n_frequencies: int = 1000, n_references: int = 20):
        self.seed = seed
        self.n_frequencies = n_frequencies
        self.n_references = n_references

    def checks(self) -> list[tuple[str, Callable[[], CheckResult]]]:
        return [
            ("green_constancy", self.check_green_constancy),
            ("green_closed_forms", self.check_closed_forms),
            ("basis_assembly", self.check_basis_assembly),
            ("eshelby_chain", self.check_eshelby_chain),
            ("hs_derivatives", self.check_hs_derivatives),
            ("hs_recovery", self.check_hs_recovery),
            ("zero_contrast", self.check_zero_contrast),
        ]

    def run_all(self) -> ValidationSummary:
        logger.info("Running oracle validation suite")
        start_time = time.time()
        results = [self._run_check(name, check) for name, check in self.checks()]
        summary = ValidationSummary(checks=results)
        logger.info(
            f"Validation completed in {(time.time() - start_time) * 1000:.2f}ms: "
            f"{len(results) - len(summary.failed)}/{len(results)} checks passed"
        )
        return summary

    def _run_check(self, name: str, check: Callable[[], CheckResult]) -> CheckResult:
        start_time = time.time()
        try:
            result = check()
        except Exception as e:
            logger.error(f"Oracle check {name} raised: {e}")
            result = CheckResult(name=name, passed=False, detail=f"{type(e).__name__}: {e}")
        return result.model_copy(update={"elapsed_ms": (time.time() - start_time) * 1000})

    def _references(self, dim: int) -> list[ReferenceMedium]:
        rng = rng_streams(self.seed)[0]
        moduli = rng.uniform(0.5, 2.0, size=(self.n_references, 2))
        return [ReferenceMedium(dim, float(k), float(m)) for k, m in moduli]

    def check_green_constancy(self) -> CheckResult:
        """J and K projections of Γ̂0(ξ) do not depend on ξ ≠ 0."""
        worst = 0.0
        for dim in (2, 3):
            rng = rng_streams(self.seed)[2]
            freqs = rng.integers(-64, 65, size=(self.n_frequencies, dim)).astype(np.float64)
            freqs = freqs[np.any(freqs != 0, axis=1)]
            for ref in self._references(dim):
                gamma = green_hat_field(freqs, ref)
                coeffs = green_coeffs(ref)
                proj_j = np.einsum("pij,ij->p", gamma, projector_j(dim))
                proj_k = np.einsum("pij,ij->p", gamma, projector_k(dim))
                worst = max(
                    worst,
                    float(np.abs(proj_j - coeffs.lambda_j).max()),
                    float(np.abs(proj_k - coeffs.lambda_k).max()),
                )
        return CheckResult(
            name="green_constancy",
            passed=worst < 1e-12,
            detail=f"max projection deviation {worst:.2e}",
            values={"max_deviation": worst},
        )

    def check_closed_forms(self) -> CheckResult:
        worst = 0.0
        for dim in (2, 3):
            for ref in self._references(dim):
                coeffs = green_coeffs(ref)
                worst = max(
                    worst,
                    abs(coeffs.inv_lambda_j / inv_lambda_j_closed(ref) - 1.0),
                    abs(coeffs.inv_lambda_k / inv_lambda_k_closed(ref) - 1.0),
                )
        return CheckResult(
            name="green_closed_forms",
            passed=worst < 1e-12,
            detail=f"max relative deviation {worst:.2e}",
            values={"max_relative_deviation": worst},
        )

    def check_basis_assembly(self) -> CheckResult:
        errors = {
            f"{projector.value}{dim}": make_load_basis(projector, dim).assembly_error()
            for projector in Projector
            for dim in (2, 3)
        }
        worst = max(errors.values())
        return CheckResult(
            name="basis_assembly",
            passed=worst <= 1e-14,
            detail=f"max assembly error {worst:.2e}",
            values=errors,
        )

    def check_eshelby_chain(self) -> CheckResult:
        """First-order inclusion recovery has an error quadratic in the contrast."""
        ref = ReferenceMedium(3, 1.0, 1.0)
        bulk_load = SymTensor2.identity(3)
        shear_load = make_load_basis(Projector.K, 3).strains[0]
        errors: dict[str, list[float]] = {"bulk": [], "shear": []}
        for delta in CONTRASTS:
            interior = eshelby_interior(ref, 1.0 + delta, 1.0, bulk_load)
            kappa_rec, _ = eshelby_first_order_check(interior, bulk_load, ref)
            errors["bulk"].append(abs(float(kappa_rec or 0.0) - (1.0 + delta)))
            interior = eshelby_interior(ref, 1.0, 1.0 + delta, shear_load)
            _, mu_rec = eshelby_first_order_check(interior, shear_load, ref)
            errors["shear"].append(abs(float(mu_rec or 0.0) - (1.0 + delta)))
        return self._ratio_result("eshelby_chain", errors)

    def check_hs_derivatives(self) -> CheckResult:
        worst = 0.0
        for dim in (2, 3):
            phases = (0.3, 1.0, 2.5, 0.8, 1.6)
            analytic = hs_derivatives(*phases, dim).as_tuple()
            numeric = hs_derivatives_fd(*phases, dim).as_tuple()
            for a, n in zip(analytic, numeric):
                worst = max(worst, abs(a - n) / max(abs(a), 1e-2))
        return CheckResult(
            name="hs_derivatives",
            passed=worst < 1e-8,
            detail=f"max relative deviation from central differences {worst:.2e}",
            values={"max_relative_deviation": worst},
        )

    def check_hs_recovery(self) -> CheckResult:
        """Phase-1 moduli from second moments, error quadratic in the jump."""
        dim, f1 = 3, 0.5
        ref = ReferenceMedium(dim, 1.0, 1.0)
        bulk_load = SymTensor2.identity(dim)
        shear_load = make_load_basis(Projector.K, dim).strains[0]
        errors: dict[str, list[float]] = {"bulk": [], "shear": []}
        for delta in CONTRASTS:
            k1, k2 = hs_phase_moduli(1.0, delta, f1)
            moments = hs_second_moments(f1, k1, k2, 1.0, 1.0, bulk_load).moments
            kappa_rec, _ = hs_recover_moduli(moments or (0.0, 0.0), bulk_load, ref)
            errors["bulk"].append(abs(float(kappa_rec or 0.0) - k1))

            m1, m2 = hs_phase_moduli(1.0, delta, f1)
            moments = hs_second_moments(f1, 1.0, 1.0, m1, m2, shear_load).moments
            _, mu_rec = hs_recover_moduli(moments or (0.0, 0.0), shear_load, ref)
            errors["shear"].append(abs(float(mu_rec or 0.0) - m1))
        return self._ratio_result("hs_recovery", errors)

    def check_zero_contrast(self) -> CheckResult:
        """A homogeneous medium is reproduced exactly by solver and reconstruction."""
        grid = PeriodicGrid((8, 8))
        kappa, mu = ScalarField.constant(grid, 1.3), ScalarField.constant(grid, 0.7)
        ref = ReferenceMedium(2, 1.3, 0.7)
        worst = 0.0
        experiments = {}
        for projector in Projector:
            basis = make_load_basis(projector, 2)
            fields = []
            for load in basis.strains:
                strain, _ = solve_ls(kappa, mu, load, ref)
                worst = max(worst, float(np.abs(strain.values - load.comps).max()))
                fields.append(strain)
            experiments[projector] = ExperimentSet(basis, fields, ref)
        kappa_map = reconstruct_bulk(experiments[Projector.J]).modulus_map
        mu_map = reconstruct_shear(experiments[Projector.K]).modulus_map
        worst = max(
            worst,
            float(np.abs(kappa_map.values - ref.kappa0).max()),
            float(np.abs(mu_map.values - ref.mu0).max()),
        )
        return CheckResult(
            name="zero_contrast",
            passed=worst <= 1e-13,
            detail=f"max deviation {worst:.2e}",
            values={"max_deviation": worst},
        )

    @staticmethod
    def _ratio_result(name: str, errors: dict[str, list[float]]) -> CheckResult:
        ratios = {key: pair[0] / pair[1] if pair[1] > 0 else float("inf") for key, pair in errors.items()}
        lo, hi = QUADRATIC_RATIO
        passed = all(lo <= r <= hi for r in ratios.values())
        detail = ", ".join(f"{key} error ratio {r:.1f}" for key, r in ratios.items())
        return CheckResult(name=name, passed=passed, detail=detail, values={"ratios": ratios, "errors": errors})


def run_validation(seed: int = 0) -> ValidationSummary:
    return OracleValidator(seed=seed).run_all()
