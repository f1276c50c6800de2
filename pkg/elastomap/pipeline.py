"""Stage runner: generate → solve → reconstruct → validate → report.

Every stage reads its inputs from and writes its artifacts to the run's output directory, so any
stage can be re-run on its own. Artifact paths in the manifest are relative to that directory.
"""

import json
import logging
from collections.abc import Callable
from pathlib import Path

import numpy as np

from .config import RunConfig, settings
from .error_handling import (
    ElastomapError,
    InvalidContrast,
    NumericalError,
    StageError,
    UsageError,
    handle_stage_errors,
)
from .fem import FEMSolver, element_moduli
from .fields import BoundedGrid, PeriodicGrid, ScalarField, TensorField, make_grid
from .green import ReferenceMedium
from .microstructure import (
    ModulusMaps,
    gen_homogeneous,
    gen_inclusion,
    gen_smooth_aniso,
    gen_voronoi,
)
from .models import (
    ArtifactManifest,
    MapSummary,
    ReconstructionSummary,
    SolveReport,
    StageRecord,
    SweepPoint,
    ValidationSummary,
)
from .reconstruction import (
    Anchoring,
    ExperimentSet,
    Projector,
    ReconResult,
    anchor_mean,
    error_map,
    estimate_reference,
    make_load_basis,
    reconstruct_bounded,
    reconstruct_bulk,
    reconstruct_shear,
)
from .spectral import SpectralSolver
from .storage import read_field, shared_scale, write_field, write_pgm
from .tensor_core import SymTensor2
from .validation import OracleValidator

logger = logging.getLogger(__name__)

STAGES = ("generate", "solve", "reconstruct", "validate", "report")
RUN_STAGES = ("generate", "solve", "reconstruct", "report")

LoadSolver = Callable[[SymTensor2], tuple[TensorField, SolveReport]]


class Pipeline:
    """Runs the stages of one configuration and records their artifacts."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.output_dir = Path(config.output_dir)
        self.manifest = ArtifactManifest(output_dir=str(self.output_dir))
        self._artifacts: list[str] = []

    @property
    def dim(self) -> int:
        return self.config.dimension

    @property
    def periodic(self) -> bool:
        return self.config.solver == "spectral"

    def execute(self, stages: tuple[str, ...] | list[str]) -> ArtifactManifest:
        """Run stages in order, stopping at the first failure; writes manifest.json."""
        unknown = [s for s in stages if s not in STAGES]
        if unknown:
            raise UsageError(f"Unknown stage(s): {', '.join(unknown)}")
        self.output_dir.mkdir(parents=True, exist_ok=True)

        for stage in stages:
            self._artifacts = []
            try:
                getattr(self, stage)()
            except StageError as e:
                self.manifest.stages.append(
                    StageRecord(stage=stage, artifacts=self._artifacts, ok=False, error=str(e))
                )
                self.manifest.exit_code = int(e.exit_code)
                logger.error(f"Pipeline stopped: {e}")
                break
            self.manifest.stages.append(StageRecord(stage=stage, artifacts=self._artifacts))
            logger.info(f"Stage {stage} done ({len(self._artifacts)} artifacts)")

        self._write_text("manifest.json", self.manifest.model_dump_json(indent=2), record=False)
        return self.manifest

    # Artifact helpers

    def _path(self, name: str) -> Path:
        return self.output_dir / name

    def _record(self, name: str) -> None:
        self._artifacts.append(name)

    def _write_field(self, name: str, field: ScalarField | TensorField) -> None:
        write_field(field, self._path(name))
        self._record(name)

    def _write_text(self, name: str, text: str, record: bool = True) -> None:
        self._path(name).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
        if record:
            self._record(name)

    def _write_map(self, name: str, field: ScalarField, scale_with: ScalarField | None = None) -> None:
        if field.grid.dim != 2:
            return
        scale = shared_scale(field, scale_with) if scale_with is not None else None
        write_pgm(field, self._path(name), scale)
        self._record(name)
        self._record(str(Path(name).with_suffix(".scale")))

    # Stages

    @handle_stage_errors("generate")
    def generate(self) -> ModulusMaps:
        """Reference modulus maps kappa_ref / mu_ref."""
        maps = generate_maps(self.config)
        self._write_field("kappa_ref.smf", maps.kappa)
        self._write_field("mu_ref.smf", maps.mu)
        self._write_map("kappa_ref.pgm", maps.kappa)
        self._write_map("mu_ref.pgm", maps.mu)
        self._write_text("run_config.txt", "\n".join(self.config.to_lines()))
        return maps

    def _load_maps(self) -> tuple[ScalarField, ScalarField]:
        kappa, mu = read_field(self._path("kappa_ref.smf")), read_field(self._path("mu_ref.smf"))
        if not isinstance(kappa, ScalarField) or not isinstance(mu, ScalarField):
            raise UsageError("Reference modulus files must hold scalar fields")
        return kappa, mu

    def load_plan(self) -> list[tuple[int, Projector, int, SymTensor2]]:
        """(file index, projector, position in basis, load) for every selected load."""
        selected = {"all": (Projector.J, Projector.K), "bulk": (Projector.J,), "shear": (Projector.K,)}
        plan = []
        index = 1
        for projector in Projector:
            basis = make_load_basis(projector, self.dim)
            for position, load in enumerate(basis.strains):
                if projector in selected[self.config.loads]:
                    plan.append((index, projector, position, load))
                index += 1
        return plan

    @handle_stage_errors("solve")
    def solve(self) -> list[SolveReport]:
        """One strain field strain_<i>.smf per macroscopic load, plus solve_report.json."""
        kappa, mu = self._load_maps()
        solve_one = self._spectral_solver(kappa, mu) if self.periodic else self._fem_solver(kappa, mu)
        reports = []
        for index, projector, _, load in self.load_plan():
            logger.info(f"Solving load {index} ({projector.value}): {load}")
            strain, report = solve_one(load)
            strain.metadata.update(
                {"load_index": str(index), "load": ",".join(repr(float(x)) for x in load.comps)}
            )
            self._write_field(f"strain_{index}.smf", strain)
            reports.append(report.model_copy(update={"load_index": index}))
        self._write_text(
            "solve_report.json", json.dumps([r.model_dump() for r in reports], indent=2)
        )
        return reports

    def _spectral_solver(self, kappa: ScalarField, mu: ScalarField) -> LoadSolver:
        if not isinstance(kappa.grid, PeriodicGrid):
            raise UsageError("The spectral solver needs periodic reference maps")
        ref = ReferenceMedium.from_fields(kappa.values, mu.values, self.dim)
        solver = SpectralSolver(kappa.grid, ref, self.config.tol, self.config.max_iter)
        return lambda load: solver.solve(kappa, mu, load)

    def _fem_solver(self, kappa: ScalarField, mu: ScalarField) -> LoadSolver:
        if not isinstance(kappa.grid, BoundedGrid):
            raise UsageError("The fem solver needs bounded-grid reference maps")
        solver = FEMSolver(
            kappa.grid, element_moduli(kappa.values), element_moduli(mu.values), self.config.fem_tol
        )

        def solve_one(load: SymTensor2) -> tuple[TensorField, SolveReport]:
            _, strain, report = solver.solve(load)
            return strain, report

        return solve_one

    def _load_experiments(self) -> dict[Projector, ExperimentSet]:
        """Strain files grouped per basis, with the reference set to a provisional unit medium."""
        provisional = ReferenceMedium(self.dim, settings.eta0, settings.eta0)
        fields: dict[Projector, list[TensorField]] = {Projector.J: [], Projector.K: []}
        for index, projector, _, _ in self.load_plan():
            strain = read_field(self._path(f"strain_{index}.smf"))
            if not isinstance(strain, TensorField):
                raise UsageError(f"strain_{index}.smf does not hold a tensor field")
            fields[projector].append(strain)
        return {
            projector: ExperimentSet(make_load_basis(projector, self.dim), found, provisional)
            for projector, found in fields.items()
            if found
        }

    def resolve_reference(self, experiments: dict[Projector, ExperimentSet]) -> tuple[ReferenceMedium, bool]:
        """Declared (κ0, μ0), or an estimate flagged as such."""
        if self.config.kappa0 is not None and self.config.mu0 is not None:
            return ReferenceMedium(self.dim, self.config.kappa0, self.config.mu0), False
        if Projector.J in experiments and Projector.K in experiments and experiments[Projector.K].complete:
            ref = estimate_reference(experiments[Projector.J], experiments[Projector.K])
        else:
            ref = ReferenceMedium(self.dim, settings.eta0, settings.eta0)
        logger.warning(f"No kappa0/mu0 configured, using estimated reference {ref.kappa0:.6g}/{ref.mu0:.6g}")
        return ref, True

    @handle_stage_errors("reconstruct")
    def reconstruct(self) -> ReconstructionSummary:
        """κ⁽¹⁾, μ⁽²,³⁾ (and μ⁽²⁾ with diagnostics), error maps, summary.json."""
        kappa_ref, mu_ref = self._load_maps()
        experiments = self._load_experiments()
        ref, estimated = self.resolve_reference(experiments)
        experiments = {
            p: ExperimentSet(exp.basis, exp.strain_fields, ref) for p, exp in experiments.items()
        }
        results = self._reconstruct_maps(experiments, ref)

        c = self.config.contrast
        normalization = c if c > 0 else 1.0
        summary = ReconstructionSummary(
            contrast=c,
            normalization=normalization,
            solver=self.config.solver,
            grid=list(kappa_ref.grid.shape),
            kappa0=ref.kappa0,
            mu0=ref.mu0,
            reference_estimated=estimated,
            solve_iterations=self._solve_iterations(),
        )
        for name, result in results.items():
            reference = kappa_ref if result.kind.value == "bulk" else mu_ref
            result.modulus_map.metadata["reference_estimated"] = str(estimated).lower()
            self._write_field(f"{name}.smf", result.modulus_map)
            self._write_map(f"{name}.pgm", result.modulus_map, scale_with=reference)
            errors, stats = error_map(reference, result, normalization)
            self._write_field(f"error_{name}.smf", errors)
            self._write_map(f"error_{name}.pgm", errors)
            summary.maps.append(
                MapSummary(
                    name=name,
                    kind=result.kind.value,
                    method=result.method.value,
                    stats=stats,
                    reference_mean=reference.mean(),
                    reconstructed_mean=result.modulus_map.mean(),
                )
            )
        self._write_text("summary.json", summary.model_dump_json(indent=2))
        return summary

    def _reconstruct_maps(
        self, experiments: dict[Projector, ExperimentSet], ref: ReferenceMedium
    ) -> dict[str, ReconResult]:
        results: dict[str, ReconResult] = {}
        bulk, shear = experiments.get(Projector.J), experiments.get(Projector.K)
        anchoring = Anchoring(self.config.anchoring)
        if bulk is not None:
            results["kappa_1"] = reconstruct_bulk(bulk) if self.periodic else reconstruct_bounded(bulk, anchoring)
        if shear is not None and shear.complete:
            results["mu_23"] = reconstruct_shear(shear) if self.periodic else reconstruct_bounded(shear, anchoring)
        if shear is not None and self.config.diagnostics:
            single = reconstruct_shear(shear, single_load=0)
            if not self.periodic and anchoring is Anchoring.MEAN:
                single = anchor_mean(single, ref.mu0)
            results["mu_2"] = single
        if not results:
            raise UsageError("No complete load set to reconstruct from")
        return results

    def _solve_iterations(self) -> list[int]:
        path = self._path("solve_report.json")
        if not path.exists():
            return []
        return [SolveReport.model_validate(r).iterations for r in json.loads(path.read_text(encoding="utf-8"))]

    @handle_stage_errors("validate")
    def validate(self) -> ValidationSummary:
        """Oracle suite; any failed check fails the stage."""
        summary = OracleValidator(seed=self.config.seed).run_all()
        self._write_text("validation.json", summary.model_dump_json(indent=2))
        if not summary.passed:
            names = ", ".join(check.name for check in summary.failed)
            raise NumericalError(f"{len(summary.failed)} oracle check(s) failed: {names}")
        return summary

    @handle_stage_errors("report")
    def report(self) -> str:
        """Human-readable report.txt from summary.json, plus the optional contrast sweep."""
        summary = ReconstructionSummary.model_validate_json(
            self._path("summary.json").read_text(encoding="utf-8")
        )
        lines = format_summary(summary)
        if self.config.contrast_sweep:
            points = self.contrast_sweep()
            if not sweep_is_monotone(points):
                logger.warning("Normalized errors do not grow monotonically with the contrast")
            self._write_text("sweep.json", json.dumps([p.model_dump() for p in points], indent=2))
            lines += ["", *format_sweep(points)]
        text = "\n".join(lines)
        self._write_text("report.txt", text)
        return text

    def contrast_sweep(self) -> list[SweepPoint]:
        """Re-run generate/solve/reconstruct at each sweep contrast under sweep/c_<value>/."""
        points = []
        for c in self.config.contrast_sweep:
            if not 0.0 < c <= 1.0:
                raise InvalidContrast(f"Sweep contrasts must lie in (0, 1], got {c}")
            sub_dir = self.output_dir / "sweep" / f"c_{c!r}"
            sub_config = self.config.model_copy(
                update={"contrast": c, "output_dir": sub_dir, "contrast_sweep": ()}
            )
            sub = Pipeline(sub_config)
            for stage in ("generate", "solve", "reconstruct"):
                getattr(sub, stage)()
            summary = ReconstructionSummary.model_validate_json(
                (sub_dir / "summary.json").read_text(encoding="utf-8")
            )
            stats = {m.name: m.stats for m in summary.maps}
            if "kappa_1" not in stats or "mu_23" not in stats:
                raise UsageError("The contrast sweep needs both bulk and shear loads")
            points.append(
                SweepPoint(
                    contrast=c,
                    kappa_sup=stats["kappa_1"].sup,
                    kappa_median=stats["kappa_1"].median,
                    mu_sup=stats["mu_23"].sup,
                    mu_median=stats["mu_23"].median,
                )
            )
            logger.info(f"Sweep point c={c}: kappa sup {points[-1].kappa_sup:.4e}")
        return points


def generate_maps(config: RunConfig) -> ModulusMaps:
    """Modulus maps for a run configuration; zero contrast yields homogeneous maps."""
    grid = make_grid(config.grid, periodic=config.solver == "spectral")
    eta0 = settings.eta0
    c = config.contrast
    if config.generator == "homogeneous" or c == 0.0:
        return gen_homogeneous(grid, eta0, eta0, config.seed)
    if config.generator == "smooth":
        return gen_smooth_aniso(grid, c, config.seed, (config.corr_length_x, config.corr_length_y))
    if config.generator == "voronoi":
        return gen_voronoi(grid, config.n_cells, c, config.seed, config.periodic_voronoi)
    inclusion = (
        config.inclusion_kappa if config.inclusion_kappa is not None else eta0 * (1.0 + c),
        config.inclusion_mu if config.inclusion_mu is not None else eta0 * (1.0 + c),
    )
    return gen_inclusion(
        grid, config.inclusion_radius, matrix=(eta0, eta0), inclusion=inclusion, seed=config.seed
    )


def format_summary(summary: ReconstructionSummary) -> list[str]:
    lines = [
        f"solver: {summary.solver}  grid: {'x'.join(str(n) for n in summary.grid)}  "
        f"contrast: {summary.contrast!r}",
        f"reference: kappa0={summary.kappa0!r} mu0={summary.mu0!r}"
        + ("  (estimated)" if summary.reference_estimated else ""),
        f"errors normalized by {summary.normalization!r}",
        f"solve iterations: {', '.join(str(n) for n in summary.solve_iterations) or '-'}",
        "",
        f"{'map':<10}{'method':<16}{'sup':>14}{'median':>14}{'int. sup':>14}"
        f"{'int. median':>14}{'bnd. sup':>14}{'bnd. median':>14}",
    ]
    for m in summary.maps:
        s = m.stats
        lines.append(
            f"{m.name:<10}{m.method:<16}{s.sup:>14.6e}{s.median:>14.6e}{s.interior_sup:>14.6e}"
            f"{s.interior_median:>14.6e}{s.boundary_sup:>14.6e}{s.boundary_median:>14.6e}"
        )
    return lines


def format_sweep(points: list[SweepPoint]) -> list[str]:
    lines = [f"{'contrast':<12}{'kappa sup':>14}{'kappa median':>14}{'mu sup':>14}{'mu median':>14}"]
    for p in points:
        lines.append(
            f"{p.contrast:<12.4g}{p.kappa_sup:>14.6e}{p.kappa_median:>14.6e}"
            f"{p.mu_sup:>14.6e}{p.mu_median:>14.6e}"
        )
    return lines


def run_pipeline(config: RunConfig, stages: tuple[str, ...] = RUN_STAGES) -> ArtifactManifest:
    """Execute stages for a configuration; the manifest carries the exit code."""
    try:
        return Pipeline(config).execute(stages)
    except ElastomapError as e:
        logger.error(f"Pipeline could not start: {e}")
        return ArtifactManifest(output_dir=str(config.output_dir), exit_code=int(e.exit_code))


def sweep_is_monotone(points: list[SweepPoint]) -> bool:
    """Whether normalized sup errors grow with the contrast."""
    ordered = sorted(points, key=lambda p: p.contrast)
    kappa = np.array([p.kappa_sup for p in ordered])
    mu = np.array([p.mu_sup for p in ordered])
    return bool(np.all(np.diff(kappa) > 0) and np.all(np.diff(mu) > 0))
