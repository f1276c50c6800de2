"""Data models for solver reports, statistics and pipeline artifacts."""

from typing import Any

from pydantic import BaseModel, Field


class SolveReport(BaseModel):
    """Outcome of one forward solve."""
    solver: str
    iterations: int
    residual_history: list[float] = Field(default_factory=list)
    converged: bool
    equilibrium_residual: float | None = None
    load_index: int | None = None


class ErrorStats(BaseModel):
    """Statistics of a normalized error map."""
    sup: float
    median: float
    interior_sup: float
    interior_median: float
    boundary_sup: float
    boundary_median: float


class ScaleRecord(BaseModel):
    """Gray-level range used to render a grayscale image."""
    lo: float
    hi: float


class StageRecord(BaseModel):
    """One executed pipeline stage."""
    stage: str
    artifacts: list[str] = Field(default_factory=list)
    ok: bool = True
    error: str | None = None


class ArtifactManifest(BaseModel):
    """Everything a pipeline invocation produced."""
    output_dir: str
    stages: list[StageRecord] = Field(default_factory=list)
    exit_code: int = 0

    @property
    def artifacts(self) -> list[str]:
        return [path for record in self.stages for path in record.artifacts]


class MapSummary(BaseModel):
    """Error statistics of one reconstructed map."""
    name: str
    kind: str
    method: str
    stats: ErrorStats
    reference_mean: float
    reconstructed_mean: float


class ReconstructionSummary(BaseModel):
    """Summary written by the reconstruct stage."""
    contrast: float
    normalization: float
    solver: str
    grid: list[int]
    kappa0: float
    mu0: float
    reference_estimated: bool = False
    maps: list[MapSummary] = Field(default_factory=list)
    solve_iterations: list[int] = Field(default_factory=list)


class SweepPoint(BaseModel):
    """Normalized errors at one contrast value."""
    contrast: float
    kappa_sup: float
    kappa_median: float
    mu_sup: float
    mu_median: float


class CheckResult(BaseModel):
    """Result of one oracle check."""
    name: str
    passed: bool
    detail: str = ""
    elapsed_ms: float | None = None
    values: dict[str, Any] | None = None


class ValidationSummary(BaseModel):
    """Outcome of the oracle suite."""
    checks: list[CheckResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failed(self) -> list[CheckResult]:
        return [check for check in self.checks if not check.passed]
