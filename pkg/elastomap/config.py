"""Configuration management: process-wide settings and per-run configuration files."""

import logging
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .error_handling import ConfigurationError

logger = logging.getLogger(__name__)


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="ELASTOMAP_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Logging
    log_level: str = Field(default="INFO", description="Logging level")
    log_format: str = Field(
        default="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        description="Logging format string",
    )

    # Spectral solver
    spectral_tol: float = Field(default=1e-10, description="Relative L2 strain-increment tolerance")
    spectral_max_iter: int = Field(default=10000, description="Maximum fixed-point iterations")
    divergence_factor: float = Field(
        default=1e6, description="Residual growth over the initial residual that aborts a solve"
    )

    # FEM solver
    fem_tol: float = Field(default=1e-10, description="Relative residual tolerance of the CG solve")
    fem_max_iter: int | None = Field(default=None, description="CG iteration cap (None: 10 x free dofs)")

    # Microstructure
    eta0: float = Field(default=1.0, description="Nominal mean of generated moduli")
    corr_length_x: float = Field(default=0.2, description="Smooth-map correlation length along x")
    corr_length_y: float = Field(default=0.05, description="Smooth-map correlation length along y")
    n_cells: int = Field(default=30, description="Default number of Voronoi cells")

    # Reconstruction
    anchoring: Literal["mean", "none"] = Field(default="mean", description="Bounded-domain anchoring")
    interior_fraction: float = Field(default=0.5, description="Side fraction of the interior window")
    boundary_band: float = Field(default=0.05, description="Relative width of the boundary band")

    # Output
    output_dir: Path = Field(default=Path("runs"), description="Default artifact directory")

    # Development
    debug: bool = Field(default=False, description="Debug mode")

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate the logging level name."""
        if v.upper() not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"Unknown log level: {v}")
        return v.upper()

    @field_validator("spectral_tol", "fem_tol", "divergence_factor", "eta0")
    @classmethod
    def validate_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("must be positive")
        return v


# Global settings instance
settings = Settings()


GeneratorKind = Literal["smooth", "voronoi", "inclusion", "homogeneous"]
SolverKind = Literal["spectral", "fem"]
LoadSet = Literal["all", "bulk", "shear"]


class RunConfig(BaseModel):
    """Configuration of one pipeline run."""

    model_config = ConfigDict(extra="forbid")

    # Required
    dimension: int
    grid: tuple[int, ...]
    contrast: float
    seed: int
    generator: GeneratorKind
    solver: SolverKind
    output_dir: Path

    # Solver
    tol: float = Field(default_factory=lambda: settings.spectral_tol)
    max_iter: int = Field(default_factory=lambda: settings.spectral_max_iter)
    fem_tol: float = Field(default_factory=lambda: settings.fem_tol)
    loads: LoadSet = "all"

    # Microstructure
    n_cells: int = Field(default_factory=lambda: settings.n_cells)
    periodic_voronoi: bool = True
    corr_length_x: float = Field(default_factory=lambda: settings.corr_length_x)
    corr_length_y: float = Field(default_factory=lambda: settings.corr_length_y)
    inclusion_radius: float = 0.05
    inclusion_kappa: float | None = None
    inclusion_mu: float | None = None

    # Reconstruction
    kappa0: float | None = None
    mu0: float | None = None
    anchoring: Literal["mean", "none"] = Field(default_factory=lambda: settings.anchoring)
    diagnostics: bool = False

    # Report
    contrast_sweep: tuple[float, ...] = ()

    @field_validator("grid", mode="before")
    @classmethod
    def parse_grid(cls, v: Any) -> Any:
        """Accept `N` or `N1xN2[xN3]`."""
        if isinstance(v, str):
            return tuple(int(part) for part in v.lower().replace(" ", "").split("x"))
        if isinstance(v, int):
            return (v,)
        return v

    @field_validator("contrast_sweep", mode="before")
    @classmethod
    def parse_sweep(cls, v: Any) -> Any:
        if isinstance(v, str):
            return tuple(float(part) for part in v.split(",") if part.strip())
        return v

    @field_validator("contrast")
    @classmethod
    def validate_contrast(cls, v: float) -> float:
        if not 0.0 <= v <= 1.0:
            raise ValueError("contrast must lie in [0, 1]")
        return v

    @field_validator("tol", "fem_tol")
    @classmethod
    def validate_tolerance(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("tolerance must be positive")
        return v

    @model_validator(mode="after")
    def validate_layout(self) -> "RunConfig":
        """Check grid rank against the dimension and the solver's support."""
        if self.dimension not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        if len(self.grid) == 1:
            self.grid = self.grid * self.dimension
        if len(self.grid) != self.dimension:
            raise ValueError(f"grid {self.grid} does not match dimension {self.dimension}")
        if any(n < 2 for n in self.grid):
            raise ValueError("every grid axis needs at least 2 points")
        if self.solver == "fem" and self.dimension != 2:
            raise ValueError("the fem solver is 2D only")
        if (self.kappa0 is None) != (self.mu0 is None):
            raise ValueError("kappa0 and mu0 must be given together")
        return self

    def to_lines(self) -> list[str]:
        """Render as `key = value` lines accepted by load_run_config."""
        lines = []
        for key, value in self.model_dump(mode="json").items():
            if value is None:
                continue
            if isinstance(value, bool):
                value = str(value).lower()
            elif key == "grid":
                value = "x".join(str(n) for n in value)
            elif key == "contrast_sweep":
                if not value:
                    continue
                value = ",".join(repr(float(c)) for c in value)
            lines.append(f"{key} = {value}")
        return lines


def parse_config_lines(text: str) -> dict[str, tuple[str, int]]:
    """Parse `key = value` lines; returns key -> (raw value, line number)."""
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigurationError(f"line {lineno}: missing key")
        if key not in RunConfig.model_fields:
            raise ConfigurationError(f"line {lineno}: unknown key '{key}'")
        if key in entries:
            raise ConfigurationError(
                f"line {lineno}: duplicate key '{key}' (first set on line {entries[key][1]})"
            )
        entries[key] = (value, lineno)
    return entries


def load_run_config(path: Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Load a RunConfig from a file, applying command-line overrides."""
    values: dict[str, Any] = {}
    if path is not None:
        logger.info(f"Loading run configuration from {path}")
        entries = parse_config_lines(Path(path).read_text(encoding="utf-8"))
        values.update({key: value for key, (value, _) in entries.items()})

    for key, value in (overrides or {}).items():
        if key not in RunConfig.model_fields:
            raise ConfigurationError(f"unknown option '{key}'")
        if value is not None:
            values[key] = value

    try:
        return RunConfig(**values)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigurationError(f"invalid run configuration: {problems}") from e
