"""Experiment configuration and runtime settings.

Config files are flat UTF-8 text, one `key = value` per line. Everything after
'#' is a comment, list values are comma-separated and `lambda` is the name of
the ellipticity ratio. A key may appear only once.
"""
import logging
import re
from typing import Dict, List, Literal, Optional, Tuple

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from .coefficients.base import EnsembleKind, EnsembleSpec
from .core.excess import BoundaryKind, BoundarySpec
from .errors import ConfigError
from .experiments.sources import GSpec

logger = logging.getLogger(__name__)

Command = Literal["correctors", "growth", "excess", "thmT", "corC", "lemmaL"]

LIST_FIELDS = {"values", "diag", "radii", "x0", "r_list", "R_list"}
KEY_PATTERN = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class ExperimentConfig(BaseModel):
    """All inputs of one run; field names double as config keys."""

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    command: Command
    dim: int = Field(ge=2, le=3)
    size: int = Field(ge=4)
    lam: float = Field(alias="lambda", gt=0.0, le=1.0)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    tol: float = Field(default=1e-10, gt=0.0, lt=1.0)
    out: Optional[str] = None
    threads: Optional[int] = Field(default=None, ge=1)
    preconditioner: Optional[Literal["jacobi", "multigrid"]] = None

    ensemble: EnsembleKind = "checkerboard"
    values: Optional[Tuple[float, float]] = None
    diag: Optional[Tuple[float, ...]] = None
    probability: float = Field(default=0.5, ge=0.0, le=1.0)
    period: int = Field(default=2, ge=2)
    correlation_range: int = Field(default=1, ge=0)
    medium_path: Optional[str] = None
    ensemble_size: int = Field(default=1, ge=1)

    radii: Optional[List[float]] = None
    alpha_nominal: Optional[float] = Field(default=None, gt=0.0, le=1.0)

    R: int = Field(default=16, ge=2)
    samples: int = Field(default=16, ge=1)
    boundary: BoundaryKind = "random"
    noise: float = Field(default=0.1, ge=0.0)

    x0: Optional[List[int]] = None
    box_factor: float = Field(default=8.0, gt=0.0)
    doubling_check: bool = False
    g_radius: Optional[float] = Field(default=None, gt=0.0)
    g_scale: float = Field(default=1.0, gt=0.0)
    r_list: Optional[List[float]] = None
    continuum: bool = False

    N: int = Field(default=8, ge=1)
    M: int = Field(default=8, ge=1)
    R_list: Optional[List[int]] = None

    def ensemble_spec(self) -> EnsembleSpec:
        values = self.values if self.values is not None else (self.lam, 1.0)
        return EnsembleSpec(
            kind=self.ensemble,
            lam=self.lam,
            diag=self.diag,
            values=values,
            probability=self.probability,
            period=self.period,
            correlation_range=self.correlation_range,
        )

    def boundary_spec(self) -> BoundarySpec:
        return BoundarySpec(kind=self.boundary, noise=self.noise, seed=self.seed)

    def g_spec(self) -> GSpec:
        return GSpec(radius=self.g_radius, seed=self.seed, scale=self.g_scale)

    def far_points(self) -> List[Tuple[int, ...]]:
        """x0 values are distances along e_1."""
        return [(t,) + (0,) * (self.dim - 1) for t in self.x0 or []]

    def lemma_radii(self) -> List[int]:
        return list(self.R_list) if self.R_list else [self.R]


class RuntimeSettings(BaseSettings):
    """Process-level settings read from HOMOGLAB_* variables and a .env file."""

    model_config = SettingsConfigDict(env_prefix="HOMOGLAB_", env_file=".env", extra="ignore")

    threads: int = Field(default=1, ge=1)
    out_dir: str = "results"
    log_level: str = "INFO"
    preconditioner: Literal["jacobi", "multigrid"] = "jacobi"


def load_settings() -> RuntimeSettings:
    load_dotenv()
    return RuntimeSettings()


def _split(text: str) -> Tuple[Dict[str, str], Dict[str, int]]:
    entries: Dict[str, str] = {}
    lines: Dict[str, int] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("PARSE_ERROR", f"line {number}: expected 'key = value'", line=number)
        key, value = (part.strip() for part in line.split("=", 1))
        if not KEY_PATTERN.match(key):
            raise ConfigError("PARSE_ERROR", f"line {number}: invalid key {key!r}", line=number)
        if not value:
            raise ConfigError("PARSE_ERROR", f"line {number}: key {key!r} has no value", line=number)
        canonical = "lam" if key == "lambda" else key
        if canonical in entries:
            raise ConfigError(
                "PARSE_ERROR",
                f"line {number}: duplicate key {key!r} (first set on line {lines[canonical]})",
                line=number,
            )
        entries[canonical] = value
        lines[canonical] = number
    return entries, lines


def _field_error(field: str, message: str, lines: Dict[str, int]) -> ConfigError:
    shown = "lambda" if field == "lam" else field
    line = lines.get(field)
    where = f"line {line}: " if line is not None else ""
    return ConfigError("VALIDATION_ERROR", f"{where}{shown}: {message}", field=shown, line=line)


def check_preconditions(config: ExperimentConfig, lines: Optional[Dict[str, int]] = None) -> None:
    """Cross-field checks that mirror the module preconditions.

    Raises:
        ConfigError: VALIDATION_ERROR naming the offending field
    """
    lines = lines or {}
    L = config.size
    if config.diag is not None and len(config.diag) != config.dim:
        raise _field_error("diag", f"needs {config.dim} entries", lines)
    spec = config.ensemble_spec()
    for v in spec.used_values(config.dim):
        if not config.lam <= v <= 1.0:
            field = "diag" if config.ensemble == "constant" else "values"
            raise _field_error(field, f"value {v} outside [lambda, 1] = [{config.lam}, 1]", lines)
    if config.ensemble == "layered" and L % config.period:
        raise _field_error("period", f"{config.period} does not divide size {L}", lines)
    if config.radii is not None and any(r <= 0 or r > L / 4 for r in config.radii):
        raise _field_error("radii", f"radii must lie in (0, size/4 = {L / 4}]", lines)
    if config.command == "excess" and 2 * config.R + 3 > L:
        raise _field_error("R", f"box of half-width R+1 does not fit size {L}", lines)
    if config.command in ("thmT", "corC"):
        if not config.x0:
            raise _field_error("x0", "needs at least one distance", lines)
        if any(t <= 0 for t in config.x0):
            raise _field_error("x0", "distances must be positive", lines)
    if config.command == "lemmaL":
        if config.M < config.N:
            raise _field_error("M", f"dictionary size {config.M} below ensemble size {config.N}", lines)
        for R in config.lemma_radii():
            if 4 * R + 3 > L:
                field = "R_list" if config.R_list else "R"
                raise _field_error(field, f"box of half-width 2R+1 = {2 * R + 1} does not fit size {L}", lines)


def parse_config(text: str, command: Optional[str] = None) -> ExperimentConfig:
    """Parse and fully validate a config text.

    `command` fills in the command when the text does not name one.

    Raises:
        ConfigError: PARSE_ERROR with the line number, or VALIDATION_ERROR with
            the field name of the first failing entry
    """
    entries, lines = _split(text)
    data: Dict[str, object] = {}
    for key, value in entries.items():
        if key in LIST_FIELDS:
            data[key] = [item.strip() for item in value.split(",") if item.strip()]
        else:
            data[key] = value
    if "lam" in data:
        data["lambda"] = data.pop("lam")
    if command is not None:
        data.setdefault("command", command)
    try:
        config = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        errors = exc.errors()
        # a bad value on a given line beats a key that is missing altogether
        error = next((e for e in errors if e["type"] != "missing"), errors[0])
        field = str(error["loc"][0]) if error["loc"] else "config"
        if field == "lambda":
            field = "lam"
        raise _field_error(field, error["msg"], lines) from None
    check_preconditions(config, lines)
    return config
