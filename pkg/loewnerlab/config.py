"""Configuration loader from environment variables and experiment config files."""
import hashlib
import json
import logging
import os
from pathlib import Path
from typing import List, Literal, Optional, Tuple

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from loewnerlab.errors import InvalidConfigurationError

load_dotenv()

logger = logging.getLogger(__name__)


class Config:
    """Lab configuration."""

    # Numerics
    REFINEMENT: int = int(os.getenv("LAB_REFINEMENT", "4"))
    FJORD_C: float = float(os.getenv("LAB_FJORD_C", "16"))
    CG_TOL: float = float(os.getenv("LAB_CG_TOL", "1e-10"))
    ZIPPER_TOL: float = float(os.getenv("LAB_ZIPPER_TOL", "1e-6"))
    FRECHET_TOL: float = float(os.getenv("LAB_FRECHET_TOL", "1e-6"))

    # Execution
    MAX_WORKERS: int = int(os.getenv("LAB_MAX_WORKERS", "4"))
    OUTPUT_DIR: str = os.getenv("LAB_OUTPUT_DIR", "out")

    # Logging
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")

    @classmethod
    def validate(cls) -> None:
        """Validate numeric settings are in range."""
        invalid = []
        if cls.REFINEMENT < 1:
            invalid.append("LAB_REFINEMENT")
        if cls.FJORD_C <= 0:
            invalid.append("LAB_FJORD_C")
        if not 0 < cls.CG_TOL < 1:
            invalid.append("LAB_CG_TOL")
        if not 0 < cls.ZIPPER_TOL < 1:
            invalid.append("LAB_ZIPPER_TOL")
        if cls.FRECHET_TOL <= 0:
            invalid.append("LAB_FRECHET_TOL")
        if cls.MAX_WORKERS < 1:
            invalid.append("LAB_MAX_WORKERS")
        if cls.LOG_LEVEL.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            invalid.append("LOG_LEVEL")
        if invalid:
            raise ValueError(f"Invalid environment settings: {', '.join(invalid)}")


config = Config()


Point2 = Tuple[float, float]


class ExperimentConfig(BaseModel):
    """Parameters of one harness experiment."""

    experiment: Literal["commute", "warning", "stability"] = "commute"
    polygon: List[Point2] = Field(default_factory=lambda: [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])
    u: Point2 = (0.5, 0.5)
    a_point: Optional[Point2] = None
    b_point: Optional[Point2] = None
    model: Literal["sle", "lerw"] = "sle"
    kappa: float = 3.0
    kappas: List[float] = Field(default_factory=list)
    T: float = 25.0
    dt: float = 0.0125
    n_values: List[int] = Field(default_factory=lambda: [32])
    eps_values: List[float] = Field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    ell: float = 0.2
    delta: float = 0.05
    C: float = config.FJORD_C
    alpha: float = 1.0
    samples: int = 20
    curve_points: int = 256
    seed: int
    out: str = config.OUTPUT_DIR

    @field_validator("polygon")
    @classmethod
    def polygon_has_area(cls, v: List[Point2]) -> List[Point2]:
        if len(v) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        return v

    @field_validator("kappa")
    @classmethod
    def kappa_in_range(cls, v: float) -> float:
        if not 0 <= v < 8:
            raise ValueError("kappa must lie in [0, 8)")
        return v

    @field_validator("kappas")
    @classmethod
    def kappas_in_range(cls, v: List[float]) -> List[float]:
        if any(not 0 <= k < 8 for k in v):
            raise ValueError("every kappa must lie in [0, 8)")
        return v

    @field_validator("n_values")
    @classmethod
    def resolutions_positive(cls, v: List[int]) -> List[int]:
        if not v or any(n < 1 for n in v):
            raise ValueError("n_values must be a non-empty list of positive integers")
        return v

    @field_validator("eps_values")
    @classmethod
    def eps_in_unit_interval(cls, v: List[float]) -> List[float]:
        if any(not 0 < e < 1 for e in v):
            raise ValueError("eps values must lie in (0, 1)")
        return v

    @field_validator("T", "dt", "ell", "delta", "C")
    @classmethod
    def strictly_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("must be positive")
        return v

    @field_validator("samples", "curve_points")
    @classmethod
    def count_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be at least 1")
        return v

    @model_validator(mode="after")
    def step_below_horizon(self) -> "ExperimentConfig":
        if self.dt > self.T:
            raise ValueError("dt must not exceed T")
        return self

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON dump."""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def run_id(self) -> str:
        return self.config_hash()[:8]


_LIST_KEYS = {"kappas", "n_values", "eps_values"}
_POINT_KEYS = {"u", "a_point", "b_point"}


def _parse_point(text: str) -> Point2:
    x, y = (float(p) for p in text.split(","))
    return (x, y)


def parse_config_text(text: str) -> dict:
    """Parse `key = value` lines into raw fields for ExperimentConfig."""
    raw: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfigurationError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in ExperimentConfig.model_fields:
            raise InvalidConfigurationError(f"line {lineno}: unknown key {key!r}")
        try:
            if key == "polygon":
                raw[key] = [_parse_point(p) for p in value.split(";") if p.strip()]
            elif key in _POINT_KEYS:
                raw[key] = _parse_point(value)
            elif key in _LIST_KEYS:
                raw[key] = [v.strip() for v in value.split(",") if v.strip()]
            else:
                raw[key] = value
        except ValueError as e:
            raise InvalidConfigurationError(f"line {lineno}: cannot parse {key!r}: {e}") from e
    return raw


def build_experiment_config(raw: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        raise InvalidConfigurationError(f"Invalid experiment configuration: {e}") from e


def read_config_values(path: Path) -> dict:
    """Raw `key = value` fields of a config file, keys checked against ExperimentConfig."""
    path = Path(path)
    logger.info(f"Loading experiment config from {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise InvalidConfigurationError(f"Cannot read config file {path}: {e}") from e
    return parse_config_text(text)


def load_experiment_config(path: Path, overrides: Optional[dict] = None) -> ExperimentConfig:
    """
    Load an experiment config file.

    Args:
        path: Plain-text `key = value` file, `#` starts a comment
        overrides: Values taking precedence over the file (e.g. CLI --seed)

    Returns:
        Validated ExperimentConfig

    Raises:
        InvalidConfigurationError: On unknown keys, unparsable values or failed validation
    """
    raw = read_config_values(path)
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return build_experiment_config(raw)
