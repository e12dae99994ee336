"""
Configuration settings for the NLS-GI scattering engine
Process settings from the environment and flat key = value run configs
"""

import hashlib
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from nlsgi import __version__
from nlsgi.core.errors import ConfigError


class Settings(BaseSettings):
    """Process-wide settings (environment and .env)"""

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True, extra="ignore")

    # Application
    APP_NAME: str = "NLS-GI Inverse Scattering Engine"
    VERSION: str = __version__
    ENVIRONMENT: str = "development"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    LOG_DIR: str = "logs"
    LEDGER_ENABLED: bool = True

    # Runs
    NLSGI_THREADS: int = 1
    OUTPUT_DIR: str = "out"


# Global settings instance
settings = Settings()


_NONE_TOKENS = {"", "none", "null"}


class RunConfig(BaseModel):
    """One run of the engine: grids, input potential, tolerances, evolution and outputs"""

    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    # Grids
    L: float = 20.0
    N: int = 2048
    Z: float = 40.0
    M: int = 4096

    # Input potential
    preset: str = "sech:A=0.3"
    input_path: Optional[str] = None
    resample_input: bool = False
    boundary_tol: float = 1e-10

    # Direct scattering
    stepper: str = "magnus4"
    gate_tol: float = 1e-6
    max_phase_step: float = 3.0

    # Projectors and RH solves
    pad_factor: int = 4
    taper_fraction: float = 0.1
    window_tol: float = 1e-6
    rh_tol: float = 1e-10
    max_iter: int = 200
    contraction_switch: float = 0.9
    gmres_restart: int = 50
    delta_tol: float = 1e-6
    seam_tol: float = 1e-3

    # Evolution
    t_final: float = 0.1
    phase_coefficient: int = 4
    phase_sign: int = 1
    dt: Optional[float] = None
    c_stab: float = 0.2
    growth_limit: float = 10.0
    snapshots: List[float] = []

    # Outputs
    out_dir: str = "out"
    suite: str = "all"
    archive: Optional[str] = None
    threads: Optional[int] = None
    seed: int = 1234
    debug: bool = False

    @model_validator(mode="before")
    @classmethod
    def _none_tokens(cls, data: Any) -> Any:
        if isinstance(data, dict):
            optional = {"input_path", "dt", "archive", "threads"}
            return {
                key: (None if key in optional and isinstance(value, str) and value.strip().lower() in _NONE_TOKENS else value)
                for key, value in data.items()
            }
        return data

    @field_validator("snapshots", mode="before")
    @classmethod
    def _split_snapshots(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [item.strip() for item in value.split(",") if item.strip()]
        return value

    @field_validator("L", "Z")
    @classmethod
    def _positive_half_width(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("half width must be positive")
        return value

    @field_validator("N", "M")
    @classmethod
    def _point_count(cls, value: int) -> int:
        if value < 8:
            raise ValueError("point count must be at least 8")
        if value % 2:
            raise ValueError("point count must be even")
        return value

    @field_validator(
        "boundary_tol", "gate_tol", "window_tol", "rh_tol", "delta_tol",
        "seam_tol", "c_stab", "max_phase_step", "growth_limit", "contraction_switch",
    )
    @classmethod
    def _positive_tolerance(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("tolerance must be positive")
        return value

    @field_validator("dt")
    @classmethod
    def _positive_dt(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and value <= 0:
            raise ValueError("dt must be positive")
        return value

    @field_validator("max_iter", "gmres_restart")
    @classmethod
    def _positive_count(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be at least 1")
        return value

    @field_validator("pad_factor")
    @classmethod
    def _pad_factor(cls, value: int) -> int:
        if value < 2:
            raise ValueError("pad_factor must be at least 2")
        return value

    @field_validator("taper_fraction")
    @classmethod
    def _taper_fraction(cls, value: float) -> float:
        if not 0 < value < 0.5:
            raise ValueError("taper_fraction must lie in (0, 0.5)")
        return value

    @field_validator("stepper")
    @classmethod
    def _stepper(cls, value: str) -> str:
        if value not in ("magnus4", "trapezoid"):
            raise ValueError("stepper must be 'magnus4' or 'trapezoid'")
        return value

    @field_validator("phase_coefficient")
    @classmethod
    def _phase_coefficient(cls, value: int) -> int:
        if value not in (2, 4):
            raise ValueError("phase_coefficient must be 2 or 4")
        return value

    @field_validator("phase_sign")
    @classmethod
    def _phase_sign(cls, value: int) -> int:
        if value not in (1, -1):
            raise ValueError("phase_sign must be +1 or -1")
        return value

    @field_validator("threads")
    @classmethod
    def _threads(cls, value: Optional[int]) -> Optional[int]:
        if value is not None and value < 1:
            raise ValueError("threads must be at least 1")
        return value

    @field_validator("t_final")
    @classmethod
    def _t_final(cls, value: float) -> float:
        if value < 0:
            raise ValueError("t_final must be non-negative")
        return value

    @model_validator(mode="after")
    def _snapshot_window(self) -> "RunConfig":
        for t in self.snapshots:
            if t < 0 or t > self.t_final:
                raise ValueError(f"snapshot time {t} outside [0, {self.t_final}]")
        return self

    @property
    def snapshot_times(self) -> List[float]:
        """Sorted snapshot times, always ending at t_final"""
        return sorted(set(self.snapshots) | {self.t_final})

    def normalized(self) -> str:
        """Render as a flat config file that parses back to the same values"""
        lines = []
        for name in type(self).model_fields:
            value = getattr(self, name)
            if value is None:
                text = "none"
            elif isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, list):
                text = ",".join(repr(float(item)) for item in value)
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            lines.append(f"{name} = {text}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        """Provenance hash of the normalized config"""
        return hashlib.sha256(self.normalized().encode("utf-8")).hexdigest()[:16]


def parse_config(path: Optional[str]) -> RunConfig:
    """Parse a flat `key = value` config file; no path gives all defaults"""
    if path is None:
        return RunConfig()

    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigError(f"config file not found: {config_path}")

    try:
        text = config_path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {config_path}: {e}") from e

    values: Dict[str, str] = {}
    line_of: Dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in RunConfig.model_fields:
            raise ConfigError(f"line {lineno}: unknown key '{key}'", line=lineno)
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'", line=lineno)
        values[key] = value
        line_of[key] = lineno

    try:
        return RunConfig(**values)
    except ValidationError as e:
        error = e.errors()[0]
        key = error["loc"][0] if error["loc"] else None
        lineno = line_of.get(key) if isinstance(key, str) else None
        where = f"line {lineno}: " if lineno is not None else ""
        label = f"{key}: " if key else ""
        raise ConfigError(f"{where}{label}{error['msg']}", line=lineno) from e
