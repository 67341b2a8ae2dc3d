import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import numpy as np
from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from rich.console import Console

from gainloss.ssh.exceptions import ConfigError
from gainloss.ssh.model import hopping_amplitudes
from gainloss.ssh.models import (
    Engine,
    InitialKind,
    InitialStateSpec,
    ModelParams,
    TimeGrid,
    TrajectoryOptions,
)
from gainloss.ssh.spectral import GAP_TOLERANCE

VALID_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

_ANGLE = re.compile(r"^(?P<coef>[+-]?(?:\d+\.?\d*|\.\d+)(?:e[+-]?\d+)?)?\s*\*?\s*pi\s*(?:/\s*(?P<div>\d+\.?\d*))?$")


def parse_angle(value: Any) -> float:
    """
    Parse an angle given in radians or as a multiple of pi.

    Accepts plain numbers and forms such as "pi", "0.1pi", "0.1*pi", "pi/2", "3pi/4" or "π/2".

    Args:
        value: Number or string.

    Returns:
        float: The angle in radians.

    Raises:
        ValueError: If the string is not a recognised angle.
    """
    if not isinstance(value, str):
        return float(value)
    text = value.strip().lower().replace("π", "pi")
    if "pi" not in text:
        return float(text)
    match = _ANGLE.match(text)
    if match is None:
        raise ValueError(f"cannot parse angle {value!r}")
    coefficient = float(match.group("coef")) if match.group("coef") else 1.0
    divisor = float(match.group("div")) if match.group("div") else 1.0
    return coefficient * math.pi / divisor


@dataclass
class Settings:
    """
    Environment settings of the gainloss-ssh tools.
    Loads from environment variables with fallbacks to default values.
    """
    threads: int = 1
    log_level: str = "INFO"
    output_dir: Path = field(default_factory=lambda: Path("out"))

    @classmethod
    def load(cls, env_file: Optional[str] = None) -> 'Settings':
        """
        Load settings from environment variables, with optional .env file.

        Args:
            env_file: Optional path to .env file. If not provided, looks for .env in the working directory.

        Returns:
            Settings object with loaded values

        Raises:
            ConfigError: If a value is invalid
        """
        if env_file:
            load_dotenv(env_file)
        elif Path(".env").exists():
            load_dotenv(Path(".env"))

        threads = os.getenv("GAINLOSS_THREADS", str(cls.threads))
        try:
            threads = int(threads)
        except ValueError:
            raise ConfigError("GAINLOSS_THREADS", f"not an integer: {threads!r}", valid="integer >= 1")
        return cls(
            threads=threads,
            log_level=os.getenv("GAINLOSS_LOG_LEVEL", cls.log_level).upper(),
            output_dir=Path(os.getenv("GAINLOSS_OUTPUT_DIR", "out")),
        )

    def validate(self) -> None:
        """
        Validate the settings.

        Raises:
            ConfigError: If any setting is invalid
        """
        if self.threads < 1:
            raise ConfigError("GAINLOSS_THREADS", f"got {self.threads}", valid="integer >= 1")
        if self.log_level.upper() not in VALID_LOG_LEVELS:
            raise ConfigError("GAINLOSS_LOG_LEVEL", f"got {self.log_level!r}", valid=", ".join(VALID_LOG_LEVELS))

    def __post_init__(self):
        """Validate settings after initialization."""
        self.output_dir = Path(self.output_dir)
        self.validate()

    def log_settings(self, console: Console) -> None:
        """Print the settings."""
        console.print("\n=== Settings ===")
        console.print(f"Threads: {self.threads}")
        console.print(f"Log Level: {self.log_level}")
        console.print(f"Output Directory: {self.output_dir}\n")


# Global settings instance
_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """
    Get the global settings instance, creating it if necessary.

    Returns:
        Settings object with current values
    """
    global _settings
    if _settings is None:
        _settings = Settings.load()
    return _settings


def initialize_settings(env_file: Optional[str] = None) -> Settings:
    """
    Initialize or reinitialize the global settings.

    Args:
        env_file: Optional path to .env file

    Returns:
        Newly created Settings object
    """
    global _settings
    _settings = Settings.load(env_file)
    return _settings


# Human-readable ranges reported with ConfigError
VALID_RANGES: Dict[str, str] = {
    "n_sites": "even integer >= 4",
    "hopping": "real > 0",
    "dimerization": "real in [0, 1)",
    "theta": "angle in [0, pi]",
    "gamma": "real >= 0",
    "t_end": "real > 0",
    "dt": "real > 0 and <= t_end / samples",
    "samples": "integer >= 1",
    "n_traj": "integer >= 1",
    "seed": "integer in [0, 2^64)",
    "engine": ", ".join(e.value for e in Engine),
    "initial": ", ".join(k.value for k in InitialKind),
    "theta_ref": "angle in [0, pi]",
    "windows": "comma-separated integers in [1, n_sites/2]",
    "bulk_index": "integer >= 0",
    "site_index": "integer in [1, n_sites]",
    "bulk_seed": "integer >= 0",
    "midgap_factor": "real in (0, 1]",
    "edge_window_fraction": "real in (0, 0.5]",
    "theta_min": "angle in [0, pi]",
    "theta_max": "angle in [0, pi]",
    "theta_points": "integer >= 1",
    "recompute_initial": "boolean",
}


class RunConfig(BaseModel):
    """
    Flat run configuration shared by all CLI subcommands.
    Defaults reproduce the published open-system setup.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_sites: int = Field(200)
    hopping: float = Field(1.0, gt=0)
    dimerization: float = Field(0.3, ge=0, lt=1)
    theta: float = Field(0.1 * math.pi, ge=0, le=math.pi)
    gamma: float = Field(0.1, ge=0)
    t_end: float = Field(25000.0, gt=0)
    dt: float = Field(0.05, gt=0)
    samples: int = Field(1000, ge=1)
    n_traj: int = Field(200, ge=1)
    seed: int = Field(1234, ge=0, lt=2 ** 64)
    engine: Engine = Field(Engine.TRAJECTORIES)
    initial: InitialKind = Field(InitialKind.EDGE_RIGHT)
    theta_ref: float = Field(0.1 * math.pi, ge=0, le=math.pi)
    windows: List[int] = Field(default_factory=lambda: [10])
    bulk_index: int | None = Field(None, ge=0)
    site_index: int | None = Field(None, ge=1)
    bulk_seed: int = Field(42, ge=0)
    midgap_factor: float = Field(0.5, gt=0, le=1)
    edge_window_fraction: float = Field(1 / 20, gt=0, le=0.5)
    theta_min: float = Field(0.05 * math.pi, ge=0, le=math.pi)
    theta_max: float = Field(0.95 * math.pi, ge=0, le=math.pi)
    theta_points: int = Field(41, ge=1)
    recompute_initial: bool = Field(False)

    # noinspection PyMethodParameters
    @field_validator("theta", "theta_ref", "theta_min", "theta_max", mode="before")
    def angles_may_use_pi(cls, v: Any) -> float:
        return parse_angle(v)

    # noinspection PyMethodParameters
    @field_validator("windows", mode="before")
    def windows_from_list(cls, v: Any) -> List[int]:
        if isinstance(v, str):
            v = [part for part in re.split(r"[,\s{}]+", v) if part]
        if isinstance(v, int):
            v = [v]
        return sorted(set(int(a) for a in v))

    # noinspection PyMethodParameters
    @field_validator("n_sites")
    def n_sites_must_be_even(cls, v: int) -> int:
        if v < 4 or v % 2:
            raise ConfigError("n_sites", f"got {v}", valid=VALID_RANGES["n_sites"])
        return v

    # noinspection PyMethodParameters
    @model_validator(mode="after")
    def cross_field_checks(self) -> 'RunConfig':
        if not self.windows or self.windows[0] < 1 or 2 * self.windows[-1] > self.n_sites:
            raise ConfigError("windows", f"got {self.windows}", valid=VALID_RANGES["windows"])
        if self.site_index is not None and self.site_index > self.n_sites:
            raise ConfigError("site_index", f"got {self.site_index}", valid=VALID_RANGES["site_index"])
        if self.initial == InitialKind.SITE and self.site_index is None:
            raise ConfigError("site_index", "required when initial = site", valid=VALID_RANGES["site_index"])
        if self.dt > self.t_end / self.samples * (1 + 1e-12):
            raise ConfigError("dt", f"got {self.dt}, sample spacing is {self.t_end / self.samples}",
                              valid=VALID_RANGES["dt"])
        if self.theta_min > self.theta_max or (self.theta_points > 1 and self.theta_min == self.theta_max):
            raise ConfigError("theta_max", f"theta range [{self.theta_min}, {self.theta_max}] is empty",
                              valid="theta_min < theta_max")
        return self

    def to_params(self) -> ModelParams:
        return ModelParams(n_sites=self.n_sites, hopping=self.hopping, dimerization=self.dimerization,
                           theta=self.theta, gamma=self.gamma)

    def to_grid(self) -> TimeGrid:
        return TimeGrid(t_end=self.t_end, dt=self.dt, sample_count=self.samples)

    def to_initial_spec(self) -> InitialStateSpec:
        return InitialStateSpec(kind=self.initial, bulk_index=self.bulk_index, site_index=self.site_index,
                                theta_ref=self.theta_ref, bulk_seed=self.bulk_seed,
                                midgap_factor=self.midgap_factor, edge_window_fraction=self.edge_window_fraction)

    def to_options(self) -> TrajectoryOptions:
        return TrajectoryOptions(n_traj=self.n_traj, seed=self.seed)

    def theta_grid(self) -> np.ndarray:
        """Uniform sweep grid on [theta_min, theta_max]."""
        return np.linspace(self.theta_min, self.theta_max, self.theta_points)

    def require_gap(self, include_reference: bool = False) -> None:
        """
        Reject parameter sets whose bulk gap is closed.

        Args:
            include_reference (bool): Also check theta_ref (sweeps with edge initial states).

        Raises:
            ConfigError: If |t₋ − t₊| ≤ 10⁻⁶ at theta (or theta_ref).
        """
        checks = [("theta", self.theta)]
        if include_reference:
            checks.append(("theta_ref", self.theta_ref))
        for key, theta in checks:
            hop = hopping_amplitudes(self.to_params().with_theta(theta))
            if abs(hop.t_minus - hop.t_plus) <= GAP_TOLERANCE:
                raise ConfigError(key, f"bulk gap closes at {key}={theta:.10g} (|t- - t+| <= {GAP_TOLERANCE:g})",
                                  valid="angle away from pi/2, or dimerization > 0")


def _from_validation_error(error: ValidationError) -> ConfigError:
    first = error.errors()[0]
    key = str(first["loc"][0]) if first["loc"] else "config"
    return ConfigError(key, first["msg"], valid=VALID_RANGES.get(key))


def parse_config(path: Optional[str | Path] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Read a flat ``key = value`` run configuration and apply flag overrides.

    Args:
        path: Optional config file. Missing keys take the defaults.
        overrides: Values from command-line flags; None entries are ignored. Flags win over the file.

    Returns:
        RunConfig: The validated configuration.

    Raises:
        ConfigError: On unknown keys, out-of-range values, odd n_sites or a missing file.
    """
    values: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError("config", f"file not found: {path}", valid="path to an existing file")
        values.update({key.strip().lower(): value for key, value in dotenv_values(path).items()
                       if value is not None and value.strip() != ""})
    if overrides:
        values.update({key: value for key, value in overrides.items() if value is not None})

    unknown = sorted(set(values) - set(RunConfig.model_fields))
    if unknown:
        raise ConfigError(unknown[0], "unknown configuration key", valid=", ".join(RunConfig.model_fields))
    try:
        return RunConfig(**values)
    except ValidationError as e:
        raise _from_validation_error(e)
    except ValueError as e:
        raise ConfigError("config", str(e))
