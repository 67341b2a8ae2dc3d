import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv
from rich.console import Console

# Get project root directory
ROOT_DIR = Path(__file__).parent.resolve()
TEMP_DIR = ROOT_DIR / ".temp"


def _int_env(name: str, default: int) -> int:
    value = os.getenv(name)
    if value is None or value == "":
        return default
    try:
        return int(value)
    except ValueError:
        raise ValueError(f"{name} must be an integer, got {value!r}")


def _float_env(name: str, default: float) -> float:
    value = os.getenv(name)
    if value is None or value == "":
        return default
    try:
        return float(value)
    except ValueError:
        raise ValueError(f"{name} must be a number, got {value!r}")


@dataclass
class Config:
    """
    Scale settings for the acceptance suite.
    Loads from environment variables with fallbacks to the desk-scale defaults.
    """
    n_sites: int = 100
    t_end: float = 2500.0
    dt: float = 0.05
    samples: int = 1000
    theta_points: int = 41
    n_traj: int = 200
    oracle_n_traj: int = 5000
    oracle_dt: float = 0.01
    workers: int = 1
    seed: int = 1234
    log_level: str = "INFO"
    temp_dir: Path = TEMP_DIR

    @classmethod
    def load(cls, env_file: Optional[str] = None) -> 'Config':
        """
        Load configuration from environment variables, with optional .env file.

        Args:
            env_file: Optional path to .env file. If not provided, looks for .env in the e2e directory.

        Returns:
            Config object with loaded settings

        Raises:
            ValueError: If a setting cannot be parsed or is out of range
        """
        if env_file:
            load_dotenv(env_file)
        else:
            default_env = ROOT_DIR / ".env"
            if default_env.exists():
                load_dotenv(default_env)

        return cls(
            n_sites=_int_env("E2E_N_SITES", cls.n_sites),
            t_end=_float_env("E2E_T_END", cls.t_end),
            dt=_float_env("E2E_DT", cls.dt),
            samples=_int_env("E2E_SAMPLES", cls.samples),
            theta_points=_int_env("E2E_THETA_POINTS", cls.theta_points),
            n_traj=_int_env("E2E_N_TRAJ", cls.n_traj),
            oracle_n_traj=_int_env("E2E_ORACLE_N_TRAJ", cls.oracle_n_traj),
            oracle_dt=_float_env("E2E_ORACLE_DT", cls.oracle_dt),
            workers=_int_env("E2E_WORKERS", os.cpu_count() or cls.workers),
            seed=_int_env("E2E_SEED", cls.seed),
            log_level=os.getenv("E2E_TESTS_LOG_LEVEL", cls.log_level),
        )

    def validate(self) -> None:
        """
        Validate the configuration settings.

        Raises:
            ValueError: If any settings are invalid
        """
        if self.n_sites < 40 or self.n_sites % 2:
            raise ValueError("E2E_N_SITES must be an even integer >= 40 (criteria use a window of 20)")
        if self.theta_points < 21:
            raise ValueError("E2E_THETA_POINTS must be >= 21 to resolve the kink within 0.05pi")
        if self.dt <= 0 or self.dt > self.t_end / self.samples:
            raise ValueError("E2E_DT must be positive and at most E2E_T_END / E2E_SAMPLES")
        if min(self.n_traj, self.oracle_n_traj, self.workers) < 1:
            raise ValueError("E2E_N_TRAJ, E2E_ORACLE_N_TRAJ and E2E_WORKERS must be >= 1")

        valid_log_levels = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}
        if self.log_level.upper() not in valid_log_levels:
            raise ValueError(f"Log level must be one of: {', '.join(valid_log_levels)}")

        if not self.temp_dir.exists():
            os.makedirs(self.temp_dir, exist_ok=True)

    def __post_init__(self):
        """Validate configuration after initialization."""
        self.validate()

    def log_config(self, console: Console) -> None:
        """Print the configuration settings."""
        console.print("\n=== Configuration Settings ===")
        console.print(f"Chain: N={self.n_sites}, T={self.t_end:g}, dt={self.dt:g}, samples={self.samples}")
        console.print(f"Theta points: {self.theta_points}")
        console.print(f"Trajectories: {self.n_traj} (oracle {self.oracle_n_traj}, dt {self.oracle_dt:g})")
        console.print(f"Workers: {self.workers}, seed: {self.seed}")
        console.print(f"Log Level: {self.log_level}")
        console.print(f"Temp Directory: {self.temp_dir}\n")


# Global configuration instance
_config: Optional[Config] = None


def get_config() -> Config:
    """
    Get the global configuration instance, creating it if necessary.

    Returns:
        Config object with current settings
    """
    global _config
    if _config is None:
        _config = Config.load()
    return _config


def initialize_config(env_file: Optional[str] = None) -> Config:
    """
    Initialize or reinitialize the global configuration.

    Args:
        env_file: Optional path to .env file

    Returns:
        Newly created Config object
    """
    global _config
    _config = Config.load(env_file)
    return _config
