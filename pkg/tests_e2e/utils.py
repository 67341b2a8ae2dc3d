import math
from typing import Any, Sequence

import numpy as np

from config import get_config
from gainloss.ssh.config import RunConfig
from gainloss.ssh.models import TimeGrid


def desk_grid(t_end: float | None = None, samples: int | None = None, dt: float | None = None) -> TimeGrid:
    """Observation grid at the configured scale, with optional overrides."""
    config = get_config()
    return TimeGrid(t_end=t_end or config.t_end, dt=dt or config.dt, sample_count=samples or config.samples)


def theta_grid(points: int | None = None) -> np.ndarray:
    """Default sweep grid of the run configuration, at the configured number of points."""
    return RunConfig(theta_points=points or get_config().theta_points).theta_grid()


def theta_index(thetas: Sequence[float], theta: float) -> int:
    """Index of the grid point nearest to theta."""
    return int(np.argmin(np.abs(np.asarray(thetas) - theta)))


def pi_str(theta: float | None) -> str:
    """Format an angle in units of π."""
    return "undefined" if theta is None else f"{theta / math.pi:.4f}pi"


class TestData:
    """
    Class to store and manage test data between test cases.
    Singleton shared across acceptance modules.
    """
    _instance = None
    _data: dict[str, Any] = {}

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def set(self, key: str, value: Any) -> None:
        """Set a test data value."""
        self._data[key] = value

    def get(self, key: str, default: Any = None) -> Any:
        """Get a test data value."""
        return self._data.get(key, default)

    def clear(self) -> None:
        """Clear all test data."""
        self._data.clear()

    def __contains__(self, key: str) -> bool:
        """Check if key exists in test data."""
        return key in self._data
