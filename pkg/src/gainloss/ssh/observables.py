import logging

import numpy as np

from gainloss.ssh.exceptions import SSHInputError
from gainloss.ssh.models import (
    AverageConvention,
    DensityMatrix,
    FockState,
    OccupationSeries,
    Side,
    TimeAveragedProfile,
)

logger = logging.getLogger(__name__)


def site_occupations(rho: DensityMatrix) -> np.ndarray:
    """
    Read ⟨n_i⟩ = trace(ρ·n_i) = ρ_ii off the Fock-basis diagonal.

    Args:
        rho (DensityMatrix): State on the truncated Fock space.

    Returns:
        np.ndarray: N real occupations, the vacuum entry excluded.
    """
    return np.real(np.diag(rho.entries)[1:]).copy()


def occupation_profile(psi: FockState) -> np.ndarray:
    """|ψ_i|² on every site."""
    return np.abs(np.asarray(psi.amplitudes[1:])) ** 2


def total_occupation(series: OccupationSeries) -> np.ndarray:
    """Particle number Σ_i ⟨n_i(t_j)⟩ per sample."""
    return np.asarray(series.per_site_mean).sum(axis=1)


def time_average(series: OccupationSeries,
                 convention: AverageConvention = AverageConvention.NORMALIZED) -> TimeAveragedProfile:
    """
    Temporal mean of the occupations over all s+1 samples t_0 … t_s.

    Args:
        series (OccupationSeries): The sampled occupations.
        convention (AverageConvention): NORMALIZED divides the sum by s+1, LITERAL by s.

    Returns:
        TimeAveragedProfile: The averaged profile.
    """
    mean = np.asarray(series.per_site_mean)
    if mean.shape[0] == 0:
        raise SSHInputError("cannot average an empty series")
    total = mean.sum(axis=0)
    if convention == AverageConvention.LITERAL:
        per_site = total / max(1, mean.shape[0] - 1)
    else:
        per_site = total / mean.shape[0]
    return TimeAveragedProfile(per_site=per_site, window=series.grid, convention=convention)


def edge_occupation(profile: TimeAveragedProfile, a: int, side: Side) -> float:
    """
    Sum of the first (left) or last (right) a entries of a profile.

    Args:
        profile (TimeAveragedProfile): Time-averaged occupations.
        a (int): Window size, 1 ≤ a ≤ N/2.
        side (Side): Which edge.

    Returns:
        float: The edge occupation.

    Raises:
        SSHInputError: If a is outside [1, N/2].
    """
    n_sites = profile.n_sites
    if a < 1 or 2 * a > n_sites:
        raise SSHInputError(f"edge window must satisfy 1 <= a <= N/2 = {n_sites // 2}, got {a}")
    per_site = np.asarray(profile.per_site)
    window = per_site[:a] if Side(side) == Side.LEFT else per_site[-a:]
    return float(window.sum())


def edge_contrast(profile: TimeAveragedProfile, a: int) -> float:
    """Right minus left edge occupation."""
    return edge_occupation(profile, a, Side.RIGHT) - edge_occupation(profile, a, Side.LEFT)


def max_site_share(profile: TimeAveragedProfile) -> float:
    """Largest single-site share of the total time-averaged occupation."""
    per_site = np.asarray(profile.per_site)
    total = per_site.sum()
    if total <= 0:
        return 0.0
    return float(per_site.max() / total)
