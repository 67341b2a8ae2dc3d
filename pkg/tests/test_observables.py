import numpy as np
import pytest

from gainloss.ssh.exceptions import SSHInputError
from gainloss.ssh.models import (
    AverageConvention,
    DensityMatrix,
    Engine,
    FockState,
    OccupationSeries,
    Side,
    TimeAveragedProfile,
    TimeGrid,
)
from gainloss.ssh.observables import (
    edge_contrast,
    edge_occupation,
    max_site_share,
    occupation_profile,
    site_occupations,
    time_average,
    total_occupation,
)


@pytest.fixture
def series():
    grid = TimeGrid(t_end=2.0, dt=1.0, sample_count=2)
    mean = np.array([
        [1.0, 0.0, 0.0, 0.0],
        [0.5, 0.5, 0.0, 0.0],
        [0.0, 0.2, 0.3, 0.2],
    ])
    return OccupationSeries(
        sample_times=grid.sample_times,
        per_site_mean=mean,
        per_site_stderr=np.zeros_like(mean),
        vacuum_prob=1 - mean.sum(axis=1),
        grid=grid,
        engine=Engine.MASTER,
    )


def test_site_occupations():
    """Test that occupations are the Fock diagonal without the vacuum entry."""
    rho = DensityMatrix(entries=np.diag([0.1, 0.2, 0.3, 0.4]).astype(complex))
    np.testing.assert_allclose(site_occupations(rho), [0.2, 0.3, 0.4])


def test_occupation_profile():
    """Test |ψ_i|² of a single-particle state."""
    psi = FockState(amplitudes=np.array([0.0, 0.6, -0.8j]))
    np.testing.assert_allclose(occupation_profile(psi), [0.36, 0.64])


def test_total_occupation(series):
    """Test the particle number per sample."""
    np.testing.assert_allclose(total_occupation(series), [1.0, 1.0, 0.7])


def test_time_average_conventions(series):
    """Test the normalized and the literal temporal mean."""
    normalized = time_average(series)
    assert normalized.convention == AverageConvention.NORMALIZED
    np.testing.assert_allclose(normalized.per_site, [0.5, 0.7 / 3, 0.1, 0.2 / 3])
    assert normalized.n_sites == 4

    literal = time_average(series, AverageConvention.LITERAL)
    np.testing.assert_allclose(literal.per_site, [0.75, 0.35, 0.15, 0.1])


def test_time_average_of_constant_series_is_exact():
    """Test that the normalized mean of a constant series returns the constant."""
    grid = TimeGrid(t_end=1.0, dt=0.1, sample_count=10)
    mean = np.tile([0.25, 0.75], (11, 1))
    constant = OccupationSeries(sample_times=grid.sample_times, per_site_mean=mean,
                                per_site_stderr=np.zeros_like(mean), vacuum_prob=np.zeros(11), grid=grid,
                                engine=Engine.SPECTRAL)
    np.testing.assert_allclose(time_average(constant).per_site, [0.25, 0.75], atol=1e-15)


def test_edge_occupation(series):
    """Test left and right window sums."""
    profile = time_average(series)
    assert edge_occupation(profile, 1, Side.LEFT) == pytest.approx(0.5)
    assert edge_occupation(profile, 2, Side.RIGHT) == pytest.approx(0.1 + 0.2 / 3)
    assert edge_occupation(profile, 2, "left") == pytest.approx(0.5 + 0.7 / 3)
    assert edge_contrast(profile, 1) == pytest.approx(0.2 / 3 - 0.5)


def test_edge_occupation_window_bounds(series):
    """Test that the window must satisfy 1 ≤ a ≤ N/2."""
    profile = time_average(series)
    with pytest.raises(SSHInputError) as exc_info:
        edge_occupation(profile, 3, Side.RIGHT)
    assert "1 <= a <= N/2 = 2" in str(exc_info.value)

    with pytest.raises(SSHInputError):
        edge_occupation(profile, 0, Side.LEFT)


def test_max_site_share():
    """Test the largest single-site share of the profile."""
    grid = TimeGrid(t_end=1.0, dt=1.0, sample_count=1)
    profile = TimeAveragedProfile(per_site=np.array([0.1, 0.1, 0.3, 0.5]), window=grid)
    assert max_site_share(profile) == pytest.approx(0.5)
    empty = TimeAveragedProfile(per_site=np.zeros(4), window=grid)
    assert max_site_share(empty) == 0.0
