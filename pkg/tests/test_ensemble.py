import math

import numpy as np
import pytest

from gainloss.ssh.ensemble import (
    ChunkResult,
    build_context,
    chunk_bounds,
    reduce_chunks,
    rk4_polynomial,
    run_trajectory,
    trajectory_stream,
)
from gainloss.ssh.exceptions import SSHInputError
from gainloss.ssh.lindblad import evolve_closed_spectral, evolve_master_rk4, pure_density_matrix, sample_trajectories
from gainloss.ssh.model import build_truncated_lindblad
from gainloss.ssh.models import Engine, FockState, ModelParams, StepMethod, TimeGrid, TrajectoryOptions
from gainloss.ssh.simulator import SSHSimulator


def site_state(n_sites: int, site: int) -> FockState:
    vector = np.zeros(n_sites)
    vector[site - 1] = 1.0
    return FockState.from_site_vector(vector)


@pytest.fixture
def dissipative_params():
    return ModelParams(n_sites=4, theta=0.1 * math.pi, gamma=0.5)


@pytest.fixture
def ensemble_grid():
    return TimeGrid(t_end=10.0, dt=0.05, sample_count=20)


def test_chunk_bounds():
    """Test that chunks cover all indices and depend only on n_traj and chunk_size."""
    assert chunk_bounds(40, 16) == [(0, 16), (16, 32), (32, 40)]
    assert chunk_bounds(16, 16) == [(0, 16)]
    assert chunk_bounds(1, 16) == [(0, 1)]


def test_trajectory_streams_are_keyed():
    """Test that a stream depends on the seed and the trajectory index only."""
    first = trajectory_stream(1234, 7).random(5)
    np.testing.assert_array_equal(first, trajectory_stream(1234, 7).random(5))
    assert not np.array_equal(first, trajectory_stream(1234, 8).random(5))
    assert not np.array_equal(first, trajectory_stream(1235, 7).random(5))


def test_rk4_polynomial():
    """Test the RK4 step matrix against its scalar stability function."""
    step = rk4_polynomial(np.array([[-1j]]), 0.1)
    z = -0.1j
    assert step[0, 0] == pytest.approx(1 + z + z ** 2 / 2 + z ** 3 / 6 + z ** 4 / 24)


def test_reduce_chunks():
    """Test mean and standard error from chunk sums."""
    values = np.array([0.0, 1.0, 1.0, 0.0])
    chunks = [
        ChunkResult(total=np.array([[values[:2].sum()]]), total_sq=np.array([[np.sum(values[:2] ** 2)]]),
                    n_traj=2, n_jumps=1),
        ChunkResult(total=np.array([[values[2:].sum()]]), total_sq=np.array([[np.sum(values[2:] ** 2)]]),
                    n_traj=2, n_jumps=2),
    ]
    mean, stderr, n_jumps = reduce_chunks(chunks)
    assert mean[0, 0] == pytest.approx(0.5)
    assert stderr[0, 0] == pytest.approx(values.std(ddof=1) / 2)
    assert n_jumps == 3


def test_closed_trajectories_match_spectral(ensemble_grid):
    """Test that without dissipation every trajectory equals the exact evolution."""
    params = ModelParams(n_sites=6, theta=0.1 * math.pi)
    psi0 = site_state(6, 1)
    options = TrajectoryOptions(step_method=StepMethod.EXACT)
    ensemble = sample_trajectories(psi0, build_truncated_lindblad(params), ensemble_grid, 3, 99, options=options)
    spectral = evolve_closed_spectral(psi0, params, ensemble_grid)
    np.testing.assert_allclose(ensemble.per_site_mean, spectral.per_site_mean, atol=1e-10)
    np.testing.assert_allclose(ensemble.per_site_stderr, np.zeros((21, 6)), atol=1e-7)
    assert ensemble.engine == Engine.TRAJECTORIES
    assert ensemble.n_traj == 3


def test_closed_trajectory_has_no_jumps(ensemble_grid):
    """Test the jump count of a trajectory without channels."""
    params = ModelParams(n_sites=6, theta=0.1 * math.pi)
    model = build_truncated_lindblad(params)
    context = build_context(model, site_state(6, 2).amplitudes, ensemble_grid.step, ensemble_grid.steps_per_sample,
                            ensemble_grid.sample_count, TrajectoryOptions())
    samples, jumps = run_trajectory(context, trajectory_stream(5, 0))
    assert jumps == 0
    assert samples.shape == (21, 7)
    np.testing.assert_allclose(samples.sum(axis=1), np.ones(21), atol=1e-12)


@pytest.mark.parametrize("step_method", [StepMethod.RK4, StepMethod.EXACT])
def test_closed_propagator_conserves_norm(step_method):
    """Test that the closed-chain step keeps ‖ψ‖² = 1 to 1e-8 up to T = 1000."""
    params = ModelParams(n_sites=20, theta=0.1 * math.pi)
    grid = TimeGrid(t_end=1000.0, dt=0.05, sample_count=10)
    context = build_context(build_truncated_lindblad(params), site_state(20, 20).amplitudes, grid.step,
                            grid.steps_per_sample, grid.sample_count, TrajectoryOptions(step_method=step_method))
    assert context.step_method == StepMethod.EXACT
    psi = context.psi0
    for _ in range(grid.steps_per_sample * grid.sample_count):
        psi = context.propagator @ psi
    assert abs(np.vdot(psi, psi).real - 1.0) < 1e-8


def test_default_step_method_is_exact():
    """Test that dissipative ensembles default to the matrix-exponential propagator."""
    assert TrajectoryOptions().step_method == StepMethod.EXACT


def test_ensemble_is_reproducible(dissipative_params, ensemble_grid):
    """Test bit-identical results for equal seeds and different results otherwise."""
    model = build_truncated_lindblad(dissipative_params)
    psi0 = site_state(4, 1)
    first = sample_trajectories(psi0, model, ensemble_grid, 40, 1234)
    second = sample_trajectories(psi0, model, ensemble_grid, 40, 1234)
    other = sample_trajectories(psi0, model, ensemble_grid, 40, 4321)
    np.testing.assert_array_equal(first.per_site_mean, second.per_site_mean)
    np.testing.assert_array_equal(first.per_site_stderr, second.per_site_stderr)
    assert not np.array_equal(first.per_site_mean, other.per_site_mean)


def test_ensemble_is_independent_of_worker_count(dissipative_params, ensemble_grid):
    """Test that a process pool reproduces the in-process ensemble exactly."""
    model = build_truncated_lindblad(dissipative_params)
    psi0 = site_state(4, 1)
    serial = sample_trajectories(psi0, model, ensemble_grid, 40, 1234)
    with SSHSimulator(workers=2) as sim:
        parallel = sample_trajectories(psi0, model, ensemble_grid, 40, 1234, mapper=sim.map)
    np.testing.assert_array_equal(serial.per_site_mean, parallel.per_site_mean)
    np.testing.assert_array_equal(serial.vacuum_prob, parallel.vacuum_prob)


def test_sparse_propagator_gives_same_ensemble(dissipative_params, ensemble_grid):
    """Test that storing the propagator sparsely does not change the trajectories."""
    model = build_truncated_lindblad(dissipative_params)
    psi0 = site_state(4, 1)
    dense = sample_trajectories(psi0, model, ensemble_grid, 16, 7)
    sparse = sample_trajectories(psi0, model, ensemble_grid, 16, 7, options=TrajectoryOptions(sparse_threshold=1))
    np.testing.assert_allclose(dense.per_site_mean, sparse.per_site_mean, atol=1e-10)


def test_ensemble_agrees_with_master(dissipative_params, ensemble_grid):
    """Test that the ensemble mean lies within three standard errors of the master equation."""
    model = build_truncated_lindblad(dissipative_params)
    psi0 = site_state(4, 1)
    options = TrajectoryOptions(step_method=StepMethod.EXACT)
    ensemble = sample_trajectories(psi0, model, ensemble_grid, 200, 2024, options=options)
    master = evolve_master_rk4(pure_density_matrix(psi0), model,
                               TimeGrid(t_end=10.0, dt=0.01, sample_count=20))
    deviation = np.abs(np.asarray(ensemble.per_site_mean) - np.asarray(master.per_site_mean))
    within = deviation <= np.maximum(3 * np.asarray(ensemble.per_site_stderr), 1e-8)
    assert within.mean() >= 0.9
    total = np.asarray(ensemble.per_site_mean).sum(axis=1) + np.asarray(ensemble.vacuum_prob)
    np.testing.assert_allclose(total, np.ones(21), atol=1e-12)


def test_sample_trajectories_validation(dissipative_params, ensemble_grid):
    """Test rejection of empty ensembles and unnormalized states."""
    model = build_truncated_lindblad(dissipative_params)
    with pytest.raises(SSHInputError) as exc_info:
        sample_trajectories(site_state(4, 1), model, ensemble_grid, 0, 1)
    assert "n_traj" in str(exc_info.value)

    half = FockState(amplitudes=np.array([0.0, 0.5, 0.0, 0.0, 0.0]))
    with pytest.raises(SSHInputError) as exc_info:
        sample_trajectories(half, model, ensemble_grid, 4, 1)
    assert "normalized" in str(exc_info.value)

    with pytest.raises(SSHInputError):
        sample_trajectories(site_state(6, 1), model, ensemble_grid, 4, 1)
