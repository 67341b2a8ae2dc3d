import logging
from typing import Callable, Iterable, Sequence, Tuple

import numpy as np
from scipy import sparse

from gainloss.ssh.ensemble import ChunkTask, build_context, chunk_bounds, reduce_chunks, run_chunk
from gainloss.ssh.exceptions import IntegrationError, SSHInputError
from gainloss.ssh.model import build_ssh_hamiltonian, build_truncated_lindblad, hopping_amplitudes, ssh_matrix
from gainloss.ssh.models import (
    ChannelLayout,
    CovarianceMatrix,
    DensityMatrix,
    Engine,
    FockState,
    HamiltonianMatrix,
    MasterDiagnostics,
    ModelParams,
    OccupationSeries,
    TimeGrid,
    TrajectoryOptions,
    TruncatedLindbladModel,
    TruncationReport,
)
from gainloss.ssh.spectral import eigendecompose_hermitian

logger = logging.getLogger(__name__)

Mapper = Callable[[Callable, Iterable], Iterable]

# Sample times evaluated per block by the spectral engine
SPECTRAL_BLOCK = 256

# Generators at or below this dimension run on dense arrays
DENSE_DIMENSION = 64

TRACE_TOLERANCE = 1e-6
NEGATIVITY_TOLERANCE = 1e-6
OCCUPATION_TOLERANCE = 1e-6


def _rk4_step(rhs: Callable[[np.ndarray], np.ndarray], y: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * h * k1)
    k3 = rhs(y + 0.5 * h * k2)
    k4 = rhs(y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _series(grid: TimeGrid, mean: np.ndarray, vacuum: np.ndarray, engine: Engine,
            stderr: np.ndarray | None = None, n_traj: int | None = None) -> OccupationSeries:
    return OccupationSeries(
        sample_times=grid.sample_times,
        per_site_mean=mean,
        per_site_stderr=np.zeros_like(mean) if stderr is None else stderr,
        vacuum_prob=vacuum,
        grid=grid,
        engine=engine,
        n_traj=n_traj,
    )


def pure_density_matrix(psi: FockState) -> DensityMatrix:
    """Projector |ψ⟩⟨ψ| on the truncated Fock space."""
    amplitudes = np.asarray(psi.amplitudes, dtype=complex)
    return DensityMatrix(entries=np.outer(amplitudes, amplitudes.conj()))


def single_particle_covariance(psi0: FockState) -> CovarianceMatrix:
    """Initial correlators C_ij = ψ̄_i ψ_j of the one-particle block; the vacuum part contributes nothing."""
    sites = np.asarray(psi0.amplitudes[1:], dtype=complex)
    entries = np.outer(sites.conj(), sites)
    return CovarianceMatrix(entries=0.5 * (entries + entries.conj().T))


# Spectral engine

def propagate_spectral(psi0_sites: np.ndarray, hamiltonian: np.ndarray | HamiltonianMatrix,
                       grid: TimeGrid) -> OccupationSeries:
    """
    Evolve a single-particle vector under a real symmetric chain Hamiltonian.

    Works at the matrix level, so the two-site dimer is accepted.

    Args:
        psi0_sites (np.ndarray): Amplitudes on the N sites.
        hamiltonian (np.ndarray | HamiltonianMatrix): Real symmetric N×N matrix.
        grid (TimeGrid): Observation grid.

    Returns:
        OccupationSeries: |Σ_k v_ik e^{−iE_k t_j} ⟨v_k|ψ₀⟩|² at every sample time.
    """
    spectrum = eigendecompose_hermitian(hamiltonian)
    vectors = np.asarray(spectrum.eigenvectors)
    energies = np.asarray(spectrum.eigenvalues).real
    psi0_sites = np.asarray(psi0_sites, dtype=complex)
    if psi0_sites.shape != (vectors.shape[0],):
        raise SSHInputError(f"initial vector has shape {psi0_sites.shape}, expected ({vectors.shape[0]},)")

    coefficients = vectors.conj().T @ psi0_sites
    times = grid.sample_times
    mean = np.empty((len(times), vectors.shape[0]))
    for start in range(0, len(times), SPECTRAL_BLOCK):
        block = times[start:start + SPECTRAL_BLOCK]
        phases = np.exp(-1j * np.outer(energies, block)) * coefficients[:, None]
        mean[start:start + len(block)] = (np.abs(vectors @ phases) ** 2).T

    vacuum = np.full(len(times), max(0.0, 1.0 - float(np.vdot(psi0_sites, psi0_sites).real)))
    return _series(grid, mean, vacuum, Engine.SPECTRAL)


def evolve_closed_spectral(psi0: FockState, params: ModelParams, grid: TimeGrid) -> OccupationSeries:
    """
    Exact closed-system evolution in the eigenbasis of H_SSH.

    Args:
        psi0 (FockState): Initial state with zero vacuum amplitude.
        params (ModelParams): Model parameters, γ must be 0.
        grid (TimeGrid): Observation grid.

    Returns:
        OccupationSeries: Deterministic occupations.

    Raises:
        SSHInputError: If γ ≠ 0 or the vacuum amplitude is nonzero.
    """
    if params.gamma != 0:
        raise SSHInputError(f"spectral engine requires gamma=0, got {params.gamma}; use trajectories or master")
    if abs(psi0.amplitudes[0]) > 1e-12:
        raise SSHInputError("spectral engine requires zero vacuum amplitude")
    if psi0.n_sites != params.n_sites:
        raise SSHInputError(f"state has {psi0.n_sites} sites, params describe {params.n_sites}")

    logger.info("Spectral evolution: N=%d, theta=%.6f, T=%g, s=%d",
                params.n_sites, params.theta, grid.t_end, grid.sample_count)
    return propagate_spectral(psi0.amplitudes[1:], build_ssh_hamiltonian(params), grid)


# Master equation

def lindblad_generator(model: TruncatedLindbladModel) -> Callable[[np.ndarray], np.ndarray]:
    """
    Closure computing −i(h_eff ρ − ρ h_eff†) + Σ_μ L_μ ρ L_μ† on raw arrays.

    Args:
        model (TruncatedLindbladModel): The operator set.

    Returns:
        Callable[[np.ndarray], np.ndarray]: The Lindblad right-hand side.
    """
    def operator(matrix):
        return sparse.csr_matrix(matrix).toarray() if model.dim <= DENSE_DIMENSION else sparse.csr_matrix(matrix)

    h_eff = operator(model.h_eff)
    h_eff_conj = h_eff.conj()
    jumps = [(op, op.conj()) for op in map(operator, model.jumps)]

    def rhs(rho: np.ndarray) -> np.ndarray:
        # ρ·A† == (Ā·ρᵀ)ᵀ keeps every product sparse-times-dense
        drho = -1j * (h_eff @ rho - (h_eff_conj @ rho.T).T)
        for op, op_conj in jumps:
            drho = drho + (op_conj @ (op @ rho).T).T
        return drho

    return rhs


def lindblad_rhs(rho: DensityMatrix | np.ndarray, model: TruncatedLindbladModel) -> np.ndarray:
    """
    Evaluate −i[H, ρ] + Σ_μ (L_μ ρ L_μ† − ½{L_μ†L_μ, ρ}).

    Args:
        rho (DensityMatrix | np.ndarray): Hermitian (N+1)×(N+1) operator.
        model (TruncatedLindbladModel): The operator set.

    Returns:
        np.ndarray: The traceless Hermitian derivative.
    """
    entries = np.asarray(rho.entries if isinstance(rho, DensityMatrix) else rho, dtype=complex)
    if entries.shape != (model.dim, model.dim):
        raise SSHInputError(f"density matrix has shape {entries.shape}, model has dimension {model.dim}")
    return lindblad_generator(model)(entries)


def integrate_master(rho0: DensityMatrix, model: TruncatedLindbladModel,
                     grid: TimeGrid) -> Tuple[OccupationSeries, MasterDiagnostics]:
    """
    Integrate the master equation with fixed-step RK4 and check the invariants at every sample.

    Args:
        rho0 (DensityMatrix): Initial state with unit trace.
        model (TruncatedLindbladModel): The operator set.
        grid (TimeGrid): Observation grid.

    Returns:
        Tuple[OccupationSeries, MasterDiagnostics]: Occupations and the worst invariant values seen.

    Raises:
        SSHInputError: If the trace of rho0 is not 1.
        IntegrationError: If the trace drifts or ρ loses positivity beyond 10⁻⁶.
    """
    if abs(rho0.trace - 1.0) > 1e-9:
        raise SSHInputError(f"rho0 must have unit trace, got {rho0.trace}")
    if rho0.entries.shape != (model.dim, model.dim):
        raise SSHInputError(f"density matrix has shape {rho0.entries.shape}, model has dimension {model.dim}")

    logger.info("Master evolution: dim=%d, gamma=%g, T=%g, step=%g, s=%d",
                model.dim, model.params.gamma, grid.t_end, grid.step, grid.sample_count)
    rhs = lindblad_generator(model)
    rho = np.array(rho0.entries, dtype=complex)
    step = grid.step
    n_samples = grid.sample_count + 1
    mean = np.empty((n_samples, model.dim - 1))
    vacuum = np.empty(n_samples)
    max_drift = 0.0
    max_defect = 0.0
    min_eigenvalue = np.inf

    for j in range(n_samples):
        if j > 0:
            for _ in range(grid.steps_per_sample):
                rho = _rk4_step(rhs, rho, step)
                rho = 0.5 * (rho + rho.conj().T)
        time = j * grid.spacing
        drift = abs(float(np.trace(rho).real) - 1.0)
        lowest = float(np.linalg.eigvalsh(rho)[0])
        if drift > TRACE_TOLERANCE or lowest < -NEGATIVITY_TOLERANCE:
            raise IntegrationError(
                "density matrix invariants violated",
                details={"time": time, "dt": step, "trace_drift": drift, "min_eigenvalue": lowest,
                         "suggested_dt": step / 2},
            )
        max_drift = max(max_drift, drift)
        max_defect = max(max_defect, float(np.max(np.abs(rho - rho.conj().T))))
        min_eigenvalue = min(min_eigenvalue, lowest)
        diagonal = np.diag(rho).real
        vacuum[j] = diagonal[0]
        mean[j] = diagonal[1:]

    diagnostics = MasterDiagnostics(max_trace_drift=max_drift, max_hermiticity_defect=max_defect,
                                    min_eigenvalue=min_eigenvalue)
    logger.debug("Master diagnostics: %s", diagnostics.model_dump())
    return _series(grid, mean, vacuum, Engine.MASTER), diagnostics


def evolve_master_rk4(rho0: DensityMatrix, model: TruncatedLindbladModel, grid: TimeGrid) -> OccupationSeries:
    """Deterministic density-matrix evolution; see integrate_master for the diagnostics."""
    series, _ = integrate_master(rho0, model, grid)
    return series


# Trajectories

def sample_trajectories(psi0: FockState, model: TruncatedLindbladModel, grid: TimeGrid,
                        n_traj: int, seed: int, *, options: TrajectoryOptions | None = None,
                        mapper: Mapper = map) -> OccupationSeries:
    """
    Average the site occupations of a Monte-Carlo wave-function ensemble.

    Trajectory i draws from the stream keyed by (seed, i); chunks of options.chunk_size
    trajectories are dispatched through mapper and reduced in chunk order, so the result
    does not depend on how mapper schedules the work.

    Args:
        psi0 (FockState): Normalized initial state.
        model (TruncatedLindbladModel): The operator set.
        grid (TimeGrid): Observation grid.
        n_traj (int): Number of trajectories, at least 1.
        seed (int): Root seed.
        options (TrajectoryOptions | None): Chunking and propagator options; n_traj and seed above take precedence.
        mapper (Mapper): Order-preserving map, e.g. SSHSimulator.map.

    Returns:
        OccupationSeries: Means with standard errors sample-stddev/√n_traj.

    Raises:
        SSHInputError: If n_traj < 1 or psi0 is not normalized.
        IntegrationError: If a jump is forced while every channel weight is zero.
    """
    if n_traj < 1:
        raise SSHInputError(f"n_traj must be >= 1, got {n_traj}")
    if abs(psi0.norm - 1.0) > 1e-9:
        raise SSHInputError(f"initial state must be normalized, norm is {psi0.norm}")
    if psi0.amplitudes.shape[0] != model.dim:
        raise SSHInputError(f"state has dimension {psi0.amplitudes.shape[0]}, model has {model.dim}")
    options = (options or TrajectoryOptions()).model_copy(update={"n_traj": n_traj, "seed": seed})

    logger.info("Sampling %d trajectories: dim=%d, gamma=%g, T=%g, seed=%d",
                n_traj, model.dim, model.params.gamma, grid.t_end, seed)
    context = build_context(model, psi0.amplitudes, grid.step, grid.steps_per_sample,
                            grid.sample_count, options)
    tasks = [ChunkTask(context=context, seed=seed, start=start, stop=stop)
             for start, stop in chunk_bounds(n_traj, options.chunk_size)]
    results = list(mapper(run_chunk, tasks))
    mean, stderr, n_jumps = reduce_chunks(results)
    logger.debug("Ensemble finished with %d jumps", n_jumps)
    return _series(grid, mean[:, 1:], mean[:, 0], Engine.TRAJECTORIES, stderr=stderr[:, 1:], n_traj=n_traj)


# Covariance oracle

def covariance_generator(hamiltonian: np.ndarray, gamma: float, loss_sites: Sequence[int] = (),
                         gain_sites: Sequence[int] = ()) -> Callable[[np.ndarray], np.ndarray]:
    """
    Closure computing dC/dt = X C + C X† + γ P_gain with X = i·h − (γ/2)(P_loss + P_gain).

    Args:
        hamiltonian (np.ndarray): Real symmetric N×N single-particle matrix.
        gamma (float): Rate of every channel.
        loss_sites (Sequence[int]): 1-based sites with loss.
        gain_sites (Sequence[int]): 1-based sites with gain.

    Returns:
        Callable[[np.ndarray], np.ndarray]: The correlator right-hand side.
    """
    n = hamiltonian.shape[0]
    loss = np.zeros(n)
    gain = np.zeros(n)
    for site in loss_sites:
        loss[site - 1] = 1.0
    for site in gain_sites:
        gain[site - 1] = 1.0
    drift = 1j * np.asarray(hamiltonian, dtype=complex) - 0.5 * gamma * np.diag(loss + gain)
    drift_adjoint = drift.conj().T
    source = gamma * np.diag(gain)

    def rhs(c: np.ndarray) -> np.ndarray:
        return drift @ c + c @ drift_adjoint + source

    return rhs


def integrate_covariance(c0: np.ndarray, hamiltonian: np.ndarray, gamma: float, grid: TimeGrid,
                         loss_sites: Sequence[int] = (), gain_sites: Sequence[int] = ()) -> Tuple[np.ndarray, np.ndarray]:
    """
    RK4 integration of the correlators with occupation bounds checked at the samples.

    Returns:
        Tuple[np.ndarray, np.ndarray]: Diagonal of C per sample, shape (s+1, N), and the
            vacuum probability det(I − C) per sample.

    Raises:
        IntegrationError: If an eigenvalue of C leaves [0, 1] by more than 10⁻⁶.
    """
    rhs = covariance_generator(hamiltonian, gamma, loss_sites, gain_sites)
    c = np.array(c0, dtype=complex)
    n = c.shape[0]
    identity = np.eye(n)
    step = grid.step
    occupations = np.empty((grid.sample_count + 1, n))
    vacuum = np.empty(grid.sample_count + 1)

    for j in range(grid.sample_count + 1):
        if j > 0:
            for _ in range(grid.steps_per_sample):
                c = _rk4_step(rhs, c, step)
                c = 0.5 * (c + c.conj().T)
        bounds = np.linalg.eigvalsh(c)
        if bounds[0] < -OCCUPATION_TOLERANCE or bounds[-1] > 1 + OCCUPATION_TOLERANCE:
            raise IntegrationError(
                "covariance left the fermionic occupation bounds",
                details={"time": j * grid.spacing, "dt": step, "min_eigenvalue": float(bounds[0]),
                         "max_eigenvalue": float(bounds[-1]), "suggested_dt": step / 2},
            )
        occupations[j] = np.diag(c).real
        vacuum[j] = float(np.linalg.det(identity - c).real)
    return occupations, vacuum


def covariance_evolve(c0: CovarianceMatrix, params: ModelParams, grid: TimeGrid,
                      layout: ChannelLayout | None = None) -> OccupationSeries:
    """
    Evolve the two-point correlators on the full Fock space (no single-particle truncation).

    Args:
        c0 (CovarianceMatrix): Initial correlators.
        params (ModelParams): Model parameters.
        grid (TimeGrid): Observation grid.
        layout (ChannelLayout | None): Reservoir placement; use ChannelLayout.loss_only() to disable gain.

    Returns:
        OccupationSeries: Diagonal of C; vacuum_prob is det(I − C).
    """
    layout = layout or ChannelLayout()
    if c0.entries.shape[0] != params.n_sites:
        raise SSHInputError(f"covariance has {c0.entries.shape[0]} sites, params describe {params.n_sites}")
    loss_sites = [ChannelLayout.site_of(layout.loss_at, params.n_sites)] if layout.loss_at is not None else []
    gain_sites = [ChannelLayout.site_of(layout.gain_at, params.n_sites)] if layout.gain_at is not None else []

    logger.info("Covariance evolution: N=%d, gamma=%g, loss=%s, gain=%s, T=%g",
                params.n_sites, params.gamma, loss_sites, gain_sites, grid.t_end)
    hamiltonian = ssh_matrix(hopping_amplitudes(params), params.n_sites)
    occupations, vacuum = integrate_covariance(c0.entries, hamiltonian, params.gamma, grid, loss_sites, gain_sites)
    return _series(grid, occupations, vacuum, Engine.COVARIANCE)


def truncation_report(psi0: FockState, params: ModelParams, grid: TimeGrid,
                      layout: ChannelLayout | None = None) -> TruncationReport:
    """
    Compare the truncated master equation against the full-Fock-space correlators.

    The deviation is zero (up to integrator error) while no refill occurs and grows once
    the gain channel can add a second particle.

    Args:
        psi0 (FockState): Initial state with zero vacuum amplitude.
        params (ModelParams): Model parameters.
        grid (TimeGrid): Observation grid.
        layout (ChannelLayout | None): Reservoir placement.

    Returns:
        TruncationReport: Largest and final per-site deviation.
    """
    layout = layout or ChannelLayout()
    master = evolve_master_rk4(pure_density_matrix(psi0), build_truncated_lindblad(params, layout), grid)
    full = covariance_evolve(single_particle_covariance(psi0), params, grid, layout)
    deviation = np.asarray(full.per_site_mean) - np.asarray(master.per_site_mean)
    report = TruncationReport(
        max_abs_deviation=float(np.max(np.abs(deviation))),
        final_deviation=deviation[-1],
        gain_enabled=layout.gain_at is not None and params.gamma > 0,
    )
    logger.info("Truncation deviation: max %.3e (gain %s)", report.max_abs_deviation, report.gain_enabled)
    return report

