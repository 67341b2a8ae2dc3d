"""Monte-Carlo wave-function trajectories and their chunked, order-deterministic reduction."""
import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.optimize import brentq
from scipy.sparse.linalg import expm_multiply

from gainloss.ssh.exceptions import IntegrationError
from gainloss.ssh.models import StepMethod, TrajectoryOptions, TruncatedLindbladModel

logger = logging.getLogger(__name__)


def trajectory_stream(seed: int, index: int) -> np.random.Generator:
    """Counter-based Philox stream keyed by (seed, trajectory index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def chunk_bounds(n_traj: int, chunk_size: int) -> List[Tuple[int, int]]:
    """Half-open trajectory index ranges; depend only on n_traj and chunk_size."""
    return [(start, min(start + chunk_size, n_traj)) for start in range(0, n_traj, chunk_size)]


def rk4_polynomial(generator: np.ndarray, step: float) -> np.ndarray:
    """One RK4 step for dy/dt = A·y as the matrix Σ_{k≤4} (A·step)^k / k!."""
    scaled = generator * step
    term = np.eye(generator.shape[0], dtype=complex)
    total = term.copy()
    for k in range(1, 5):
        term = term @ scaled / k
        total = total + term
    return total


@dataclass(frozen=True)
class TrajectoryContext:
    """Pre-computed operators shared by all trajectories of one ensemble."""
    propagator: np.ndarray | sparse.csr_matrix
    h_eff: sparse.csr_matrix
    jumps: Tuple[sparse.csr_matrix, ...]
    psi0: np.ndarray
    step: float
    steps_per_sample: int
    sample_count: int
    step_method: StepMethod


@dataclass(frozen=True)
class ChunkTask:
    """Work unit: a contiguous range of trajectory indices."""
    context: TrajectoryContext
    seed: int
    start: int
    stop: int


@dataclass
class ChunkResult:
    """Sums over the trajectories of one chunk, accumulated in index order."""
    total: np.ndarray
    total_sq: np.ndarray
    n_traj: int
    n_jumps: int


def build_context(model: TruncatedLindbladModel, psi0: np.ndarray, step: float, steps_per_sample: int,
                  sample_count: int, options: TrajectoryOptions) -> TrajectoryContext:
    """
    Pre-compute the one-step no-jump propagator and the jump operators.

    Args:
        model (TruncatedLindbladModel): The operator set.
        psi0 (np.ndarray): Normalized initial amplitudes of length N+1.
        step (float): Integrator step.
        steps_per_sample (int): Steps between two samples.
        sample_count (int): Number of sample intervals s.
        options (TrajectoryOptions): Ensemble options.

    Returns:
        TrajectoryContext: Picklable context for the workers.
    """
    generator = -1j * np.asarray(model.h_eff)
    # Without jump channels nothing renormalizes ψ, so the step must be unitary.
    if options.step_method == StepMethod.EXACT or not model.jumps:
        propagator = scipy.linalg.expm(generator * step)
    else:
        propagator = rk4_polynomial(generator, step)
    if model.dim > options.sparse_threshold:
        propagator[np.abs(propagator) < 1e-300] = 0.0
        propagator = sparse.csr_matrix(propagator)
    return TrajectoryContext(
        propagator=propagator,
        h_eff=sparse.csr_matrix(model.h_eff),
        jumps=tuple(model.jumps),
        psi0=np.asarray(psi0, dtype=complex),
        step=step,
        steps_per_sample=steps_per_sample,
        sample_count=sample_count,
        step_method=options.step_method if model.jumps else StepMethod.EXACT,
    )


def _draw_threshold(rng: np.random.Generator) -> float:
    r = rng.random()
    while r == 0.0:
        r = rng.random()
    return r


def _norm2(psi: np.ndarray) -> float:
    return float(np.vdot(psi, psi).real)


class _Trajectory:
    """State of one quantum trajectory."""

    def __init__(self, context: TrajectoryContext, rng: np.random.Generator):
        self.context = context
        self.rng = rng
        self.psi = context.psi0.copy()
        self.threshold = _draw_threshold(rng)
        self.n_jumps = 0

    def _partial_step(self, psi: np.ndarray, tau: float) -> np.ndarray:
        h_eff = self.context.h_eff
        if self.context.step_method == StepMethod.EXACT:
            return expm_multiply(-1j * tau * h_eff, psi)
        k1 = -1j * (h_eff @ psi)
        k2 = -1j * (h_eff @ (psi + 0.5 * tau * k1))
        k3 = -1j * (h_eff @ (psi + 0.5 * tau * k2))
        k4 = -1j * (h_eff @ (psi + tau * k3))
        return psi + (tau / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    def _jump(self, psi: np.ndarray) -> np.ndarray:
        candidates = [op @ psi for op in self.context.jumps]
        weights = np.array([_norm2(c) for c in candidates])
        total = weights.sum()
        if total <= 0.0:
            raise IntegrationError(
                "forced jump with all channel weights zero",
                details={"dt": self.context.step, "suggested_dt": self.context.step / 2},
            )
        channel = int(np.searchsorted(np.cumsum(weights), self.rng.random() * total, side="right"))
        channel = min(channel, len(candidates) - 1)
        self.n_jumps += 1
        return candidates[channel] / np.sqrt(weights[channel])

    def advance(self) -> None:
        """Advance by one integrator step, resolving any jumps inside it."""
        context = self.context
        trial = context.propagator @ self.psi
        if not context.jumps or _norm2(trial) > self.threshold:
            self.psi = trial
            return

        psi = self.psi
        remaining = context.step
        while remaining > 0.0:
            end = self._partial_step(psi, remaining)
            if _norm2(end) > self.threshold:
                psi = end
                break
            start = psi
            tau = brentq(lambda t: _norm2(self._partial_step(start, t)) - self.threshold,
                         0.0, remaining, xtol=1e-12)
            psi = self._jump(self._partial_step(start, tau))
            self.threshold = _draw_threshold(self.rng)
            remaining -= tau
        self.psi = psi

    def probabilities(self) -> np.ndarray:
        return np.abs(self.psi) ** 2 / _norm2(self.psi)


def run_trajectory(context: TrajectoryContext, rng: np.random.Generator) -> Tuple[np.ndarray, int]:
    """
    Run one trajectory over the full grid.

    Args:
        context (TrajectoryContext): Shared operators.
        rng (np.random.Generator): The trajectory's own stream.

    Returns:
        Tuple[np.ndarray, int]: Fock-basis probabilities of shape (s+1, N+1) and the jump count.
    """
    trajectory = _Trajectory(context, rng)
    samples = np.empty((context.sample_count + 1, context.psi0.shape[0]))
    samples[0] = trajectory.probabilities()
    for j in range(1, context.sample_count + 1):
        for _ in range(context.steps_per_sample):
            trajectory.advance()
        samples[j] = trajectory.probabilities()
    return samples, trajectory.n_jumps


def run_chunk(task: ChunkTask) -> ChunkResult:
    """Run trajectories start..stop-1 and sum their samples in index order."""
    shape = (task.context.sample_count + 1, task.context.psi0.shape[0])
    total = np.zeros(shape)
    total_sq = np.zeros(shape)
    n_jumps = 0
    for index in range(task.start, task.stop):
        samples, jumps = run_trajectory(task.context, trajectory_stream(task.seed, index))
        total += samples
        total_sq += samples ** 2
        n_jumps += jumps
    logger.debug("Finished trajectories %d..%d (%d jumps)", task.start, task.stop - 1, n_jumps)
    return ChunkResult(total=total, total_sq=total_sq, n_traj=task.stop - task.start, n_jumps=n_jumps)


def reduce_chunks(results: List[ChunkResult]) -> Tuple[np.ndarray, np.ndarray, int]:
    """
    Combine chunk sums in chunk order into mean and standard error.

    Returns:
        Tuple[np.ndarray, np.ndarray, int]: Mean, standard error (sample stddev / √n) and total jumps.
    """
    total = np.zeros_like(results[0].total)
    total_sq = np.zeros_like(results[0].total_sq)
    n = 0
    n_jumps = 0
    for result in results:
        total += result.total
        total_sq += result.total_sq
        n += result.n_traj
        n_jumps += result.n_jumps
    mean = total / n
    if n > 1:
        variance = np.clip((total_sq - n * mean ** 2) / (n - 1), 0.0, None)
        stderr = np.sqrt(variance / n)
    else:
        stderr = np.zeros_like(mean)
    return mean, stderr, n_jumps
