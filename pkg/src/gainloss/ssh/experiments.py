import logging
import time
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from gainloss.ssh.exceptions import NoEdgePairError, SSHInputError
from gainloss.ssh.lindblad import (
    Mapper,
    covariance_evolve,
    evolve_closed_spectral,
    integrate_master,
    pure_density_matrix,
    sample_trajectories,
    single_particle_covariance,
    truncation_report,
)
from gainloss.ssh.model import build_ssh_hamiltonian, build_truncated_lindblad
from gainloss.ssh.models import (
    AverageConvention,
    ChannelLayout,
    Engine,
    FockState,
    InitialKind,
    InitialStateSpec,
    ModelParams,
    OccupationSeries,
    OracleReport,
    PTBreakingReport,
    Side,
    SnapshotResult,
    StationaryComparison,
    SweepResult,
    SweepRow,
    TimeGrid,
    TrajectoryOptions,
)
from gainloss.ssh.observables import edge_occupation, occupation_profile, time_average
from gainloss.ssh.spectral import classify_edge_states, eigendecompose_hermitian, stationary_report

logger = logging.getLogger(__name__)


def evolve_state(psi0: FockState, params: ModelParams, grid: TimeGrid, engine: Engine,
                 options: TrajectoryOptions | None = None, layout: ChannelLayout | None = None,
                 mapper: Mapper = map) -> OccupationSeries:
    """
    Dispatch one evolution to the requested engine.

    Args:
        psi0 (FockState): Initial state.
        params (ModelParams): Model parameters.
        grid (TimeGrid): Observation grid.
        engine (Engine): Engine to use; spectral requires γ = 0.
        options (TrajectoryOptions | None): Ensemble options for the trajectory engine.
        layout (ChannelLayout | None): Reservoir placement.
        mapper (Mapper): Order-preserving map for trajectory chunks.

    Returns:
        OccupationSeries: The sampled occupations.
    """
    engine = Engine(engine)
    if engine == Engine.SPECTRAL:
        return evolve_closed_spectral(psi0, params, grid)
    if engine == Engine.COVARIANCE:
        if abs(psi0.amplitudes[0]) > 1e-12:
            raise SSHInputError("covariance engine requires zero vacuum amplitude")
        return covariance_evolve(single_particle_covariance(psi0), params, grid, layout)

    model = build_truncated_lindblad(params, layout)
    if engine == Engine.MASTER:
        series, _ = integrate_master(pure_density_matrix(psi0), model, grid)
        return series
    options = options or TrajectoryOptions()
    return sample_trajectories(psi0, model, grid, options.n_traj, options.seed, options=options, mapper=mapper)


def second_differences(values: Sequence[float]) -> np.ndarray:
    """Discrete second differences v[i-1] − 2·v[i] + v[i+1] at the interior points."""
    values = np.asarray(values, dtype=float)
    return values[:-2] - 2 * values[1:-1] + values[2:]


def kink_estimate(thetas: Sequence[float], values: Sequence[float]) -> Tuple[Optional[float], Optional[float]]:
    """
    Locate a kink as the interior Θ where the second difference is largest.

    Negative curvature at the concave shoulder of a drop is not a kink.

    Args:
        thetas (Sequence[float]): Strictly increasing angles.
        values (Sequence[float]): Edge occupations at those angles.

    Returns:
        Tuple[Optional[float], Optional[float]]: The kink Θ and the largest second difference,
            both None with fewer than three points.
    """
    if len(thetas) < 3:
        return None, None
    curvature = second_differences(values)
    index = int(np.argmax(curvature))
    return float(thetas[index + 1]), float(curvature[index])


def derive_seed(seed: int, index: int) -> int:
    """64-bit seed of sub-run index derived from the root seed."""
    state = np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(1, np.uint64)
    return int(state[0])


@dataclass(frozen=True)
class SweepPointTask:
    """One Θ-point of a sweep; picklable for the worker pool."""
    index: int
    params: ModelParams
    psi0: FockState
    grid: TimeGrid
    engine: Engine
    windows: Tuple[int, ...]
    options: TrajectoryOptions | None
    layout: ChannelLayout | None
    convention: AverageConvention


def run_sweep_point(task: SweepPointTask) -> SweepRow:
    """Evolve one Θ-point in-process and record its edge occupations."""
    start = time.perf_counter()
    options = task.options
    if options is not None:
        options = options.model_copy(update={"seed": derive_seed(options.seed, task.index)})
    series = evolve_state(task.psi0, task.params, task.grid, task.engine, options, task.layout)
    profile = time_average(series, task.convention)
    edge_occ = {a: edge_occupation(profile, a, Side.RIGHT) for a in task.windows}
    runtime = time.perf_counter() - start
    logger.debug("Sweep point theta=%.6f finished in %.2fs", task.params.theta, runtime)
    return SweepRow(theta=task.params.theta, edge_occ=edge_occ, runtime_s=runtime)


class ExperimentRunner:
    """
    Handles the experiment drivers of the SSHSimulator.
    """

    def __init__(self, sim):
        """
        Initialize the ExperimentRunner.

        Args:
            sim (SSHSimulator): The simulator owning the worker pool.
        """
        self._sim = sim
        self.logger = logging.getLogger(__name__)

    def prepare_initial_state(self, spec: InitialStateSpec, params: ModelParams) -> FockState:
        """
        Build an initial state from eigenstates of H_SSH at Θ_ref.

        The edge states are the combinations of the two midgap eigenvectors with maximal
        right (or left) half-chain weight.

        Args:
            spec (InitialStateSpec): Initial state recipe.
            params (ModelParams): Model parameters; Θ is replaced by spec.theta_ref.

        Returns:
            FockState: Normalized state with zero vacuum amplitude (except for kind=vacuum).

        Raises:
            NoEdgePairError: If an edge state is requested and Θ_ref has no midgap pair.
            SSHInputError: If bulk_index names a midgap state or site_index is out of range.
        """
        self.logger.info("Preparing %s initial state: N=%d, theta_ref=%.6f",
                         spec.kind.value, params.n_sites, spec.theta_ref)
        n = params.n_sites
        if spec.kind == InitialKind.VACUUM:
            amplitudes = np.zeros(n + 1, dtype=complex)
            amplitudes[0] = 1.0
            return FockState(amplitudes=amplitudes)
        if spec.kind == InitialKind.SITE:
            if spec.site_index > n:
                raise SSHInputError(f"site_index must be in [1, {n}], got {spec.site_index}")
            vector = np.zeros(n)
            vector[spec.site_index - 1] = 1.0
            return FockState.from_site_vector(vector)

        reference = params.with_theta(spec.theta_ref)
        spectrum = eigendecompose_hermitian(build_ssh_hamiltonian(reference))
        spectrum = classify_edge_states(spectrum, reference, spec.midgap_factor, spec.edge_window_fraction)
        vectors = np.asarray(spectrum.eigenvectors).real
        midgap = spectrum.midgap_indices()

        if spec.kind == InitialKind.BULK:
            bulk = [i for i in range(n) if i not in midgap]
            if spec.bulk_index is None:
                index = int(np.random.default_rng(spec.bulk_seed).choice(bulk))
            elif spec.bulk_index in bulk:
                index = spec.bulk_index
            else:
                raise SSHInputError(f"bulk_index must name a non-midgap eigenstate in [0, {n - 1}], "
                                    f"got {spec.bulk_index}")
            self.logger.debug("Bulk initial state uses eigenstate %d", index)
            return FockState.from_site_vector(_orient(vectors[:, index]))

        if len(midgap) != 2:
            raise NoEdgePairError(
                f"expected 2 midgap states at theta_ref={spec.theta_ref:.6f}, found {len(midgap)}; "
                "edge initial states require a reference angle in the nontrivial phase"
            )
        pair = vectors[:, midgap]
        right_half = np.zeros(n)
        right_half[n // 2:] = 1.0
        # Rotation within the midgap pair maximizing (or minimizing) the right-half weight
        _, rotations = np.linalg.eigh(pair.T @ (right_half[:, None] * pair))
        column = 1 if spec.kind == InitialKind.EDGE_RIGHT else 0
        vector = pair @ rotations[:, column]
        return FockState.from_site_vector(_orient(vector / np.linalg.norm(vector)))

    def run_snapshot_experiment(self, spec: InitialStateSpec, params: ModelParams, grid: TimeGrid,
                                engine: Engine, options: TrajectoryOptions | None = None,
                                layout: ChannelLayout | None = None,
                                convention: AverageConvention = AverageConvention.NORMALIZED,
                                initial_state: FockState | None = None) -> SnapshotResult:
        """
        Evolve one initial state and record its initial and time-averaged profiles.

        Args:
            spec (InitialStateSpec): Initial state recipe.
            params (ModelParams): Model parameters.
            grid (TimeGrid): Observation grid.
            engine (Engine): Engine to use; spectral requires γ = 0.
            options (TrajectoryOptions | None): Ensemble options for the trajectory engine.
            layout (ChannelLayout | None): Reservoir placement.
            convention (AverageConvention): Temporal mean convention.
            initial_state (FockState | None): Use this state instead of preparing one from spec.

        Returns:
            SnapshotResult: Initial profile, final profile and the full series.
        """
        engine = Engine(engine)
        self.logger.info("Snapshot: N=%d, theta=%.6f, gamma=%g, engine=%s, initial=%s",
                         params.n_sites, params.theta, params.gamma, engine.value, spec.kind.value)
        start = time.perf_counter()
        psi0 = initial_state if initial_state is not None else self.prepare_initial_state(spec, params)
        series = evolve_state(psi0, params, grid, engine, options, layout, self._sim.map)
        return SnapshotResult(
            initial_profile=occupation_profile(psi0),
            final_profile=time_average(series, convention),
            series=series,
            engine=engine,
            wall_time_s=time.perf_counter() - start,
        )

    def run_theta_sweep(self, params_template: ModelParams, theta_grid: Iterable[float], windows: Iterable[int],
                        spec: InitialStateSpec, grid: TimeGrid, engine: Engine,
                        options: TrajectoryOptions | None = None, layout: ChannelLayout | None = None,
                        recompute_initial: bool = False,
                        convention: AverageConvention = AverageConvention.NORMALIZED,
                        on_point: Callable[[SweepRow], None] | None = None) -> SweepResult:
        """
        Record right-edge occupations over a grid of dimerization angles.

        Args:
            params_template (ModelParams): Parameters whose Θ is replaced per point.
            theta_grid (Iterable[float]): Strictly increasing angles.
            windows (Iterable[int]): Edge window sizes a, each at most N/2.
            spec (InitialStateSpec): Initial state recipe.
            grid (TimeGrid): Observation grid.
            engine (Engine): Engine to use.
            options (TrajectoryOptions | None): Ensemble options; each point gets a seed derived from options.seed.
            layout (ChannelLayout | None): Reservoir placement.
            recompute_initial (bool): Prepare the initial state at each Θ instead of once at Θ_ref,
                falling back to the Θ_ref state where Θ has no midgap pair.
            convention (AverageConvention): Temporal mean convention.
            on_point (Callable[[SweepRow], None] | None): Called with every finished row, in Θ order.

        Returns:
            SweepResult: Rows in Θ order and kink estimates per window.
        """
        thetas = [float(theta) for theta in theta_grid]
        windows = tuple(sorted(set(int(a) for a in windows)))
        if not windows:
            raise SSHInputError("at least one edge window is required")
        if windows[0] < 1 or 2 * windows[-1] > params_template.n_sites:
            raise SSHInputError(f"edge windows must lie in [1, {params_template.n_sites // 2}], got {list(windows)}")
        if any(b <= a for a, b in zip(thetas, thetas[1:])):
            raise SSHInputError("sweep thetas must be strictly increasing")

        engine = Engine(engine)
        if engine == Engine.TRAJECTORIES:
            options = options or TrajectoryOptions()
        self.logger.info("Theta sweep: %d points, N=%d, gamma=%g, engine=%s, windows=%s",
                         len(thetas), params_template.n_sites, params_template.gamma, engine.value, list(windows))

        fixed_state = self.prepare_initial_state(spec, params_template)
        tasks = []
        for index, theta in enumerate(thetas):
            params = params_template.with_theta(theta)
            psi0 = fixed_state
            if recompute_initial:
                try:
                    psi0 = self.prepare_initial_state(spec.model_copy(update={"theta_ref": theta}), params)
                except NoEdgePairError:
                    self.logger.warning("No midgap pair at theta=%.6f; using the theta_ref=%.6f state",
                                        theta, spec.theta_ref)
            tasks.append(SweepPointTask(index=index, params=params, psi0=psi0, grid=grid, engine=engine,
                                        windows=windows, options=options, layout=layout, convention=convention))

        rows = []
        for row in self._sim.imap(run_sweep_point, tasks):
            rows.append(row)
            if on_point is not None:
                on_point(row)

        kinks = {}
        curvatures = {}
        for a in windows:
            kinks[a], curvatures[a] = kink_estimate(thetas, [row.edge_occ[a] for row in rows])
        return SweepResult(
            rows=rows,
            windows=list(windows),
            engine=engine,
            kink_estimate=kinks[windows[-1]],
            kink_estimates=kinks,
            max_second_difference=curvatures,
        )

    def compare_with_stationary(self, spec: InitialStateSpec, params: ModelParams, grid: TimeGrid,
                                engine: Engine, options: TrajectoryOptions | None = None,
                                window: int = 10) -> StationaryComparison:
        """
        Check whether a broken PT pair in H_PT predicts right-edge dominance of the dynamics.

        Args:
            spec (InitialStateSpec): Initial state recipe.
            params (ModelParams): Model parameters.
            grid (TimeGrid): Observation grid.
            engine (Engine): Engine for the dynamics.
            options (TrajectoryOptions | None): Ensemble options for the trajectory engine.
            window (int): Edge window size a, clipped to N/2.

        Returns:
            StationaryComparison: Prediction, observation and their agreement.
        """
        window = max(1, min(window, params.n_sites // 2))
        snapshot = self.run_snapshot_experiment(spec, params, grid, engine, options)
        report = stationary_report(params)
        profile = snapshot.final_profile
        argmax_site = int(np.argmax(profile.per_site)) + 1
        predicted = report.pt.n_complex_pairs > 0
        observed = argmax_site > params.n_sites - window
        self.logger.info("Stationary comparison: %d complex pairs, argmax site %d", report.pt.n_complex_pairs,
                         argmax_site)
        return StationaryComparison(
            params=params,
            n_complex_pairs=report.pt.n_complex_pairs,
            max_imag=report.pt.max_imag,
            predicted_edge_dominance=predicted,
            argmax_site=argmax_site,
            right_edge_occupation=edge_occupation(profile, window, Side.RIGHT),
            left_edge_occupation=edge_occupation(profile, window, Side.LEFT),
            observed_edge_dominance=observed,
            agrees=predicted == observed,
        )

    def run_gamma_scan(self, params: ModelParams, gammas: Iterable[float],
                       layout: ChannelLayout | None = None) -> List[PTBreakingReport]:
        """
        Count PT-broken pairs of H_PT for a list of gain/loss rates.

        Args:
            params (ModelParams): Model parameters; γ is replaced per entry.
            gammas (Iterable[float]): Non-negative rates.
            layout (ChannelLayout | None): Reservoir placement.

        Returns:
            List[PTBreakingReport]: One report per rate, in input order.
        """
        gammas = [float(g) for g in gammas]
        self.logger.info("Gamma scan: N=%d, theta=%.6f, %d rates", params.n_sites, params.theta, len(gammas))
        return [stationary_report(params.with_gamma(g), layout).pt for g in gammas]

    def oracle_check(self, spec: InitialStateSpec, params: ModelParams, grid: TimeGrid,
                     options: TrajectoryOptions | None = None) -> OracleReport:
        """
        Compare the trajectory ensemble, the master equation and the covariance oracle.

        Args:
            spec (InitialStateSpec): Initial state recipe.
            params (ModelParams): Model parameters of a small chain.
            grid (TimeGrid): Observation grid.
            options (TrajectoryOptions | None): Ensemble options.

        Returns:
            OracleReport: Agreement statistics and the master-equation diagnostics.
        """
        options = options or TrajectoryOptions()
        self.logger.info("Oracle check: N=%d, gamma=%g, n_traj=%d", params.n_sites, params.gamma, options.n_traj)
        psi0 = self.prepare_initial_state(spec, params)
        model = build_truncated_lindblad(params)
        master, diagnostics = integrate_master(pure_density_matrix(psi0), model, grid)
        ensemble = sample_trajectories(psi0, model, grid, options.n_traj, options.seed, options=options,
                                       mapper=self._sim.map)
        deviation = np.abs(np.asarray(ensemble.per_site_mean) - np.asarray(master.per_site_mean))
        stderr = np.asarray(ensemble.per_site_stderr)
        within = deviation <= np.maximum(3 * stderr, 1e-8)

        loss_only = ChannelLayout.loss_only()
        master_loss = integrate_master(pure_density_matrix(psi0), build_truncated_lindblad(params, loss_only),
                                       grid)[0]
        covariance_loss = covariance_evolve(single_particle_covariance(psi0), params, grid, loss_only)
        return OracleReport(
            n_sites=params.n_sites,
            n_traj=options.n_traj,
            fraction_within_3_sigma=float(within.mean()),
            max_trajectory_deviation=float(deviation.max()),
            covariance_loss_only_max_deviation=float(np.max(np.abs(
                np.asarray(covariance_loss.per_site_mean) - np.asarray(master_loss.per_site_mean)))),
            truncation=truncation_report(psi0, params, grid),
            master=diagnostics,
        )


def _orient(vector: np.ndarray) -> np.ndarray:
    """Fix the sign so that the largest-magnitude component is positive."""
    pivot = int(np.argmax(np.abs(vector)))
    return vector if vector[pivot] >= 0 else -vector
