import itertools
import math
from typing import TYPE_CHECKING

import numpy as np

from gainloss.ssh.models import Engine, InitialKind, InitialStateSpec, ModelParams, Side, TrajectoryOptions
from gainloss.ssh.observables import edge_occupation, max_site_share
from logger import get_logger
from utils import desk_grid

if TYPE_CHECKING:
    from test_runner import TestRunner

logger = get_logger(__name__)

INITIAL_KINDS = (InitialKind.EDGE_RIGHT, InitialKind.EDGE_LEFT, InitialKind.BULK)


def _snapshots(runner: 'TestRunner', theta: float) -> dict:
    config = runner.config
    params = ModelParams(n_sites=config.n_sites, theta=theta, gamma=0.1)
    options = TrajectoryOptions(n_traj=config.n_traj, seed=config.seed)
    return {
        kind: runner.sim.experiments.run_snapshot_experiment(InitialStateSpec(kind=kind), params, desk_grid(),
                                                             Engine.TRAJECTORIES, options)
        for kind in INITIAL_KINDS
    }


def test_open_edge_dominance(runner: 'TestRunner') -> None:
    """
    Time-averaged profiles at Θ=0.1π, γ=0.1 for edge and bulk initial states.

    Tests:
    - every profile peaks at site N
    - the three profiles agree pairwise within 4 standard errors at every site
    """
    logger.info("Starting open-system edge dominance test")
    snapshots = _snapshots(runner, 0.1 * math.pi)
    n_sites = runner.config.n_sites
    for kind, snapshot in snapshots.items():
        peak = int(np.argmax(snapshot.final_profile.per_site)) + 1
        assert peak == n_sites, f"{kind.value}: maximum at site {peak}"

    # Serial correlation makes the averaged per-sample errors an upper bound
    errors = {kind: np.asarray(s.series.per_site_stderr).mean(axis=0) for kind, s in snapshots.items()}
    for a, b in itertools.combinations(INITIAL_KINDS, 2):
        deviation = np.abs(snapshots[a].final_profile.per_site - snapshots[b].final_profile.per_site)
        bound = 4 * np.sqrt(errors[a] ** 2 + errors[b] ** 2)
        worst = int(np.argmax(deviation - bound))
        assert np.all(deviation <= bound), \
            f"{a.value} vs {b.value}: site {worst + 1} deviates by {deviation[worst]:.3e} > {bound[worst]:.3e}"
    logger.info("Edge dominance test completed successfully")


def test_open_trivial_phase(runner: 'TestRunner') -> None:
    """
    Time-averaged profiles at Θ=0.9π, γ=0.1.

    Tests:
    - |left − right| edge occupation over 10 sites below 0.05
    - no site holds more than 5% of the occupation
    """
    logger.info("Starting open-system trivial phase test")
    for kind, snapshot in _snapshots(runner, 0.9 * math.pi).items():
        profile = snapshot.final_profile
        contrast = abs(edge_occupation(profile, 10, Side.LEFT) - edge_occupation(profile, 10, Side.RIGHT))
        assert contrast < 0.05, f"{kind.value}: edge contrast {contrast:.4f}"
        share = max_site_share(profile)
        assert share <= 0.05, f"{kind.value}: one site holds {share:.2%}"
    logger.info("Trivial phase test completed successfully")
