# 1. Install the package from the repository root: `pip install -e .`
#
# 2. On your terminal:
#    a. Go to the `demo` directory: `cd demo`
#    b. Optionally set the worker count: `export GAINLOSS_THREADS=4`
#    c. Run your code: `python gainloss-ssh-demo.py`

import math

from gainloss.ssh.config import get_settings
from gainloss.ssh.models import Engine, InitialKind, InitialStateSpec, ModelParams, Side, TimeGrid, TrajectoryOptions
from gainloss.ssh.observables import edge_occupation
from gainloss.ssh.simulator import SSHSimulator
from gainloss.ssh.spectral import stationary_report, zak_phase


def main():
    print("Starting gain/loss SSH demo...")

    params = ModelParams(n_sites=40, theta=0.1 * math.pi, gamma=0.1)
    grid = TimeGrid(t_end=200.0, dt=0.05, sample_count=200)

    # Topology of the bulk and PT breaking of the finite chain
    print(f"Winding number: {zak_phase(params).winding_number}")
    report = stationary_report(params)
    print(f"Midgap states: {report.n_midgap}, PT-broken pairs: {report.pt.n_complex_pairs}")

    with SSHSimulator(workers=get_settings().threads) as sim:
        # Start on the left edge and watch the particle move to the gain site
        snapshot = sim.experiments.run_snapshot_experiment(
            InitialStateSpec(kind=InitialKind.EDGE_LEFT), params, grid, Engine.TRAJECTORIES,
            TrajectoryOptions(n_traj=100, seed=7),
        )
        profile = snapshot.final_profile
        print(f"Left edge occupation:  {edge_occupation(profile, 4, Side.LEFT):.3f}")
        print(f"Right edge occupation: {edge_occupation(profile, 4, Side.RIGHT):.3f}")

        # Closed-chain sweep across the topological transition
        sweep = sim.experiments.run_theta_sweep(
            params.with_gamma(0.0), [k * math.pi / 10 for k in range(1, 10)], [4],
            InitialStateSpec(kind=InitialKind.EDGE_RIGHT), grid, Engine.SPECTRAL,
        )
        for row in sweep.rows:
            print(f"theta = {row.theta / math.pi:.1f}pi: edge occupation {row.edge_occ[4]:.3f}")
        if sweep.kink_estimate is not None:
            print(f"Kink at theta = {sweep.kink_estimate / math.pi:.2f}pi")

    print("Demo completed!")


if __name__ == "__main__":
    main()
