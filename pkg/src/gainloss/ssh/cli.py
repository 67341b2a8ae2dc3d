"""Command-line interface: ``gainloss-ssh <command> [options]``."""
import argparse
import json
import math
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from rich.console import Console
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn
from rich.table import Table

from gainloss.ssh.config import RunConfig, get_settings, parse_config
from gainloss.ssh.exceptions import ConfigError, SSHComputationError, SSHInputError
from gainloss.ssh.io import (
    code_version,
    write_json,
    write_manifest,
    write_profile,
    write_series,
    write_spectrum,
    write_sweep,
)
from gainloss.ssh.logger import setup_global_logging
from gainloss.ssh.model import build_ssh_hamiltonian
from gainloss.ssh.models import ChannelLayout, HamiltonianFlavor, InitialKind, RunManifest
from gainloss.ssh.simulator import SSHSimulator
from gainloss.ssh.spectral import classify_edge_states, eigendecompose_hermitian, stationary_report, zak_phase

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_INPUT = 2
EXIT_COMPUTATION = 3


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with one flag per run-configuration key."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="flat key = value run configuration file")
    common.add_argument("--out", type=str, default=None, help="output directory (default GAINLOSS_OUTPUT_DIR)")
    common.add_argument("--threads", type=int, default=None, help="worker processes (default GAINLOSS_THREADS)")
    common.add_argument("--log-level", type=str, default=None, help="DEBUG, INFO, WARNING, ERROR or CRITICAL")
    common.add_argument("--log-file", type=str, default=None, help="also write the log to this file")
    for key in RunConfig.model_fields:
        if key == "recompute_initial":
            common.add_argument("--recompute-initial", dest=key, action="store_const", const=True, default=None,
                                help="prepare the sweep initial state at every theta")
            continue
        # Values are validated by RunConfig, so angles may be written as "0.1pi" or "pi/2"
        common.add_argument(f"--{key.replace('_', '-')}", dest=key, type=str, default=None)

    parser = argparse.ArgumentParser(prog="gainloss-ssh",
                                     description="SSH chain with edge gain and loss: spectra and dynamics")
    commands = parser.add_subparsers(dest="command", required=True)

    spectrum = commands.add_parser("spectrum", parents=[common], help="eigenvalues with edge-state labels")
    spectrum.add_argument("--flavor", choices=[f.value for f in HamiltonianFlavor],
                          default=HamiltonianFlavor.PT_COMPLEX_POTENTIAL.value)
    zak = commands.add_parser("zak", parents=[common], help="Zak phase of the lower band")
    zak.add_argument("--k-samples", type=int, default=256)
    commands.add_parser("evolve", parents=[common], help="snapshot: initial and time-averaged profile")
    commands.add_parser("sweep", parents=[common], help="edge occupation over theta with kink estimate")
    commands.add_parser("oracle-check", parents=[common], help="trajectories vs master vs covariance")
    compare = commands.add_parser("compare", parents=[common], help="dynamics vs stationary PT picture")
    compare.add_argument("--edge-window", type=int, default=10)
    gamma_scan = commands.add_parser("gamma-scan", parents=[common], help="PT-broken pairs over gamma")
    gamma_scan.add_argument("--gammas", type=str, default="0,0.01,0.05,0.1,0.2,0.5,1.0",
                            help="comma-separated gain/loss rates")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {key: getattr(args, key) for key in RunConfig.model_fields if getattr(args, key, None) is not None}


def _manifest(command: str, cfg: RunConfig, start: float, paths: List[Path], with_grid: bool = True,
              kink: Optional[float] = None) -> RunManifest:
    return RunManifest(
        command=command,
        params=cfg.to_params(),
        grid=cfg.to_grid() if with_grid else None,
        engine=cfg.engine if with_grid else None,
        seed=cfg.seed,
        n_traj=cfg.n_traj,
        code_version=code_version(),
        wall_time_s=time.perf_counter() - start,
        output_paths=[str(p) for p in paths],
        kink_estimate=kink,
    )


def _progress(console: Console) -> Progress:
    return Progress(TextColumn("[progress.description]{task.description}"), BarColumn(), MofNCompleteColumn(),
                    TimeElapsedColumn(), console=console)


def run_spectrum(args: argparse.Namespace, cfg: RunConfig, sim: SSHSimulator, out: Path,
                 console: Console) -> List[Path]:
    params = cfg.to_params()
    if args.flavor == HamiltonianFlavor.HERMITIAN_SSH.value:
        spectrum = classify_edge_states(eigendecompose_hermitian(build_ssh_hamiltonian(params)), params,
                                        cfg.midgap_factor, cfg.edge_window_fraction)
        pt = None
    else:
        report = stationary_report(params, midgap_factor=cfg.midgap_factor,
                                   edge_window_fraction=cfg.edge_window_fraction)
        spectrum, pt = report.spectrum, report.pt
    summary = {
        "flavor": args.flavor,
        "params": params.model_dump(),
        "classification": spectrum.classification.value,
        "edge_window": spectrum.edge_window,
        "n_midgap": len(spectrum.midgap_indices()),
        "pt": pt.model_dump() if pt is not None else None,
    }
    json_path = out / "spectrum.json"
    json_path.parent.mkdir(parents=True, exist_ok=True)
    json_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    console.print(f"[bold]{summary['n_midgap']}[/bold] midgap states ({spectrum.classification.value})")
    if pt is not None:
        console.print(f"PT-broken pairs: [bold]{pt.n_complex_pairs}[/bold], max Im E = {pt.max_imag:.3e}")
    return [json_path, write_spectrum(spectrum, out / "spectrum.csv")]


def run_zak(args: argparse.Namespace, cfg: RunConfig, sim: SSHSimulator, out: Path,
            console: Console) -> List[Path]:
    cfg.require_gap()
    invariant = zak_phase(cfg.to_params(), args.k_samples)
    console.print(f"Zak phase {invariant.zak_phase:.12f}, winding number [bold]{invariant.winding_number}[/bold]")
    return [write_json(invariant, out / "zak.json")]


def run_evolve(args: argparse.Namespace, cfg: RunConfig, sim: SSHSimulator, out: Path,
               console: Console) -> List[Path]:
    with console.status(f"Evolving with the {cfg.engine.value} engine..."):
        snapshot = sim.experiments.run_snapshot_experiment(cfg.to_initial_spec(), cfg.to_params(), cfg.to_grid(),
                                                           cfg.engine, cfg.to_options())
    profile = snapshot.final_profile.per_site
    console.print(f"Finished in {snapshot.wall_time_s:.1f}s; maximum of the time average at site "
                  f"[bold]{int(profile.argmax()) + 1}[/bold]")
    return [
        write_series(snapshot.series, out / "series.csv"),
        write_profile(snapshot.initial_profile, out / "initial_profile.csv"),
        write_profile(snapshot.final_profile, out / "profile.csv"),
    ]


def run_sweep(args: argparse.Namespace, cfg: RunConfig, sim: SSHSimulator, out: Path,
              console: Console) -> List[Path]:
    cfg.require_gap(include_reference=cfg.initial in (InitialKind.EDGE_LEFT, InitialKind.EDGE_RIGHT))
    thetas = cfg.theta_grid()
    with _progress(console) as progress:
        task = progress.add_task("Sweeping theta", total=len(thetas))
        result = sim.experiments.run_theta_sweep(
            cfg.to_params(), thetas, cfg.windows, cfg.to_initial_spec(), cfg.to_grid(), cfg.engine,
            options=cfg.to_options(), recompute_initial=cfg.recompute_initial,
            on_point=lambda row: progress.advance(task),
        )
    table = Table(title="Kink estimates")
    table.add_column("window")
    table.add_column("theta / pi")
    table.add_column("max |second difference|")
    for a in result.windows:
        kink = result.kink_estimates.get(a)
        curvature = result.max_second_difference.get(a)
        table.add_row(str(a), "-" if kink is None else f"{kink / math.pi:.4f}",
                      "-" if curvature is None else f"{curvature:.4e}")
    console.print(table)
    args.kink_estimate = result.kink_estimate
    return write_sweep(result, out / "sweep.csv")


def run_oracle_check(args: argparse.Namespace, cfg: RunConfig, sim: SSHSimulator, out: Path,
                     console: Console) -> List[Path]:
    with console.status("Running trajectories, master equation and covariance oracle..."):
        report = sim.experiments.oracle_check(cfg.to_initial_spec(), cfg.to_params(), cfg.to_grid(),
                                              cfg.to_options())
    console.print(f"{report.fraction_within_3_sigma:.2%} of samples within 3 standard errors; "
                  f"gain-disabled covariance deviation {report.covariance_loss_only_max_deviation:.2e}")
    return [write_json(report, out / "oracle.json")]


def run_compare(args: argparse.Namespace, cfg: RunConfig, sim: SSHSimulator, out: Path,
                console: Console) -> List[Path]:
    with console.status("Comparing dynamics with the stationary spectrum..."):
        comparison = sim.experiments.compare_with_stationary(cfg.to_initial_spec(), cfg.to_params(), cfg.to_grid(),
                                                             cfg.engine, cfg.to_options(), args.edge_window)
    verdict = "[green]agree[/green]" if comparison.agrees else "[red]disagree[/red]"
    console.print(f"Prediction and dynamics {verdict}: {comparison.n_complex_pairs} complex pairs, "
                  f"maximum at site {comparison.argmax_site}")
    return [write_json(comparison, out / "compare.json")]


def run_gamma_scan(args: argparse.Namespace, cfg: RunConfig, sim: SSHSimulator, out: Path,
                   console: Console) -> List[Path]:
    try:
        gammas = [float(g) for g in args.gammas.split(",") if g.strip()]
    except ValueError:
        raise ConfigError("gammas", f"got {args.gammas!r}", valid="comma-separated non-negative reals")
    if any(g < 0 for g in gammas):
        raise ConfigError("gammas", f"got {args.gammas!r}", valid="comma-separated non-negative reals")
    reports = sim.experiments.run_gamma_scan(cfg.to_params(), gammas, ChannelLayout())
    table = Table(title="PT breaking")
    table.add_column("gamma")
    table.add_column("complex pairs")
    table.add_column("max Im E")
    for gamma, report in zip(gammas, reports):
        table.add_row(f"{gamma:g}", str(report.n_complex_pairs), f"{report.max_imag:.3e}")
    console.print(table)
    return [write_json(reports, out / "gamma_scan.json")]


HANDLERS = {
    "spectrum": run_spectrum,
    "zak": run_zak,
    "evolve": run_evolve,
    "sweep": run_sweep,
    "oracle-check": run_oracle_check,
    "compare": run_compare,
    "gamma-scan": run_gamma_scan,
}


def _emit_error(code: str, message: str, details: Any) -> None:
    line = json.dumps({"error": code, "message": message, "details": details}, default=str)
    print(line, file=sys.stderr)


def main(argv: Optional[Sequence[str]] = None, console: Optional[Console] = None) -> int:
    """
    Run one CLI command.

    Args:
        argv: Arguments without the program name; defaults to sys.argv[1:].
        console: Rich console for human output.

    Returns:
        int: The process exit code.
    """
    args = build_parser().parse_args(argv)
    console = console or Console()
    try:
        settings = get_settings()
        setup_global_logging(args.log_level or settings.log_level, args.log_file)
        cfg = parse_config(args.config, _overrides(args))
        out = Path(args.out) if args.out else settings.output_dir
        threads = args.threads if args.threads is not None else settings.threads
        if threads < 1:
            raise ConfigError("threads", f"got {threads}", valid="integer >= 1")

        start = time.perf_counter()
        args.kink_estimate = None
        with SSHSimulator(workers=threads) as sim:
            paths = HANDLERS[args.command](args, cfg, sim, out, console)
        manifest_path = out / "manifest.json"
        with_grid = args.command in ("evolve", "sweep", "oracle-check", "compare")
        write_manifest(_manifest(args.command, cfg, start, paths + [manifest_path], with_grid, args.kink_estimate),
                       manifest_path)
        console.print(f"Wrote {len(paths) + 1} files to {out}")
        return EXIT_OK
    except ConfigError as e:
        _emit_error("config", str(e), {"key": e.key, "valid": e.valid})
        return EXIT_INPUT
    except SSHInputError as e:
        _emit_error("input", str(e), {})
        return EXIT_INPUT
    except SSHComputationError as e:
        _emit_error(e.code, e.message, e.details)
        return EXIT_COMPUTATION
    except Exception as e:
        _emit_error("internal", f"{type(e).__name__}: {e}", {})
        return EXIT_OTHER


def run() -> None:
    """Console script entry point."""
    sys.exit(main())


if __name__ == "__main__":
    run()
