import csv
import json
import logging
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import List

import numpy as np
from pydantic import BaseModel

from gainloss.ssh.models import OccupationSeries, RunManifest, SpectrumReport, SweepResult, TimeAveragedProfile

logger = logging.getLogger(__name__)

DISTRIBUTION = "gainloss-ssh"


def _fmt(value: float) -> str:
    return repr(float(value))


def _prepare(path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def code_version() -> str:
    """Installed distribution version, else the VERSION file of a source checkout."""
    try:
        return version(DISTRIBUTION)
    except PackageNotFoundError:
        version_file = Path(__file__).resolve().parents[3] / "VERSION"
        if version_file.is_file():
            return version_file.read_text(encoding="utf-8").strip()
        return "unknown"


def write_series(series: OccupationSeries, path: str | Path) -> Path:
    """
    Write an occupation series as CSV ``time,site,mean_occ,stderr,vacuum_prob``.

    Rows are ordered by (time, site); sites are 1-based.

    Args:
        series (OccupationSeries): The series to write.
        path (str | Path): Output file.

    Returns:
        Path: The written file.
    """
    path = _prepare(path)
    mean = np.asarray(series.per_site_mean)
    stderr = np.asarray(series.per_site_stderr)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["time", "site", "mean_occ", "stderr", "vacuum_prob"])
        for j, t in enumerate(series.sample_times):
            time_text = _fmt(t)
            vacuum_text = _fmt(series.vacuum_prob[j])
            for i in range(mean.shape[1]):
                writer.writerow([time_text, i + 1, _fmt(mean[j, i]), _fmt(stderr[j, i]), vacuum_text])
    logger.info("Wrote series with %d samples to %s", mean.shape[0], path)
    return path


def write_profile(profile: TimeAveragedProfile | np.ndarray, path: str | Path) -> Path:
    """Write a per-site profile as CSV ``site,occupation``."""
    path = _prepare(path)
    values = np.asarray(profile.per_site if isinstance(profile, TimeAveragedProfile) else profile)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["site", "occupation"])
        for i, value in enumerate(values):
            writer.writerow([i + 1, _fmt(value)])
    logger.info("Wrote profile to %s", path)
    return path


def write_spectrum(report: SpectrumReport, path: str | Path) -> Path:
    """Write eigenvalues and labels as CSV ``index,real,imag,is_midgap,edge_weight_left,edge_weight_right``."""
    path = _prepare(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["index", "real", "imag", "is_midgap", "edge_weight_left", "edge_weight_right"])
        for k, value in enumerate(report.eigenvalues):
            label = report.labels[k] if report.labels else None
            writer.writerow([
                k, _fmt(value.real), _fmt(value.imag),
                "" if label is None else str(label.is_midgap).lower(),
                "" if label is None else _fmt(label.edge_weight_left),
                "" if label is None else _fmt(label.edge_weight_right),
            ])
    logger.info("Wrote spectrum with %d eigenvalues to %s", len(report.eigenvalues), path)
    return path


def write_sweep(result: SweepResult, path: str | Path) -> List[Path]:
    """
    Write a Θ-sweep as CSV ``theta,window,edge_occ`` plus a JSON summary next to it.

    The summary (same stem, ``.json``) holds the kink estimates; undefined kinks are null.

    Args:
        result (SweepResult): The sweep.
        path (str | Path): CSV output file.

    Returns:
        List[Path]: The CSV and the JSON summary.
    """
    path = _prepare(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["theta", "window", "edge_occ"])
        for row in result.rows:
            for a in result.windows:
                writer.writerow([_fmt(row.theta), a, _fmt(row.edge_occ[a])])

    summary_path = path.with_suffix(".json")
    summary = {
        "engine": result.engine.value,
        "windows": result.windows,
        "n_points": len(result.rows),
        "kink_estimate": result.kink_estimate,
        "kink_estimates": {str(a): k for a, k in result.kink_estimates.items()},
        "max_second_difference": {str(a): d for a, d in result.max_second_difference.items()},
    }
    summary_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    logger.info("Wrote sweep with %d points to %s", len(result.rows), path)
    return [path, summary_path]


def write_json(model: BaseModel | List[BaseModel], path: str | Path) -> Path:
    """Write a report model (or a list of them) as indented JSON."""
    path = _prepare(path)
    if isinstance(model, list):
        text = json.dumps([item.model_dump(mode="json") for item in model], indent=2)
    else:
        text = model.model_dump_json(indent=2)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def write_manifest(manifest: RunManifest, path: str | Path) -> Path:
    """Write a run manifest as JSON."""
    path = write_json(manifest, path)
    logger.info("Wrote manifest to %s", path)
    return path


def read_manifest(path: str | Path) -> RunManifest:
    """Read a run manifest written by write_manifest."""
    return RunManifest.model_validate_json(Path(path).read_text(encoding="utf-8"))
