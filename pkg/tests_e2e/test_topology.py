import math
from typing import TYPE_CHECKING

import numpy as np

from gainloss.ssh.models import ModelParams
from gainloss.ssh.spectral import stationary_report, zak_phase
from logger import get_logger

if TYPE_CHECKING:
    from test_runner import TestRunner

logger = get_logger(__name__)


def test_zak_transition(runner: 'TestRunner') -> None:
    """
    Zak phase across the transition at Θ = π/2.

    Tests:
    - π for Θ in {0.1π, ..., 0.45π}
    - 0 for Θ in {0.55π, ..., 0.9π}
    """
    logger.info("Starting Zak phase test")
    nontrivial = np.arange(0.10, 0.451, 0.05) * math.pi
    trivial = np.arange(0.55, 0.901, 0.05) * math.pi
    for theta in nontrivial:
        invariant = zak_phase(ModelParams(n_sites=4, theta=theta))
        assert abs(invariant.zak_phase - math.pi) < 1e-6, f"theta={theta / math.pi:.2f}pi: {invariant.zak_phase}"
        assert invariant.winding_number == 1
    for theta in trivial:
        invariant = zak_phase(ModelParams(n_sites=4, theta=theta))
        assert abs(invariant.zak_phase) < 1e-6, f"theta={theta / math.pi:.2f}pi: {invariant.zak_phase}"
        assert invariant.winding_number == 0
    logger.info("Zak phase test completed successfully")


def test_pt_breaking_count(runner: 'TestRunner') -> None:
    """
    PT-broken pairs of the complex-potential chain at N=200, γ=0.1.

    Tests:
    - one pair at Θ=0.1π, both members localized at the edges
    - no pair at Θ=0.9π
    """
    logger.info("Starting PT breaking test")
    report = stationary_report(ModelParams(n_sites=200, theta=0.1 * math.pi, gamma=0.1))
    assert report.pt.n_complex_pairs == 1, f"expected 1 pair, found {report.pt.n_complex_pairs}"
    broken = [label for label in report.spectrum.labels if label.is_pt_broken]
    assert len(broken) == 2
    for label in broken:
        weight = label.edge_weight_left + label.edge_weight_right
        assert weight > 0.9, f"broken state has edge weight {weight:.3f}"

    trivial = stationary_report(ModelParams(n_sites=200, theta=0.9 * math.pi, gamma=0.1))
    assert trivial.pt.n_complex_pairs == 0, f"expected 0 pairs, found {trivial.pt.n_complex_pairs}"
    assert np.max(np.abs(np.imag(trivial.spectrum.eigenvalues))) < 1e-8
    logger.info("PT breaking test completed successfully")
