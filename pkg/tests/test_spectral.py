import math

import numpy as np
import pytest

from gainloss.ssh.exceptions import DegenerateBulkError, SSHInputError
from gainloss.ssh.model import build_pt_hamiltonian, build_ssh_hamiltonian, pt_matrix, ssh_matrix
from gainloss.ssh.models import EdgeClassification, HoppingPair, ModelParams
from gainloss.ssh.spectral import (
    bloch_states,
    bulk_dispersion,
    classify_edge_states,
    eigendecompose_general,
    eigendecompose_hermitian,
    edge_window_size,
    pt_breaking_report,
    stationary_report,
    wilson_loop_phase,
    zak_phase,
)


def test_dimer_spectrum():
    """Test the two-site dimer eigenvalues ±t₋."""
    report = eigendecompose_hermitian(ssh_matrix(HoppingPair(t_minus=0.7, t_plus=1.3), 2))
    np.testing.assert_allclose(report.eigenvalues.real, [-0.7, 0.7], atol=1e-14)
    assert report.hermitian
    vectors = np.asarray(report.eigenvectors)
    np.testing.assert_allclose(vectors.T @ vectors, np.eye(2), atol=1e-14)


def test_hermitian_rejects_asymmetric_matrix():
    """Test that a non-symmetric matrix is refused by the Hermitian solver."""
    with pytest.raises(SSHInputError) as exc_info:
        eigendecompose_hermitian(np.array([[0.0, 1.0], [0.5, 0.0]]))
    assert "not symmetric" in str(exc_info.value)


def test_general_solver_rejects_non_finite():
    """Test rejection of NaN entries."""
    with pytest.raises(SSHInputError):
        eigendecompose_general(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_general_matches_hermitian(closed_params):
    """Test that both solvers agree on a Hermitian chain."""
    hamiltonian = build_ssh_hamiltonian(closed_params)
    hermitian = eigendecompose_hermitian(hamiltonian)
    general = eigendecompose_general(hamiltonian)
    np.testing.assert_allclose(np.sort(general.eigenvalues.real), hermitian.eigenvalues.real, atol=1e-10)
    norms = np.linalg.norm(np.asarray(general.eigenvectors), axis=0)
    np.testing.assert_allclose(norms, np.ones(closed_params.n_sites), atol=1e-12)


def test_pt_dimer_spectrum():
    """Test the PT dimer below and above its exceptional point."""
    hop = HoppingPair(t_minus=0.7, t_plus=1.3)
    report = eigendecompose_general(pt_matrix(hop, 2, 0.1))
    np.testing.assert_allclose(report.eigenvalues.real, [-0.69282, 0.69282], atol=1e-5)
    np.testing.assert_allclose(report.eigenvalues.imag, [0.0, 0.0], atol=1e-12)

    report = eigendecompose_general(pt_matrix(hop, 2, 0.8))
    np.testing.assert_allclose(report.eigenvalues.real, [0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(np.sort(report.eigenvalues.imag), [-0.38730, 0.38730], atol=1e-5)
    assert pt_breaking_report(report).n_complex_pairs == 1


def test_chiral_spectrum_is_symmetric():
    """Test E_k = −E_{N+1−k} for the Hermitian chain."""
    report = eigendecompose_hermitian(build_ssh_hamiltonian(ModelParams(n_sites=50, theta=0.3)))
    energies = report.eigenvalues.real
    np.testing.assert_allclose(energies, -energies[::-1], atol=1e-10)


def test_edge_window_size():
    """Test ⌈N/20⌉ edge windows."""
    assert edge_window_size(200) == 10
    assert edge_window_size(201) == 11
    assert edge_window_size(6) == 1
    assert edge_window_size(40, 0.25) == 10


def test_nontrivial_phase_has_edge_pair(nontrivial_params):
    """Test two exponentially localized midgap states in the nontrivial phase."""
    report = classify_edge_states(eigendecompose_hermitian(build_ssh_hamiltonian(nontrivial_params)),
                                  nontrivial_params)
    assert report.classification == EdgeClassification.CLASSIFIED
    assert report.edge_window == 10
    midgap = report.midgap_indices()
    assert midgap == [99, 100]
    for index in midgap:
        label = report.labels[index]
        assert abs(report.eigenvalues[index]) < 1e-3
        assert label.edge_weight_left + label.edge_weight_right > 0.99


def test_trivial_phase_has_no_edge_states(trivial_params):
    """Test that the trivial phase has no midgap state."""
    report = classify_edge_states(eigendecompose_hermitian(build_ssh_hamiltonian(trivial_params)), trivial_params)
    assert report.classification == EdgeClassification.CLASSIFIED
    assert report.midgap_indices() == []
    assert np.min(np.abs(report.eigenvalues)) > 0.5


def test_gap_closure_is_indeterminate():
    """Test that a closed gap yields indeterminate labels."""
    params = ModelParams(n_sites=20, theta=math.pi / 2)
    report = classify_edge_states(eigendecompose_hermitian(build_ssh_hamiltonian(params)), params)
    assert report.classification == EdgeClassification.INDETERMINATE
    assert report.midgap_indices() == []
    assert len(report.labels) == 20
    assert not any(label.is_midgap for label in report.labels)


def test_classify_rejects_size_mismatch(closed_params):
    """Test that labels require the spectrum to match the parameters."""
    report = eigendecompose_hermitian(build_ssh_hamiltonian(closed_params))
    with pytest.raises(SSHInputError):
        classify_edge_states(report, closed_params.model_copy(update={"n_sites": 10}))


def test_pt_breaking_of_edge_pair():
    """Test that the gain/loss potentials break PT symmetry only through the edge pair."""
    nontrivial = ModelParams(n_sites=200, theta=0.1 * math.pi, gamma=0.1)
    report = stationary_report(nontrivial)
    assert report.pt.n_complex_pairs == 1
    assert report.pt.unmatched == 0
    assert report.pt.gamma == 0.1
    assert report.n_midgap == 2
    assert abs(report.pt.imag_sum) < 1e-8
    broken = [i for i, label in enumerate(report.spectrum.labels) if label.is_pt_broken]
    assert len(broken) == 2
    assert all(report.spectrum.labels[i].is_midgap for i in broken)

    assert stationary_report(nontrivial.with_theta(0.9 * math.pi)).pt.n_complex_pairs == 0
    assert stationary_report(nontrivial.with_gamma(0.0)).pt.n_complex_pairs == 0


def test_pt_breaking_counts_unmatched():
    """Test that an eigenvalue without conjugate partner is reported."""
    report = eigendecompose_general(np.diag([1.0 + 0.5j, 2.0 - 0.5j, 0.0]))
    pt = pt_breaking_report(report)
    assert pt.n_complex_pairs == 1
    assert pt.unmatched == 1
    assert pt.max_imag == pytest.approx(0.5)


def test_pt_spectrum_symmetry():
    """Test that the spectrum of H_PT is closed under E → Ē and E → −Ē."""
    params = ModelParams(n_sites=40, theta=0.2 * math.pi, gamma=0.3)
    eigenvalues = np.asarray(eigendecompose_general(build_pt_hamiltonian(params)).eigenvalues)
    for value in eigenvalues:
        assert np.min(np.abs(eigenvalues - value.conjugate())) < 1e-6
        assert np.min(np.abs(eigenvalues + value.conjugate())) < 1e-6


def test_bulk_dispersion_gap():
    """Test the band edges ±|t₋ − t₊| at k = π."""
    params = ModelParams(n_sites=4, theta=0.0)
    lower, upper = bulk_dispersion(params, np.array([0.0, math.pi]))
    np.testing.assert_allclose(upper, [2.0, 0.6], atol=1e-12)
    np.testing.assert_allclose(lower, -upper)


def test_zak_phase_nontrivial_and_trivial():
    """Test the Zak phase π in the nontrivial phase and 0 in the trivial phase."""
    nontrivial = zak_phase(ModelParams(n_sites=4, theta=0.1 * math.pi))
    assert nontrivial.zak_phase == pytest.approx(math.pi, abs=1e-6)
    assert nontrivial.winding_number == 1
    assert nontrivial.k_samples == 256

    trivial = zak_phase(ModelParams(n_sites=4, theta=0.9 * math.pi))
    assert trivial.zak_phase == pytest.approx(0.0, abs=1e-6)
    assert trivial.winding_number == 0


def test_zak_phase_degenerate_bulk():
    """Test that a closed gap raises DegenerateBulkError."""
    with pytest.raises(DegenerateBulkError) as exc_info:
        zak_phase(ModelParams(n_sites=4, theta=0.3, dimerization=0.0))
    assert exc_info.value.code == "degenerate_bulk"
    assert "t_minus" in exc_info.value.details


def test_zak_phase_requires_resolution():
    """Test the lower bound on the Brillouin-zone discretization."""
    with pytest.raises(SSHInputError) as exc_info:
        zak_phase(ModelParams(n_sites=4, theta=0.1), k_samples=32)
    assert "k_samples" in str(exc_info.value)


def test_wilson_loop_is_gauge_invariant():
    """Test that random phases on the Bloch states leave the Zak phase unchanged."""
    params = ModelParams(n_sites=4, theta=0.2 * math.pi)
    states = bloch_states(params, 128)
    phases = np.exp(1j * np.random.default_rng(7).uniform(0, 2 * math.pi, 128))
    reference = wilson_loop_phase(states)
    assert abs(wilson_loop_phase(states * phases[:, None])) == pytest.approx(abs(reference), abs=1e-9)
    assert abs(reference) == pytest.approx(math.pi, abs=1e-9)
