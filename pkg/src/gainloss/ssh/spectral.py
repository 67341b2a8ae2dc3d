import logging
import math

import numpy as np
import scipy.linalg

from gainloss.ssh.exceptions import DegenerateBulkError, NonConvergenceError, SSHInputError
from gainloss.ssh.model import build_pt_hamiltonian, hopping_amplitudes
from gainloss.ssh.models import (
    ChannelLayout,
    EdgeClassification,
    EigenLabel,
    HamiltonianMatrix,
    ModelParams,
    PTBreakingReport,
    SpectrumReport,
    StationaryReport,
    TopologicalInvariant,
)

logger = logging.getLogger(__name__)

# Below this |t₋ − t₊| the bulk is treated as gapless
GAP_TOLERANCE = 1e-6


def _entries(matrix: np.ndarray | HamiltonianMatrix) -> np.ndarray:
    if isinstance(matrix, HamiltonianMatrix):
        return np.asarray(matrix.entries)
    return np.asarray(matrix)


def eigendecompose_hermitian(matrix: np.ndarray | HamiltonianMatrix, tol: float = 1e-12) -> SpectrumReport:
    """
    Diagonalize a real symmetric (or complex Hermitian) matrix.

    Args:
        matrix (np.ndarray | HamiltonianMatrix): The matrix to diagonalize.
        tol (float): Allowed asymmetry, relative to max(1, ‖H‖_max).

    Returns:
        SpectrumReport: Ascending real eigenvalues and orthonormal eigenvectors.

    Raises:
        SSHInputError: If the matrix is not square or not symmetric.
        NonConvergenceError: If LAPACK fails to converge.
    """
    entries = _entries(matrix)
    if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
        raise SSHInputError("matrix must be square")
    scale = max(1.0, float(np.max(np.abs(entries), initial=0.0)))
    if np.max(np.abs(entries - entries.conj().T), initial=0.0) > tol * scale:
        raise SSHInputError("matrix is not symmetric; use eigendecompose_general")

    try:
        eigenvalues, eigenvectors = scipy.linalg.eigh(entries)
    except np.linalg.LinAlgError as e:
        raise NonConvergenceError(str(e), details={"shape": list(entries.shape), "norm": scale})
    return SpectrumReport(eigenvalues=eigenvalues.astype(complex), eigenvectors=eigenvectors, hermitian=True)


def eigendecompose_general(matrix: np.ndarray | HamiltonianMatrix,
                           params: ModelParams | None = None) -> SpectrumReport:
    """
    Diagonalize a general complex matrix with the dense LAPACK solver.

    Args:
        matrix (np.ndarray | HamiltonianMatrix): The matrix to diagonalize.
        params (ModelParams | None): Parameters the matrix was built from, reported on failure.

    Returns:
        SpectrumReport: Eigenpairs ordered by real part, then imaginary part.

    Raises:
        SSHInputError: If the matrix has non-finite entries.
        NonConvergenceError: If the QR iteration fails to converge.
    """
    entries = _entries(matrix)
    if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
        raise SSHInputError("matrix must be square")
    if not np.all(np.isfinite(entries)):
        raise SSHInputError("matrix has non-finite entries")

    try:
        eigenvalues, eigenvectors = scipy.linalg.eig(entries)
    except np.linalg.LinAlgError as e:
        details = {"shape": list(entries.shape), "norm": float(np.linalg.norm(entries))}
        if params is not None:
            details["params"] = params.model_dump()
        raise NonConvergenceError(str(e), details=details)

    eigenvectors = eigenvectors / np.linalg.norm(eigenvectors, axis=0)
    order = np.lexsort((eigenvalues.imag, eigenvalues.real))
    return SpectrumReport(
        eigenvalues=eigenvalues[order],
        eigenvectors=eigenvectors[:, order],
        hermitian=False,
    )


def edge_window_size(n_sites: int, fraction: float = 1 / 20) -> int:
    """Number of sites ⌈fraction·N⌉ counted as one edge."""
    return max(1, math.ceil(n_sites * fraction - 1e-12))


def classify_edge_states(report: SpectrumReport, params: ModelParams,
                         midgap_factor: float = 0.5,
                         edge_window_fraction: float = 1 / 20,
                         pt_tol: float = 1e-8) -> SpectrumReport:
    """
    Label every eigenpair as midgap or bulk and record its edge weights.

    An eigenvalue is midgap when |Re E| < midgap_factor·gap, with gap = 2·|t₊ − t₋|.
    When the gap is closed the labels are kept but marked indeterminate.

    Args:
        report (SpectrumReport): Spectrum of a chain Hamiltonian built from params.
        params (ModelParams): The model parameters.
        midgap_factor (float): Fraction of the gap used as midgap threshold.
        edge_window_fraction (float): Fraction of N summed for each edge weight.
        pt_tol (float): Imaginary part above which an eigenvalue is PT broken.

    Returns:
        SpectrumReport: A copy with labels filled.
    """
    n_sites = report.eigenvectors.shape[0]
    if n_sites != params.n_sites:
        raise SSHInputError(f"spectrum has {n_sites} sites, params describe {params.n_sites}")

    gap = hopping_amplitudes(params).gap
    window = edge_window_size(n_sites, edge_window_fraction)
    weights = np.abs(report.eigenvectors) ** 2
    left = np.clip(weights[:window].sum(axis=0), 0.0, 1.0)
    right = np.clip(weights[-window:].sum(axis=0), 0.0, 1.0)

    indeterminate = gap < GAP_TOLERANCE
    midgap = np.zeros(len(report.eigenvalues), dtype=bool)
    if not indeterminate:
        midgap = np.abs(report.eigenvalues.real) < midgap_factor * gap
    broken = np.abs(report.eigenvalues.imag) > pt_tol

    labels = [
        EigenLabel(
            is_midgap=bool(midgap[i]),
            edge_weight_left=float(left[i]),
            edge_weight_right=float(right[i]),
            is_pt_broken=bool(broken[i]),
        )
        for i in range(len(report.eigenvalues))
    ]
    if indeterminate:
        logger.warning("Bulk gap closed at theta=%.6f; edge classification is indeterminate", params.theta)
    classification = EdgeClassification.INDETERMINATE if indeterminate else EdgeClassification.CLASSIFIED
    return report.model_copy(update={"labels": labels, "classification": classification, "edge_window": window})


def pt_breaking_report(report: SpectrumReport, tol: float = 1e-8, pair_tol: float = 1e-6) -> PTBreakingReport:
    """
    Count complex-conjugate eigenvalue pairs.

    Each eigenvalue with Im E > tol is greedily matched to the nearest unused eigenvalue
    close to its conjugate; those without a partner within pair_tol are reported as unmatched.

    Args:
        report (SpectrumReport): Spectrum of a PT-symmetric matrix.
        tol (float): Imaginary part above which an eigenvalue counts as complex.
        pair_tol (float): Distance to the conjugate accepted as a match.

    Returns:
        PTBreakingReport: Pair count, largest imaginary part and matching diagnostics.
    """
    eigenvalues = report.eigenvalues
    upper = [int(i) for i in np.argsort(-eigenvalues.imag) if eigenvalues[i].imag > tol]
    available = set(int(i) for i in np.flatnonzero(eigenvalues.imag < -tol))

    unmatched = 0
    for i in upper:
        target = np.conj(eigenvalues[i])
        if not available:
            unmatched += 1
            continue
        j = min(available, key=lambda idx: abs(eigenvalues[idx] - target))
        if abs(eigenvalues[j] - target) <= pair_tol * max(1.0, abs(target)):
            available.remove(j)
        else:
            unmatched += 1

    return PTBreakingReport(
        n_complex_pairs=len(upper),
        max_imag=float(np.max(eigenvalues.imag, initial=0.0)),
        unmatched=unmatched,
        imag_sum=float(np.sum(eigenvalues.imag)),
    )


def stationary_report(params: ModelParams, layout: ChannelLayout | None = None, tol: float = 1e-8,
                      midgap_factor: float = 0.5, edge_window_fraction: float = 1 / 20) -> StationaryReport:
    """
    Diagonalize H_PT, label edge states and count PT-broken pairs in one call.

    Args:
        params (ModelParams): The model parameters.
        layout (ChannelLayout | None): Reservoir placement.
        tol (float): PT tolerance on imaginary parts.
        midgap_factor (float): See classify_edge_states.
        edge_window_fraction (float): See classify_edge_states.

    Returns:
        StationaryReport: Labelled spectrum and PT report.
    """
    logger.info("Stationary report: N=%d, theta=%.6f, gamma=%g", params.n_sites, params.theta, params.gamma)
    spectrum = eigendecompose_general(build_pt_hamiltonian(params, layout), params)
    spectrum = classify_edge_states(spectrum, params, midgap_factor, edge_window_fraction, tol)
    pt = pt_breaking_report(spectrum, tol).model_copy(update={"gamma": params.gamma})
    return StationaryReport(params=params, spectrum=spectrum, pt=pt, n_midgap=len(spectrum.midgap_indices()))


def bulk_dispersion(params: ModelParams, k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper bulk bands E±(k) = ±|t₋ + t₊·e^{ik}|."""
    hop = hopping_amplitudes(params)
    energy = np.abs(hop.t_minus + hop.t_plus * np.exp(1j * np.asarray(k)))
    return -energy, energy


def bloch_states(params: ModelParams, k_samples: int) -> np.ndarray:
    """
    Lower-band eigenvectors of h(k) = [[0, t₋ + t₊e^{−ik}], [t₋ + t₊e^{ik}, 0]].

    Args:
        params (ModelParams): The model parameters.
        k_samples (int): Number of uniform k points on [−π, π).

    Returns:
        np.ndarray: Array of shape (k_samples, 2).
    """
    hop = hopping_amplitudes(params)
    k = -np.pi + 2 * np.pi * np.arange(k_samples) / k_samples
    q = hop.t_minus + hop.t_plus * np.exp(1j * k)
    bloch = np.zeros((k_samples, 2, 2), dtype=complex)
    bloch[:, 0, 1] = np.conj(q)
    bloch[:, 1, 0] = q
    _, vectors = np.linalg.eigh(bloch)
    return vectors[:, :, 0]


def wilson_loop_phase(states: np.ndarray) -> float:
    """
    Gauge-invariant Berry phase −arg ∏ ⟨u(k_m)|u(k_{m+1})⟩ over a closed loop.

    Args:
        states (np.ndarray): Band states of shape (K, n_orbitals), the loop closes on states[0].

    Returns:
        float: Phase in (−π, π].
    """
    overlaps = np.sum(np.conj(states) * np.roll(states, -1, axis=0), axis=1)
    overlaps = overlaps / np.abs(overlaps)
    return float(-np.angle(np.prod(overlaps)))


def zak_phase(params: ModelParams, k_samples: int = 256) -> TopologicalInvariant:
    """
    Compute the Zak phase of the lower bulk band via the Wilson loop.

    Args:
        params (ModelParams): The model parameters (only t, Δ and Θ matter).
        k_samples (int): Brillouin-zone discretization, at least 64.

    Returns:
        TopologicalInvariant: Zak phase in [0, π] and winding number.

    Raises:
        SSHInputError: If k_samples < 64.
        DegenerateBulkError: If |t₋ − t₊| ≤ 1e-6.
    """
    if k_samples < 64:
        raise SSHInputError(f"k_samples must be >= 64, got {k_samples}")
    hop = hopping_amplitudes(params)
    if abs(hop.t_minus - hop.t_plus) <= GAP_TOLERANCE:
        raise DegenerateBulkError(
            "bulk gap is closed, Zak phase undefined",
            details={"t_minus": hop.t_minus, "t_plus": hop.t_plus, "theta": params.theta},
        )

    phase = abs(wilson_loop_phase(bloch_states(params, k_samples)))
    winding = int(round(phase / np.pi)) % 2
    logger.info("Zak phase at theta=%.6f: %.12f (winding %d)", params.theta, phase, winding)
    return TopologicalInvariant(zak_phase=phase, winding_number=winding, k_samples=k_samples)
