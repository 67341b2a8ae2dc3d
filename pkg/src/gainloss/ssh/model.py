"""Sites are 1-based; in the truncated Fock space index 0 is the vacuum."""
import logging

import numpy as np
from scipy import sparse

from gainloss.ssh.exceptions import SSHInputError
from gainloss.ssh.models import (
    ChannelLayout,
    HamiltonianFlavor,
    HamiltonianMatrix,
    HoppingPair,
    ModelParams,
    TruncatedLindbladModel,
)

logger = logging.getLogger(__name__)


def hopping_amplitudes(params: ModelParams) -> HoppingPair:
    """
    Compute t± = t·(1 ± Δ·cos Θ).

    Args:
        params (ModelParams): The model parameters.

    Returns:
        HoppingPair: Intracell t₋ and intercell t₊.
    """
    shift = params.dimerization * np.cos(params.theta)
    return HoppingPair(
        t_minus=params.hopping * (1.0 - shift),
        t_plus=params.hopping * (1.0 + shift),
    )


def ssh_matrix(hoppings: HoppingPair, n_sites: int) -> np.ndarray:
    """
    Build the real symmetric open chain with alternating bonds t₋, t₊, t₋, ...

    Unlike ModelParams this accepts the two-site dimer.

    Args:
        hoppings (HoppingPair): Bond amplitudes.
        n_sites (int): Even number of sites, at least 2.

    Returns:
        np.ndarray: The N×N matrix.

    Raises:
        SSHInputError: If n_sites is odd or smaller than 2.
    """
    if n_sites < 2 or n_sites % 2:
        raise SSHInputError(f"n_sites must be an even integer >= 2, got {n_sites}")
    bonds = np.where(np.arange(n_sites - 1) % 2 == 0, hoppings.t_minus, hoppings.t_plus)
    return np.diag(bonds, 1) + np.diag(bonds, -1)


def pt_matrix(hoppings: HoppingPair, n_sites: int, gamma: float,
              layout: ChannelLayout | None = None) -> np.ndarray:
    """
    Build the chain plus the complex edge potentials: −iγ on the loss site, +iγ on the gain site.

    Args:
        hoppings (HoppingPair): Bond amplitudes.
        n_sites (int): Even number of sites, at least 2.
        gamma (float): Gain/loss rate.
        layout (ChannelLayout | None): Reservoir placement. Defaults to loss at 1, gain at N.

    Returns:
        np.ndarray: The complex N×N matrix.
    """
    layout = layout or ChannelLayout()
    matrix = ssh_matrix(hoppings, n_sites).astype(complex)
    if layout.loss_at is not None:
        site = ChannelLayout.site_of(layout.loss_at, n_sites)
        matrix[site - 1, site - 1] -= 1j * gamma
    if layout.gain_at is not None:
        site = ChannelLayout.site_of(layout.gain_at, n_sites)
        matrix[site - 1, site - 1] += 1j * gamma
    return matrix


def build_ssh_hamiltonian(params: ModelParams) -> HamiltonianMatrix:
    """
    Build the Hermitian SSH Hamiltonian with open boundary conditions.

    Args:
        params (ModelParams): The model parameters.

    Returns:
        HamiltonianMatrix: The hermitian_ssh matrix.
    """
    logger.debug("Building SSH Hamiltonian: N=%d, theta=%.6f", params.n_sites, params.theta)
    entries = ssh_matrix(hopping_amplitudes(params), params.n_sites)
    return HamiltonianMatrix(entries=entries, flavor=HamiltonianFlavor.HERMITIAN_SSH)


def build_pt_hamiltonian(params: ModelParams, layout: ChannelLayout | None = None) -> HamiltonianMatrix:
    """
    Build the PT-symmetric complex-potential Hamiltonian.

    Args:
        params (ModelParams): The model parameters.
        layout (ChannelLayout | None): Reservoir placement. Defaults to loss at 1, gain at N.

    Returns:
        HamiltonianMatrix: The pt_complex_potential matrix.
    """
    logger.debug("Building PT Hamiltonian: N=%d, theta=%.6f, gamma=%g",
                 params.n_sites, params.theta, params.gamma)
    entries = pt_matrix(hopping_amplitudes(params), params.n_sites, params.gamma, layout)
    return HamiltonianMatrix(entries=entries, flavor=HamiltonianFlavor.PT_COMPLEX_POTENTIAL)


def build_truncated_lindblad(params: ModelParams, layout: ChannelLayout | None = None) -> TruncatedLindbladModel:
    """
    Build the Hamiltonian and jump operators on {vacuum} ⊕ {single particle}.

    The gain jump only refills the chain from the vacuum (|gain site⟩⟨vac|), which keeps
    the dynamics trace preserving inside the truncated space.

    Args:
        params (ModelParams): The model parameters.
        layout (ChannelLayout | None): Reservoir placement. Defaults to loss at 1, gain at N.

    Returns:
        TruncatedLindbladModel: The operator set.
    """
    layout = layout or ChannelLayout()
    n = params.n_sites
    dim = n + 1
    h_fock = np.zeros((dim, dim))
    h_fock[1:, 1:] = ssh_matrix(hopping_amplitudes(params), n)

    rate = np.sqrt(params.gamma)
    jump_loss = sparse.csr_matrix((dim, dim))
    jump_gain = sparse.csr_matrix((dim, dim))
    if layout.loss_at is not None and params.gamma > 0:
        site = ChannelLayout.site_of(layout.loss_at, n)
        jump_loss = sparse.csr_matrix(([rate], ([0], [site])), shape=(dim, dim))
    if layout.gain_at is not None and params.gamma > 0:
        site = ChannelLayout.site_of(layout.gain_at, n)
        jump_gain = sparse.csr_matrix(([rate], ([site], [0])), shape=(dim, dim))

    decay = (jump_loss.conj().T @ jump_loss + jump_gain.conj().T @ jump_gain).toarray()
    h_eff = h_fock - 0.5j * decay

    logger.debug("Built truncated Lindblad model: dim=%d, gamma=%g, layout=%s/%s",
                 dim, params.gamma, layout.loss_at, layout.gain_at)
    return TruncatedLindbladModel(
        params=params,
        layout=layout,
        h_fock=h_fock,
        jump_loss=jump_loss,
        jump_gain=jump_gain,
        h_eff=h_eff,
    )


def chiral_operator(n_sites: int) -> np.ndarray:
    """Sublattice parity Γ = diag(+1, −1, +1, ...)."""
    return np.diag(np.where(np.arange(n_sites) % 2 == 0, 1.0, -1.0))


def reflection_operator(n_sites: int) -> np.ndarray:
    """Site reversal i → N+1−i as a permutation matrix."""
    return np.eye(n_sites)[::-1]
