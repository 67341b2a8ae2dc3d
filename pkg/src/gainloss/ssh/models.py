import math
from enum import Enum
from typing import Annotated, Any, Dict, List

import numpy as np
from pydantic import (BaseModel as _BaseModel, ConfigDict, Field, PlainSerializer, PlainValidator,
                      field_validator, model_validator)
from scipy import sparse

from gainloss.ssh.exceptions import SSHInputError


class HamiltonianFlavor(str, Enum):
    """Enumeration of the chain Hamiltonian variants."""
    HERMITIAN_SSH = "hermitian_ssh"  # Real symmetric tight-binding chain
    PT_COMPLEX_POTENTIAL = "pt_complex_potential"  # Chain plus -iγ / +iγ edge potentials


class ChainEnd(str, Enum):
    """Enumeration of the two chain ends a reservoir can couple to."""
    FIRST = "first"  # Site 1
    LAST = "last"  # Site N


class Engine(str, Enum):
    """Enumeration of the time evolution engines."""
    SPECTRAL = "spectral"  # Exact eigenbasis propagation, closed system only
    TRAJECTORIES = "trajectories"  # Monte-Carlo wave-function ensemble
    MASTER = "master"  # Direct RK4 integration of the density matrix
    COVARIANCE = "covariance"  # Full Fock space two-point correlators (oracle)


class InitialKind(str, Enum):
    """Enumeration of the initial state families."""
    EDGE_RIGHT = "edge_right"
    EDGE_LEFT = "edge_left"
    BULK = "bulk"
    SITE = "site"
    VACUUM = "vacuum"


class Side(str, Enum):
    """Enumeration of the chain edges used for edge occupations."""
    LEFT = "left"
    RIGHT = "right"


class AverageConvention(str, Enum):
    """Enumeration of the temporal mean prefactor conventions."""
    NORMALIZED = "normalized"  # Divide by the number of samples s+1
    LITERAL = "literal"  # Divide by s, as printed


class StepMethod(str, Enum):
    """Enumeration of the no-jump step propagators of the trajectory engine."""
    RK4 = "rk4"  # Classical fourth-order Runge-Kutta polynomial
    EXACT = "exact"  # Matrix exponential of the effective Hamiltonian


class EdgeClassification(str, Enum):
    """Enumeration of the edge-state classification outcomes of a spectrum."""
    UNCLASSIFIED = "unclassified"  # Labels not computed yet
    CLASSIFIED = "classified"  # Labels filled
    INDETERMINATE = "indeterminate"  # Bulk gap closed, midgap labels meaningless


class BaseModel(_BaseModel):
    """Base model for all models."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    def __repr__(self):
        return self.__str__()

    def __str__(self):
        return self.model_dump_json(indent=2)


def _to_array(value: Any) -> np.ndarray:
    if isinstance(value, dict):
        array = np.asarray(value["real"], dtype=float) + 1j * np.asarray(value["imag"], dtype=float)
    else:
        array = np.array(value, copy=True)
    array.setflags(write=False)
    return array


def _serialize_array(array: np.ndarray) -> Any:
    if np.iscomplexobj(array):
        return {"real": array.real.tolist(), "imag": array.imag.tolist()}
    return array.tolist()


def _to_csr(value: Any) -> sparse.csr_matrix:
    if sparse.issparse(value):
        return sparse.csr_matrix(value)
    return sparse.csr_matrix(_to_array(value))


# Read-only numpy array; complex arrays serialize as {"real": ..., "imag": ...}
Array = Annotated[np.ndarray, PlainValidator(_to_array), PlainSerializer(_serialize_array)]

SparseOperator = Annotated[
    sparse.csr_matrix,
    PlainValidator(_to_csr),
    PlainSerializer(lambda operator: _serialize_array(operator.toarray())),
]


class ModelParams(BaseModel):
    """
    Physical parameters of one simulation instance (ħ = 1, time in units of 1/t).
    """
    n_sites: int = Field(..., description="Number of lattice sites N (even, at least 4)")
    hopping: float = Field(1.0, description="Hopping amplitude t > 0")
    dimerization: float = Field(0.3, description="Dimerization strength Δ in [0, 1)")
    theta: float = Field(..., description="Dimerization angle Θ in radians, within [0, π]")
    gamma: float = Field(0.0, description="Gain/loss rate γ >= 0")

    # noinspection PyMethodParameters
    @field_validator("n_sites")
    def n_sites_must_be_even(cls, v: int) -> int:
        if v < 4 or v % 2:
            raise SSHInputError(f"n_sites must be an even integer >= 4, got {v}")
        return v

    # noinspection PyMethodParameters
    @model_validator(mode="after")
    def ranges_must_hold(self) -> 'ModelParams':
        if not self.hopping > 0:
            raise SSHInputError(f"hopping must be positive, got {self.hopping}")
        if not 0 <= self.dimerization < 1:
            raise SSHInputError(f"dimerization must lie in [0, 1), got {self.dimerization}")
        if not 0 <= self.theta <= math.pi:
            raise SSHInputError(f"theta must lie in [0, pi], got {self.theta}")
        if not self.gamma >= 0:
            raise SSHInputError(f"gamma must be non-negative, got {self.gamma}")
        return self

    def with_theta(self, theta: float) -> 'ModelParams':
        """Return a validated copy at another dimerization angle."""
        return ModelParams(**{**self.model_dump(), "theta": theta})

    def with_gamma(self, gamma: float) -> 'ModelParams':
        """Return a validated copy with another gain/loss rate."""
        return ModelParams(**{**self.model_dump(), "gamma": gamma})


class HoppingPair(BaseModel):
    """Intracell (t₋) and intercell (t₊) hopping amplitudes."""
    t_minus: float = Field(..., description="Amplitude on bonds (2n-1, 2n)")
    t_plus: float = Field(..., description="Amplitude on bonds (2n, 2n+1)")

    @property
    def gap(self) -> float:
        """Full bulk gap 2·|t₊ − t₋| of the two-band dispersion."""
        return 2.0 * abs(self.t_plus - self.t_minus)


class ChannelLayout(BaseModel):
    """Placement of the loss and gain reservoirs along the chain."""
    loss_at: ChainEnd | None = Field(ChainEnd.FIRST, description="Chain end with particle loss, None to disable")
    gain_at: ChainEnd | None = Field(ChainEnd.LAST, description="Chain end with particle gain, None to disable")

    # noinspection PyMethodParameters
    @model_validator(mode="after")
    def ends_must_differ(self) -> 'ChannelLayout':
        if self.loss_at is not None and self.loss_at == self.gain_at:
            raise SSHInputError("loss and gain must act on different chain ends")
        return self

    @classmethod
    def mirrored(cls) -> 'ChannelLayout':
        """Loss at site N, gain at site 1."""
        return cls(loss_at=ChainEnd.LAST, gain_at=ChainEnd.FIRST)

    @classmethod
    def loss_only(cls) -> 'ChannelLayout':
        return cls(loss_at=ChainEnd.FIRST, gain_at=None)

    @classmethod
    def gain_only(cls) -> 'ChannelLayout':
        return cls(loss_at=None, gain_at=ChainEnd.LAST)

    @staticmethod
    def site_of(end: ChainEnd, n_sites: int) -> int:
        """1-based site index of a chain end."""
        return 1 if end == ChainEnd.FIRST else n_sites


class HamiltonianMatrix(BaseModel):
    """Dense single-particle chain Hamiltonian."""
    entries: Array = Field(..., description="N×N matrix, real for hermitian_ssh, complex for the PT variant")
    flavor: HamiltonianFlavor = Field(..., description="Which Hamiltonian the entries represent")

    @property
    def n_sites(self) -> int:
        return self.entries.shape[0]


class TruncatedLindbladModel(BaseModel):
    """
    Operators of the master equation restricted to {vacuum} ⊕ {single particle}.

    Fock index 0 is the vacuum, index j is one particle on site j.
    """
    params: ModelParams = Field(..., description="Parameters the operators were built from")
    layout: ChannelLayout = Field(default_factory=ChannelLayout, description="Reservoir placement")
    h_fock: Array = Field(..., description="(N+1)×(N+1) Hamiltonian with zero vacuum row and column")
    jump_loss: SparseOperator = Field(..., description="√γ |vac⟩⟨loss site|")
    jump_gain: SparseOperator = Field(..., description="√γ |gain site⟩⟨vac|")
    h_eff: Array = Field(..., description="h_fock − (i/2) Σ L†L")

    @property
    def dim(self) -> int:
        return self.h_fock.shape[0]

    @property
    def jumps(self) -> List[sparse.csr_matrix]:
        """Jump operators with at least one nonzero entry."""
        return [op for op in (self.jump_loss, self.jump_gain) if op.count_nonzero() > 0]


class EigenLabel(BaseModel):
    """Per-eigenpair classification record."""
    is_midgap: bool = Field(..., description="|Re E| below the midgap threshold")
    edge_weight_left: float = Field(..., ge=0, le=1 + 1e-9, description="Squared weight on the first edge window")
    edge_weight_right: float = Field(..., ge=0, le=1 + 1e-9, description="Squared weight on the last edge window")
    is_pt_broken: bool = Field(..., description="|Im E| above the PT tolerance")


class SpectrumReport(BaseModel):
    """Eigenpairs of a chain Hamiltonian with optional edge-state labels."""
    eigenvalues: Array = Field(..., description="Complex eigenvalues")
    eigenvectors: Array = Field(..., description="Unit-norm eigenvectors as columns")
    hermitian: bool = Field(..., description="Whether the decomposed matrix was Hermitian")
    labels: List[EigenLabel] | None = Field(None, description="Per-eigenpair labels, filled by classify_edge_states")
    classification: EdgeClassification = Field(EdgeClassification.UNCLASSIFIED,
                                               description="State of the labels")
    edge_window: int | None = Field(None, description="Number of sites per edge window used for the labels")

    def midgap_indices(self) -> List[int]:
        """Indices of eigenpairs labelled as midgap."""
        if self.classification != EdgeClassification.CLASSIFIED:
            return []
        return [i for i, label in enumerate(self.labels) if label.is_midgap]


class TopologicalInvariant(BaseModel):
    """Zak phase and winding number of the lower Bloch band."""
    zak_phase: float = Field(..., description="Zak phase in [0, π]")
    winding_number: int = Field(..., ge=0, le=1, description="0 (trivial) or 1 (nontrivial)")
    k_samples: int = Field(..., ge=1, description="Brillouin-zone discretization")


class PTBreakingReport(BaseModel):
    """Count of complex-conjugate eigenvalue pairs of a PT-symmetric matrix."""
    n_complex_pairs: int = Field(..., ge=0, description="Eigenvalues with Im E > tol, pairs counted once")
    max_imag: float = Field(..., description="Largest imaginary part of the spectrum")
    unmatched: int = Field(0, ge=0, description="Eigenvalues with Im E > tol lacking a conjugate partner")
    imag_sum: float = Field(0.0, description="Sum of all imaginary parts")
    gamma: float | None = Field(None, description="Gain/loss rate of the analysed matrix, if known")


class StationaryReport(BaseModel):
    """Stationary non-Hermitian picture at one parameter set."""
    params: ModelParams
    spectrum: SpectrumReport
    pt: PTBreakingReport
    n_midgap: int = Field(..., ge=0)


class FockState(BaseModel):
    """Pure state on the truncated (N+1)-dimensional Fock space."""
    amplitudes: Array = Field(..., description="Index 0 = vacuum, index j = particle at site j")

    # noinspection PyMethodParameters
    @field_validator("amplitudes")
    def norm_must_not_exceed_one(cls, v: np.ndarray) -> np.ndarray:
        if v.ndim != 1 or v.shape[0] < 2:
            raise SSHInputError("amplitudes must be a vector of length N+1")
        if np.vdot(v, v).real > 1 + 1e-9:
            raise SSHInputError("FockState norm exceeds 1")
        return v

    @property
    def n_sites(self) -> int:
        return self.amplitudes.shape[0] - 1

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))

    @classmethod
    def from_site_vector(cls, vector: np.ndarray) -> 'FockState':
        """Embed an N-site single-particle vector with zero vacuum amplitude."""
        amplitudes = np.zeros(len(vector) + 1, dtype=complex)
        amplitudes[1:] = vector
        return cls(amplitudes=amplitudes)


class DensityMatrix(BaseModel):
    """Density operator on the truncated Fock space."""
    entries: Array = Field(..., description="(N+1)×(N+1) Hermitian matrix")

    # noinspection PyMethodParameters
    @field_validator("entries")
    def must_be_hermitian(cls, v: np.ndarray) -> np.ndarray:
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise SSHInputError("density matrix must be square")
        if np.max(np.abs(v - v.conj().T), initial=0.0) > 1e-10:
            raise SSHInputError("density matrix must be Hermitian")
        return v

    @property
    def n_sites(self) -> int:
        return self.entries.shape[0] - 1

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries).real)


class CovarianceMatrix(BaseModel):
    """Two-point correlators C_ij = ⟨c_i† c_j⟩ on the full Fock space."""
    entries: Array = Field(..., description="N×N Hermitian matrix")

    # noinspection PyMethodParameters
    @field_validator("entries")
    def must_be_fermionic(cls, v: np.ndarray) -> np.ndarray:
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise SSHInputError("covariance matrix must be square")
        if np.max(np.abs(v - v.conj().T), initial=0.0) > 1e-10:
            raise SSHInputError("covariance matrix must be Hermitian")
        occupations = np.linalg.eigvalsh(v)
        if occupations[0] < -1e-8 or occupations[-1] > 1 + 1e-8:
            raise SSHInputError("covariance eigenvalues must lie in [0, 1]")
        return v


class TimeGrid(BaseModel):
    """Integration step and uniformly spaced observation times t_j = j·T/s."""
    t_end: float = Field(..., gt=0, description="Total time span T in units of 1/t")
    dt: float = Field(0.05, gt=0, description="Integrator step")
    sample_count: int = Field(1000, ge=1, description="Number of sample intervals s")

    # noinspection PyMethodParameters
    @model_validator(mode="after")
    def step_must_fit_spacing(self) -> 'TimeGrid':
        if self.dt > self.spacing * (1 + 1e-12):
            raise SSHInputError(f"dt={self.dt} exceeds the sample spacing {self.spacing}")
        return self

    @property
    def spacing(self) -> float:
        return self.t_end / self.sample_count

    @property
    def steps_per_sample(self) -> int:
        """Whole integrator steps between samples; the effective step is spacing / steps_per_sample."""
        return max(1, math.ceil(self.spacing / self.dt - 1e-9))

    @property
    def step(self) -> float:
        """Effective integrator step, at most dt."""
        return self.spacing / self.steps_per_sample

    @property
    def sample_times(self) -> np.ndarray:
        return np.arange(self.sample_count + 1) * self.spacing


class OccupationSeries(BaseModel):
    """Time-sampled per-site occupation means."""
    sample_times: Array = Field(..., description="Sample times t_j, shape (s+1,)")
    per_site_mean: Array = Field(..., description="⟨n_i(t_j)⟩, shape (s+1, N)")
    per_site_stderr: Array = Field(..., description="Ensemble standard errors, zero for deterministic engines")
    vacuum_prob: Array = Field(..., description="Vacuum probability per sample, shape (s+1,)")
    grid: TimeGrid = Field(..., description="Grid the samples were taken on")
    engine: Engine = Field(..., description="Engine that produced the series")
    n_traj: int | None = Field(None, description="Number of trajectories for the Monte-Carlo engine")

    @property
    def n_sites(self) -> int:
        return self.per_site_mean.shape[1]


class TimeAveragedProfile(BaseModel):
    """Temporal mean ⟨n_i⟩_T of an occupation series."""
    per_site: Array = Field(..., description="Time-averaged occupation per site, shape (N,)")
    window: TimeGrid = Field(..., description="Grid the average was taken over")
    convention: AverageConvention = Field(AverageConvention.NORMALIZED, description="Prefactor convention")

    @property
    def n_sites(self) -> int:
        return self.per_site.shape[0]


class TrajectoryOptions(BaseModel):
    """Options of the Monte-Carlo wave-function ensemble."""
    n_traj: int = Field(200, ge=1, description="Number of trajectories")
    seed: int = Field(1234, ge=0, lt=2 ** 64, description="Root seed of the per-trajectory streams")
    chunk_size: int = Field(16, ge=1, description="Trajectories per work unit; independent of the worker count")
    sparse_threshold: int = Field(64, ge=1, description="Fock dimension above which the propagator is sparse")
    step_method: StepMethod = Field(StepMethod.EXACT, description="No-jump propagator between samples")


class MasterDiagnostics(BaseModel):
    """Invariant checks recorded by the density-matrix integrator at the samples."""
    max_trace_drift: float
    max_hermiticity_defect: float
    min_eigenvalue: float


class TruncationReport(BaseModel):
    """Deviation between the truncated model and the full-Fock-space covariance evolution."""
    max_abs_deviation: float = Field(..., description="Largest |Δ⟨n_i(t_j)⟩| over sites and samples")
    final_deviation: Array = Field(..., description="Per-site deviation at t = T")
    gain_enabled: bool


class InitialStateSpec(BaseModel):
    """Recipe for an initial single-particle state."""
    kind: InitialKind = Field(InitialKind.EDGE_RIGHT, description="Initial state family")
    bulk_index: int | None = Field(None, ge=0, description="Eigenstate index for kind=bulk; drawn when None")
    site_index: int | None = Field(None, ge=1, description="1-based site for kind=site")
    theta_ref: float = Field(0.1 * math.pi, ge=0, le=math.pi, description="Θ at which eigenstates are computed")
    bulk_seed: int = Field(42, ge=0, description="Seed of the bulk index draw")
    midgap_factor: float = Field(0.5, gt=0, le=1, description="Midgap threshold as a fraction of the bulk gap")
    edge_window_fraction: float = Field(1 / 20, gt=0, le=0.5, description="Fraction of N per edge window")

    # noinspection PyMethodParameters
    @model_validator(mode="after")
    def site_requires_index(self) -> 'InitialStateSpec':
        if self.kind == InitialKind.SITE and self.site_index is None:
            raise SSHInputError("kind=site requires site_index")
        return self


class SnapshotResult(BaseModel):
    """Initial profile and time-averaged final profile of one evolution."""
    initial_profile: Array = Field(..., description="|ψ₀|² per site")
    final_profile: TimeAveragedProfile
    series: OccupationSeries
    engine: Engine
    wall_time_s: float


class SweepRow(BaseModel):
    """Edge occupations at one dimerization angle."""
    theta: float
    edge_occ: Dict[int, float] = Field(..., description="Edge occupation keyed by window size a")
    runtime_s: float


class SweepResult(BaseModel):
    """Θ-sweep of time-averaged edge occupations."""
    rows: List[SweepRow]
    windows: List[int]
    engine: Engine
    kink_estimate: float | None = Field(None, description="Θ of the kink for the largest window")
    kink_estimates: Dict[int, float | None] = Field(default_factory=dict)
    max_second_difference: Dict[int, float | None] = Field(default_factory=dict)

    # noinspection PyMethodParameters
    @model_validator(mode="after")
    def thetas_must_increase(self) -> 'SweepResult':
        thetas = [row.theta for row in self.rows]
        if any(b <= a for a, b in zip(thetas, thetas[1:])):
            raise SSHInputError("sweep thetas must be strictly increasing")
        return self

    @property
    def thetas(self) -> np.ndarray:
        return np.array([row.theta for row in self.rows])

    def series_for(self, window: int) -> np.ndarray:
        """Edge occupation over Θ for one window."""
        return np.array([row.edge_occ[window] for row in self.rows])


class StationaryComparison(BaseModel):
    """Dynamics versus the stationary PT picture at one parameter set."""
    params: ModelParams
    n_complex_pairs: int
    max_imag: float
    predicted_edge_dominance: bool = Field(..., description="A broken PT pair exists")
    argmax_site: int = Field(..., description="1-based site of the largest time-averaged occupation")
    right_edge_occupation: float
    left_edge_occupation: float
    observed_edge_dominance: bool
    agrees: bool


class OracleReport(BaseModel):
    """Cross-engine comparison on a small chain."""
    n_sites: int
    n_traj: int
    fraction_within_3_sigma: float = Field(..., description="Share of (site, time) samples within 3 standard errors")
    max_trajectory_deviation: float
    covariance_loss_only_max_deviation: float
    truncation: TruncationReport
    master: MasterDiagnostics


class RunManifest(BaseModel):
    """Inputs and outputs of one CLI run."""
    command: str = Field(..., description="CLI subcommand")
    params: ModelParams
    grid: TimeGrid | None = None
    engine: Engine | None = None
    seed: int
    n_traj: int
    code_version: str
    wall_time_s: float
    output_paths: List[str] = Field(default_factory=list)
    kink_estimate: float | None = None
