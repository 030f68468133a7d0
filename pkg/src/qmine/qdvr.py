"""Variational characterizations of the von Neumann entropy.

The Gibbs objective

    f(T) = -Tr(rho T) + ln Tr(e^T)

upper-bounds S(rho) for every Hermitian T, with the infimum over all
Hermitian T equal to S(rho). Restricting T to c-scaled rank-r density
matrices (the QDVR form used by the circuit loss)

    g(T) = -c Tr(rho T) + ln Tr(e^{cT})

keeps the infimum within epsilon of S(rho) once the trace scale c is at
least 2*r*n + r*ln(1/epsilon) for an n-qubit, rank-r state. Everything
is evaluated in nats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qmatrix
from .errors import ParameterError, SizeError
from .states import DensityMatrix, SpectralState


def log_sum_exp(values: np.ndarray, zeros: int = 0) -> float:
    """ln(sum_i e^{v_i} + zeros * e^0), stable against large v.

    ``zeros`` counts implicit additional terms with value 0; this is how
    the spectrum of a rank-deficient exponent enters ln Tr(e^T).
    """
    v = np.asarray(values, dtype=np.float64)
    if zeros < 0:
        raise ParameterError(f"zeros must be non-negative, got {zeros}")
    if v.size == 0 and zeros == 0:
        raise ParameterError("empty log-sum-exp")
    m = float(v.max(initial=0.0)) if zeros > 0 else float(v.max())
    total = float(np.exp(v - m).sum()) + zeros * np.exp(-m)
    return m + float(np.log(total))


@dataclass(frozen=True)
class QdvrConfig:
    """Loss configuration: target accuracy, trace scale, witness rank."""

    epsilon: float
    c: float
    rank_t: int

    def __post_init__(self):
        if not (self.epsilon > 0):
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if not (self.c > 0):
            raise ParameterError(f"trace scale c must be positive, got {self.c}")
        if self.rank_t < 1:
            raise ParameterError(f"rank_t must be at least 1, got {self.rank_t}")

    @classmethod
    def auto(
        cls, epsilon: float, rank_t: int, qubits: int, cap: float | None = None
    ) -> "QdvrConfig":
        """Derive c from the accuracy bound, optionally capped."""
        c = qdvr_scale(rank_t, qubits, epsilon)
        if cap is not None:
            c = min(c, cap)
        return cls(epsilon=epsilon, c=c, rank_t=rank_t)


def qdvr_scale(rank: int, qubits: int, epsilon: float) -> float:
    """Trace scale 2*r*n + r*ln(1/epsilon) guaranteeing epsilon accuracy.

    epsilon may equal 1, in which case the log term vanishes.
    """
    if rank < 1 or qubits < 1:
        raise ParameterError(f"rank and qubits must be >= 1, got {rank}, {qubits}")
    if not (0 < epsilon <= 1):
        raise ParameterError(f"epsilon must lie in (0, 1], got {epsilon}")
    return 2.0 * rank * qubits + rank * np.log(1.0 / epsilon)


def gibbs_objective(t_mat: np.ndarray, rho: DensityMatrix) -> float:
    """f(T) = -Tr(rho T) + ln Tr(e^T); an upper bound on S(rho)."""
    t = qmatrix.require_hermitian(t_mat)
    if t.shape[0] != rho.dim:
        raise SizeError(f"T has dimension {t.shape[0]}, state has {rho.dim}")
    cross = float(np.einsum("ij,ji->", rho.mat, t).real)
    w = np.linalg.eigvalsh(t)
    return -cross + log_sum_exp(w)


def add_identity(t_mat: np.ndarray, c: float) -> np.ndarray:
    """T + c*I. Leaves the Gibbs objective unchanged for any state.

    With c = -lambda_min(T) the result is positive semidefinite, which
    is how the search domain reduces to positive matrices.
    """
    t = qmatrix.require_hermitian(t_mat)
    return t + c * np.eye(t.shape[0])


def entropy_witness(state: SpectralState, epsilon: float) -> tuple[np.ndarray, float]:
    """Positive Hermitian witness whose Gibbs value is epsilon-close to S.

    Built on the state's own eigenbasis with weights ln(p_i / kappa) for
    p_i >= kappa and 0 otherwise, where kappa = epsilon / d^2. Returns
    the witness and the trace bound 2*r*ln(d) + r*ln(1/epsilon) (nats)
    that its trace is guaranteed not to exceed.
    """
    if not (0 < epsilon < 1):
        raise ParameterError(f"epsilon must lie in (0, 1), got {epsilon}")
    d = state.dim
    r = state.rank
    kappa = epsilon / d**2
    p = state.probabilities
    t = np.where(p >= kappa, np.log(np.maximum(p, kappa) / kappa), 0.0)
    v = state.basis[:, :r]
    witness = (v * t) @ v.conj().T
    witness = 0.5 * (witness + witness.conj().T)
    trace_bound = 2.0 * r * np.log(d) + r * np.log(1.0 / epsilon)
    return witness, float(trace_bound)


def qdvr_objective(t_density: DensityMatrix, rho: DensityMatrix, c: float) -> float:
    """g(T) = -c Tr(rho T) + ln Tr(e^{cT}) for a density-matrix T.

    Identical to the Gibbs objective at c*T; evaluated directly from T's
    cached spectrum so the identity can be cross-checked independently.
    """
    if t_density.dim != rho.dim:
        raise SizeError(f"T has dimension {t_density.dim}, state has {rho.dim}")
    cross = float(np.einsum("ij,ji->", rho.mat, t_density.mat).real)
    return -c * cross + log_sum_exp(c * t_density.eigenvalues)
