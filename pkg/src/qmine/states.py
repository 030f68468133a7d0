"""Density matrices: validation, random generation, exact entropy and QMI.

The random generator draws a spectrum from a flat Dirichlet over the
requested rank and a support basis from the Haar measure; the
generation-time spectrum doubles as an exact entropy oracle for every
generated state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qmatrix
from .errors import ParameterError, SizeError, ValidationError

TRACE_ATOL = 1e-10
# Eigensolver noise can push zero eigenvalues slightly negative.
PSD_ATOL = 1e-10
# Eigenvalues below RANK_RTOL * lambda_max count as zero.
RANK_RTOL = 1e-10


def numerical_rank(eigenvalues: np.ndarray) -> int:
    w = np.asarray(eigenvalues, dtype=np.float64)
    lam_max = float(w.max(initial=0.0))
    return int(np.count_nonzero(w > RANK_RTOL * lam_max))


class DensityMatrix:
    """A trace-one positive semidefinite Hermitian matrix.

    Construction validates hermiticity, unit trace and positivity, and
    (when ``rank`` is declared) that the numerical rank matches. The
    wrapped array is frozen; the spectrum is computed once and cached.
    """

    __slots__ = ("_mat", "_eigenvalues", "rank")

    def __init__(self, mat: np.ndarray, rank: int | None = None):
        m = qmatrix.as_square_matrix(mat)
        problems = []
        asym = qmatrix.max_asymmetry(m)
        if asym > qmatrix.HERMITIAN_ATOL:
            problems.append(f"not Hermitian (max |A - A^dag| = {asym:.3e})")
        tr = complex(np.trace(m))
        if abs(tr - 1.0) > TRACE_ATOL:
            problems.append(f"trace {tr:.12g} differs from 1 by more than {TRACE_ATOL:.1e}")
        if problems:
            raise ValidationError("invalid density matrix: " + "; ".join(problems))
        w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        if w[0] < -PSD_ATOL:
            problems.append(f"negative eigenvalue {w[0]:.3e} below -{PSD_ATOL:.1e}")
        if rank is not None:
            nr = numerical_rank(w)
            if rank < 1:
                problems.append(f"declared rank {rank} is not positive")
            elif nr != rank:
                problems.append(f"numerical rank {nr} differs from declared rank {rank}")
        if problems:
            raise ValidationError("invalid density matrix: " + "; ".join(problems))
        m = m.copy()
        m.setflags(write=False)
        self._mat = m
        self._eigenvalues = w
        self.rank = rank

    @property
    def mat(self) -> np.ndarray:
        return self._mat

    @property
    def dim(self) -> int:
        return self._mat.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        """Spectrum, ascending."""
        return self._eigenvalues

    def numerical_rank(self) -> int:
        return numerical_rank(self._eigenvalues)

    def reduce(self, d_a: int, d_b: int, keep: int) -> "DensityMatrix":
        """Reduced state of one subsystem of an (d_a x d_b) bipartition."""
        return DensityMatrix(qmatrix.partial_trace(self._mat, (d_a, d_b), keep))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=np.complex128) / dim, rank=dim)

    @classmethod
    def from_pure(cls, vec: np.ndarray) -> "DensityMatrix":
        v = np.asarray(vec, dtype=np.complex128).reshape(-1)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()), rank=1)

    def __repr__(self) -> str:
        return f"DensityMatrix(dim={self.dim}, rank={self.rank})"


@dataclass(frozen=True)
class SpectralState:
    """A density matrix given by its spectrum and support basis.

    ``probabilities`` has length r (the rank); the state is assembled
    from the first r columns of ``basis``. Because the spectrum is known
    at generation time, the exact entropy comes for free.
    """

    probabilities: np.ndarray
    basis: np.ndarray
    seed: int

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=np.float64)
        v = np.asarray(self.basis, dtype=np.complex128)
        if p.ndim != 1 or p.size < 1:
            raise ValidationError("probabilities must be a non-empty vector")
        if (p < 0).any():
            raise ValidationError(f"negative probability {p.min():.3e}")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValidationError(f"probabilities sum to {p.sum():.15g}, not 1")
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < p.size:
            raise ValidationError(f"basis shape {v.shape} incompatible with rank {p.size}")
        gram_err = float(np.abs(v.conj().T @ v - np.eye(v.shape[0])).max())
        if gram_err > 1e-10:
            raise ValidationError(f"basis is not unitary (max |V^dag V - I| = {gram_err:.3e})")
        object.__setattr__(self, "probabilities", p)
        object.__setattr__(self, "basis", v)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def rank(self) -> int:
        return self.probabilities.size

    @property
    def entropy(self) -> float:
        """Exact entropy -sum p ln p of the generated spectrum, in nats."""
        return entropy_of_probabilities(self.probabilities)

    def to_density(self) -> DensityMatrix:
        v = self.basis[:, : self.rank]
        m = (v * self.probabilities) @ v.conj().T
        return DensityMatrix(0.5 * (m + m.conj().T), rank=self.rank)


def entropy_of_probabilities(p: np.ndarray) -> float:
    """Shannon entropy in nats; 0 ln 0 counts as 0."""
    q = np.asarray(p, dtype=np.float64)
    q = q[q > 0]
    return float(-(q * np.log(q)).sum())


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via phase-fixed QR of a complex Gaussian."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diagonal(r).copy()
    ph /= np.abs(ph)
    return q * ph


def random_density(dim: int, rank: int, seed: int) -> SpectralState:
    """Random state with exactly ``rank`` nonzero eigenvalues.

    Spectrum: flat Dirichlet over ``rank`` outcomes. Support basis: first
    ``rank`` columns of a Haar unitary. Bit-reproducible under ``seed``.
    """
    if dim < 1 or dim > qmatrix.MAX_DIM:
        raise SizeError(f"dimension {dim} out of range [1, {qmatrix.MAX_DIM}]")
    if rank < 1 or rank > dim:
        raise ParameterError(f"rank {rank} must satisfy 1 <= rank <= dim ({dim})")
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(rank))
    basis = haar_unitary(dim, rng)
    return SpectralState(probabilities=p, basis=basis, seed=seed)


def von_neumann_entropy(rho: DensityMatrix | np.ndarray) -> float:
    """-Tr(rho ln rho) in nats, evaluated through the spectrum.

    Eigenvalues inside the PSD tolerance band are clamped to zero before
    the 0 ln 0 = 0 convention is applied.
    """
    if not isinstance(rho, DensityMatrix):
        rho = DensityMatrix(rho)
    w = np.clip(rho.eigenvalues, 0.0, None)
    return entropy_of_probabilities(w)


def mutual_information(rho_ab: DensityMatrix, d_a: int, d_b: int) -> float:
    """Exact quantum mutual information S(A) + S(B) - S(AB), in nats."""
    if d_a * d_b != rho_ab.dim:
        raise SizeError(f"bipartition {d_a}x{d_b} does not match dimension {rho_ab.dim}")
    s_a = von_neumann_entropy(rho_ab.reduce(d_a, d_b, 0))
    s_b = von_neumann_entropy(rho_ab.reduce(d_a, d_b, 1))
    return s_a + s_b - von_neumann_entropy(rho_ab)


def save_spectral(path, state: SpectralState) -> None:
    """Text export: header "d r seed", the p vector, then the basis."""
    lines = [f"{state.dim} {state.rank} {state.seed}"]
    for x in state.probabilities:
        lines.append(f"{x:.17g}")
    lines.append(str(state.dim))
    for z in state.basis.reshape(-1):
        lines.append(f"{z.real:.17g} {z.imag:.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_spectral(path) -> SpectralState:
    with open(path) as fh:
        tokens = fh.read().split()
    if len(tokens) < 3:
        raise ValidationError(f"truncated spectral-state file: {path}")
    d, r, seed = int(tokens[0]), int(tokens[1]), int(tokens[2])
    need = 3 + r + 1 + 2 * d * d
    if len(tokens) != need:
        raise ValidationError(
            f"spectral-state file {path}: expected {need} tokens, got {len(tokens)}"
        )
    p = np.array([float(t) for t in tokens[3 : 3 + r]])
    if int(tokens[3 + r]) != d:
        raise ValidationError(f"basis dimension {tokens[3 + r]} differs from header d={d}")
    vals = np.array([float(t) for t in tokens[4 + r :]])
    basis = (vals[0::2] + 1j * vals[1::2]).reshape(d, d)
    return SpectralState(probabilities=p, basis=basis, seed=seed)
