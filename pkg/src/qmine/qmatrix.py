"""Dense complex linear algebra on Hermitian matrices.

Everything here works on plain ``numpy.ndarray`` values (complex128,
row-major). Matrices are small by design: states live on at most 10
qubits, so dimensions never exceed ``MAX_DIM``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, ParameterError, SizeError, ValidationError

# Hard dimension cap: 2**10.
MAX_DIM = 1024

# Absolute elementwise tolerance for accepting a matrix as Hermitian.
HERMITIAN_ATOL = 1e-12


def as_square_matrix(a: np.ndarray) -> np.ndarray:
    """Coerce to a square complex128 matrix, checking shape and finiteness."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise SizeError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] > MAX_DIM:
        raise SizeError(f"dimension {m.shape[0]} exceeds the supported limit {MAX_DIM}")
    if not np.isfinite(m).all():
        raise ValidationError("matrix has non-finite entries")
    return m


def max_asymmetry(a: np.ndarray) -> float:
    """Largest elementwise deviation from A = A-dagger."""
    return float(np.abs(a - a.conj().T).max()) if a.size else 0.0


def require_hermitian(a: np.ndarray, atol: float = HERMITIAN_ATOL) -> np.ndarray:
    m = as_square_matrix(a)
    asym = max_asymmetry(m)
    if asym > atol:
        raise ValidationError(
            f"matrix is not Hermitian: max |A - A^dag| = {asym:.3e} exceeds {atol:.1e}"
        )
    return m


@dataclass(frozen=True)
class EigenDecomposition:
    """Spectral decomposition A = V diag(w) V^dag with w ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def eig_hermitian(a: np.ndarray) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    Rejects inputs whose asymmetry exceeds ``HERMITIAN_ATOL``; the error
    message carries the measured asymmetry for diagnosis.
    """
    m = require_hermitian(a)
    w, v = np.linalg.eigh(m)
    return EigenDecomposition(w, v)


def matrix_function(a: np.ndarray, func: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Apply a scalar function through the spectrum: V f(w) V^dag.

    Raises ``DomainError`` when ``func`` produces a non-finite value on
    some eigenvalue (e.g. log of a non-positive matrix).
    """
    dec = eig_hermitian(a)
    with np.errstate(all="ignore"):
        fw = np.asarray(func(dec.eigenvalues), dtype=np.float64)
    bad = ~np.isfinite(fw)
    if bad.any():
        lam = dec.eigenvalues[bad][0]
        raise DomainError(f"scalar function is undefined at eigenvalue {lam:.6e}")
    out = (dec.eigenvectors * fw) @ dec.eigenvectors.conj().T
    return 0.5 * (out + out.conj().T)


def matrix_exp(a: np.ndarray) -> np.ndarray:
    return matrix_function(a, np.exp)


def matrix_log(a: np.ndarray) -> np.ndarray:
    return matrix_function(a, np.log)


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product with the package-wide size cap."""
    ma = np.asarray(a, dtype=np.complex128)
    mb = np.asarray(b, dtype=np.complex128)
    if ma.shape[0] * mb.shape[0] > MAX_DIM or ma.shape[1] * mb.shape[1] > MAX_DIM:
        raise SizeError(
            f"tensor product dimension {ma.shape[0] * mb.shape[0]} exceeds {MAX_DIM}"
        )
    return np.kron(ma, mb)


def partial_trace(mat: np.ndarray, dims: tuple[int, int], keep: int) -> np.ndarray:
    """Trace out one factor of a bipartite matrix.

    ``dims`` is (d_A, d_B) with the composite index i = a*d_B + b.
    ``keep`` selects the surviving subsystem: 0 keeps A, 1 keeps B.
    """
    d_a, d_b = dims
    m = as_square_matrix(mat)
    if d_a < 1 or d_b < 1 or d_a * d_b != m.shape[0]:
        raise SizeError(
            f"bipartition {d_a}x{d_b} does not match matrix dimension {m.shape[0]}"
        )
    t = m.reshape(d_a, d_b, d_a, d_b)
    if keep == 0:
        return np.einsum("ibjb->ij", t)
    if keep == 1:
        return np.einsum("aiaj->ij", t)
    raise ParameterError(f"keep must be 0 or 1, got {keep}")


def save_matrix(path, mat: np.ndarray) -> None:
    """Write a matrix in the plain-text interchange format.

    First line: dimension d. Then d*d lines of "re im" pairs in row-major
    order, 17 significant digits.
    """
    m = as_square_matrix(mat)
    d = m.shape[0]
    lines = [str(d)]
    for z in m.reshape(-1):
        lines.append(f"{z.real:.17g} {z.imag:.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_matrix(path) -> np.ndarray:
    """Read a matrix written by :func:`save_matrix`."""
    with open(path) as fh:
        tokens = fh.read().split()
    if not tokens:
        raise ValidationError(f"empty matrix file: {path}")
    d = int(tokens[0])
    if d < 1 or d > MAX_DIM:
        raise SizeError(f"matrix file dimension {d} out of range")
    need = 1 + 2 * d * d
    if len(tokens) != need:
        raise ValidationError(
            f"matrix file {path}: expected {need} tokens for d={d}, got {len(tokens)}"
        )
    vals = np.array([float(t) for t in tokens[1:]], dtype=np.float64)
    return (vals[0::2] + 1j * vals[1::2]).reshape(d, d)
