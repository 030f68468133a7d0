"""Layered Pauli-rotation circuit acting on density matrices.

Layer layout (depth D, n qubits, 4*n*D parameters total):

    [Ry, Rz on every qubit] -> [CNOT ring] -> [Ry, Rz on every qubit]

Parameter index for layer L, block B (0 = before the ring, 1 = after),
qubit q, axis a (0 = Ry, 1 = Rz):

    idx = ((L * 2 + B) * n + q) * 2 + a

Qubit 0 is the most significant bit of the computational-basis index;
the ring has qubit q controlling qubit (q + 1) mod n and degenerates to
the identity for n = 1. Rotations use the convention R_P(t) = e^{-i t P / 2},
for which the two-point shift rule

    dg/dtheta = (g(theta + pi/2) - g(theta - pi/2)) / 2

is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ParameterError, SizeError, ValidationError
from .qdvr import QdvrConfig, log_sum_exp
from .states import DensityMatrix

MAX_QUBITS = 10


@dataclass(frozen=True)
class Ansatz:
    qubits: int
    depth: int
    theta: np.ndarray

    def __post_init__(self):
        if self.qubits < 1 or self.qubits > MAX_QUBITS:
            raise ParameterError(f"qubits must lie in [1, {MAX_QUBITS}], got {self.qubits}")
        if self.depth < 1:
            raise ParameterError(f"depth must be at least 1, got {self.depth}")
        th = np.asarray(self.theta, dtype=np.float64).reshape(-1)
        if th.size != self.n_params:
            raise ValidationError(
                f"theta has {th.size} entries, expected 4*n*D = {self.n_params}"
            )
        if not np.isfinite(th).all():
            raise ValidationError("theta has non-finite entries")
        th = th.copy()
        th.setflags(write=False)
        object.__setattr__(self, "theta", th)

    @property
    def n_params(self) -> int:
        return 4 * self.qubits * self.depth

    @property
    def dim(self) -> int:
        return 2**self.qubits

    def with_theta(self, theta: np.ndarray) -> "Ansatz":
        return Ansatz(self.qubits, self.depth, theta)


def random_theta(qubits: int, depth: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform initialization on [0, 2*pi)."""
    return rng.uniform(0.0, 2.0 * np.pi, size=4 * qubits * depth)


def _rot_y(t: float) -> np.ndarray:
    c, s = np.cos(t / 2.0), np.sin(t / 2.0)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def _rot_z(t: float) -> np.ndarray:
    return np.array(
        [[np.exp(-0.5j * t), 0.0], [0.0, np.exp(0.5j * t)]], dtype=np.complex128
    )


_ROT = (_rot_y, _rot_z)


def _embed(gate: np.ndarray, qubit: int, n: int) -> np.ndarray:
    left = np.eye(2**qubit, dtype=np.complex128)
    right = np.eye(2 ** (n - qubit - 1), dtype=np.complex128)
    return np.kron(np.kron(left, gate), right)


def _cnot(control: int, target: int, n: int) -> np.ndarray:
    dim = 2**n
    m = np.zeros((dim, dim), dtype=np.complex128)
    cbit = 1 << (n - 1 - control)
    tbit = 1 << (n - 1 - target)
    for j in range(dim):
        m[j ^ tbit if j & cbit else j, j] = 1.0
    return m


@lru_cache(maxsize=None)
def _ring(n: int) -> np.ndarray:
    """CNOT ring, qubit q controlling (q+1) mod n, applied q ascending."""
    u = np.eye(2**n, dtype=np.complex128)
    if n == 1:
        u.setflags(write=False)
        return u
    for q in range(n):
        u = _cnot(q, (q + 1) % n, n) @ u
    u.setflags(write=False)
    return u


@lru_cache(maxsize=None)
def _slot_structure(n: int, depth: int):
    """Flat gate-slot list: ("rot", qubit, axis, param_idx) or ("ring",)."""
    slots = []
    idx = 0
    for _layer in range(depth):
        for block in range(2):
            if block == 1:
                slots.append(("ring",))
            for q in range(n):
                for axis in range(2):
                    slots.append(("rot", q, axis, idx))
                    idx += 1
    return tuple(slots)


@lru_cache(maxsize=None)
def _shift_gates(n: int):
    """Embedded +-pi/2 rotations, indexed by 2*qubit + axis."""
    plus = np.empty((2 * n, 2**n, 2**n), dtype=np.complex128)
    minus = np.empty_like(plus)
    for q in range(n):
        for axis in range(2):
            plus[2 * q + axis] = _embed(_ROT[axis](np.pi / 2.0), q, n)
            minus[2 * q + axis] = _embed(_ROT[axis](-np.pi / 2.0), q, n)
    plus.setflags(write=False)
    minus.setflags(write=False)
    return plus, minus


_PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]])
_PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128)


@lru_cache(maxsize=None)
def _pauli_embeddings(n: int) -> np.ndarray:
    """Rotation generators embedded on each qubit, indexed by 2*qubit + axis."""
    out = np.empty((2 * n, 2**n, 2**n), dtype=np.complex128)
    for q in range(n):
        out[2 * q + 0] = _embed(_PAULI_Y, q, n)
        out[2 * q + 1] = _embed(_PAULI_Z, q, n)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _grad_groups(n: int, depth: int):
    """Rotation slots grouped by (qubit, axis) for batched gradient work."""
    groups: dict[int, tuple[list[int], list[int]]] = {}
    for k, slot in enumerate(_slot_structure(n, depth)):
        if slot[0] != "rot":
            continue
        _, q, axis, idx = slot
        slot_ks, par_idx = groups.setdefault(2 * q + axis, ([], []))
        slot_ks.append(k)
        par_idx.append(idx)
    return tuple(
        (g, np.array(ks), np.array(ps)) for g, (ks, ps) in sorted(groups.items())
    )


def _gate_matrices(ansatz: Ansatz) -> list[np.ndarray]:
    # R_P(t) = cos(t/2) I - i sin(t/2) P with the embedded generator cached,
    # which avoids a Kronecker product per gate in the training hot path.
    n = ansatz.qubits
    eye = np.eye(2**n, dtype=np.complex128)
    paulis = _pauli_embeddings(n)
    gates = []
    for slot in _slot_structure(n, ansatz.depth):
        if slot[0] == "ring":
            gates.append(_ring(n))
        else:
            _, q, axis, idx = slot
            half = 0.5 * ansatz.theta[idx]
            gates.append(np.cos(half) * eye - (1j * np.sin(half)) * paulis[2 * q + axis])
    return gates


def build_unitary(ansatz: Ansatz) -> np.ndarray:
    u = np.eye(ansatz.dim, dtype=np.complex128)
    for g in _gate_matrices(ansatz):
        u = g @ u
    return u


def apply_ansatz(ansatz: Ansatz, rho: DensityMatrix) -> DensityMatrix:
    """Conjugate the state by the circuit unitary: U rho U^dag."""
    if rho.dim != ansatz.dim:
        raise SizeError(f"state dimension {rho.dim} differs from circuit {ansatz.dim}")
    u = build_unitary(ansatz)
    out = u @ rho.mat @ u.conj().T
    return DensityMatrix(0.5 * (out + out.conj().T), rank=rho.rank)


@dataclass(frozen=True)
class MeasuredDiagonal:
    """First rank_t computational-basis diagonal entries of U rho U^dag."""

    probs: np.ndarray
    shots: int


def measure_diagonal(
    ansatz: Ansatz,
    rho: DensityMatrix,
    rank_t: int,
    shots: int = 0,
    seed: int | None = None,
) -> MeasuredDiagonal:
    """Exact diagonal entries (shots=0) or seeded multinomial frequencies."""
    if rank_t < 1 or rank_t > ansatz.dim:
        raise ParameterError(f"rank_t {rank_t} must lie in [1, {ansatz.dim}]")
    if rho.dim != ansatz.dim:
        raise SizeError(f"state dimension {rho.dim} differs from circuit {ansatz.dim}")
    u = build_unitary(ansatz)
    full = np.clip(np.einsum("ij,jk,ik->i", u, rho.mat, u.conj()).real, 0.0, None)
    if shots == 0:
        return MeasuredDiagonal(probs=full[:rank_t].copy(), shots=0)
    if shots < 0:
        raise ParameterError(f"shots must be non-negative, got {shots}")
    if seed is None:
        raise ParameterError("finite-shot measurement requires a seed")
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, full / full.sum())
    return MeasuredDiagonal(probs=counts[:rank_t] / shots, shots=shots)


def simplex_map(phi: np.ndarray) -> np.ndarray:
    """Angles -> probability vector of length len(phi) + 1.

    t_i = (prod_{j<i} sin^2 phi_j) cos^2 phi_i, with the last coordinate
    carrying the leftover product so the sum telescopes to exactly 1.
    """
    f = np.asarray(phi, dtype=np.float64).reshape(-1)
    t = np.empty(f.size + 1)
    prefix = 1.0
    for i in range(f.size):
        nxt = prefix * np.sin(f[i]) ** 2
        t[i] = prefix - nxt
        prefix = nxt
    t[-1] = prefix
    return t


def simplex_jacobian(phi: np.ndarray) -> np.ndarray:
    """d t_i / d phi_j, shape (len(phi)+1, len(phi))."""
    f = np.asarray(phi, dtype=np.float64).reshape(-1)
    r = f.size + 1
    sin2 = np.sin(f) ** 2
    dsin2 = np.sin(2.0 * f)
    cos2 = np.cos(f) ** 2
    jac = np.zeros((r, f.size))
    for i in range(r):
        tail = cos2[i] if i < r - 1 else 1.0
        for j in range(min(i + 1, f.size)):
            if j == i:
                val = -dsin2[i]
            else:
                val = dsin2[j] * tail
            for l in range(i):
                if l != j:
                    val *= sin2[l]
            jac[i, j] = val
    return jac


def uniform_simplex_angles(rank_t: int) -> np.ndarray:
    """Angles mapping to the uniform weight vector (1/k, ..., 1/k)."""
    if rank_t < 1:
        raise ParameterError(f"rank_t must be at least 1, got {rank_t}")
    k = rank_t
    return np.arccos(np.sqrt(1.0 / (k - np.arange(k - 1))))


def _check_rank(phi: np.ndarray, config: QdvrConfig, dim: int) -> np.ndarray:
    f = np.asarray(phi, dtype=np.float64).reshape(-1)
    if f.size + 1 != config.rank_t:
        raise ParameterError(
            f"phi has {f.size} angles; rank_t {config.rank_t} requires {config.rank_t - 1}"
        )
    if config.rank_t > dim:
        raise ParameterError(f"rank_t {config.rank_t} exceeds dimension {dim}")
    return f


def _loss_from_parts(t: np.ndarray, diag: np.ndarray, dim: int, c: float) -> float:
    r = t.size
    log_z = log_sum_exp(c * t, zeros=dim - r)
    return -c * float(t @ diag) + log_z


def circuit_loss(
    ansatz: Ansatz,
    phi: np.ndarray,
    rho: DensityMatrix,
    config: QdvrConfig,
    shots: int = 0,
    seed: int | None = None,
) -> float:
    """Variational loss -c sum t_i <i|U rho U^dag|i> + ln(d - r + sum e^{c t_i}).

    With shots=0 this equals the scaled objective evaluated at
    T = U^dag diag(t) U, so it upper-bounds the entropy of rho.
    """
    f = _check_rank(phi, config, ansatz.dim)
    measured = measure_diagonal(ansatz, rho, config.rank_t, shots=shots, seed=seed)
    return _loss_from_parts(simplex_map(f), measured.probs, ansatz.dim, config.c)


def reconstruct_t(ansatz: Ansatz, phi: np.ndarray) -> DensityMatrix:
    """The density matrix T = U^dag diag(simplex_map(phi)) U the loss encodes."""
    t = simplex_map(phi)
    u = build_unitary(ansatz)
    d = ansatz.dim
    weights = np.zeros(d)
    weights[: t.size] = t
    m = (u.conj().T * weights) @ u
    return DensityMatrix(0.5 * (m + m.conj().T))


def shift_rule_gradient(
    ansatz: Ansatz,
    phi: np.ndarray,
    rho: DensityMatrix,
    config: QdvrConfig,
    j: int,
    shots: int = 0,
    seed: int | None = None,
) -> float:
    """Exact two-point shift-rule derivative of the loss in theta_j."""
    if j < 0 or j >= ansatz.n_params:
        raise ParameterError(f"parameter index {j} out of range [0, {ansatz.n_params})")
    up = ansatz.theta.copy()
    dn = ansatz.theta.copy()
    up[j] += np.pi / 2.0
    dn[j] -= np.pi / 2.0
    plus = circuit_loss(ansatz.with_theta(up), phi, rho, config, shots=shots, seed=seed)
    minus = circuit_loss(ansatz.with_theta(dn), phi, rho, config, shots=shots, seed=seed)
    return 0.5 * (plus - minus)


def spectrum_gradients(
    ansatz: Ansatz,
    phi: np.ndarray,
    rho: DensityMatrix,
    config: QdvrConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic (dg/dt_i, dg/dphi_j) in exact-expectation mode.

    dg/dt_i = -c <i|U rho U^dag|i> + c e^{c t_i} / (d - r + sum e^{c t_l});
    the phi gradient chains through the simplex-map Jacobian.
    """
    f = _check_rank(phi, config, ansatz.dim)
    t = simplex_map(f)
    diag = measure_diagonal(ansatz, rho, config.rank_t).probs
    log_z = log_sum_exp(config.c * t, zeros=ansatz.dim - config.rank_t)
    dg_dt = -config.c * diag + config.c * np.exp(config.c * t - log_z)
    dg_dphi = simplex_jacobian(f).T @ dg_dt
    return dg_dt, dg_dphi


def loss_and_gradients(
    ansatz: Ansatz,
    phi: np.ndarray,
    rho: DensityMatrix,
    config: QdvrConfig,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss plus exact gradients for every theta and phi in one pass.

    The theta gradient is the two-point shift rule for each parameter,
    evaluated from cached forward states and back-propagated observables
    so one training step costs O(n_params) small matrix products instead
    of O(n_params) full circuit rebuilds. Values agree with
    :func:`shift_rule_gradient` / :func:`spectrum_gradients` entry by entry.
    """
    f = _check_rank(phi, config, ansatz.dim)
    if rho.dim != ansatz.dim:
        raise SizeError(f"state dimension {rho.dim} differs from circuit {ansatz.dim}")
    n, d, r, c = ansatz.qubits, ansatz.dim, config.rank_t, config.c
    gates = _gate_matrices(ansatz)
    gates_h = [g.conj().T for g in gates]
    n_slots = len(gates)

    forward = np.empty((n_slots, d, d), dtype=np.complex128)
    cur = rho.mat
    for k in range(n_slots):
        forward[k] = cur
        cur = gates[k] @ cur @ gates_h[k]

    diag = np.clip(np.diagonal(cur).real, 0.0, None)
    t = simplex_map(f)
    log_z = log_sum_exp(c * t, zeros=d - r)
    loss = -c * float(t @ diag[:r]) + log_z

    # Observable sum_i t_i |i><i|, back-propagated through the circuit.
    obs = np.zeros((d, d), dtype=np.complex128)
    obs[np.arange(r), np.arange(r)] = t
    backward = np.empty_like(forward)
    cur_obs = obs
    for k in range(n_slots - 1, -1, -1):
        cur_obs = gates_h[k] @ cur_obs @ gates[k]
        backward[k] = cur_obs

    plus_gates, minus_gates = _shift_gates(n)
    grad_theta = np.empty(ansatz.n_params)
    for group, slot_ks, par_idx in _grad_groups(n, ansatz.depth):
        states = forward[slot_ks]
        observables = backward[slot_ks]
        expect = []
        for w in (plus_gates[group], minus_gates[group]):
            x = (w @ states) @ w.conj().T
            expect.append(np.einsum("pij,pji->p", observables, x).real)
        grad_theta[par_idx] = -0.5 * c * (expect[0] - expect[1])

    dg_dt = -c * diag[:r] + c * np.exp(c * t - log_z)
    grad_phi = simplex_jacobian(f).T @ dg_dt
    return loss, grad_theta, grad_phi


def save_ansatz(path, ansatz: Ansatz) -> None:
    """Text export: header "n D", then one theta value per line."""
    lines = [f"{ansatz.qubits} {ansatz.depth}"]
    lines.extend(f"{x:.17g}" for x in ansatz.theta)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_ansatz(path) -> Ansatz:
    with open(path) as fh:
        tokens = fh.read().split()
    if len(tokens) < 2:
        raise ValidationError(f"truncated ansatz file: {path}")
    n, depth = int(tokens[0]), int(tokens[1])
    theta = np.array([float(x) for x in tokens[2:]])
    if theta.size != 4 * n * depth:
        raise ValidationError(
            f"ansatz file {path}: expected {4 * n * depth} angles, got {theta.size}"
        )
    return Ansatz(qubits=n, depth=depth, theta=theta)
