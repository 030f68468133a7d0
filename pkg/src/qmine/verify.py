"""Numeric verification of every bound and identity the package relies on.

Each check draws seeded instances, records its worst margin, and passes
only if the margin stays inside the tolerance. Trial i of a run with
base seed S uses seed S + i, so a reported failing seed can be replayed
directly with ``--trials 1 --seed <failing seed>``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import pqc, qdvr, states
from .qdvr import QdvrConfig
from .states import DensityMatrix


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    tol: float
    worst_seed: int
    detail: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        out = (
            f"{status} {self.name}: worst={self.worst:.3e} tol={self.tol:.1e} "
            f"({self.detail})"
        )
        if not self.passed:
            out += f" [replay with --trials 1 --seed {self.worst_seed}]"
        return out


def _dims_cycle(max_qubits: int) -> list[int]:
    return [2**k for k in range(1, max_qubits + 1)]


def _random_state(seed: int, dim: int) -> states.SpectralState:
    rank = int(np.random.default_rng(seed).integers(1, dim + 1))
    return states.random_density(dim, rank, seed)


def _random_hermitian(seed: int, dim: int, scale: float = 2.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * (z + z.conj().T) / (2.0 * np.sqrt(dim))


def _result(name, margins, tol, seeds, detail) -> CheckResult:
    worst_idx = int(np.argmax(margins))
    worst = float(margins[worst_idx])
    return CheckResult(
        name=name,
        passed=worst <= tol,
        worst=worst,
        tol=tol,
        worst_seed=seeds[worst_idx],
        detail=detail,
    )


def check_entropy_oracle(trials: int, seed: int, max_qubits: int) -> CheckResult:
    """Assembled-state entropy equals the generation-time -sum p ln p."""
    dims = _dims_cycle(max_qubits)
    margins, seeds = [], []
    for i in range(trials):
        s = seed + i
        st = _random_state(s, dims[i % len(dims)])
        margins.append(abs(states.von_neumann_entropy(st.to_density()) - st.entropy))
        seeds.append(s)
    return _result("entropy_oracle", margins, 1e-9, seeds, f"trials={trials}")


def check_shift_invariance(trials: int, seed: int, max_qubits: int) -> CheckResult:
    """Adding c*I to the argument leaves the Gibbs objective unchanged."""
    dims = _dims_cycle(max_qubits)
    margins, seeds = [], []
    for i in range(trials):
        s = seed + i
        dim = dims[i % len(dims)]
        rng = np.random.default_rng(s)
        t = _random_hermitian(s, dim)
        rho = _random_state(s, dim).to_density()
        base = qdvr.gibbs_objective(t, rho)
        worst = 0.0
        for c in (-10.0, -1.0, 0.5, 100.0, float(rng.uniform(-20, 20))):
            worst = max(worst, abs(qdvr.gibbs_objective(qdvr.add_identity(t, c), rho) - base))
        margins.append(worst)
        seeds.append(s)
    return _result("shift_invariance", margins, 1e-9, seeds, f"trials={trials}")


def check_positivity_shift(trials: int, seed: int, max_qubits: int) -> CheckResult:
    """Shifting by -lambda_min yields a PSD matrix with the same objective."""
    dims = _dims_cycle(max_qubits)
    margins, seeds = [], []
    for i in range(trials):
        s = seed + i
        dim = dims[i % len(dims)]
        t = _random_hermitian(s, dim)
        rho = _random_state(s, dim).to_density()
        lam_min = float(np.linalg.eigvalsh(t)[0])
        shifted = qdvr.add_identity(t, -lam_min)
        neg = max(0.0, -float(np.linalg.eigvalsh(shifted)[0]))
        drift = abs(qdvr.gibbs_objective(shifted, rho) - qdvr.gibbs_objective(t, rho))
        margins.append(max(neg, drift))
        seeds.append(s)
    return _result("positivity_shift", margins, 1e-9, seeds, f"trials={trials}")


def check_witness_certificate(trials: int, seed: int, max_qubits: int) -> CheckResult:
    """The analytic witness is epsilon-close and respects its trace bound.

    Margin is max(|S - f(T0)|/epsilon - 1, Tr(T0) - bound); both must be
    non-positive, so the tolerance is 0.
    """
    dims = _dims_cycle(max_qubits)
    margins, seeds = [], []
    epsilons = (0.1, 0.01)
    for i in range(trials):
        s = seed + i
        st = _random_state(s, dims[i % len(dims)])
        rho = st.to_density()
        worst = -np.inf
        for eps in epsilons:
            witness, bound = qdvr.entropy_witness(st, eps)
            gap = abs(st.entropy - qdvr.gibbs_objective(witness, rho))
            trace = float(np.trace(witness).real)
            worst = max(worst, gap / eps - 1.0, trace - bound)
        margins.append(worst)
        seeds.append(s)
    return _result(
        "witness_certificate", margins, 0.0, seeds, f"trials={trials} eps={epsilons}"
    )


def check_gibbs_lower_bound(trials: int, seed: int, max_qubits: int) -> CheckResult:
    """S(rho) never exceeds the Gibbs objective (margin S - f)."""
    dims = _dims_cycle(max_qubits)
    margins, seeds = [], []
    for i in range(trials):
        s = seed + i
        dim = dims[i % len(dims)]
        t = _random_hermitian(s, dim)
        st = _random_state(s + 7919, dim)
        margins.append(st.entropy - qdvr.gibbs_objective(t, st.to_density()))
        seeds.append(s)
    return _result("gibbs_lower_bound", margins, 1e-9, seeds, f"trials={trials}")


def check_qdvr_bound_and_identity(trials: int, seed: int, max_qubits: int) -> CheckResult:
    """Scaled objective bounds S and equals the Gibbs objective at c*T."""
    dims = _dims_cycle(max_qubits)
    margins, seeds = [], []
    for i in range(trials):
        s = seed + i
        dim = dims[i % len(dims)]
        rng = np.random.default_rng(s)
        t_state = _random_state(s, dim).to_density()
        st = _random_state(s + 7919, dim)
        c = float(rng.uniform(1.0, 80.0))
        g = qdvr.qdvr_objective(t_state, st.to_density(), c)
        bound_gap = st.entropy - g
        identity_gap = abs(g - qdvr.gibbs_objective(c * t_state.mat, st.to_density()))
        margins.append(max(bound_gap, identity_gap))
        seeds.append(s)
    return _result("qdvr_bound_and_identity", margins, 1e-9, seeds, f"trials={trials}")


def check_simplex(trials: int, seed: int, max_qubits: int) -> CheckResult:
    """Simplex map lands on the probability simplex for random angles."""
    margins, seeds = [], []
    for i in range(trials):
        s = seed + i
        rng = np.random.default_rng(s)
        rank = int(rng.integers(1, 2**max_qubits + 1))
        t = pqc.simplex_map(rng.uniform(-2 * np.pi, 2 * np.pi, rank - 1))
        margins.append(max(abs(float(t.sum()) - 1.0), -float(t.min())))
        seeds.append(s)
    return _result("simplex_normalization", margins, 1e-12, seeds, f"trials={trials}")


def check_circuit_unitarity(trials: int, seed: int, max_qubits: int) -> CheckResult:
    """Circuit conjugation preserves the spectrum of the state."""
    margins, seeds = [], []
    for i in range(trials):
        s = seed + i
        rng = np.random.default_rng(s)
        n = int(rng.integers(1, max_qubits + 1))
        depth = int(rng.integers(1, 4))
        st = _random_state(s, 2**n)
        rho = st.to_density()
        ansatz = pqc.Ansatz(n, depth, pqc.random_theta(n, depth, rng))
        out = pqc.apply_ansatz(ansatz, rho)
        margins.append(float(np.abs(out.eigenvalues - rho.eigenvalues).max()))
        seeds.append(s)
    return _result("circuit_unitarity", margins, 1e-9, seeds, f"trials={trials}")


def check_loss_identity(trials: int, seed: int, max_qubits: int) -> CheckResult:
    """Circuit loss equals the scaled objective on the encoded T."""
    margins, seeds = [], []
    for i in range(trials):
        s = seed + i
        rng = np.random.default_rng(s)
        n = int(rng.integers(1, min(max_qubits, 4) + 1))
        d = 2**n
        rank_t = int(rng.integers(1, d + 1))
        st = _random_state(s, d)
        cfg = QdvrConfig(epsilon=0.1, c=float(rng.uniform(1, 40)), rank_t=rank_t)
        ansatz = pqc.Ansatz(n, 2, pqc.random_theta(n, 2, rng))
        phi = rng.uniform(0, np.pi, rank_t - 1)
        loss = pqc.circuit_loss(ansatz, phi, st.to_density(), cfg)
        t_mat = pqc.reconstruct_t(ansatz, phi)
        margins.append(abs(loss - qdvr.qdvr_objective(t_mat, st.to_density(), cfg.c)))
        seeds.append(s)
    return _result("loss_identity", margins, 1e-9, seeds, f"trials={trials}")


def _fd_loss(ansatz, phi, rho, cfg, j, h, kind):
    if kind == "theta":
        up, dn = ansatz.theta.copy(), ansatz.theta.copy()
        up[j] += h
        dn[j] -= h
        return (
            pqc.circuit_loss(ansatz.with_theta(up), phi, rho, cfg)
            - pqc.circuit_loss(ansatz.with_theta(dn), phi, rho, cfg)
        ) / (2 * h)
    up, dn = phi.copy(), phi.copy()
    up[j] += h
    dn[j] -= h
    return (
        pqc.circuit_loss(ansatz, up, rho, cfg) - pqc.circuit_loss(ansatz, dn, rho, cfg)
    ) / (2 * h)


def check_gradients(trials: int, seed: int, max_qubits: int) -> CheckResult:
    """Shift-rule and chain-rule gradients match central finite differences.

    Margin is the relative deviation |grad - fd| / (1 + |fd|), h = 1e-5.
    """
    margins, seeds = [], []
    h = 1e-5
    for i in range(trials):
        s = seed + i
        rng = np.random.default_rng(s)
        n = int(rng.integers(1, min(max_qubits, 3) + 1))
        depth = int(rng.integers(1, 4))
        d = 2**n
        rank_t = int(rng.integers(1, min(d, 4) + 1))
        st = _random_state(s, d)
        rho = st.to_density()
        cfg = QdvrConfig(epsilon=0.1, c=float(rng.uniform(1, 20)), rank_t=rank_t)
        ansatz = pqc.Ansatz(n, depth, pqc.random_theta(n, depth, rng))
        phi = rng.uniform(0, np.pi, rank_t - 1)
        _, g_theta, g_phi = pqc.loss_and_gradients(ansatz, phi, rho, cfg)
        worst = 0.0
        for j in range(ansatz.n_params):
            fd = _fd_loss(ansatz, phi, rho, cfg, j, h, "theta")
            worst = max(worst, abs(g_theta[j] - fd) / (1.0 + abs(fd)))
        for j in range(rank_t - 1):
            fd = _fd_loss(ansatz, phi, rho, cfg, j, h, "phi")
            worst = max(worst, abs(g_phi[j] - fd) / (1.0 + abs(fd)))
        margins.append(worst)
        seeds.append(s)
    return _result("gradient_fidelity", margins, 1e-5, seeds, f"trials={trials} h={h}")


ALL_CHECKS = (
    check_entropy_oracle,
    check_shift_invariance,
    check_positivity_shift,
    check_witness_certificate,
    check_gibbs_lower_bound,
    check_qdvr_bound_and_identity,
    check_simplex,
    check_circuit_unitarity,
    check_loss_identity,
    check_gradients,
)


def run_all(
    trials: int, seed: int, max_qubits: int, corrupt: str | None = None
) -> list[CheckResult]:
    """Run every check; ``corrupt`` forces the named check to fail by
    zeroing its tolerance (harness self-test)."""
    results = []
    for check in ALL_CHECKS:
        res = check(trials, seed, max_qubits)
        if corrupt is not None and res.name == corrupt:
            res = CheckResult(
                name=res.name,
                passed=False,
                worst=res.worst,
                tol=0.0,
                worst_seed=res.worst_seed,
                detail=res.detail + " [tolerance corrupted by self-test]",
            )
        results.append(res)
    return results
