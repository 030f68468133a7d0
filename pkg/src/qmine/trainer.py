"""Gradient-descent minimization of the variational loss.

Every loss value in exact-expectation mode upper-bounds the target
entropy, so the running minimum is the entropy estimate. A run is fully
determined by (state, configs, seed): the initial angles, and the
measurement stream when shots > 0, derive from a single seed sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import pqc, qmatrix, states
from .errors import ParameterError, QmineError, SizeError
from .qdvr import QdvrConfig, qdvr_scale
from .states import DensityMatrix

_OPTIMIZERS = ("adaptive-moment", "plain-gradient")

# Plateau stop: best-so-far unimproved by this margin counts as stalled.
PLATEAU_TOL = 1e-6


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    iterations: int = 2000
    optimizer: str = "adaptive-moment"
    seed: int = 0
    shots: int = 0
    report_every: int = 1
    epsilon: float = 0.1
    rank_t: int = 1
    c_override: float | None = None
    plateau_patience: int | None = None

    def __post_init__(self):
        if not (0.0 < self.learning_rate <= 1.0):
            raise ParameterError(f"learning_rate must lie in (0, 1], got {self.learning_rate}")
        if self.iterations < 1:
            raise ParameterError(f"iterations must be at least 1, got {self.iterations}")
        if self.optimizer not in _OPTIMIZERS:
            raise ParameterError(f"optimizer must be one of {_OPTIMIZERS}, got {self.optimizer!r}")
        if self.shots < 0:
            raise ParameterError(f"shots must be non-negative, got {self.shots}")
        if self.report_every < 1:
            raise ParameterError(f"report_every must be at least 1, got {self.report_every}")
        if not (self.epsilon > 0):
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if self.rank_t < 1:
            raise ParameterError(f"rank_t must be at least 1, got {self.rank_t}")
        if self.plateau_patience is not None and self.plateau_patience < 1:
            raise ParameterError(f"plateau_patience must be at least 1, got {self.plateau_patience}")


@dataclass(frozen=True)
class TrainRecord:
    iteration: int
    loss: float
    entropy_estimate: float
    exact_entropy: float
    abs_error: float
    grad_norm: float


HISTORY_HEADER = "iteration,loss,entropy_estimate,exact_entropy,abs_error,grad_norm"


class TrainingAborted(QmineError, ArithmeticError):
    """Raised when a loss or gradient turns non-finite."""

    def __init__(self, message: str, iteration: int, history: list[TrainRecord]):
        super().__init__(message)
        self.iteration = iteration
        self.history = history


class _Adam:
    """Adaptive moment estimation with bias correction."""

    def __init__(self, lr: float, n: int, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def step(self, x: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return x - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class _PlainGradient:
    def __init__(self, lr: float, n: int):
        self.lr = lr

    def step(self, x: np.ndarray, grad: np.ndarray) -> np.ndarray:
        return x - self.lr * grad


def resolve_qdvr(cfg: TrainConfig, qubits: int, c_cap: float | None = None) -> QdvrConfig:
    """Build the loss configuration, deriving c from the bound unless overridden."""
    if cfg.c_override is not None:
        c = cfg.c_override
    else:
        c = qdvr_scale(cfg.rank_t, qubits, min(cfg.epsilon, 1.0))
        if c_cap is not None:
            c = min(c, c_cap)
    return QdvrConfig(epsilon=cfg.epsilon, c=c, rank_t=cfg.rank_t)


def train_entropy(
    rho: DensityMatrix,
    qubits: int,
    depth: int,
    cfg: TrainConfig,
    qdvr_cfg: QdvrConfig,
    exact_entropy: float | None = None,
) -> tuple[float, list[TrainRecord]]:
    """Minimize the circuit loss; return (entropy estimate, history).

    The estimate is the minimum loss observed over all iterations, which
    in exact-expectation mode never undershoots the true entropy. The
    history holds one record per ``report_every`` iterations plus the
    final one.
    """
    if rho.dim != 2**qubits:
        raise SizeError(f"state dimension {rho.dim} is not 2^{qubits}")
    if qdvr_cfg.rank_t > rho.dim:
        raise ParameterError(f"rank_t {qdvr_cfg.rank_t} exceeds dimension {rho.dim}")
    if exact_entropy is None:
        exact_entropy = states.von_neumann_entropy(rho)

    init_ss, meas_ss = np.random.SeedSequence(cfg.seed).spawn(2)
    init_rng = np.random.default_rng(init_ss)
    meas_rng = np.random.default_rng(meas_ss)

    theta = pqc.random_theta(qubits, depth, init_rng)
    phi = pqc.uniform_simplex_angles(qdvr_cfg.rank_t)
    n_theta = theta.size
    x = np.concatenate([theta, phi])

    if cfg.optimizer == "adaptive-moment":
        opt = _Adam(cfg.learning_rate, x.size)
    else:
        opt = _PlainGradient(cfg.learning_rate, x.size)

    history: list[TrainRecord] = []
    best = math.inf
    plateau_best = math.inf
    stalled = 0
    for it in range(cfg.iterations):
        ansatz = pqc.Ansatz(qubits, depth, x[:n_theta])
        cur_phi = x[n_theta:]
        loss, g_theta, g_phi = pqc.loss_and_gradients(ansatz, cur_phi, rho, qdvr_cfg)
        if cfg.shots > 0:
            shot_seed = int(meas_rng.integers(0, 2**63))
            loss = pqc.circuit_loss(
                ansatz, cur_phi, rho, qdvr_cfg, shots=cfg.shots, seed=shot_seed
            )
        grad = np.concatenate([g_theta, g_phi])
        grad_norm = float(np.linalg.norm(grad))
        if not (math.isfinite(loss) and math.isfinite(grad_norm)):
            raise TrainingAborted(
                f"non-finite loss or gradient at iteration {it} "
                f"(loss={loss}, grad_norm={grad_norm})",
                iteration=it,
                history=history,
            )
        best = min(best, loss)
        if it % cfg.report_every == 0:
            history.append(
                TrainRecord(it, loss, loss, exact_entropy, abs(loss - exact_entropy), grad_norm)
            )
        if loss < plateau_best - PLATEAU_TOL:
            plateau_best = loss
            stalled = 0
        else:
            stalled += 1
        if cfg.plateau_patience is not None and stalled >= cfg.plateau_patience:
            break
        x = opt.step(x, grad)
    if not history or history[-1].iteration != it:
        history.append(
            TrainRecord(it, loss, loss, exact_entropy, abs(loss - exact_entropy), grad_norm)
        )
    return best, history


@dataclass(frozen=True)
class QmiEstimate:
    """Result of the two-training mutual-information estimator."""

    qmi_estimate: float
    product_estimate: float
    joint_estimate: float
    exact_qmi: float
    product_history: list[TrainRecord] = field(repr=False)
    joint_history: list[TrainRecord] = field(repr=False)


def estimate_mutual_information(
    rho_ab: DensityMatrix,
    d_a: int,
    d_b: int,
    depth: int,
    cfg: TrainConfig,
    c_cap: float | None = None,
) -> QmiEstimate:
    """QMI via two entropy trainings: S(rho_A x rho_B) - S(rho_AB).

    Estimating the product-state entropy directly (instead of the two
    marginals separately) needs one fewer training, and the upward bias
    of the two estimates partially cancels in the difference. Each
    target's witness rank is its numerical rank; the trace scale is
    derived per target unless ``c_override`` pins it.
    """
    d = rho_ab.dim
    if d_a * d_b != d:
        raise SizeError(f"bipartition {d_a}x{d_b} does not match dimension {d}")
    qubits = int(round(math.log2(d)))
    if 2**qubits != d:
        raise SizeError(f"dimension {d} is not a power of two")

    rho_a = rho_ab.reduce(d_a, d_b, 0)
    rho_b = rho_ab.reduce(d_a, d_b, 1)
    product = DensityMatrix(qmatrix.tensor(rho_a.mat, rho_b.mat))
    exact = states.mutual_information(rho_ab, d_a, d_b)

    results = []
    for target in (product, rho_ab):
        rank_t = target.numerical_rank()
        run_cfg = replace(cfg, rank_t=rank_t)
        qdvr_cfg = resolve_qdvr(run_cfg, qubits, c_cap=c_cap)
        results.append(train_entropy(target, qubits, depth, run_cfg, qdvr_cfg))
    (est_prod, hist_prod), (est_joint, hist_joint) = results
    return QmiEstimate(
        qmi_estimate=est_prod - est_joint,
        product_estimate=est_prod,
        joint_estimate=est_joint,
        exact_qmi=exact,
        product_history=hist_prod,
        joint_history=hist_joint,
    )


@dataclass(frozen=True)
class BudgetReport:
    """State-copy accounting: ceil(c^2/eps^2 * n_params * n_train)."""

    copies_estimate: int
    c: float
    epsilon: float
    n_params: int
    n_train: int


def copy_budget(c: float, epsilon: float, n_params: int, n_train: int = 1) -> BudgetReport:
    if c <= 0 or epsilon <= 0 or n_params < 1 or n_train < 1:
        raise ParameterError(
            f"invalid budget inputs c={c}, epsilon={epsilon}, "
            f"n_params={n_params}, n_train={n_train}"
        )
    copies = math.ceil(c * c / (epsilon * epsilon) * n_params * n_train)
    return BudgetReport(
        copies_estimate=copies, c=c, epsilon=epsilon, n_params=n_params, n_train=n_train
    )


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def history_csv_lines(history: list[TrainRecord]) -> list[str]:
    lines = [HISTORY_HEADER]
    for rec in history:
        lines.append(
            f"{rec.iteration},{_fmt(rec.loss)},{_fmt(rec.entropy_estimate)},"
            f"{_fmt(rec.exact_entropy)},{_fmt(rec.abs_error)},{_fmt(rec.grad_norm)}"
        )
    return lines


def write_history_csv(path, history: list[TrainRecord]) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(history_csv_lines(history)) + "\n")
