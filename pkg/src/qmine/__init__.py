"""Variational estimation of von Neumann entropy and quantum mutual
information on density matrices, with exact spectral oracles, analytic
witnesses for every bound, and a reproducible experiment CLI."""

from .errors import DomainError, ParameterError, QmineError, SizeError, ValidationError
from .qdvr import QdvrConfig, add_identity, entropy_witness, gibbs_objective, log_sum_exp, qdvr_objective, qdvr_scale
from .qmatrix import EigenDecomposition, eig_hermitian, load_matrix, matrix_exp, matrix_function, matrix_log, partial_trace, save_matrix, tensor
from .pqc import Ansatz, MeasuredDiagonal, apply_ansatz, build_unitary, circuit_loss, loss_and_gradients, measure_diagonal, reconstruct_t, shift_rule_gradient, simplex_jacobian, simplex_map, spectrum_gradients, uniform_simplex_angles
from .states import DensityMatrix, SpectralState, entropy_of_probabilities, haar_unitary, load_spectral, mutual_information, random_density, save_spectral, von_neumann_entropy
from .trainer import BudgetReport, QmiEstimate, TrainConfig, TrainRecord, TrainingAborted, copy_budget, estimate_mutual_information, resolve_qdvr, train_entropy, write_history_csv

__version__ = "0.1.0"
