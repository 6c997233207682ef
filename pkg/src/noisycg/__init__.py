"""Conjugate gradient with inexact oracles on degenerate quadratics."""

from .linops import (DENSE_DIM_CAP, DenseSymmetricOperator, DiagonalOperator,
                     QuadraticProblem, SpectrumSpec, condition_number,
                     degenerate_spectrum, make_dense_spd, make_problem,
                     make_spectrum)
from .noise import (AdversarialVectorNoise, CombinedNoise, ExactOracle,
                    MatrixNoise, NoiseMatrix, OracleView,
                    StochasticVectorNoise, adversarial_b, make_noise_matrix,
                    oracle_view, sample_noise_magnitudes, stochastic_b)
from .solvers import (Composite, GradNorm, MaxIterRule, Nemirovsky,
                      NonFiniteIterateError, SolverTrace, StopState,
                      check_stop, cg_solve, nesterov_solve)
from .experiments import (ExperimentConfig, FitReport, SweepResult,
                          accumulation_ratio, cesaro_mean, compare_nesterov,
                          estimate_asymptote, fit_least_squares,
                          run_trajectory, sweep_delta, sweep_r)

__version__ = "0.1.0"
