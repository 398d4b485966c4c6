"""Norm-constrained (Ivanov) kernel least squares with validation and risk bounds."""

from .approximation import (DiscreteDesign, approx_I2, approx_Iinf, interpolation_bound,
                            k_functional)
from .core import (BisectionOptions, IvanovFit, clip, coefficients, effective_radius, fit,
                   mu_zero_threshold, predict, predict_many, solve_mu, solve_mu_matrix)
from .eigen import GramDecomposition, eigh, rank_of
from .errors import (ConfigError, ConvergenceError, DomainError, IvanovError, NotPSDError,
                     NumericalError)
from .kernels import Box, KernelSpec, eval_kernel, gram_matrix, sup_norm
from .validation import AdaptiveFit, ValidationGrid, build_grid, select_radius, validation_risk

__version__ = "0.1.0"
