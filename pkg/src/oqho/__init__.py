"""Commutator-kernel eigenbasis, coefficient statistics and quadratic-exponential
functionals for one-mode open quantum harmonic oscillators."""

from .covariance import (CovarianceSet, PauliCoefficients, assemble_P_N, covariance_set,
                         cross_covariance_blocks, pauli_decompose, qkl_cross_covariance,
                         reconstruct_real_covariance, solve_lyapunov)
from .eigenbasis import (SpectralBasis, apply_covariance_operator, eigenfunction_eval, gram_matrix,
                         mercer_partial_sum, solve_roots)
from .errors import *  # noqa: F401,F403
from .qef import (QefEvaluation, admissibility_radius, build_structural_matrices, critical_theta,
                  diamond_map, exponential_params, qef_series, qef_truncated, weighting_matrices)
from .quadrature import QuadratureConfig
from .system import (CanonicalModel, OqhoModel, build_model, canonicalize, commutator_kernel, kernel_C,
                     model_from_rates, pr_residual, rotation_U, two_point_sigma)

__version__ = "0.1.0"
