"""Numerics for elliptic equations and thin obstacle problems near a codimension-two slit."""
from .analysis import (CampanatoReport, HarnackReport, HolderReport, HypothesisError, PropertyFReport,
                       c2alpha_pipeline, campanato_fit, check_property_F, equivalence_suite,
                       harnack_experiment, holder_average_fit, hopf_check, property_f_corpus,
                       ratio_field)
from .coefficients import CoeffField, Pullback, pullback_coefficients
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .dsolve import (DegenerateProblem, UniformProblem, absorb_h_term, absorb_scalar_phi,
                     campanato_iterate, harmonic_replacement, linearize, solve_degenerate,
                     solve_uniform)
from .estimators import (CampanatoEstimator, DegenerateSolver, HolderAverageEstimator,
                         LinearPolyRegressor, SignoriniSolver)
from .geometry import Cone, hom_solution, inverse_map, path_distance, perp_weights, sqrt_map
from .grid import FieldSample, SlitGrid
from .poly import LinearPoly
from .signorini import (SignoriniProblem, SignoriniSolution, classify_regular, derivative_fields,
                        free_boundary_graph, frequency, frequency_profile, solve_signorini)
from .wspace import (check_caccioppoli, check_hardy, check_poincare, fit_linear_poly,
                     weighted_norms)

__version__ = "0.1.0"
