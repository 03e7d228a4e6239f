"""Exact planar-sector solver for the quartic matrix model with external field."""

from .coupling import lambda_eff
from .grids import (RadialGrid, SampledFunction, build_grid, hilbert_matrix,
                    hilbert_transform, integrate)
from .montecarlo import (FiniteModel, MomentEstimate, SamplerSpec,
                         free_propagator, moment, sd2_residual, ward_residual)
from .npoint import (ChordDiagramTerm, DegenerateIndicesError, NPointRequest,
                     check_bijk_identity, check_ward_four_point,
                     enumerate_chord_terms, fit_index_scaling, four_point,
                     n_point, n_point_via_diagrams)
from .solver import (BoundaryFunction, ConvergenceError, ModelParams,
                     SolveReport, apply_T, compute_Y, compute_z_surrogate,
                     cone_slope_bound, residual_master_Ta, solve_fixed_point)
from .twocycle import (TwoCycleFields, boundary_correlator,
                       build_two_cycle_fields, even_even_recursion,
                       odd_odd_recursion, one_plus_one, solve_X,
                       two_plus_two, x_equation_residual)
from .twopoint import (AngleField, TwoPointField, build_angle_field,
                       build_two_point_field, check_addition_theorem,
                       check_tricomi, scaled_difference, symmetry_defect,
                       theta, theta_zero_limit, two_point,
                       two_point_b_derivative)

__version__ = "0.1.0"
