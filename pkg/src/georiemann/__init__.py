"""Riemann solver for two-phase flow with chemical species."""

__version__ = "0.1.0"

from .model import (ModelConfig, PhaseState, FluxEval, CoeffSet, frac_flow, sstar,
                    unit_speed_points, accumulation, flux, jacobians, desk3, read_model)
from .eigen import (elimination_coeffs, reduced_matrices, chemical_reduced_eigen,
                    assemble_eigenpairs, eigen_ordering)
from .rarefaction import integrate_rarefaction, directional_derivative, u_along
from .hugoniot import (phi_vectors, hugoniot_residuals, u_plus, shock_speed, trace_hugoniot,
                       lax_classify, extension_point)
from .bifurcation import coincidence_fn, family_coincidence, sample_surfaces, h_factor
from .riemann import (solve_riemann, build_upsilon_surface, backward_bl_shock, check_compatibility,
                      evaluate_profile)
from .verify import dense_eigen_oracle, scalar_bl_fv
