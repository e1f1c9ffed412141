"""Continuous-time proximal gradient, Douglas-Rachford and primal-dual flows
for nonsmooth composite optimization, with envelope functions and an
exponential-rate certification suite."""

from .certify import (PLReport, RateCertificate, RateEstimate,
                      build_certificate, dr_nonlinearity, empirical_contraction,
                      empirical_rate, envelope_decay_check, lmi_feasibility,
                      pl_check, pl_gamma_from_kappa,
                      prox_gradient_nonlinearity, quadratic_constraint_check,
                      sigma_bound)
from .envelopes import (EnvelopeEval, dg_curvature, fb_envelope, fb_gradient,
                        gmap, moreau, pal)
from .flows import (EquilibriumResult, FlowSystem, NonFiniteStateError,
                    Trajectory, ahu_field, dr_field, dual_dr_field, integrate,
                    make_ahu_flow, make_dr_flow, make_dual_dr_flow, make_flow,
                    make_pg_flow, pg_field, reflected_prox_f, reflected_prox_g,
                    solve_equilibrium)
from .oracles import (ConjugateQuadratic, ProxOracle, ProxSolveError,
                      SmoothOracle, make_box_indicator, make_l1,
                      make_least_squares, make_logistic, make_point_indicator,
                      make_quadratic, make_quadratic_psd, make_zero,
                      prox_smooth)
from .problems import (ProblemSpec, catalog_keys, default_mu, get_problem,
                       problem_from_dict, problem_from_json)
from .reference import (ConvergenceError, ReferenceSolution, admm,
                        discrete_dr, ista, kkt_equality_qp,
                        min_norm_quadratic, projected_gradient,
                        solve_dual_reference, solve_reference)

__all__ = [
    "ConjugateQuadratic", "ConvergenceError", "EnvelopeEval",
    "EquilibriumResult", "FlowSystem", "NonFiniteStateError", "PLReport",
    "ProblemSpec", "ProxOracle", "ProxSolveError", "RateCertificate",
    "RateEstimate", "ReferenceSolution", "SmoothOracle", "Trajectory",
    "admm", "ahu_field", "build_certificate", "catalog_keys", "default_mu",
    "dg_curvature", "discrete_dr", "dr_field", "dr_nonlinearity",
    "dual_dr_field", "empirical_contraction", "empirical_rate",
    "envelope_decay_check", "fb_envelope", "fb_gradient", "get_problem",
    "gmap", "integrate", "ista", "kkt_equality_qp", "lmi_feasibility",
    "make_ahu_flow", "make_box_indicator", "make_dr_flow",
    "make_dual_dr_flow", "make_flow", "make_l1", "make_least_squares",
    "make_logistic", "make_pg_flow", "make_point_indicator",
    "make_quadratic", "make_quadratic_psd", "make_zero",
    "min_norm_quadratic", "moreau", "pal", "pg_field", "pl_check",
    "pl_gamma_from_kappa", "problem_from_dict", "problem_from_json",
    "projected_gradient", "prox_gradient_nonlinearity", "prox_smooth",
    "quadratic_constraint_check", "reflected_prox_f", "reflected_prox_g",
    "sigma_bound", "solve_dual_reference", "solve_equilibrium",
    "solve_reference",
]

__version__ = "0.1.0"
