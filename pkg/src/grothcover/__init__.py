"""Simultaneous beta-certificates for Boolean 2-CSPs and their fractional covers."""
from ._kernels import BACKEND
from .certify import (BetaCertificate, BetaInfeasible, ParameterSchedule, PipelineResult,
                      VerificationReport, certificate_from_json, certificate_to_json,
                      parameter_schedule, run_pipeline, select_best_cut, verify_certificate)
from .cones import (ConeSpec, CovKind, DistKind, apply_adjoint, apply_map, check_cover_order,
                    check_dist_membership, psd_project, sign_tensor)
from .cover import (BudgetExhausted, Cover, Mode, Regime, SampleBudget, build_cover,
                    check_cover_feasible, sample_budget)
from .instances import (Constraint, CspInstance, CutSet, InstanceError, PredicateTemplate,
                        constraint_matrix, delta_matrix, encode_problem, parse_instance,
                        satisfied)
from .oracle import brute_maxq, exact_fevc, lp_solve
from .relax import (DualWitness, NonConvergence, PrimalWitness, SolverConfig, repair_witness,
                    solve_nu_eps, solve_nu_polar_eps)
from .rounding import (GW_ALPHA, GramFactor, RoundingSpec, estimate_rounding_constant,
                       gram_factor, gw_sample)
from .sparsify import SparsifyConfig, sparsify_cover

__version__ = "0.1.0"
