"""Exact recovery of sparse signals from partial Fourier samples with sparse
gross corruption, by weighted l1 minimization."""

__version__ = "0.1.0"

from .certificate import (DualCertificate, GolfingPlan, construct_certificate,
                          full_rank_check, min_inf_norm, plan_golfing, run_golfing,
                          verify_certificate)
from .concentration import (audit_golfing_bounds, audit_operator_deviation,
                            audit_rademacher_tail, audit_steinhaus_tail)
from .errors import *  # noqa: F401,F403
from .instances import (ProblemInstance, build_instance, make_instance,
                        trim_corruption)
from .solver import (RecoveryResult, SolverOptions, oracle_solve, recipe_lambda,
                     solve, solve_instance, solve_scaled)
from .spectral import (PartialFourierOperator, dirac_comb, next_prime,
                       uncertainty_check, unitary_dft, unitary_idft)
