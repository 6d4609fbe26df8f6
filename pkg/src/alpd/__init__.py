"""Accelerated linearized augmented Lagrangian and ADMM solvers for linearly
constrained composite convex programs, with runtime convergence-rate
certificates, baselines, and seeded experiment generators."""

from .functions import (ElasticNet, HingeSum, L1Norm, NonnegIndicator,
                        ProxFn, QuadraticProx, QuadraticSmooth, SmoothFn,
                        SquaredDistance, ZeroProx, ZeroSmooth, project_nonneg,
                        prox_elastic_net, prox_hinge_sum, prox_l1)
from .operators import (DenseMap, FunctionMap, LinearMap, ScaledIdentityMap,
                        ScalingOperator, operator_norm, scaled_norm_sq,
                        spectral_norm)
from .lalm import (CompositeProblem, LalmParams, LalmState, Reference,
                   ScheduleError, augmented_lagrangian, bound_lalm_adaptive,
                   bound_lalm_constant, check_one_iter_lalm, lalm_step,
                   run_lalm, schedule_lalm_adaptive, schedule_lalm_constant)
from .ladmm import (AdaptiveLadmmConfig, LadmmParams, LadmmState,
                    TwoBlockProblem, TwoBlockReference, bounds_ladmm_adaptive,
                    bounds_ladmm_constant, check_one_iter_ladmm,
                    default_adaptive_config, ladmm_step, phi, prop1_margin,
                    run_ladmm, schedule_ladmm_adaptive, schedule_ladmm_constant)
from .baselines import (CpState, InnerSolveError, ProxSubproblem,
                        chambolle_pock_tv, fista, inner_prox_solve,
                        project_affine, project_affine_nonneg)
from .problems import (add_noise, dft_quadratic_solve, diff_op_periodic,
                       gen_ecqp, gen_nnqp, gen_svm, gen_two_block_qp, psnr,
                       synth_image, tv_problem)
from .record import RunOptions, RunRecord, SolverError
from .harness import (ExperimentConfig, audit_record, bound_convert,
                      ensure_reference, kkt_residual, kkt_residual_two_block,
                      nonneg_qp_enumerate, rate_fit, reference_solve,
                      run_experiment)

__version__ = "0.1.0"
