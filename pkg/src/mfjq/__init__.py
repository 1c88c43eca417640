"""Sparse Lyapunov feedback stabilization of nonlocal transport equations."""

__version__ = "0.1.0"

from .measures import (GridMeasure, ParticleMeasure, SupportBall, moment,
                       pushforward, sup_norm, total_mass, translate,
                       wasserstein_1d)
from .kernels import (HKKernel, InteractionKernel, constant_kernel, eval_phi,
                      divergence_sup, make_kernel, nonlocal_field,
                      truncate_to_ball)
from .lyapunov import (MomentFunctional, TargetSet, diff_bound_check,
                       distance_to_target, lie_derivative,
                       lie_derivative_fd_oracle, value, variance_about)
from .controller import (ActiveControl, BumpParams, ControlDecision,
                         ControllerState, SearchConfig, admissible, bump_1d,
                         bump_nd, control_function, decide, decide_multi,
                         search_maximizer, slope)
from .solver import (Dynamics, FlowMap, SolverConfig, SupportEscapeError,
                     TrajectoryLog, check_linf_bound, evolve, stability_probe,
                     step_grid, step_particles)
from .scenarios import (ClusterReport, ScenarioSpec, detect_clusters,
                        run_concentration_demo, run_hk_controlled,
                        run_hk_uncontrolled)
