"""Optimal event-triggered LQG scheduling via an exact MILP reformulation."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ModelError, DimensionMismatch, NotPSD, NotPD, NonPositiveHorizon, SingularS,
    WindowMismatch, WindowTooLarge, LengthMismatch, MalformedProblem,
    PropertyViolation, OracleDisagreement, SoundnessViolation, StatisticalViolation,
)
from .model import (  # noqa: E402
    SystemModel, MatrixWorkspace, validate_model, quadratic_form, trace_product,
    cholesky_factor, load_model, model_from_dict, double_integrator,
)
from .riccati import GainSchedule, compute_gains, tail_gramians, solve_gains  # noqa: E402
from .kernels import KernelTable, build_noise_kernels, build_all_kernels, bind_error, bind_covariance  # noqa: E402
from .milp import (  # noqa: E402
    ScheduleVector, MilpProblem, cost_matrix_recursion, cost_unfolded, build_milp,
    check_assignment, implied_mu,
)
from .solver import SolveResult, solve_bruteforce, solve_dp, solve_bnb, solve, cross_validate  # noqa: E402
from .certificates import Verdict, CertificateDecision, evaluate_certificate, certificate_soundness_check  # noqa: E402
from .simulate import (  # noqa: E402
    Precomputed, NoiseStream, SimTrace, SchedulerPolicy, MPCPolicy, OfflinePolicy,
    PeriodicPolicy, ContinuousPolicy, OpenLoopPolicy, FixedSchedulePolicy, make_policy,
    estimator_update, run_episode, offline_schedule,
)
