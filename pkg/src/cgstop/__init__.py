"""Early-stopped conjugate gradients for statistical inverse problems."""

__version__ = "0.1.0"

from .cgne import (
    CgTrajectory, StoppingConfig, Termination, interpolated_estimate, interpolated_residual,
    residual_sq_at, run_cgne, stop_tau, stop_tau_dn,
)
from .errors import (
    ErrorCurves, balanced_oracle, decomposition_check, error_curves, error_terms_at, oracle_indices,
    prediction_error, reconstruction_error, showalter_estimate,
)
from .exceptions import (
    AssumptionYViolated, CgStopError, ConfigError, DiagnosticsError, NotBalanced, ProblemError,
    StoppingNotReached, SvdFailure,
)
from .experiments import ExperimentConfig, KappaRule, McSummary, ProblemSpec, run_monte_carlo, rate_study
from .noise import NoiseModel, NoiseSpec, ObservationRun, draw_observation, observe, sample_noise
from .problem import (
    ForwardProblem, SignalKind, make_dense_problem, make_gravity_problem, make_polynomial_decay_problem,
    make_test_signal,
)
from .respoly import ResidualPolyDiag, build_diagnostics, deriv0, eval_rt, smallest_zero

__all__ = [
    "AssumptionYViolated", "CgStopError", "CgTrajectory", "ConfigError", "DiagnosticsError",
    "ErrorCurves", "ExperimentConfig", "ForwardProblem", "KappaRule", "McSummary", "NoiseModel",
    "NoiseSpec", "NotBalanced", "ObservationRun", "ProblemError", "ProblemSpec", "ResidualPolyDiag",
    "SignalKind", "StoppingConfig", "StoppingNotReached", "SvdFailure", "Termination",
    "balanced_oracle", "build_diagnostics", "decomposition_check", "deriv0", "draw_observation",
    "error_curves", "error_terms_at", "eval_rt", "interpolated_estimate", "interpolated_residual",
    "make_dense_problem", "make_gravity_problem", "make_polynomial_decay_problem", "make_test_signal",
    "observe", "oracle_indices", "prediction_error", "rate_study", "reconstruction_error",
    "residual_sq_at", "run_cgne", "run_monte_carlo", "sample_noise", "showalter_estimate",
    "smallest_zero", "stop_tau", "stop_tau_dn",
]
