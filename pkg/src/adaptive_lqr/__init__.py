"""Adaptive LQR benchmark library.

Simulation of a stepwise certainty-equivalent controller with decaying
exploration on linear-quadratic systems, plus the sweep, diagnostics, and
rate-fitting tooling used to study its estimation-error and regret scaling.
"""
from .adaptive_control import (
    AlgoConfig,
    ControllerState,
    StepDiagnostics,
    controller_init,
    controller_step,
    exploration_std,
)
from .analysis import (
    RATE_BANDS,
    CheckpointDiag,
    RateFit,
    aggregate_quantiles,
    build_rate_report,
    checkpoint_diagnostics,
    fit_rate,
    nearest_rank_quantile,
    riccati_identity_check,
    subspace_projectors,
)
from .config import (
    ExperimentConfig,
    canonical_json,
    config_from_dict,
    config_hash,
    config_to_dict,
    dump_config,
    load_config,
)
from .control_core import (
    RiccatiSolution,
    SystemSpec,
    check_stabilizing,
    optimal_gain,
    random_system,
    solve_dare,
    spectral_norm,
    spectral_radius,
)
from .errors import (
    AdaptiveLqrError,
    DivergedError,
    InsufficientDataError,
    InvalidInputError,
    NoDataError,
    NotStabilizableError,
    NumericError,
)
from .lqr_sim import (
    RunRecord,
    Trajectory,
    cost_increment,
    regret,
    run_algorithm,
    run_oracle,
    run_paired,
    step_dynamics,
)
from .noise import NoiseStreams, stream_key
from .records import (
    read_all_records,
    read_manifest,
    read_records,
    record_from_dict,
    record_to_dict,
    write_manifest,
    write_records,
)
from .sweep import failed_replicate_fraction, run_sweep, write_sweep
from .sysid import (
    RegressionState,
    ThetaEstimate,
    gram_snapshot,
    new_regression,
    record_transition,
    solve_theta,
)
from .version import __version__

__all__ = [
    "AdaptiveLqrError",
    "AlgoConfig",
    "CheckpointDiag",
    "ControllerState",
    "DivergedError",
    "ExperimentConfig",
    "InsufficientDataError",
    "InvalidInputError",
    "NoDataError",
    "NotStabilizableError",
    "NumericError",
    "RATE_BANDS",
    "RateFit",
    "RegressionState",
    "RiccatiSolution",
    "RunRecord",
    "StepDiagnostics",
    "SystemSpec",
    "ThetaEstimate",
    "Trajectory",
    "NoiseStreams",
    "aggregate_quantiles",
    "build_rate_report",
    "check_stabilizing",
    "checkpoint_diagnostics",
    "canonical_json",
    "config_from_dict",
    "config_hash",
    "config_to_dict",
    "controller_init",
    "controller_step",
    "cost_increment",
    "dump_config",
    "exploration_std",
    "failed_replicate_fraction",
    "fit_rate",
    "gram_snapshot",
    "load_config",
    "nearest_rank_quantile",
    "new_regression",
    "optimal_gain",
    "random_system",
    "read_all_records",
    "read_manifest",
    "read_records",
    "record_from_dict",
    "record_to_dict",
    "record_transition",
    "regret",
    "riccati_identity_check",
    "run_algorithm",
    "run_oracle",
    "run_paired",
    "run_sweep",
    "solve_dare",
    "solve_theta",
    "spectral_norm",
    "spectral_radius",
    "step_dynamics",
    "stream_key",
    "subspace_projectors",
    "write_manifest",
    "write_records",
    "write_sweep",
    "__version__",
]
