"""The stepwise noisy certainty-equivalent controller.

Per step t >= 2: re-estimate (A, B) from all transitions recorded so far
(the caller records the transition ending at x_t only after this step, so
the regression holds exactly k = 0..t-2), synthesize a gain through the
Riccati solve on the estimates, and fall back to the safe gain K0 whenever
estimation or synthesis misbehaves or the safety thresholds trip:

    reset if ||x_t|| > C_x (1 + log t)   or   ||K_hat_t|| > C_K.

Steps 0 and 1 apply K0 directly. Exploration noise eta_t is drawn by the
caller (std exploration_std(t)), keeping this module a deterministic map.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .control_core import DARE_MAX_ITERS, DARE_TOL, solve_dare, spectral_norm
from .errors import InvalidInputError, NotStabilizableError
from .sysid import RANK_TOL, RegressionState, ThetaEstimate, new_regression, solve_theta

RESET_NONE = "none"
RESET_NOT_IDENTIFIABLE = "not_identifiable"
RESET_DARE_FAILED = "dare_failed"
RESET_STATE_NORM = "state_norm"
RESET_GAIN_NORM = "gain_norm"

RESET_REASONS = (
    RESET_NONE,
    RESET_NOT_IDENTIFIABLE,
    RESET_DARE_FAILED,
    RESET_STATE_NORM,
    RESET_GAIN_NORM,
)

# closed loops this close to marginal are treated as synthesis failures
STABILITY_MARGIN = 1e-6


@dataclass(frozen=True)
class AlgoConfig:
    """Algorithm inputs: safe gain, reset thresholds, exploration scale."""

    K0: np.ndarray
    C_x: float = 20.0
    C_K: float = 5.0
    sigma_eta: float = 1.0
    rank_tol: float = RANK_TOL
    dare_tol: float = DARE_TOL
    dare_max_iters: int = DARE_MAX_ITERS

    def __post_init__(self):
        K0 = np.asarray(self.K0, dtype=float)
        if K0.ndim != 2:
            raise InvalidInputError(f"K0 must be a d x n matrix, got ndim={K0.ndim}")
        if not np.all(np.isfinite(K0)):
            raise InvalidInputError("K0 has non-finite entries")
        for name in ("C_x", "C_K", "sigma_eta", "rank_tol", "dare_tol"):
            if not (float(getattr(self, name)) > 0.0):
                raise InvalidInputError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.dare_max_iters < 1:
            raise InvalidInputError(f"dare_max_iters must be >= 1, got {self.dare_max_iters}")
        object.__setattr__(self, "K0", K0)


@dataclass
class ControllerState:
    """Mutable per-replicate state; one owner, never shared across runs."""

    t: int
    n: int
    d: int
    Q: np.ndarray
    R: np.ndarray
    regression: RegressionState
    K_hat: np.ndarray
    last_reset_reason: str = RESET_NONE
    reset_count: int = 0


@dataclass
class StepDiagnostics:
    """Per-step introspection; delta is filled by the harness (needs true K)."""

    t: int
    reset_reason: str
    k_hat: np.ndarray
    identifiable: bool | None = None
    dare_converged: bool | None = None
    dare_iterations: int | None = None
    theta_hat: np.ndarray | None = None
    delta: np.ndarray | None = None


def exploration_std(t: int, sigma_eta: float) -> float:
    """Std of eta_t: sigma_eta for t in {0,1}, sigma_eta * t^{-1/4} after."""
    if t < 0:
        raise InvalidInputError(f"t must be >= 0, got {t}")
    if t < 2:
        return float(sigma_eta)
    return float(sigma_eta) * t ** -0.25


def controller_init(cfg: AlgoConfig, n: int, d: int, Q, R) -> ControllerState:
    """Fresh state at t = 0 with gain K0 and an empty regression.

    Q and R are the known cost matrices the synthesis step optimizes; the
    true dynamics never enter.
    """
    Q = np.asarray(Q, dtype=float)
    R = np.asarray(R, dtype=float)
    if cfg.K0.shape != (d, n):
        raise InvalidInputError(f"K0 must be {d}x{n}, got {cfg.K0.shape}")
    if Q.shape != (n, n) or R.shape != (d, d):
        raise InvalidInputError(f"cost shapes Q {Q.shape}, R {R.shape} do not match n={n}, d={d}")
    return ControllerState(
        t=0, n=n, d=d, Q=Q, R=R,
        regression=new_regression(n, d),
        K_hat=cfg.K0.copy(),
    )


def controller_step(state: ControllerState, cfg: AlgoConfig, x_t, eta_t
                    ) -> tuple[np.ndarray, StepDiagnostics]:
    """Advance one step: pick K_hat_t, return u_t = K_hat_t x_t + eta_t.

    Mutates state (t advances by one; K_hat, reset bookkeeping updated).
    Estimation or synthesis pathologies are never errors: each maps to the
    K0 fallback with the reason recorded.
    """
    x_t = np.asarray(x_t, dtype=float)
    eta_t = np.asarray(eta_t, dtype=float)
    if x_t.shape != (state.n,) or eta_t.shape != (state.d,):
        raise InvalidInputError(
            f"x_t {x_t.shape} / eta_t {eta_t.shape} do not match n={state.n}, d={state.d}"
        )
    if not (np.all(np.isfinite(x_t)) and np.all(np.isfinite(eta_t))):
        raise InvalidInputError("x_t or eta_t has non-finite entries")
    t = state.t
    reason = RESET_NONE
    identifiable: bool | None = None
    dare_converged: bool | None = None
    dare_iterations: int | None = None
    theta_hat: np.ndarray | None = None

    if t < 2:
        K_new = cfg.K0
    else:
        if state.regression.count != t - 1:
            raise InvalidInputError(
                f"at step t={t} the regression must hold t-1={t - 1} transitions, "
                f"found {state.regression.count}"
            )
        est: ThetaEstimate = solve_theta(state.regression, cfg.rank_tol)
        theta_hat = est.theta
        identifiable = est.identifiable
        if not est.identifiable:
            K_new = cfg.K0
            reason = RESET_NOT_IDENTIFIABLE
        else:
            try:
                sol = solve_dare(est.A_hat, est.B_hat, state.Q, state.R,
                                 cfg.dare_tol, cfg.dare_max_iters)
                dare_converged = True
                dare_iterations = sol.iterations
                if sol.closed_loop_radius < 1.0 - STABILITY_MARGIN:
                    K_new = sol.K
                else:
                    K_new = cfg.K0
                    reason = RESET_DARE_FAILED
            except NotStabilizableError:
                dare_converged = False
                K_new = cfg.K0
                reason = RESET_DARE_FAILED
        # safety resets; the state check wins when both trip
        if float(np.linalg.norm(x_t)) > cfg.C_x * (1.0 + math.log(t)):
            K_new = cfg.K0
            reason = RESET_STATE_NORM
        elif spectral_norm(K_new) > cfg.C_K:
            K_new = cfg.K0
            reason = RESET_GAIN_NORM
        if reason != RESET_NONE:
            state.reset_count += 1
            state.last_reset_reason = reason

    state.K_hat = K_new
    state.t = t + 1
    u_t = K_new @ x_t + eta_t
    diag = StepDiagnostics(
        t=t, reset_reason=reason, k_hat=K_new,
        identifiable=identifiable, dare_converged=dare_converged,
        dare_iterations=dare_iterations, theta_hat=theta_hat,
    )
    return u_t, diag
