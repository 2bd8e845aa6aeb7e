"""Simulation engine: the LQR environment, cost accounting, and paired runs.

Cost follows the convention J(U,T) = sum_{t=1..T} (x_t'Q x_t + u_t'R u_t):
the t = 0 terms are excluded.  Regret couples the adaptive run against the
oracle u = Kx on the same process-noise realization, which counter-based
streams make possible without replaying either run.

Runs over a checkpoint grid snapshot cost, estimation errors, the Gram
matrix, the accumulated control perturbations Delta_t = (K_hat_t - K)x_t
+ eta_t, and the cost-decomposition remainder

    D_T = J(U,T) - sum_t etilde_t' P etilde_t - sum_t eta_t' R eta_t,
    etilde_t = B eta_t + eps_t,

whose sub-linear growth is one of the structural diagnostics.

There are two engine paths with identical semantics: a general numpy path
and a plain-float path for n = d = 1 (the benchmark's hot case, roughly an
order of magnitude faster).  Dispatch is by dimension only, so outputs stay
deterministic; an internal flag forces the general path for equivalence
tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .adaptive_control import (
    RESET_DARE_FAILED,
    RESET_GAIN_NORM,
    RESET_NONE,
    RESET_NOT_IDENTIFIABLE,
    RESET_STATE_NORM,
    AlgoConfig,
    controller_init,
    controller_step,
    exploration_std,
)
from .analysis import CheckpointDiag, checkpoint_diagnostics
from .control_core import (
    SystemSpec,
    check_stabilizing,
    solve_dare,
    spectral_norm,
    _dare_scalar,
)
from .errors import DivergedError, InvalidInputError, NotStabilizableError
from .noise import NoiseStreams
from .sysid import gram_snapshot, new_regression, record_transition, solve_theta, _solve_scalar

DIVERGENCE_LIMIT = 1e12


@dataclass(frozen=True)
class Trajectory:
    """Per-step arrays of a single run; rows are t = 0..T."""

    x: np.ndarray      # (T+1, n)
    u: np.ndarray      # (T+1, d)
    eta: np.ndarray    # (T+1, d)
    cost: np.ndarray   # (T+1,) raw per-step increments; J sums rows 1..T
    reset: tuple[str, ...]


@dataclass(frozen=True)
class RunRecord:
    """Measurements of one run (or one coupled pair) at a single horizon."""

    T: int
    seed: int
    replicate_id: int
    coupled: bool
    cost_algo: float | None = None
    cost_oracle: float | None = None
    regret: float | None = None
    est_err_theta: float | None = None
    est_err_K: float | None = None
    reset_count: int | None = None
    last_reset_reason: str | None = None
    diverged: bool = False
    fail_time: int | None = None
    checkpoints: tuple[CheckpointDiag, ...] = ()
    trajectory: Trajectory | None = None
    schema_version: int = 1


def step_dynamics(spec: SystemSpec, x_t, u_t, eps_t) -> np.ndarray:
    """x_{t+1} = A x_t + B u_t + eps_t."""
    x_t = np.asarray(x_t, dtype=float)
    u_t = np.asarray(u_t, dtype=float)
    eps_t = np.asarray(eps_t, dtype=float)
    if x_t.shape != (spec.n,) or u_t.shape != (spec.d,) or eps_t.shape != (spec.n,):
        raise InvalidInputError(
            f"shapes x {x_t.shape}, u {u_t.shape}, eps {eps_t.shape} do not match "
            f"n={spec.n}, d={spec.d}"
        )
    if not (np.all(np.isfinite(x_t)) and np.all(np.isfinite(u_t)) and np.all(np.isfinite(eps_t))):
        raise InvalidInputError("non-finite dynamics input")
    return spec.A @ x_t + spec.B @ u_t + eps_t


def cost_increment(spec: SystemSpec, x_t, u_t) -> float:
    """x'Qx + u'Ru for one step."""
    x_t = np.asarray(x_t, dtype=float)
    u_t = np.asarray(u_t, dtype=float)
    if x_t.shape != (spec.n,) or u_t.shape != (spec.d,):
        raise InvalidInputError(
            f"shapes x {x_t.shape}, u {u_t.shape} do not match n={spec.n}, d={spec.d}"
        )
    return float(x_t @ spec.Q @ x_t + u_t @ spec.R @ u_t)


def _resolve_horizons(T: int, checkpoint_grid) -> list[int]:
    if T < 2:
        raise InvalidInputError(f"horizon must be >= 2, got {T}")
    horizons = {int(T)}
    if checkpoint_grid is not None:
        for h in checkpoint_grid:
            h = int(h)
            if 2 <= h <= T:
                horizons.add(h)
    return sorted(horizons)


# ---------------------------------------------------------------------------
# engine paths
#
# Both paths return {horizon: snapshot-dict} plus an optional Trajectory.
# Snapshot keys: cost, and in adaptive mode est_err_theta, est_err_K,
# reset_count, last_reset_reason, gram, delta_sum, decomp.  A horizon the
# run never reached carries {"diverged": True, "fail_time": t}.
# ---------------------------------------------------------------------------


def _simulate_general(spec: SystemSpec, streams: NoiseStreams, horizons: list[int], *,
                      cfg: AlgoConfig | None, gain: np.ndarray | None, explore: bool,
                      collect_traj: bool, eps: np.ndarray | None = None,
                      eta_raw: np.ndarray | None = None):
    T_max = horizons[-1]
    adaptive = gain is None
    if eps is None:
        eps = streams.eps_block(0, T_max + 1)
    if explore:
        if eta_raw is None:
            eta_raw = streams.eta_raw_block(0, T_max + 1)
        sigma = cfg.sigma_eta if cfg is not None else 1.0
        stds = np.array([exploration_std(t, sigma) for t in range(T_max + 1)])
        eta = eta_raw * stds[:, None]
    else:
        eta = np.zeros((T_max + 1, spec.d))

    sol_true = solve_dare(spec.A, spec.B, spec.Q, spec.R)
    K_true, P_true = sol_true.K, sol_true.P
    theta_true = np.hstack([spec.A, spec.B])

    ctrl = controller_init(cfg, spec.n, spec.d, spec.Q, spec.R) if adaptive else None
    x = spec.x0.copy()
    x_prev = None
    u_prev = None
    cost = 0.0
    qeps = 0.0
    qeta = 0.0
    delta_sum = np.zeros((spec.d, spec.d))
    hset = set(horizons)
    snaps: dict[int, dict] = {}
    traj_x, traj_u, traj_eta, traj_cost, traj_reset = [], [], [], [], []
    fail_time = None

    for t in range(T_max + 1):
        eta_t = eta[t]
        if adaptive:
            u_t, diag = controller_step(ctrl, cfg, x, eta_t)
            k_now = diag.k_hat
            reason = diag.reset_reason
        else:
            u_t = gain @ x + eta_t
            k_now = gain
            reason = RESET_NONE
        inc = float(x @ spec.Q @ x + u_t @ spec.R @ u_t)
        if t >= 1:
            if adaptive:
                record_transition(ctrl.regression, x_prev, u_prev, x)
                etilde = spec.B @ eta_t + eps[t]
                qeps += float(etilde @ P_true @ etilde)
                qeta += float(eta_t @ spec.R @ eta_t)
            cost += inc
        if collect_traj:
            traj_x.append(x.copy())
            traj_u.append(np.asarray(u_t, dtype=float).copy())
            traj_eta.append(eta_t.copy())
            traj_cost.append(inc)
            traj_reset.append(reason)
        if t in hset:
            if adaptive:
                est = solve_theta(ctrl.regression, cfg.rank_tol)
                snaps[t] = {
                    "cost": cost,
                    "est_err_theta": spectral_norm(est.theta - theta_true),
                    "est_err_K": spectral_norm(ctrl.K_hat - K_true),
                    "reset_count": ctrl.reset_count,
                    "last_reset_reason": ctrl.last_reset_reason,
                    "gram": gram_snapshot(ctrl.regression),
                    "delta_sum": delta_sum.copy(),
                    "decomp": cost - qeps - qeta,
                }
            else:
                snaps[t] = {"cost": cost}
        if adaptive:
            delta_t = (k_now - K_true) @ x + eta_t
            delta_sum += np.outer(delta_t, delta_t)
        x_next = spec.A @ x + spec.B @ u_t + eps[t]
        if float(np.linalg.norm(x_next)) > DIVERGENCE_LIMIT:
            fail_time = t + 1
            break
        x_prev, u_prev = x, u_t
        x = x_next

    if fail_time is not None:
        for h in horizons:
            if h >= fail_time:
                snaps[h] = {"diverged": True, "fail_time": fail_time}
    traj = None
    if collect_traj:
        traj = Trajectory(
            x=np.array(traj_x), u=np.array(traj_u), eta=np.array(traj_eta),
            cost=np.array(traj_cost), reset=tuple(traj_reset),
        )
    return snaps, traj


def _simulate_scalar(spec: SystemSpec, streams: NoiseStreams, horizons: list[int], *,
                     cfg: AlgoConfig | None, gain: np.ndarray | None, explore: bool,
                     collect_traj: bool, eps: np.ndarray | None = None,
                     eta_raw: np.ndarray | None = None):
    """Pure-float mirror of _simulate_general for n = d = 1."""
    T_max = horizons[-1]
    adaptive = gain is None
    a = float(spec.A[0, 0])
    b = float(spec.B[0, 0])
    q = float(spec.Q[0, 0])
    r = float(spec.R[0, 0])
    if eps is None:
        eps = streams.eps_block(0, T_max + 1)
    eps_l = eps[:, 0].tolist()
    if explore:
        if eta_raw is None:
            eta_raw = streams.eta_raw_block(0, T_max + 1)
        sigma = cfg.sigma_eta if cfg is not None else 1.0
        eta_l = [
            float(eta_raw[t, 0]) * exploration_std(t, sigma) for t in range(T_max + 1)
        ]
    else:
        eta_l = [0.0] * (T_max + 1)

    p_true, k_true, _, _ = _dare_scalar(a, b, q, r)
    if adaptive:
        k0 = float(cfg.K0[0, 0])
        c_x = cfg.C_x
        c_k = cfg.C_K
        rank_tol = cfg.rank_tol
        dare_tol = cfg.dare_tol
        dare_iters = cfg.dare_max_iters
    k_hat = k0 if adaptive else float(gain[0, 0])

    x = float(spec.x0[0])
    x_prev = 0.0
    u_prev = 0.0
    g00 = g01 = g11 = c0 = c1 = 0.0
    cost = 0.0
    qeps = 0.0
    qeta = 0.0
    dsum = 0.0
    resets = 0
    last_reason = RESET_NONE
    hset = set(horizons)
    snaps: dict[int, dict] = {}
    traj_x, traj_u, traj_eta, traj_cost, traj_reset = [], [], [], [], []
    fail_time = None
    margin = 1.0 - 1e-6  # STABILITY_MARGIN, inlined for the hot loop

    for t in range(T_max + 1):
        eta_t = eta_l[t]
        reason = RESET_NONE
        if adaptive and t >= 2:
            a_hat, b_hat, _, ident = _solve_scalar(g00, g01, g11, c0, c1, rank_tol)
            if not ident:
                k_hat = k0
                reason = RESET_NOT_IDENTIFIABLE
            else:
                try:
                    _, k_cand, _, _ = _dare_scalar(a_hat, b_hat, q, r, dare_tol, dare_iters)
                    cl = a_hat + b_hat * k_cand
                    if (cl if cl >= 0.0 else -cl) < margin:
                        k_hat = k_cand
                    else:
                        k_hat = k0
                        reason = RESET_DARE_FAILED
                except NotStabilizableError:
                    k_hat = k0
                    reason = RESET_DARE_FAILED
            if (x if x >= 0.0 else -x) > c_x * (1.0 + math.log(t)):
                k_hat = k0
                reason = RESET_STATE_NORM
            elif (k_hat if k_hat >= 0.0 else -k_hat) > c_k:
                k_hat = k0
                reason = RESET_GAIN_NORM
            if reason != RESET_NONE:
                resets += 1
                last_reason = reason
        u = k_hat * x + eta_t
        inc = q * x * x + r * u * u
        if t >= 1:
            if adaptive:
                g00 += x_prev * x_prev
                g01 += x_prev * u_prev
                g11 += u_prev * u_prev
                c0 += x_prev * x
                c1 += u_prev * x
                etil = b * eta_t + eps_l[t]
                qeps += etil * p_true * etil
                qeta += r * eta_t * eta_t
            cost += inc
        if collect_traj:
            traj_x.append(x)
            traj_u.append(u)
            traj_eta.append(eta_t)
            traj_cost.append(inc)
            traj_reset.append(reason)
        if t in hset:
            if adaptive:
                a_hat, b_hat, _, ident = _solve_scalar(g00, g01, g11, c0, c1, rank_tol)
                if not ident:
                    G = np.array([[g00, g01], [g01, g11]])
                    a_hat, b_hat = np.linalg.pinv(G) @ np.array([c0, c1])
                snaps[t] = {
                    "cost": cost,
                    "est_err_theta": math.hypot(a_hat - a, b_hat - b),
                    "est_err_K": abs(k_hat - k_true),
                    "reset_count": resets,
                    "last_reset_reason": last_reason,
                    "gram": np.array([[g00, g01], [g01, g11]]),
                    "delta_sum": np.array([[dsum]]),
                    "decomp": cost - qeps - qeta,
                }
            else:
                snaps[t] = {"cost": cost}
        if adaptive:
            dl = (k_hat - k_true) * x + eta_t
            dsum += dl * dl
        x_next = a * x + b * u + eps_l[t]
        if (x_next if x_next >= 0.0 else -x_next) > DIVERGENCE_LIMIT:
            fail_time = t + 1
            break
        x_prev, u_prev = x, u
        x = x_next

    if fail_time is not None:
        for h in horizons:
            if h >= fail_time:
                snaps[h] = {"diverged": True, "fail_time": fail_time}
    traj = None
    if collect_traj:
        traj = Trajectory(
            x=np.array(traj_x)[:, None], u=np.array(traj_u)[:, None],
            eta=np.array(traj_eta)[:, None], cost=np.array(traj_cost),
            reset=tuple(traj_reset),
        )
    return snaps, traj


def _simulate(spec, streams, horizons, *, cfg, gain, explore, collect_traj,
              eps=None, eta_raw=None, force_general=False):
    path = _simulate_general if (spec.n != 1 or spec.d != 1 or force_general) \
        else _simulate_scalar
    return path(spec, streams, horizons, cfg=cfg, gain=gain, explore=explore,
                collect_traj=collect_traj, eps=eps, eta_raw=eta_raw)


def _validate_run_inputs(spec: SystemSpec, streams: NoiseStreams) -> None:
    if streams.n != spec.n or streams.d != spec.d:
        raise InvalidInputError(
            f"streams dims ({streams.n},{streams.d}) do not match spec ({spec.n},{spec.d})"
        )


def _assemble_adaptive_record(spec, snaps, horizons, T, streams, K_true, *,
                              coupled: bool, cost_oracle=None, traj=None) -> RunRecord:
    final = snaps[T]
    if final.get("diverged"):
        return RunRecord(
            T=T, seed=streams.seed, replicate_id=streams.replicate_id, coupled=coupled,
            cost_oracle=cost_oracle, diverged=True, fail_time=final["fail_time"],
            checkpoints=tuple(
                _diag_from_snap(h, snaps[h], K_true)
                for h in horizons if h <= T and not snaps[h].get("diverged")
            ),
            trajectory=traj,
        )
    cost_algo = final["cost"]
    reg = None if cost_oracle is None else cost_algo - cost_oracle
    return RunRecord(
        T=T, seed=streams.seed, replicate_id=streams.replicate_id, coupled=coupled,
        cost_algo=cost_algo, cost_oracle=cost_oracle, regret=reg,
        est_err_theta=final["est_err_theta"], est_err_K=final["est_err_K"],
        reset_count=final["reset_count"], last_reset_reason=final["last_reset_reason"],
        checkpoints=tuple(
            _diag_from_snap(h, snaps[h], K_true)
            for h in horizons if h <= T and not snaps[h].get("diverged")
        ),
        trajectory=traj,
    )


def _diag_from_snap(h: int, snap: dict, K_true: np.ndarray) -> CheckpointDiag:
    return checkpoint_diagnostics(
        T=h, gram=snap["gram"], delta_sum=snap["delta_sum"], K_true=K_true,
        est_err_theta=snap["est_err_theta"], est_err_K=snap["est_err_K"],
        decomp_residual=snap["decomp"],
    )


def run_algorithm(spec: SystemSpec, cfg: AlgoConfig, streams: NoiseStreams, T: int,
                  checkpoint_grid=None, *, pin_gain=None, explore: bool = True,
                  collect_trajectory: bool = False, _force_general: bool = False
                  ) -> RunRecord:
    """Simulate the adaptive controller for T steps.

    Returns the algorithm-side record with checkpoint diagnostics at each
    grid point (the horizon itself is always a checkpoint).  Raises
    DivergedError if the state crosses the tripwire.

    pin_gain replaces the whole controller with a fixed gain (a validation
    hook: with pin_gain = K and explore = False the run reproduces the
    oracle bit for bit); no estimation diagnostics are recorded then.
    """
    _validate_run_inputs(spec, streams)
    if pin_gain is None:
        if cfg.K0.shape != (spec.d, spec.n):
            raise InvalidInputError(f"K0 shape {cfg.K0.shape} does not match spec")
        if not check_stabilizing(spec.A, spec.B, cfg.K0, 0.0):
            raise InvalidInputError("K0 does not stabilize the true system")
    horizons = _resolve_horizons(T, checkpoint_grid)
    gain = None if pin_gain is None else np.asarray(pin_gain, dtype=float)
    snaps, traj = _simulate(
        spec, streams, horizons, cfg=cfg, gain=gain, explore=explore,
        collect_traj=collect_trajectory, force_general=_force_general,
    )
    final = snaps[T]
    if final.get("diverged"):
        raise DivergedError(final["fail_time"])
    if gain is not None:
        return RunRecord(
            T=T, seed=streams.seed, replicate_id=streams.replicate_id, coupled=False,
            cost_algo=final["cost"], trajectory=traj,
        )
    K_true = solve_dare(spec.A, spec.B, spec.Q, spec.R).K
    return _assemble_adaptive_record(
        spec, snaps, horizons, T, streams, K_true, coupled=False, traj=traj,
    )


def run_oracle(spec: SystemSpec, streams: NoiseStreams, T: int,
               checkpoint_grid=None, *, collect_trajectory: bool = False) -> RunRecord:
    """Simulate the oracle u_t = K x_t (true-system gain, no exploration).

    Consumes the same eps stream indices as the paired algorithm run.
    """
    _validate_run_inputs(spec, streams)
    horizons = _resolve_horizons(T, checkpoint_grid)
    K = solve_dare(spec.A, spec.B, spec.Q, spec.R).K
    snaps, traj = _simulate(
        spec, streams, horizons, cfg=None, gain=K, explore=False,
        collect_traj=collect_trajectory,
    )
    final = snaps[T]
    if final.get("diverged"):
        raise DivergedError(final["fail_time"])
    return RunRecord(
        T=T, seed=streams.seed, replicate_id=streams.replicate_id, coupled=False,
        cost_oracle=final["cost"], trajectory=traj,
    )


def run_paired(spec: SystemSpec, cfg: AlgoConfig, streams: NoiseStreams, T_grid,
               *, coupled: bool = True, _force_general: bool = False) -> list[RunRecord]:
    """One adaptive run and one oracle run sharing the eps stream.

    Returns one merged record per horizon in T_grid; each equals what a
    standalone pair of runs at that horizon would produce (any horizon is a
    bit-exact prefix of a longer run).  Divergence is recorded per horizon
    rather than raised, so sweep replicates never abort the batch.
    """
    _validate_run_inputs(spec, streams)
    if cfg.K0.shape != (spec.d, spec.n):
        raise InvalidInputError(f"K0 shape {cfg.K0.shape} does not match spec")
    if not check_stabilizing(spec.A, spec.B, cfg.K0, 0.0):
        raise InvalidInputError("K0 does not stabilize the true system")
    grid = sorted({int(t) for t in T_grid})
    if not grid:
        raise InvalidInputError("T_grid is empty")
    if grid[0] < 2:
        raise InvalidInputError(f"T_grid entries must be >= 2, got {grid[0]}")
    horizons = _resolve_horizons(grid[-1], grid)
    T_max = horizons[-1]
    sol = solve_dare(spec.A, spec.B, spec.Q, spec.R)
    eps = streams.eps_block(0, T_max + 1)

    snaps_a, _ = _simulate(
        spec, streams, horizons, cfg=cfg, gain=None, explore=True,
        collect_traj=False, eps=eps, force_general=_force_general,
    )
    if coupled:
        snaps_o, _ = _simulate(
            spec, streams, horizons, cfg=None, gain=sol.K, explore=False,
            collect_traj=False, eps=eps, force_general=_force_general,
        )
    else:
        oracle_streams = NoiseStreams(
            seed=streams.seed, replicate_id=streams.replicate_id + 1_000_000,
            n=spec.n, d=spec.d, sigma_eps=spec.sigma_eps,
        )
        snaps_o, _ = _simulate(
            spec, oracle_streams, horizons, cfg=None, gain=sol.K, explore=False,
            collect_traj=False, force_general=_force_general,
        )

    records = []
    for T in grid:
        snap_o = snaps_o[T]
        cost_oracle = None if snap_o.get("diverged") else snap_o["cost"]
        rec = _assemble_adaptive_record(
            spec, snaps_a, horizons, T, streams, sol.K,
            coupled=coupled, cost_oracle=cost_oracle,
        )
        records.append(rec)
    return records


def regret(algo_record: RunRecord, oracle_record: RunRecord) -> float:
    """cost_algo - cost_oracle for a matched pair of one-sided records."""
    for name in ("T", "seed", "replicate_id"):
        if getattr(algo_record, name) != getattr(oracle_record, name):
            raise InvalidInputError(
                f"records are not a pair: {name} differs "
                f"({getattr(algo_record, name)} vs {getattr(oracle_record, name)})"
            )
    if algo_record.cost_algo is None:
        raise InvalidInputError("first record has no algorithm cost")
    if oracle_record.cost_oracle is None:
        raise InvalidInputError("second record has no oracle cost")
    return algo_record.cost_algo - oracle_record.cost_oracle
