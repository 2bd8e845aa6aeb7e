"""Post-processing: log-log rate fits, quantile tables, Gram-geometry diagnostics.

The structural diagnostics split the Gram matrix G_T = sum z_t z_t' along
the closed-loop subspace col([I; K]) and its exact orthogonal complement
col([-K'; I]): the parallel block should grow like T while the perpendicular
block grows like sqrt(T), driven by the accumulated control perturbations
Delta_t = (K_hat_t - K) x_t + eta_t.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, InvalidInputError

# acceptance bands for fitted log-log slopes; None bound = unconstrained side
RATE_BANDS: dict[str, tuple[float | None, float | None]] = {
    "est_err_theta": (-0.35, -0.15),
    "est_err_K": (-0.35, -0.15),
    "regret": (0.35, 0.65),
    "lam_parallel": (0.9, 1.1),
    "lam_perp": (0.35, 0.75),
    "lam_delta": (0.3, 0.75),
    "decomp_residual": (None, 0.75),
}


def slope_in_band(stat: str, slope: float) -> bool:
    lo, hi = RATE_BANDS[stat]
    if lo is not None and slope < lo:
        return False
    if hi is not None and slope > hi:
        return False
    return True


@dataclass(frozen=True)
class CheckpointDiag:
    """Diagnostics at one checkpoint horizon of a single run."""

    T: int
    gram: np.ndarray
    lam_parallel: float
    lam_perp: float
    lam_delta: float
    est_err_theta: float
    est_err_K: float
    decomp_residual: float


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    stderr: float
    r_squared: float
    points: tuple[tuple[float, float], ...]  # (log T, log statistic)


def subspace_projectors(K_true) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal bases for col([I; K]) and col([-K'; I]).

    The two spans are exact orthogonal complements of R^{n+d} for any K.
    """
    K = np.asarray(K_true, dtype=float)
    if K.ndim != 2 or not np.all(np.isfinite(K)):
        raise InvalidInputError("K_true must be a finite d x n matrix")
    d, n = K.shape
    par = np.vstack([np.eye(n), K])
    perp = np.vstack([-K.T, np.eye(d)])
    basis_par = np.linalg.qr(par)[0]
    basis_perp = np.linalg.qr(perp)[0]
    return basis_par, basis_perp


def _check_psd(M: np.ndarray, name: str) -> None:
    scale = max(float(np.trace(M)), 1e-300)
    if float(np.linalg.eigvalsh(M).min()) < -1e-8 * scale:
        raise InvalidInputError(f"{name} is not positive semidefinite")


def checkpoint_diagnostics(T: int, gram, delta_sum, K_true,
                           est_err_theta: float, est_err_K: float,
                           decomp_residual: float) -> CheckpointDiag:
    """Project the Gram snapshot onto the two subspaces and take the extremes."""
    gram = np.asarray(gram, dtype=float)
    delta_sum = np.asarray(delta_sum, dtype=float)
    _check_psd(gram, "gram")
    _check_psd(delta_sum, "delta_sum")
    basis_par, basis_perp = subspace_projectors(K_true)
    block_par = basis_par.T @ gram @ basis_par
    block_perp = basis_perp.T @ gram @ basis_perp
    return CheckpointDiag(
        T=int(T),
        gram=gram,
        lam_parallel=float(np.linalg.eigvalsh(block_par)[0]),
        lam_perp=float(np.linalg.eigvalsh(block_perp)[-1]),
        lam_delta=float(np.linalg.eigvalsh(delta_sum)[-1]),
        est_err_theta=float(est_err_theta),
        est_err_K=float(est_err_K),
        decomp_residual=float(decomp_residual),
    )


def fit_rate(points, min_points: int = 2) -> RateFit:
    """Ordinary least squares of log(statistic) on log(T).

    points: iterable of (T, statistic) with T and statistic both positive.
    """
    pts = [(float(T), float(v)) for T, v in points]
    if len(pts) < max(min_points, 2):
        raise InsufficientDataError(
            f"need at least {max(min_points, 2)} points, got {len(pts)}"
        )
    for T, v in pts:
        if not (T > 0.0) or not (v > 0.0) or not math.isfinite(T) or not math.isfinite(v):
            raise InvalidInputError(f"fit_rate needs positive finite points, got ({T}, {v})")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    m = len(pts)
    xbar = x.mean()
    ybar = y.mean()
    sxx = float(((x - xbar) ** 2).sum())
    if sxx <= 0.0:
        raise InvalidInputError("fit_rate needs at least two distinct horizons")
    slope = float(((x - xbar) * (y - ybar)).sum() / sxx)
    intercept = float(ybar - slope * xbar)
    resid = y - (intercept + slope * x)
    rss = float((resid ** 2).sum())
    tss = float(((y - ybar) ** 2).sum())
    if m == 2:
        stderr, r_squared = 0.0, 1.0
    else:
        stderr = math.sqrt(rss / (m - 2) / sxx)
        r_squared = 1.0 if tss == 0.0 else 1.0 - rss / tss
    return RateFit(
        slope=slope, intercept=intercept, stderr=stderr, r_squared=r_squared,
        points=tuple(zip(x.tolist(), y.tolist())),
    )


def riccati_identity_check(spec, P, K_true, trials: int = 1000,
                           rel_tol: float = 1e-8, seed: int = 0
                           ) -> tuple[float, bool]:
    """Exercise the exact cost-gap identity on random (x, K_hat) draws.

    For the true system's (P, K) and any gain K_hat and state x:

        x'(Q + K_hat' R K_hat)x + x'(A + B K_hat)' P (A + B K_hat)x - x'Px
            = x'(K_hat - K)'(R + B'PB)(K_hat - K)x

    Returns (max relative discrepancy over the draws, max <= rel_tol).
    The discrepancy is measured against the sum of the left side's term
    magnitudes, which is bounded below by x'Qx > 0 for x != 0.
    """
    if trials < 1:
        raise InvalidInputError(f"trials must be >= 1, got {trials}")
    P = np.asarray(P, dtype=float)
    K = np.asarray(K_true, dtype=float)
    A, B, Q, R = spec.A, spec.B, spec.Q, spec.R
    S = R + B.T @ P @ B
    rng = np.random.default_rng(seed)
    max_err = 0.0
    for _ in range(trials):
        x = rng.standard_normal(spec.n)
        K_hat = rng.standard_normal((spec.d, spec.n))
        t1 = float(x @ (Q + K_hat.T @ R @ K_hat) @ x)
        cl = (A + B @ K_hat) @ x
        t2 = float(cl @ P @ cl)
        t3 = -float(x @ P @ x)
        dk_x = (K_hat - K) @ x
        rhs = float(dk_x @ S @ dk_x)
        den = max(abs(t1) + abs(t2) + abs(t3), 1e-300)
        err = abs(t1 + t2 + t3 - rhs) / den
        if err > max_err:
            max_err = err
    return max_err, max_err <= rel_tol


def nearest_rank_quantile(values, q: float) -> float:
    """Nearest-rank quantile: the ceil(q*N)-th smallest value, q in (0,1)."""
    if not (0.0 < q < 1.0):
        raise InvalidInputError(f"quantile level must be in (0,1), got {q}")
    vals = sorted(float(v) for v in values)
    if not vals:
        raise InsufficientDataError("quantile of empty collection")
    rank = max(1, math.ceil(q * len(vals)))
    return vals[rank - 1]


QUANTILE_FIELDS = ("regret", "est_err_theta", "est_err_K")


def aggregate_quantiles(records, q_levels, fields=QUANTILE_FIELDS
                        ) -> dict[int, dict[str, dict[float, float | None]]]:
    """Per-horizon nearest-rank quantiles of the given record fields.

    Records carrying None for a field (oracle-only or diverged runs) are
    skipped for that field; a field with no usable values maps to None.
    """
    q_levels = [float(q) for q in q_levels]
    for q in q_levels:
        if not (0.0 < q < 1.0):
            raise InvalidInputError(f"quantile level must be in (0,1), got {q}")
    groups: dict[int, list] = {}
    for rec in records:
        groups.setdefault(int(rec.T), []).append(rec)
    if not groups:
        raise InsufficientDataError("no records to aggregate")
    table: dict[int, dict[str, dict[float, float | None]]] = {}
    for T in sorted(groups):
        row: dict[str, dict[float, float | None]] = {}
        for name in fields:
            vals = [getattr(r, name) for r in groups[T]]
            vals = [v for v in vals if v is not None]
            if vals:
                row[name] = {q: nearest_rank_quantile(vals, q) for q in q_levels}
            else:
                row[name] = {q: None for q in q_levels}
        table[T] = row
    return table


REPORT_STATS = (
    "regret", "est_err_theta", "est_err_K",
    "lam_parallel", "lam_perp", "lam_delta", "decomp_residual",
)


def final_checkpoint(rec):
    """The checkpoint taken at the record's own horizon, if any."""
    for cp in rec.checkpoints:
        if cp.T == rec.T:
            return cp
    return None


def build_rate_report(records, min_horizons: int = 4) -> dict:
    """Median-vs-horizon power-law fits for every reported statistic.

    Medians are nearest-rank across replicates at each horizon.  Fits run
    on log-log points with positive medians; regret medians can dip
    non-positive at short horizons and such points are dropped (and
    counted) rather than poisoning the fit.  decomp_residual is summarized
    as median |D_T|.  Each statistic is flagged against its band from
    RATE_BANDS; slope bounds that are None are not enforced.
    """
    records = list(records)
    horizons = sorted({int(rec.T) for rec in records})
    if len(horizons) < min_horizons:
        raise InsufficientDataError(
            f"need records at >= {min_horizons} horizons, got {len(horizons)}"
        )
    med_table = aggregate_quantiles(records, [0.5])

    by_T_cp: dict[int, list] = {T: [] for T in horizons}
    for rec in records:
        cp = final_checkpoint(rec)
        if cp is not None:
            by_T_cp[int(rec.T)].append(cp)

    def cp_median(T: int, attr: str) -> float | None:
        vals = [getattr(cp, attr) for cp in by_T_cp[T]]
        if attr == "decomp_residual":
            vals = [abs(v) for v in vals]
        if not vals:
            return None
        return nearest_rank_quantile(vals, 0.5)

    stats: dict[str, dict] = {}
    for name in REPORT_STATS:
        medians = []
        for T in horizons:
            if name in QUANTILE_FIELDS:
                med = med_table[T][name][0.5]
            else:
                med = cp_median(T, name)
            medians.append((T, med))
        fit_points = [(T, m) for T, m in medians if m is not None and m > 0.0]
        dropped = sum(1 for _, m in medians if m is not None) - len(fit_points)
        entry: dict = {
            "medians": [[T, m] for T, m in medians],
            "fit_points": [[T, m] for T, m in fit_points],
            "band": list(RATE_BANDS[name]),
            "dropped_nonpositive": dropped,
            "slope": None, "stderr": None, "intercept": None,
            "r_squared": None, "passed": None,
        }
        if len(fit_points) >= 2:
            fit = fit_rate(fit_points)
            entry.update(
                slope=fit.slope, stderr=fit.stderr, intercept=fit.intercept,
                r_squared=fit.r_squared, passed=slope_in_band(name, fit.slope),
            )
        stats[name] = entry
    return {
        "horizons": horizons,
        "n_records": len(records),
        "stats": stats,
    }
