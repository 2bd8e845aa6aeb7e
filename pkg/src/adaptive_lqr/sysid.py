"""Online least-squares identification of Theta = [A, B] from transitions.

Exact running sums, no forgetting factor and no regularization: the estimate
is the plain minimizer of sum_k ||x_{k+1} - A' x_k - B' u_k||^2, solved fresh
against the accumulated Gram matrix at each query.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, NoDataError

RANK_TOL = 1e-10


@dataclass
class RegressionState:
    """Running Gram matrix sum z z' and cross-moment sum x_next z', z = [x; u]."""

    n: int
    d: int
    gram: np.ndarray = field(default=None)
    cross: np.ndarray = field(default=None)
    count: int = 0

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise InvalidInputError(f"dimensions must be positive, got n={self.n} d={self.d}")
        dim_z = self.n + self.d
        if self.gram is None:
            self.gram = np.zeros((dim_z, dim_z))
        if self.cross is None:
            self.cross = np.zeros((self.n, dim_z))

    @property
    def dim_z(self) -> int:
        return self.n + self.d


@dataclass(frozen=True)
class ThetaEstimate:
    A_hat: np.ndarray
    B_hat: np.ndarray
    gram_min_eig: float
    identifiable: bool

    @property
    def theta(self) -> np.ndarray:
        """The stacked n x (n+d) estimate [A_hat, B_hat]."""
        return np.hstack([self.A_hat, self.B_hat])


def new_regression(n: int, d: int) -> RegressionState:
    return RegressionState(n=n, d=d)


def record_transition(state: RegressionState, x_t, u_t, x_next) -> RegressionState:
    """Fold one observed transition into the running sums. Mutates and returns state."""
    x_t = np.asarray(x_t, dtype=float)
    u_t = np.asarray(u_t, dtype=float)
    x_next = np.asarray(x_next, dtype=float)
    if x_t.shape != (state.n,) or u_t.shape != (state.d,) or x_next.shape != (state.n,):
        raise InvalidInputError(
            f"transition shapes {x_t.shape}/{u_t.shape}/{x_next.shape} do not match "
            f"n={state.n}, d={state.d}"
        )
    if not (np.all(np.isfinite(x_t)) and np.all(np.isfinite(u_t)) and np.all(np.isfinite(x_next))):
        raise InvalidInputError("transition contains non-finite values")
    z = np.concatenate([x_t, u_t])
    state.gram += np.outer(z, z)
    state.cross += np.outer(x_next, z)
    state.count += 1
    return state


def solve_theta(state: RegressionState, rank_tol: float = RANK_TOL) -> ThetaEstimate:
    """Solve the accumulated normal equations.

    Identifiable iff lambda_min(gram) >= rank_tol * mean eigenvalue; below
    that the minimum-norm solution (pseudo-inverse) is returned for
    diagnostics with identifiable = False, matching the algorithm's fallback.
    """
    if state.count == 0:
        raise NoDataError("solve_theta called with zero recorded transitions")
    eigs = np.linalg.eigvalsh(state.gram)
    min_eig = float(eigs[0])
    mean_eig = float(np.trace(state.gram)) / state.dim_z
    identifiable = min_eig > 0.0 and min_eig >= rank_tol * mean_eig
    if identifiable:
        theta = np.linalg.solve(state.gram, state.cross.T).T
    else:
        theta = (np.linalg.pinv(state.gram) @ state.cross.T).T
    return ThetaEstimate(
        A_hat=theta[:, : state.n],
        B_hat=theta[:, state.n:],
        gram_min_eig=min_eig,
        identifiable=identifiable,
    )


def gram_snapshot(state: RegressionState) -> np.ndarray:
    """Copy of the current Gram matrix."""
    return state.gram.copy()


def _solve_scalar(g00: float, g01: float, g11: float, c0: float, c1: float,
                  rank_tol: float) -> tuple[float, float, float, bool]:
    """Closed-form 2x2 path used by the scalar simulation engine.

    Returns (a_hat, b_hat, min_eig, identifiable); the pinv fallback is not
    materialized here because the caller discards the estimate when
    unidentifiable.
    """
    mean = 0.5 * (g00 + g11)
    half_diff = 0.5 * (g00 - g11)
    disc = (half_diff * half_diff + g01 * g01) ** 0.5
    min_eig = mean - disc
    identifiable = min_eig > 0.0 and min_eig >= rank_tol * mean
    if not identifiable:
        return 0.0, 0.0, min_eig, False
    det = g00 * g11 - g01 * g01
    a_hat = (c0 * g11 - c1 * g01) / det
    b_hat = (g00 * c1 - g01 * c0) / det
    return a_hat, b_hat, min_eig, True
