"""Control-theoretic primitives: spectral radius, DARE solve, optimal gain.

The Riccati equation is solved by fixed-point iteration of

    P <- A'PA - A'PB (R + B'PB)^{-1} B'PA + Q

starting from P = Q.  Convergence of this iteration doubles as the
stabilizability certificate for estimated pairs: if it does not converge
the caller treats the pair as unstabilizable and falls back to its safe
gain.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, NotStabilizableError, NumericError

DARE_TOL = 1e-12
DARE_MAX_ITERS = 100_000
# iterates past this magnitude cannot come back; declare the pair unstabilizable
_DARE_BLOWUP = 1e100
_SYM_TOL = 1e-12


def _as_matrix(M, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise InvalidInputError(f"{name} must be a 2-d matrix, got ndim={M.ndim}")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return M


def _check_sym_pd(M: np.ndarray, name: str) -> None:
    if M.shape[0] != M.shape[1]:
        raise InvalidInputError(f"{name} must be square, got {M.shape}")
    scale = max(1.0, float(np.abs(M).max()))
    if np.abs(M - M.T).max() > _SYM_TOL * scale:
        raise InvalidInputError(f"{name} is not symmetric to {_SYM_TOL} relative")
    if np.linalg.eigvalsh(M).min() <= 0.0:
        raise InvalidInputError(f"{name} is not positive definite")


def spectral_radius(M) -> float:
    """Largest absolute eigenvalue of a square matrix."""
    M = _as_matrix(M, "M")
    if M.shape[0] != M.shape[1]:
        raise InvalidInputError(f"spectral_radius needs a square matrix, got {M.shape}")
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def spectral_norm(M) -> float:
    """Largest singular value. Vectors are treated as single-column matrices."""
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        return float(np.linalg.norm(M))
    return float(np.linalg.norm(M, 2))


@dataclass(frozen=True)
class SystemSpec:
    """True dynamics (A, B), cost (Q, R), process-noise scale, and start state.

    The adaptive controller never reads A or B; only the simulator and the
    oracle baseline do.
    """

    n: int
    d: int
    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    sigma_eps: float
    x0: np.ndarray = field(default=None)  # zeros(n) when omitted

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise InvalidInputError(f"dimensions must be positive, got n={self.n} d={self.d}")
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        Q = _as_matrix(self.Q, "Q")
        R = _as_matrix(self.R, "R")
        if A.shape != (self.n, self.n):
            raise InvalidInputError(f"A must be {self.n}x{self.n}, got {A.shape}")
        if B.shape != (self.n, self.d):
            raise InvalidInputError(f"B must be {self.n}x{self.d}, got {B.shape}")
        if Q.shape != (self.n, self.n):
            raise InvalidInputError(f"Q must be {self.n}x{self.n}, got {Q.shape}")
        if R.shape != (self.d, self.d):
            raise InvalidInputError(f"R must be {self.d}x{self.d}, got {R.shape}")
        _check_sym_pd(Q, "Q")
        _check_sym_pd(R, "R")
        if not (float(self.sigma_eps) > 0.0):
            raise InvalidInputError(f"sigma_eps must be > 0, got {self.sigma_eps}")
        x0 = np.zeros(self.n) if self.x0 is None else np.asarray(self.x0, dtype=float)
        if x0.shape != (self.n,):
            raise InvalidInputError(f"x0 must have length {self.n}, got shape {x0.shape}")
        if not np.all(np.isfinite(x0)):
            raise InvalidInputError("x0 has non-finite entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "sigma_eps", float(self.sigma_eps))
        object.__setattr__(self, "x0", x0)


@dataclass(frozen=True)
class RiccatiSolution:
    P: np.ndarray
    K: np.ndarray
    residual: float
    iterations: int
    closed_loop_radius: float


def optimal_gain(P, A, B, R) -> np.ndarray:
    """K = -(R + B'PB)^{-1} B'PA."""
    P = _as_matrix(P, "P")
    A = _as_matrix(A, "A")
    B = _as_matrix(B, "B")
    R = _as_matrix(R, "R")
    BtP = B.T @ P
    S = R + BtP @ B
    try:
        return -np.linalg.solve(S, BtP @ A)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"R + B'PB is singular: {exc}") from exc


def _dare_rhs(P, A, B, Q, R):
    BtP = B.T @ P
    S = R + BtP @ B
    M = BtP @ A
    return A.T @ P @ A - M.T @ np.linalg.solve(S, M) + Q


def _dare_scalar(a: float, b: float, q: float, r: float,
                 tol: float = DARE_TOL, max_iters: int = DARE_MAX_ITERS
                 ) -> tuple[float, float, float, int]:
    """Scalar fixed point, plain floats. Returns (p, k, residual, iterations)."""
    p = q
    b2 = b * b
    a2 = a * a
    for i in range(1, max_iters + 1):
        bp = b * p
        p_new = a2 * p - (a * bp) * (bp * a) / (r + bp * b) + q
        # iterates stay >= q > 0, so max(1, |p_new|) is just this:
        if abs(p_new - p) <= tol * (p_new if p_new > 1.0 else 1.0):
            p = p_new
            bp = b * p
            k = -(bp * a) / (r + bp * b)
            rhs = a2 * p - (a * bp) * (bp * a) / (r + bp * b) + q
            return p, k, abs(p - rhs) / abs(p), i
        if p_new > _DARE_BLOWUP:
            raise NotStabilizableError(f"scalar DARE iterate blew up at iteration {i}")
        p = p_new
    raise NotStabilizableError(f"scalar DARE did not converge in {max_iters} iterations")


def solve_dare(A, B, Q, R, tol: float = DARE_TOL, max_iters: int = DARE_MAX_ITERS
               ) -> RiccatiSolution:
    """Solve the DARE by fixed-point iteration from P = Q.

    Raises NotStabilizableError when the iteration fails to converge within
    max_iters (or blows up), which callers treat as "pair not stabilizable".
    """
    A = _as_matrix(A, "A")
    B = _as_matrix(B, "B")
    Q = _as_matrix(Q, "Q")
    R = _as_matrix(R, "R")
    n = A.shape[0]
    if A.shape != (n, n) or B.shape[0] != n:
        raise InvalidInputError(f"A {A.shape} and B {B.shape} do not conform")
    _check_sym_pd(Q, "Q")
    _check_sym_pd(R, "R")
    if not (tol > 0.0):
        raise InvalidInputError(f"tol must be > 0, got {tol}")

    if n == 1 and B.shape == (1, 1):
        p, k, residual, iters = _dare_scalar(
            float(A[0, 0]), float(B[0, 0]), float(Q[0, 0]), float(R[0, 0]), tol, max_iters
        )
        a_cl = float(A[0, 0]) + float(B[0, 0]) * k
        return RiccatiSolution(
            P=np.array([[p]]), K=np.array([[k]]), residual=residual,
            iterations=iters, closed_loop_radius=abs(a_cl),
        )

    P = Q.copy()
    for i in range(1, max_iters + 1):
        P_new = _dare_rhs(P, A, B, Q, R)
        P_new = 0.5 * (P_new + P_new.T)
        scale = max(1.0, float(np.linalg.norm(P_new)))
        if float(np.linalg.norm(P_new - P)) <= tol * scale:
            P = P_new
            K = optimal_gain(P, A, B, R)
            residual = float(
                np.linalg.norm(P - _dare_rhs(P, A, B, Q, R), 2) / np.linalg.norm(P, 2)
            )
            return RiccatiSolution(
                P=P, K=K, residual=residual, iterations=i,
                closed_loop_radius=spectral_radius(A + B @ K),
            )
        if float(np.linalg.norm(P_new)) > _DARE_BLOWUP:
            raise NotStabilizableError(f"DARE iterate blew up at iteration {i}")
        P = P_new
    raise NotStabilizableError(f"DARE did not converge in {max_iters} iterations")


def check_stabilizing(A, B, K0, margin: float = 0.0) -> bool:
    """True iff the closed loop A + B K0 has spectral radius < 1 - margin."""
    A = _as_matrix(A, "A")
    B = _as_matrix(B, "B")
    K0 = _as_matrix(K0, "K0")
    if margin < 0.0:
        raise InvalidInputError(f"margin must be >= 0, got {margin}")
    if A.shape[0] != A.shape[1] or B.shape[0] != A.shape[0] or K0.shape != (B.shape[1], A.shape[0]):
        raise InvalidInputError(
            f"dimension mismatch: A {A.shape}, B {B.shape}, K0 {K0.shape}"
        )
    return spectral_radius(A + B @ K0) < 1.0 - margin


def random_system(n: int, d: int, radius: float, seed: int,
                  sigma_eps: float = 1.0) -> SystemSpec:
    """Gaussian (A, B) with A rescaled to the given spectral radius; Q = R = I.

    Deterministic in (n, d, radius, seed). radius < 1 makes K0 = 0 stabilizing.
    """
    if n < 1 or d < 1:
        raise InvalidInputError(f"dimensions must be positive, got n={n} d={d}")
    if not (0.0 < radius):
        raise InvalidInputError(f"spectral radius target must be > 0, got {radius}")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    rho = spectral_radius(A)
    if rho < 1e-12:
        raise NumericError("sampled A has (numerically) zero spectral radius")
    A = A * (radius / rho)
    B = rng.standard_normal((n, d))
    return SystemSpec(
        n=n, d=d, A=A, B=B, Q=np.eye(n), R=np.eye(d), sigma_eps=sigma_eps,
        x0=np.zeros(n),
    )
