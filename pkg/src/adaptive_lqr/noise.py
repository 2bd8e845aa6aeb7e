"""Counter-based Gaussian noise streams with random access by time index.

Each (seed, replicate_id, tag) triple keys an independent Philox stream via
SHA-256, and the draw at time t always starts at counter block t << 128.
That makes eps(t) addressable without replaying the past, which is what lets
a paired oracle run consume the exact same process noise as the algorithm
run, and makes any horizon a bit-exact prefix of a longer one.

The canonical definition of the draw at index t is

    Generator(Philox(key=key, counter=t << 128)).standard_normal(dim)

Block access reuses a single bit generator by rewriting its counter state,
which is measurably faster and bit-identical (asserted in tests).
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

from .adaptive_control import exploration_std
from .errors import InvalidInputError

STREAM_NAMESPACE = "adaptive-lqr/v1"
TAG_EPS = "eps"
TAG_ETA = "eta"


def stream_key(seed: int, replicate_id: int, tag: str) -> np.ndarray:
    """Two uint64 Philox key words derived from (namespace, seed, replicate, tag)."""
    msg = f"{STREAM_NAMESPACE}|{seed}|{replicate_id}|{tag}".encode()
    digest = hashlib.sha256(msg).digest()[:16]
    return np.frombuffer(digest, dtype="<u8").copy()


def _draw_at(key: np.ndarray, t: int, dim: int) -> np.ndarray:
    gen = Generator(Philox(key=key, counter=int(t) << 128))
    return gen.standard_normal(dim)


def _draw_block(key: np.ndarray, t0: int, t1: int, dim: int) -> np.ndarray:
    """Stack of per-index draws for t in [t0, t1); equals _draw_at row by row."""
    out = np.empty((t1 - t0, dim))
    bg = Philox(key=key)
    gen = Generator(bg)
    state = bg.state
    counter = state["state"]["counter"]
    for i, t in enumerate(range(t0, t1)):
        counter[:] = 0
        counter[2] = t  # little-endian 64-bit words: word 2 is bits 128..191
        state["buffer_pos"] = 4
        state["has_uint32"] = 0
        state["uinteger"] = 0
        bg.state = state
        out[i] = gen.standard_normal(dim)
    return out


@dataclass(frozen=True)
class NoiseStreams:
    """Process noise (eps, std sigma_eps) and exploration noise (eta, unit std)."""

    seed: int
    replicate_id: int
    n: int
    d: int
    sigma_eps: float

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise InvalidInputError(f"dimensions must be positive, got n={self.n} d={self.d}")
        if not (float(self.sigma_eps) > 0.0):
            raise InvalidInputError(f"sigma_eps must be > 0, got {self.sigma_eps}")
        object.__setattr__(self, "_eps_key", stream_key(self.seed, self.replicate_id, TAG_EPS))
        object.__setattr__(self, "_eta_key", stream_key(self.seed, self.replicate_id, TAG_ETA))

    def eps_at(self, t: int) -> np.ndarray:
        """Process noise vector at time t (length n, std sigma_eps)."""
        self._check_t(t)
        return self.sigma_eps * _draw_at(self._eps_key, t, self.n)

    def eta_raw_at(self, t: int) -> np.ndarray:
        """Unit-std exploration draw at time t (length d), before scheduling."""
        self._check_t(t)
        return _draw_at(self._eta_key, t, self.d)

    def eta_at(self, t: int, sigma_eta: float) -> np.ndarray:
        """Exploration noise at time t with std exploration_std(t, sigma_eta)."""
        return exploration_std(t, sigma_eta) * self.eta_raw_at(t)

    def eps_block(self, t0: int, t1: int) -> np.ndarray:
        """Rows t0..t1-1 of the eps stream, identical to stacked eps_at calls."""
        self._check_range(t0, t1)
        return self.sigma_eps * _draw_block(self._eps_key, t0, t1, self.n)

    def eta_raw_block(self, t0: int, t1: int) -> np.ndarray:
        self._check_range(t0, t1)
        return _draw_block(self._eta_key, t0, t1, self.d)

    @staticmethod
    def _check_t(t: int) -> None:
        if t < 0:
            raise InvalidInputError(f"time index must be >= 0, got {t}")

    @staticmethod
    def _check_range(t0: int, t1: int) -> None:
        if t0 < 0 or t1 < t0:
            raise InvalidInputError(f"bad index range [{t0}, {t1})")
