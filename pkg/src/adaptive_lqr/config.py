"""Experiment configuration: JSON schema, validation, and content hashing.

The on-disk format is JSON with explicit n and d and flat row-major arrays
for every matrix; dimensions are never inferred from array nesting.  A
config parses to a fully resolved ExperimentConfig (every default filled
in), serializes back to the same resolved document, and hashes to a stable
hex digest that changes exactly when a resolved field changes.

Example document for the scalar benchmark:

    {
      "n": 1, "d": 1,
      "system": {"A": [0.5], "B": [1.0], "Q": [1.0], "R": [1.0],
                 "sigma_eps": 1.0, "x0": [0.0]},
      "algo": {"K0": [0.0], "C_x": 20.0, "C_K": 5.0, "sigma_eta": 1.0},
      "sweep": {"T_grid": [1024, 4096], "seeds": 50, "seed": 0,
                "coupled": true},
      "output_dir": "results"
    }

``seeds`` may be a count (resolved to 0..count-1) or an explicit list of
replicate identifiers.  ``seed`` is the master stream seed; the command
line and the ADAPTIVE_LQR_SEED environment variable can override it.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .adaptive_control import AlgoConfig
from .control_core import DARE_MAX_ITERS, DARE_TOL, SystemSpec
from .errors import InvalidInputError
from .sysid import RANK_TOL

DEFAULT_T_GRID = (1024, 2048, 4096, 8192, 16384)
DEFAULT_SEED_COUNT = 20


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment description."""

    spec: SystemSpec
    algo: AlgoConfig
    T_grid: tuple[int, ...]
    seeds: tuple[int, ...]
    seed: int
    coupled: bool
    output_dir: str

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def d(self) -> int:
        return self.spec.d


def _require_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise InvalidInputError(f"unknown keys in {where}: {sorted(unknown)}")


def _flat_matrix(value, rows: int, cols: int, name: str) -> np.ndarray:
    if not isinstance(value, (list, tuple)):
        raise InvalidInputError(f"{name} must be a flat row-major array")
    if len(value) != rows * cols:
        raise InvalidInputError(
            f"{name} has length {len(value)}, expected {rows * cols} "
            f"for shape ({rows}, {cols})"
        )
    try:
        arr = np.array([float(v) for v in value], dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"{name} contains a non-numeric entry") from exc
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains a non-finite entry")
    return arr.reshape(rows, cols)


def _as_float(value, name: str, *, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidInputError(f"{name} must be a number, got {value!r}")
    out = float(value)
    if not math.isfinite(out):
        raise InvalidInputError(f"{name} must be finite")
    if positive and out <= 0:
        raise InvalidInputError(f"{name} must be > 0, got {out}")
    return out


def _as_int(value, name: str, *, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InvalidInputError(f"{name} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise InvalidInputError(f"{name} must be >= {minimum}, got {value}")
    return value


def _resolve_seeds(value) -> tuple[int, ...]:
    if isinstance(value, bool):
        raise InvalidInputError("sweep.seeds must be a count or a list of integers")
    if isinstance(value, int):
        if value < 1:
            raise InvalidInputError(f"sweep.seeds count must be >= 1, got {value}")
        return tuple(range(value))
    if isinstance(value, (list, tuple)):
        seeds = tuple(_as_int(s, "sweep.seeds entry") for s in value)
        if not seeds:
            raise InvalidInputError("sweep.seeds list is empty")
        if len(set(seeds)) != len(seeds):
            raise InvalidInputError("sweep.seeds entries must be distinct")
        return seeds
    raise InvalidInputError("sweep.seeds must be a count or a list of integers")


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Validate and resolve a parsed JSON document."""
    if not isinstance(doc, dict):
        raise InvalidInputError("config root must be a JSON object")
    _require_keys(doc, {"n", "d", "system", "algo", "sweep", "output_dir"}, "config")
    if "n" not in doc or "d" not in doc:
        raise InvalidInputError("config must declare n and d explicitly")
    n = _as_int(doc["n"], "n", minimum=1)
    d = _as_int(doc["d"], "d", minimum=1)

    system = doc.get("system")
    if not isinstance(system, dict):
        raise InvalidInputError("config must contain a system object")
    _require_keys(system, {"A", "B", "Q", "R", "sigma_eps", "x0"}, "system")
    for key in ("A", "B", "Q", "R"):
        if key not in system:
            raise InvalidInputError(f"system.{key} is required")
    A = _flat_matrix(system["A"], n, n, "system.A")
    B = _flat_matrix(system["B"], n, d, "system.B")
    Q = _flat_matrix(system["Q"], n, n, "system.Q")
    R = _flat_matrix(system["R"], d, d, "system.R")
    sigma_eps = _as_float(system.get("sigma_eps", 1.0), "system.sigma_eps", positive=True)
    x0 = _flat_matrix(system.get("x0", [0.0] * n), n, 1, "system.x0")[:, 0]
    spec = SystemSpec(n=n, d=d, A=A, B=B, Q=Q, R=R, sigma_eps=sigma_eps, x0=x0)

    algo_doc = doc.get("algo", {})
    if not isinstance(algo_doc, dict):
        raise InvalidInputError("algo must be a JSON object")
    _require_keys(
        algo_doc,
        {"K0", "C_x", "C_K", "sigma_eta", "rank_tol", "dare_tol", "dare_max_iters"},
        "algo",
    )
    K0 = _flat_matrix(algo_doc.get("K0", [0.0] * (d * n)), d, n, "algo.K0")
    algo = AlgoConfig(
        K0=K0,
        C_x=_as_float(algo_doc.get("C_x", 20.0), "algo.C_x", positive=True),
        C_K=_as_float(algo_doc.get("C_K", 5.0), "algo.C_K", positive=True),
        sigma_eta=_as_float(algo_doc.get("sigma_eta", 1.0), "algo.sigma_eta", positive=True),
        rank_tol=_as_float(algo_doc.get("rank_tol", RANK_TOL), "algo.rank_tol", positive=True),
        dare_tol=_as_float(algo_doc.get("dare_tol", DARE_TOL), "algo.dare_tol", positive=True),
        dare_max_iters=_as_int(
            algo_doc.get("dare_max_iters", DARE_MAX_ITERS), "algo.dare_max_iters", minimum=1
        ),
    )

    sweep = doc.get("sweep", {})
    if not isinstance(sweep, dict):
        raise InvalidInputError("sweep must be a JSON object")
    _require_keys(sweep, {"T_grid", "seeds", "seed", "coupled"}, "sweep")
    raw_grid = sweep.get("T_grid", list(DEFAULT_T_GRID))
    if not isinstance(raw_grid, (list, tuple)) or not raw_grid:
        raise InvalidInputError("sweep.T_grid must be a nonempty list of integers")
    T_grid = tuple(_as_int(t, "sweep.T_grid entry", minimum=2) for t in raw_grid)
    if any(b <= a for a, b in zip(T_grid, T_grid[1:])):
        raise InvalidInputError("sweep.T_grid must be strictly increasing")
    seeds = _resolve_seeds(sweep.get("seeds", DEFAULT_SEED_COUNT))
    seed = _as_int(sweep.get("seed", 0), "sweep.seed", minimum=0)
    coupled = sweep.get("coupled", True)
    if not isinstance(coupled, bool):
        raise InvalidInputError("sweep.coupled must be a boolean")

    output_dir = doc.get("output_dir", "results")
    if not isinstance(output_dir, str) or not output_dir:
        raise InvalidInputError("output_dir must be a nonempty string")

    return ExperimentConfig(
        spec=spec, algo=algo, T_grid=T_grid, seeds=seeds, seed=seed,
        coupled=coupled, output_dir=output_dir,
    )


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """The fully resolved document; round-trips through config_from_dict."""
    spec, algo = cfg.spec, cfg.algo
    return {
        "n": spec.n,
        "d": spec.d,
        "system": {
            "A": [float(v) for v in spec.A.ravel()],
            "B": [float(v) for v in spec.B.ravel()],
            "Q": [float(v) for v in spec.Q.ravel()],
            "R": [float(v) for v in spec.R.ravel()],
            "sigma_eps": float(spec.sigma_eps),
            "x0": [float(v) for v in spec.x0.ravel()],
        },
        "algo": {
            "K0": [float(v) for v in algo.K0.ravel()],
            "C_x": float(algo.C_x),
            "C_K": float(algo.C_K),
            "sigma_eta": float(algo.sigma_eta),
            "rank_tol": float(algo.rank_tol),
            "dare_tol": float(algo.dare_tol),
            "dare_max_iters": int(algo.dare_max_iters),
        },
        "sweep": {
            "T_grid": [int(t) for t in cfg.T_grid],
            "seeds": [int(s) for s in cfg.seeds],
            "seed": int(cfg.seed),
            "coupled": bool(cfg.coupled),
        },
        "output_dir": cfg.output_dir,
    }


def canonical_json(doc) -> str:
    """Stable serialization: sorted keys, no whitespace, shortest floats."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(cfg: ExperimentConfig) -> str:
    """sha256 hex digest of the resolved config document."""
    return hashlib.sha256(canonical_json(config_to_dict(cfg)).encode()).hexdigest()


def load_config(path: str, *, seed_override: int | None = None) -> ExperimentConfig:
    """Read a config file; optionally replace the master seed before resolve."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InvalidInputError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"config {path} is not valid JSON: {exc}") from exc
    if seed_override is not None:
        if not isinstance(doc, dict):
            raise InvalidInputError("config root must be a JSON object")
        sweep = doc.setdefault("sweep", {})
        if not isinstance(sweep, dict):
            raise InvalidInputError("sweep must be a JSON object")
        sweep["seed"] = int(seed_override)
    return config_from_dict(doc)


def dump_config(cfg: ExperimentConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
