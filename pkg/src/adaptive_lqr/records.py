"""Record persistence: JSON-lines run records and the results manifest.

One record file per horizon (records_T{T}.jsonl), one JSON object per
replicate, each carrying a schema_version field.  Lines are sorted by
(T, seed, replicate_id) and serialized canonically, so re-running the same
resolved config reproduces the files byte for byte.  The manifest lists the
record files with content hashes; its created_at timestamp is the one field
excluded from the determinism contract.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from datetime import datetime, timezone

import numpy as np

from .analysis import CheckpointDiag
from .config import ExperimentConfig, canonical_json, config_hash
from .errors import InsufficientDataError, InvalidInputError
from .lqr_sim import RunRecord
from .version import __version__

SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"


def record_filename(T: int) -> str:
    return f"records_T{int(T)}.jsonl"


def checkpoint_to_dict(cp: CheckpointDiag) -> dict:
    return {
        "T": int(cp.T),
        "gram": [float(v) for v in np.asarray(cp.gram).ravel()],
        "lam_parallel": float(cp.lam_parallel),
        "lam_perp": float(cp.lam_perp),
        "lam_delta": float(cp.lam_delta),
        "est_err_theta": float(cp.est_err_theta),
        "est_err_K": float(cp.est_err_K),
        "decomp_residual": float(cp.decomp_residual),
    }


def checkpoint_from_dict(doc: dict) -> CheckpointDiag:
    flat = doc["gram"]
    dim = math.isqrt(len(flat))
    if dim * dim != len(flat):
        raise InvalidInputError(f"gram array of length {len(flat)} is not square")
    return CheckpointDiag(
        T=int(doc["T"]),
        gram=np.array(flat, dtype=float).reshape(dim, dim),
        lam_parallel=float(doc["lam_parallel"]),
        lam_perp=float(doc["lam_perp"]),
        lam_delta=float(doc["lam_delta"]),
        est_err_theta=float(doc["est_err_theta"]),
        est_err_K=float(doc["est_err_K"]),
        decomp_residual=float(doc["decomp_residual"]),
    )


def _opt_float(value):
    return None if value is None else float(value)


def record_to_dict(rec: RunRecord) -> dict:
    """JSON-safe form of a record; the in-memory trajectory is not persisted."""
    return {
        "schema_version": int(rec.schema_version),
        "T": int(rec.T),
        "seed": int(rec.seed),
        "replicate_id": int(rec.replicate_id),
        "coupled": bool(rec.coupled),
        "cost_algo": _opt_float(rec.cost_algo),
        "cost_oracle": _opt_float(rec.cost_oracle),
        "regret": _opt_float(rec.regret),
        "est_err_theta": _opt_float(rec.est_err_theta),
        "est_err_K": _opt_float(rec.est_err_K),
        "reset_count": None if rec.reset_count is None else int(rec.reset_count),
        "last_reset_reason": rec.last_reset_reason,
        "diverged": bool(rec.diverged),
        "fail_time": None if rec.fail_time is None else int(rec.fail_time),
        "checkpoints": [checkpoint_to_dict(cp) for cp in rec.checkpoints],
    }


def record_from_dict(doc: dict) -> RunRecord:
    if not isinstance(doc, dict):
        raise InvalidInputError("record must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise InvalidInputError(f"unsupported record schema_version {version!r}")
    try:
        return RunRecord(
            T=int(doc["T"]),
            seed=int(doc["seed"]),
            replicate_id=int(doc["replicate_id"]),
            coupled=bool(doc["coupled"]),
            cost_algo=_opt_float(doc.get("cost_algo")),
            cost_oracle=_opt_float(doc.get("cost_oracle")),
            regret=_opt_float(doc.get("regret")),
            est_err_theta=_opt_float(doc.get("est_err_theta")),
            est_err_K=_opt_float(doc.get("est_err_K")),
            reset_count=None if doc.get("reset_count") is None else int(doc["reset_count"]),
            last_reset_reason=doc.get("last_reset_reason"),
            diverged=bool(doc.get("diverged", False)),
            fail_time=None if doc.get("fail_time") is None else int(doc["fail_time"]),
            checkpoints=tuple(
                checkpoint_from_dict(cp) for cp in doc.get("checkpoints", [])
            ),
            schema_version=version,
        )
    except KeyError as exc:
        raise InvalidInputError(f"record is missing field {exc.args[0]!r}") from exc


def write_records(path: str, records) -> None:
    """Write one canonical JSON line per record, sorted for reproducibility."""
    ordered = sorted(records, key=lambda r: (r.T, r.seed, r.replicate_id))
    with open(path, "w", encoding="utf-8") as fh:
        for rec in ordered:
            fh.write(canonical_json(record_to_dict(rec)))
            fh.write("\n")


def read_records(path: str) -> list[RunRecord]:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [line for line in fh.read().splitlines() if line.strip()]
    except OSError as exc:
        raise InsufficientDataError(f"cannot read records {path}: {exc}") from exc
    out = []
    for i, line in enumerate(lines):
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{path}:{i + 1} is not valid JSON: {exc}") from exc
        out.append(record_from_dict(doc))
    return out


def read_all_records(results_dir: str) -> list[RunRecord]:
    """Load every records_T*.jsonl under a results directory."""
    try:
        names = sorted(
            name for name in os.listdir(results_dir)
            if name.startswith("records_T") and name.endswith(".jsonl")
        )
    except OSError as exc:
        raise InsufficientDataError(
            f"cannot list results dir {results_dir}: {exc}"
        ) from exc
    if not names:
        raise InsufficientDataError(f"no record files in {results_dir}")
    records = []
    for name in names:
        records.extend(read_records(os.path.join(results_dir, name)))
    return records


def file_sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(results_dir: str, cfg: ExperimentConfig, record_files,
                   counts: dict[int, int]) -> str:
    """Write manifest.json next to the record files; returns its path."""
    entries = []
    for T, name in sorted(record_files.items()):
        entries.append({
            "T": int(T),
            "path": name,
            "sha256": file_sha256(os.path.join(results_dir, name)),
            "count": int(counts[T]),
        })
    doc = {
        "config_hash": config_hash(cfg),
        "tool_version": __version__,
        "records": entries,
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    path = os.path.join(results_dir, MANIFEST_NAME)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_manifest(results_dir: str) -> dict:
    path = os.path.join(results_dir, MANIFEST_NAME)
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InsufficientDataError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"manifest {path} is not valid JSON: {exc}") from exc
