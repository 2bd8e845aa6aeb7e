"""Monte Carlo sweep runner: paired runs across seeds and horizons.

Replicates share nothing (each owns its counter-based noise streams), so
they can fan out to a process pool; record content is independent of the
worker count and of completion order.  Each replicate is simulated once at
the largest horizon and read off at every grid point, which the prefix
property of the streams makes exactly equivalent to separate runs.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

from .config import ExperimentConfig
from .errors import InvalidInputError
from .lqr_sim import RunRecord, run_paired
from .noise import NoiseStreams
from .records import record_filename, write_manifest, write_records

FAILURE_FRACTION_LIMIT = 0.10


def _run_replicate(cfg: ExperimentConfig, replicate_seed: int) -> list[RunRecord]:
    streams = NoiseStreams(
        seed=cfg.seed, replicate_id=replicate_seed,
        n=cfg.n, d=cfg.d, sigma_eps=cfg.spec.sigma_eps,
    )
    return run_paired(cfg.spec, cfg.algo, streams, cfg.T_grid, coupled=cfg.coupled)


def run_sweep(cfg: ExperimentConfig, *, jobs: int = 1) -> list[RunRecord]:
    """All paired runs of the sweep; |T_grid| x |seeds| records."""
    if jobs < 1:
        raise InvalidInputError(f"jobs must be >= 1, got {jobs}")
    if jobs == 1:
        batches = [_run_replicate(cfg, s) for s in cfg.seeds]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            batches = list(pool.map(_run_replicate, [cfg] * len(cfg.seeds), cfg.seeds))
    records = []
    for batch in batches:
        records.extend(batch)
    return records


def failed_replicate_fraction(records) -> float:
    """Fraction of replicates with at least one diverged horizon."""
    seen: dict[tuple[int, int], bool] = {}
    for rec in records:
        key = (rec.seed, rec.replicate_id)
        seen[key] = seen.get(key, False) or rec.diverged
    if not seen:
        return 0.0
    return sum(seen.values()) / len(seen)


def write_sweep(cfg: ExperimentConfig, results_dir: str | None = None, *,
                jobs: int = 1) -> dict:
    """Run the sweep and persist per-horizon record files plus a manifest.

    Returns a summary with the output paths and the failed-replicate
    fraction; the caller decides whether that fraction is fatal.
    """
    out_dir = results_dir if results_dir is not None else cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    records = run_sweep(cfg, jobs=jobs)

    by_T: dict[int, list[RunRecord]] = {}
    for rec in records:
        by_T.setdefault(rec.T, []).append(rec)
    files = {}
    counts = {}
    for T, group in sorted(by_T.items()):
        name = record_filename(T)
        write_records(os.path.join(out_dir, name), group)
        files[T] = name
        counts[T] = len(group)
    manifest_path = write_manifest(out_dir, cfg, files, counts)

    return {
        "results_dir": out_dir,
        "record_files": [files[T] for T in sorted(files)],
        "manifest": manifest_path,
        "n_records": len(records),
        "n_replicates": len(cfg.seeds),
        "failed_fraction": failed_replicate_fraction(records),
    }
