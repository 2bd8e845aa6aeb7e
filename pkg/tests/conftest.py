"""Shared fixtures: benchmark systems and session-scoped sweep data.

The two sweep fixtures are the expensive shared inputs for the rate and
diagnostic tests; they are computed once per session.  small_sweep covers
short horizons for quick trend checks, big_sweep is the full benchmark
grid used by the acceptance criteria.
"""
import os

import numpy as np
import pytest

from adaptive_lqr import AlgoConfig, SystemSpec, load_config, run_paired
from adaptive_lqr.noise import NoiseStreams

CONFIG_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "configs")
SCALAR_CONFIG = os.path.join(CONFIG_DIR, "scalar_benchmark.json")
GEN32_CONFIG = os.path.join(CONFIG_DIR, "gen_3x2.json")

# frozen closed-form solution of the scalar benchmark fixed point
SCALAR_P = 1.1327822185373186
SCALAR_K = -0.2655644370746374


def scalar_system() -> SystemSpec:
    return SystemSpec(
        n=1, d=1,
        A=np.array([[0.5]]), B=np.array([[1.0]]),
        Q=np.array([[1.0]]), R=np.array([[1.0]]),
        sigma_eps=1.0,
    )


def scalar_algo(**overrides) -> AlgoConfig:
    base = dict(K0=np.zeros((1, 1)), C_x=20.0, C_K=5.0, sigma_eta=1.0)
    base.update(overrides)
    return AlgoConfig(**base)


@pytest.fixture(scope="session")
def bench_spec() -> SystemSpec:
    return scalar_system()


@pytest.fixture(scope="session")
def bench_algo() -> AlgoConfig:
    return scalar_algo()


@pytest.fixture(scope="session")
def bench_config():
    return load_config(SCALAR_CONFIG)


@pytest.fixture(scope="session")
def gen32_config():
    return load_config(GEN32_CONFIG)


def _sweep(T_grid, n_reps):
    spec = scalar_system()
    algo = scalar_algo()
    records = []
    for rep in range(n_reps):
        streams = NoiseStreams(seed=0, replicate_id=rep, n=1, d=1, sigma_eps=1.0)
        records.extend(run_paired(spec, algo, streams, T_grid, coupled=True))
    return records


@pytest.fixture(scope="session")
def small_sweep_records():
    """50 replicates over short horizons 2^6..2^12; a few seconds."""
    return _sweep([2 ** e for e in range(6, 13)], 50)


@pytest.fixture(scope="session")
def big_sweep_records():
    """200 replicates over the benchmark grid 2^10..2^17; several minutes.

    Criteria that ask for 50 seeds filter to replicate_id < 50; the regret
    criterion uses all 200.
    """
    return _sweep([2 ** e for e in range(10, 18)], 200)
