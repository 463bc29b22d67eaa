"""Shared fixtures for the test suites."""

from __future__ import annotations

import math
from typing import List

import numpy as np
import pytest

from src.state import ExperimentConfig, ExperimentRecord
from src.tools.gev import theoretical_params
from src.tools.maps import RngStream

CANTOR_DELTA = math.log(2.0) / math.log(3.0)
SIERPINSKI_DELTA = math.log(3.0) / math.log(2.0)


@pytest.fixture
def rng() -> RngStream:
    return RngStream(12345)


@pytest.fixture
def np_rng() -> np.random.Generator:
    return np.random.default_rng(2024)


@pytest.fixture
def small_cantor_config() -> ExperimentConfig:
    """A run small enough for the fast suites: 2 centers x 2 realizations x 2 n."""
    return ExperimentConfig.model_validate(
        {
            "system": {"kind": "cantor"},
            "k": 20_000,
            "n_grid": [100, 200],
            "ensemble": 2,
            "centers": 2,
            "bootstrap_B": 100,
            "min_block": 1,
            "seed": 99,
        }
    )


def synthetic_records(
    system: str = "cantor",
    delta: float = CANTOR_DELTA,
    k: int = 10_000_000,
    n_grid=(1000, 2000, 5000, 10000),
    members: int = 3,
    alpha: float = 4.0,
    C: float = 10.0,
) -> List[ExperimentRecord]:
    """Records that follow the predicted parameter laws exactly."""
    records = []
    for kind in ("g1", "g2", "g3"):
        for n in n_grid:
            p = theoretical_params(kind, delta, alpha, C, k, n)
            for i in range(members):
                records.append(
                    ExperimentRecord(
                        system=system,
                        observable=kind,
                        alpha=alpha,
                        C=C,
                        center_idx=i,
                        realization_idx=0,
                        n=n,
                        m=k // n,
                        mu=p.mu,
                        sigma=p.sigma,
                        xi=p.xi,
                        ks_winner="GEV",
                        ks_D=0.01,
                        cell_seed=1000 + i,
                    )
                )
    return records
