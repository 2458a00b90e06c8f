"""Shared test configuration.

BLAS threading is pinned to one thread before numpy loads so reductions are
bit-reproducible (the determinism tests rely on it; the CLI does the same).
"""

import os

for _var in ("OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "OMP_NUM_THREADS",
             "NUMEXPR_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np
import pytest

from pinnlab.pde import BoundaryFamily, Domain, PdeProblem


@pytest.fixture(scope="session")
def burgers_problem():
    return PdeProblem(0.1, 1.0, BoundaryFamily("xsin"), Domain())


@pytest.fixture(scope="session")
def heat_problem():
    return PdeProblem(0.1, 0.0, BoundaryFamily("xsin"), Domain())


@pytest.fixture(scope="session")
def silent_problem():
    """xsinc with c = 0: zero initial profile, zero forcing, zero walls."""
    return PdeProblem(0.1, 0.0, BoundaryFamily("xsinc", c=0.0), Domain())


def rng(seed=0):
    return np.random.default_rng(seed)
