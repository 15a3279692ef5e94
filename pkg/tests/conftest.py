# SPDX-License-Identifier: Apache-2.0
"""Shared fixtures: seeded generators, small random beliefs and a clean configuration environment."""

import os

import numpy as np
import pytest

from rgpssm.bench.instances import random_belief
from rgpssm.filter.kernel import Hyperparameters


@pytest.fixture
def rng():
    return np.random.default_rng(20240521)


@pytest.fixture
def hyper():
    return Hyperparameters.create([1.2, 0.8], [1.5], 2, 1)


@pytest.fixture
def belief(rng):
    """Two-state, one-output belief holding five inducing points over a 2-D input."""
    return random_belief(rng, 2, 1, 5, n_in=2)


@pytest.fixture
def multi_belief(rng):
    """Three-state, two-output belief holding four inducing points over a 3-D input."""
    return random_belief(rng, 3, 2, 4, n_in=3)


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for name in list(os.environ):
        if name.startswith("RGPSSM_") or name == "LOGLEVEL":
            monkeypatch.delenv(name, raising=False)
