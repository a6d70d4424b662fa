"""
Shared fixtures. Settings are pointed at a scratch home before depcam is
imported so the suite never writes under the real ~/.depcam.
"""
from __future__ import annotations
import os
import tempfile
from pathlib import Path

_SCRATCH = Path(tempfile.mkdtemp(prefix="depcam-tests-"))
os.environ.setdefault("DEPCAM_HOME_DIR", str(_SCRATCH))
os.environ.setdefault("DEPCAM_CONFIG_FILE", str(_SCRATCH / "config.json"))
os.environ.setdefault("DEPCAM_LOGS_DIR", str(_SCRATCH / "logs"))

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from depcam.core.components import Component, Scales, init_component, orthonormalize  # noqa: E402
from depcam.core.inference import MixtureModel  # noqa: E402
from depcam.core.rng import stream  # noqa: E402


def random_model(
    D: int,
    d: int,
    K: int,
    seed: int,
    *,
    xi: float = 0.1,
    varrho: float = 0.1,
    lam: float = 1.0,
) -> MixtureModel:
    rng = stream(seed, "test-model")
    comps = tuple(init_component(D, d, rng) for _ in range(K))
    pi = rng.dirichlet(np.ones(K))
    return MixtureModel(pi / pi.sum(), comps, xi, varrho, lam)


def random_instance(seed: int, N: int = 6, D: int = 5, d: int = 2, K: int = 2, lam: float = 1.0):
    """(X, Y, R, model) with random binary X, Gaussian Y and Dirichlet rows in R."""
    rng = stream(seed, "test-instance")
    model = random_model(D, d, K, seed, lam=lam)
    X = (rng.random((N, D)) < 0.5).astype(float)
    Y = rng.standard_normal((N, d))
    R = rng.dirichlet(np.ones(K), size=N)
    return X, Y, R, model


def component(upsilon, phi) -> Component:
    return Component(orthonormalize(np.asarray(upsilon, dtype=float)), Scales(np.asarray(phi, dtype=float)))


@pytest.fixture
def small_instance():
    return random_instance(0)
