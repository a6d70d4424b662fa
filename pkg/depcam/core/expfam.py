"""
Bernoulli member of the exponential family in natural form.

    p(x | θ) = exp(xᵀθ + g(θ) + h(x)),   g(θ) = −Σ log(1 + e^θ_i),   h = 0

All functions are pure and elementwise over the last axis, so they take a
single vector or a stack of them.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit, log_expit

from depcam.errors import UsageError


def _as_float(a) -> np.ndarray:
    return np.asarray(a, dtype=float)


def log_partition(theta) -> np.ndarray | float:
    """g(θ) = Σ_i −softplus(θ_i), summed over the last axis."""
    theta = _as_float(theta)
    # −softplus(θ) = log σ(−θ); log_expit is exact for |θ| in the hundreds
    value = log_expit(-theta).sum(axis=-1)
    return float(value) if np.ndim(value) == 0 else value


def log_partition_grad(theta) -> np.ndarray:
    """g′(θ) = 1/(1+e^θ) − 1 = −σ(θ), elementwise."""
    return -expit(_as_float(theta))


def mean_params(theta) -> np.ndarray:
    """α = σ(θ), the Bernoulli means; equals −g′(θ)."""
    return expit(_as_float(theta))


def log_likelihood(x, theta) -> np.ndarray | float:
    """xᵀθ + g(θ) over the last axis; always ≤ 0."""
    x     = _as_float(x)
    theta = _as_float(theta)
    if x.shape != theta.shape:
        raise UsageError(f"x has shape {x.shape} but theta has shape {theta.shape}")
    # x·θ + log σ(−θ) = x log σ(θ) + (1−x) log σ(−θ) for binary x
    value = (x * theta + log_expit(-theta)).sum(axis=-1)
    return float(value) if np.ndim(value) == 0 else value
