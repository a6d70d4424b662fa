"""
DPP prior: repulsion between mixture components.

The prior over the component set is an L-ensemble in quality/similarity
form, L = diag(q)·S·diag(q):

  q_k      = exp(−½ ξ ‖Φᵏ‖₁)                  quality; favours sparse scales
  S_kk'    = exp(−½ ϱ ‖uᵏ − uᵏ'‖²),  u = Υ·1   similarity; unit diagonal

For orthonormal bases ‖u‖² = d, so S_kk' = exp(ϱ(Σ_ij cos∠(Υᵏ_i, Υᵏ'_j) − d)):
the angle-based similarity rescaled so that S_kk = 1. The Gaussian form is
used for evaluation since it is a PSD kernel on any input, which keeps
finite-difference probes off the manifold well defined.

Only the unnormalized log det L enters the fit.
"""
from __future__ import annotations
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from depcam.core.components import Basis, Component, Scales
from depcam.errors import NumericalError, UsageError
from depcam.utils.logger import logger

JITTER_TRIGGER = 1e-12
JITTER_AMOUNT = 1e-10


@dataclass(frozen=True, eq=False)
class LEnsemble:
    L:            np.ndarray        # diag(q) S diag(q), without jitter
    qualities:    np.ndarray
    similarities: np.ndarray
    jitter:       float = 0.0       # amount added to the diagonal, 0 if none

    @property
    def K(self) -> int:
        return self.L.shape[0]

    @property
    def kernel(self) -> np.ndarray:
        """L + jitter·I, the matrix whose log-determinant is the prior."""
        if self.jitter == 0.0:
            return self.L
        return self.L + self.jitter * np.eye(self.K)


def quality(phi: Scales | np.ndarray, xi: float) -> float:
    p = phi.phi if isinstance(phi, Scales) else np.asarray(phi, dtype=float)
    return float(np.exp(-0.5 * xi * np.abs(p).sum()))


def similarity(a: Basis, b: Basis, varrho: float) -> float:
    if a.upsilon.shape != b.upsilon.shape:
        raise UsageError(
            f"similarity needs equal shapes, got {a.upsilon.shape} and {b.upsilon.shape}"
        )
    diff = a.column_sum - b.column_sum
    return float(np.exp(-0.5 * varrho * (diff @ diff)))


def _check_shared_shape(components: Sequence[Component]) -> None:
    if not components:
        raise UsageError("the L-ensemble needs at least one component")
    shape = components[0].basis.upsilon.shape
    for k, c in enumerate(components):
        if c.basis.upsilon.shape != shape:
            raise UsageError(f"component {k} has shape {c.basis.upsilon.shape}, expected {shape}")


def build_l_ensemble(components: Sequence[Component], xi: float, varrho: float) -> LEnsemble:
    _check_shared_shape(components)
    K = len(components)
    q = np.array([quality(c.scales, xi) for c in components])

    U = np.stack([c.basis.column_sum for c in components])          # K×D
    S = np.eye(K)
    for k in range(K):
        for j in range(k + 1, K):
            diff = U[k] - U[j]
            S[k, j] = S[j, k] = np.exp(-0.5 * varrho * (diff @ diff))

    L = q[:, None] * S * q[None, :]
    scale = float(np.trace(L)) / K
    jitter = 0.0
    if K > 1 and np.linalg.eigvalsh(L)[0] < JITTER_TRIGGER * scale:
        jitter = JITTER_AMOUNT * scale
        logger.debug("L-ensemble near singular (K=%d); adding jitter %.3e", K, jitter)
    for a in (L, q, S):
        a.setflags(write=False)
    return LEnsemble(L=L, qualities=q, similarities=S, jitter=jitter)


def log_det_prior(e: LEnsemble) -> float:
    """log det(L + jitter·I)."""
    sign, logdet = np.linalg.slogdet(e.kernel)
    if sign <= 0 or not np.isfinite(logdet):
        raise NumericalError(f"L-ensemble determinant is not positive (sign={sign}, log={logdet})")
    return float(logdet)


def _kernel_inverse(e: LEnsemble) -> np.ndarray:
    try:
        inv = np.linalg.inv(e.kernel)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"L-ensemble is singular even after jitter: {exc}") from exc
    if not np.all(np.isfinite(inv)):
        raise NumericalError("L-ensemble inverse is not finite")
    return inv


def grad_log_det_wrt_upsilon(
    components: Sequence[Component],
    e: LEnsemble,
    k: int,
    varrho: float,
) -> np.ndarray:
    """
    Euclidean gradient of log det L with respect to Υᵏ (D×d).

    Only row and column k of L depend on Υᵏ, so

        ∂ log det L / ∂Υᵏ_ij = Σ_{k'≠k} 2 [L⁻¹]_kk' q_k q_k' ∂S_kk'/∂Υᵏ_ij
        ∂S_kk'/∂Υᵏ_ij        = S_kk' · ϱ · (uᵏ'_i − uᵏ_i)

    The derivative is the same for every column j.
    """
    basis = components[k].basis
    G = np.zeros_like(basis.upsilon)
    if e.K == 1:
        return G
    inv = _kernel_inverse(e)
    q, S = e.qualities, e.similarities
    u_k = basis.column_sum
    row = np.zeros(basis.D)
    for j, other in enumerate(components):
        if j == k:
            continue
        weight = 2.0 * inv[k, j] * q[k] * q[j] * S[k, j] * varrho
        row += weight * (other.basis.column_sum - u_k)
    G[:] = row[:, None]
    return G


def grad_log_det_wrt_phi(
    phi: Scales | np.ndarray,
    xi: float,
    i: int,
    subgradient: Optional[int] = None,
) -> float:
    """
    ∂ log det L / ∂Φᵏ_i.

    S does not depend on Φ, so log det L = 2 Σ_k log q_k + log det S and the
    derivative reduces to −ξ·s with s ∈ ∂|Φᵏ_i|. `subgradient` picks s at
    Φᵏ_i = 0 (or overrides it); the default is sign(Φᵏ_i), i.e. 0 at 0.
    """
    p = phi.phi if isinstance(phi, Scales) else np.asarray(phi, dtype=float)
    s = int(np.sign(p[i])) if subgradient is None else int(subgradient)
    if s not in (-1, 0, 1):
        raise UsageError(f"subgradient must be -1, 0 or 1, got {subgradient}")
    return -xi * s
