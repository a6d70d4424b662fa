"""
Grassmann-manifold steps for the orthonormal factor Υ.

  project_to_tangent   gg = g − Υ Υᵀ g
  geodesic             Υ(t) = Υ V cos(Σt) Vᵀ + U sin(Σt) Vᵀ,  gg = U Σ Vᵀ
  line_search_geodesic golden-section search for the best t on [0, t_max]

The search bounds the arc at t_max = π / (2 σ_max) so every singular
direction stays inside its first quarter turn.
"""
from __future__ import annotations
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from depcam.core.components import Basis, orthonormalize
from depcam.errors import DegenerateInputError, UsageError
from depcam.utils.logger import logger

GOLDEN_ITERS = 32
MAX_SHRINKS = 8
REORTHONORMALIZE_DRIFT = 1e-10

_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0

Objective = Callable[[Basis], float]


@dataclass(frozen=True, eq=False)
class TangentDirection:
    gg: np.ndarray

    def __post_init__(self) -> None:
        gg = np.array(self.gg, dtype=float, copy=True)
        gg.setflags(write=False)
        object.__setattr__(self, "gg", gg)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.gg)

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.gg, compute_uv=False)


def project_to_tangent(base: Basis, g) -> TangentDirection:
    g = np.asarray(g, dtype=float)
    if g.shape != base.upsilon.shape:
        raise UsageError(f"gradient shape {g.shape} does not match basis {base.upsilon.shape}")
    up = base.upsilon
    return TangentDirection(g - up @ (up.T @ g))


def geodesic(base: Basis, direction: TangentDirection, t: float) -> Basis:
    if t == 0.0 or direction.is_zero:
        return base
    U, sigma, Vt = np.linalg.svd(direction.gg, full_matrices=False)
    V = Vt.T
    cos = np.cos(sigma * t)
    sin = np.sin(sigma * t)
    moved = (base.upsilon @ V) * cos[None, :] @ Vt + (U * sin[None, :]) @ Vt
    return Basis(moved)


def _finite(value: float) -> bool:
    return value is not None and bool(np.isfinite(value))


def _golden_section(f: Callable[[float], float], t_max: float) -> Tuple[float, float]:
    """Maximize f on [0, t_max]; returns the best probe seen, including t=0."""
    best_t, best_v = 0.0, f(0.0)
    lo, hi = 0.0, t_max
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for t, v in ((x1, f1), (x2, f2)):
        if v > best_v:
            best_t, best_v = t, v
    for _ in range(GOLDEN_ITERS):
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INV_PHI * (hi - lo)
            f1 = f(x1)
            t, v = x1, f1
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INV_PHI * (hi - lo)
            f2 = f(x2)
            t, v = x2, f2
        if v > best_v:
            best_t, best_v = t, v
    return best_t, best_v


class _NonFiniteProbe(Exception):
    pass


def line_search_geodesic(
    objective: Objective,
    base: Basis,
    direction: TangentDirection,
) -> Tuple[float, Basis]:
    """
    Maximize `objective` along the geodesic from `base` in `direction`.

    Returns (t*, Υ(t*)). The returned point is never worse than `base`;
    t* = 0 means no improving step was found.
    """
    if direction.is_zero:
        return 0.0, base
    sigma_max = float(direction.singular_values()[0])
    if sigma_max <= 0.0:
        return 0.0, base

    start = objective(base)
    if not _finite(start):
        raise UsageError("line search started from a point where the objective is not finite")

    def along(t: float) -> float:
        if t == 0.0:
            return start
        value = objective(geodesic(base, direction, t))
        if not _finite(value):
            raise _NonFiniteProbe(t)
        return value

    t_max = np.pi / (2.0 * sigma_max + 1e-12)
    for _ in range(MAX_SHRINKS + 1):
        try:
            t_star, best = _golden_section(along, t_max)
            break
        except _NonFiniteProbe as probe:
            logger.debug(
                "non-finite objective at t=%.3e; shrinking t_max to %.3e", probe.args[0], t_max / 2
            )
            t_max /= 2.0
    else:
        logger.warning("geodesic line search found no finite probe; keeping the current basis")
        return 0.0, base

    if t_star == 0.0 or best < start:
        return 0.0, base

    moved = geodesic(base, direction, t_star)
    if moved.orthonormality_error() > REORTHONORMALIZE_DRIFT:
        try:
            moved = orthonormalize(moved.upsilon)
        except DegenerateInputError:
            return 0.0, base
        if not objective(moved) >= start:
            return 0.0, base
    return t_star, moved
