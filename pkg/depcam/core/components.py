"""
Components: one local PCA inside the mixture.

Each transformation matrix is stored decomposed as W = Υ·diag(Φ):

  Υ (Basis)   D×d, orthonormal columns, the directions
  Φ (Scales)  d signed magnitudes; an entry at exactly 0 is a pruned PC

Value types are frozen and their arrays read-only.
"""
from __future__ import annotations
from dataclasses import dataclass

import numpy as np

from depcam.core.rng import Seed, as_generator
from depcam.errors import DegenerateInputError, UsageError

ORTHONORMAL_TOL = 1e-8

# relative residual norm under which a Gram–Schmidt column counts as dependent
_RANK_TOL = 1e-10


def _frozen(a, ndim: int, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    if arr.ndim != ndim:
        raise UsageError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise UsageError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Basis:
    upsilon: np.ndarray

    def __post_init__(self) -> None:
        up = _frozen(self.upsilon, 2, "upsilon")
        D, d = up.shape
        if not D >= d >= 1:
            raise UsageError(f"basis needs D >= d >= 1, got D={D}, d={d}")
        object.__setattr__(self, "upsilon", up)

    @property
    def D(self) -> int:
        return self.upsilon.shape[0]

    @property
    def d(self) -> int:
        return self.upsilon.shape[1]

    @property
    def column_sum(self) -> np.ndarray:
        """u = Υ·1, the vector the similarity kernel compares."""
        return self.upsilon.sum(axis=1)

    def orthonormality_error(self) -> float:
        """‖ΥᵀΥ − I‖_F."""
        return float(np.linalg.norm(self.upsilon.T @ self.upsilon - np.eye(self.d)))

    def check_orthonormal(self, tol: float = ORTHONORMAL_TOL) -> "Basis":
        err = self.orthonormality_error()
        if err > tol:
            raise DegenerateInputError(
                f"basis is not orthonormal: |UtU - I|_F = {err:.3e} > {tol:.1e}"
            )
        return self


@dataclass(frozen=True, eq=False)
class Scales:
    phi: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "phi", _frozen(self.phi, 1, "phi"))

    @property
    def d(self) -> int:
        return self.phi.shape[0]

    def replace(self, i: int, value: float) -> "Scales":
        phi = self.phi.copy()
        phi[i] = value
        return Scales(phi)


@dataclass(frozen=True, eq=False)
class Component:
    basis:  Basis
    scales: Scales

    def __post_init__(self) -> None:
        if self.basis.d != self.scales.d:
            raise UsageError(
                f"basis has {self.basis.d} columns but scales has {self.scales.d} entries"
            )

    @property
    def D(self) -> int:
        return self.basis.D

    @property
    def d(self) -> int:
        return self.basis.d

    def with_basis(self, basis: Basis) -> "Component":
        return Component(basis, self.scales)

    def with_scales(self, scales: Scales) -> "Component":
        return Component(self.basis, scales)


def materialize(c: Component) -> np.ndarray:
    """W = Υ·diag(Φ); column j is Φ_j·Υ_{·j}."""
    return c.basis.upsilon * c.scales.phi[None, :]


def orthonormalize(m) -> Basis:
    """Modified Gram–Schmidt. Same column span, ΥᵀΥ = I."""
    q = np.array(m, dtype=float, copy=True)
    if q.ndim != 2:
        raise UsageError(f"expected a matrix, got shape {q.shape}")
    D, d = q.shape
    if not D >= d >= 1:
        raise DegenerateInputError(f"cannot orthonormalize {d} columns in {D} dimensions")
    scale = np.linalg.norm(q, axis=0)
    for j in range(d):
        for i in range(j):
            q[:, j] -= (q[:, i] @ q[:, j]) * q[:, i]
        norm = np.linalg.norm(q[:, j])
        if not np.isfinite(norm) or norm <= _RANK_TOL * max(scale[j], 1.0):
            raise DegenerateInputError(f"column {j} is linearly dependent on columns 0..{j - 1}")
        q[:, j] /= norm
    return Basis(q)


def init_component(D: int, d: int, rng_seed: Seed) -> Component:
    """Random orthonormal Υ from a Gaussian draw, Φ uniform on [0.1, 1.0]."""
    if not D >= d >= 1:
        raise UsageError(f"init_component needs D >= d >= 1, got D={D}, d={d}")
    rng = as_generator(rng_seed)
    basis = orthonormalize(rng.standard_normal((D, d)))
    scales = Scales(rng.uniform(0.1, 1.0, size=d))
    return Component(basis, scales)
