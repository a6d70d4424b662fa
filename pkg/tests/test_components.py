"""Orthonormal bases, signed scales, and W = Υ·diag(Φ)."""
from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_allclose

from depcam.core.components import (
    Basis,
    Component,
    Scales,
    init_component,
    materialize,
    orthonormalize,
)
from depcam.core.rng import stream
from depcam.errors import DegenerateInputError, UsageError


# ── orthonormalize ─────────────────────────────────────────────────────

def test_orthonormalize_identity_columns() -> None:
    basis = orthonormalize(np.eye(4)[:, :2])
    assert_allclose(basis.upsilon, np.eye(4)[:, :2], atol=1e-15)


def test_orthonormalize_keeps_span() -> None:
    m = stream(0, "span").standard_normal((6, 3))
    basis = orthonormalize(m)
    assert basis.orthonormality_error() < 1e-12
    # projecting m onto the span leaves it unchanged
    proj = basis.upsilon @ (basis.upsilon.T @ m)
    assert_allclose(proj, m, atol=1e-10)


def test_orthonormalize_rejects_dependent_columns() -> None:
    m = np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]])
    with pytest.raises(DegenerateInputError):
        orthonormalize(m)


def test_orthonormalize_rejects_wide_matrix() -> None:
    with pytest.raises(DegenerateInputError):
        orthonormalize(np.ones((2, 3)))


# ── value types ────────────────────────────────────────────────────────

def test_basis_validates_shape_and_finiteness() -> None:
    with pytest.raises(UsageError):
        Basis(np.ones((2, 3)))
    with pytest.raises(UsageError):
        Basis(np.array([[np.nan], [1.0]]))


def test_basis_is_read_only() -> None:
    basis = orthonormalize(np.eye(3)[:, :2])
    with pytest.raises(ValueError):
        basis.upsilon[0, 0] = 5.0


def test_check_orthonormal() -> None:
    basis = Basis(np.array([[2.0], [0.0]]))
    with pytest.raises(DegenerateInputError):
        basis.check_orthonormal()
    assert orthonormalize(np.eye(2)).check_orthonormal() is not None


def test_component_requires_matching_d() -> None:
    with pytest.raises(UsageError):
        Component(orthonormalize(np.eye(3)[:, :2]), Scales(np.ones(3)))


def test_scales_replace_returns_new_value() -> None:
    s = Scales(np.array([1.0, 2.0]))
    t = s.replace(0, 0.0)
    assert s.phi[0] == 1.0
    assert t.phi[0] == 0.0


# ── materialize ────────────────────────────────────────────────────────

def test_materialize_scales_columns() -> None:
    comp = Component(orthonormalize(np.eye(3)[:, :2]), Scales(np.array([2.0, -3.0])))
    assert_allclose(materialize(comp), [[2.0, 0.0], [0.0, -3.0], [0.0, 0.0]])


def test_materialize_is_linear_in_phi() -> None:
    comp = init_component(5, 3, 7)
    doubled = comp.with_scales(Scales(comp.scales.phi * 2.0))
    assert np.array_equal(materialize(doubled), 2.0 * materialize(comp))


def test_materialize_zero_phi_gives_zero_matrix() -> None:
    comp = init_component(4, 2, 0).with_scales(Scales(np.zeros(2)))
    assert not np.any(materialize(comp))


# ── init_component ─────────────────────────────────────────────────────

def test_init_component_is_orthonormal_and_in_range() -> None:
    for seed in range(10):
        comp = init_component(8, 3, seed)
        assert comp.basis.orthonormality_error() < 1e-10
        assert np.all((comp.scales.phi >= 0.1) & (comp.scales.phi <= 1.0))


def test_init_component_is_deterministic() -> None:
    a, b = init_component(6, 2, 42), init_component(6, 2, 42)
    assert np.array_equal(a.basis.upsilon, b.basis.upsilon)
    assert np.array_equal(a.scales.phi, b.scales.phi)


def test_init_component_rejects_d_above_D() -> None:
    with pytest.raises(UsageError):
        init_component(2, 3, 0)
