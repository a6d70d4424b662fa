"""L-ensemble construction, its log-determinant, and both gradients."""
from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_allclose

from depcam.core.components import Basis, Component, Scales, init_component
from depcam.core.dpp_prior import (
    build_l_ensemble,
    grad_log_det_wrt_phi,
    grad_log_det_wrt_upsilon,
    log_det_prior,
    quality,
    similarity,
)
from depcam.core.rng import stream
from depcam.errors import UsageError


def _unit(angle: float) -> Component:
    return Component(Basis(np.array([[np.cos(angle)], [np.sin(angle)]])), Scales(np.ones(1)))


# ── quality / similarity ───────────────────────────────────────────────

def test_quality_penalizes_l1_norm() -> None:
    assert quality(np.array([1.0, -1.0]), 0.5) == pytest.approx(np.exp(-0.5))
    assert quality(np.zeros(3), 10.0) == 1.0


def test_similarity_is_one_on_identical_bases() -> None:
    b = init_component(5, 2, 0).basis
    assert similarity(b, b, 0.7) == 1.0


def test_similarity_rejects_shape_mismatch() -> None:
    with pytest.raises(UsageError):
        similarity(init_component(5, 2, 0).basis, init_component(5, 3, 0).basis, 1.0)


def test_similarity_matrix_is_psd_with_unit_diagonal() -> None:
    rng = stream(0, "psd")
    for trial in range(100):
        K = int(rng.integers(1, 6))
        D = int(rng.integers(2, 9))
        d = int(rng.integers(1, D + 1))
        comps = [init_component(D, d, rng) for _ in range(K)]
        ens = build_l_ensemble(comps, xi=0.1, varrho=float(rng.uniform(0.01, 10.0)))
        S = ens.similarities
        assert np.array_equal(S, S.T)
        assert np.all(np.diag(S) == 1.0)
        assert np.linalg.eigvalsh(S)[0] >= -1e-10


# ── log det ────────────────────────────────────────────────────────────

def test_log_det_known_value() -> None:
    # S_12 = exp(-(1 - cos a)) = 1/2, so det = 1 - 1/4
    angle = np.arccos(1.0 - np.log(2.0))
    ens = build_l_ensemble([_unit(0.0), _unit(angle)], xi=0.0, varrho=1.0)
    assert ens.jitter == 0.0
    assert log_det_prior(ens) == pytest.approx(np.log(0.75), abs=1e-12)


def test_single_component_log_det_is_twice_log_quality() -> None:
    comp = init_component(4, 2, 3)
    ens = build_l_ensemble([comp], xi=0.3, varrho=1.0)
    assert log_det_prior(ens) == pytest.approx(-0.3 * np.abs(comp.scales.phi).sum(), abs=1e-12)


def test_duplicated_components_are_singular_before_jitter() -> None:
    comp = init_component(6, 2, 1)
    ens = build_l_ensemble([comp, comp], xi=0.1, varrho=0.1)
    assert abs(np.linalg.det(ens.L)) < 1e-12
    assert ens.jitter > 0.0
    assert np.isfinite(log_det_prior(ens))


def test_log_det_grows_as_bases_separate() -> None:
    Q, _ = np.linalg.qr(stream(4, "path").standard_normal((6, 4)))
    A, B = Q[:, :2], Q[:, 2:]
    fixed = Component(Basis(A), Scales(np.ones(2)))
    values = []
    for theta in np.linspace(0.1, np.pi / 2, 10):
        moving = Component(Basis(A * np.cos(theta) + B * np.sin(theta)), Scales(np.ones(2)))
        values.append(log_det_prior(build_l_ensemble([fixed, moving], xi=0.1, varrho=0.5)))
    assert np.all(np.diff(values) > 0)


# ── gradients ──────────────────────────────────────────────────────────

def _log_det(comps, xi, varrho) -> float:
    return log_det_prior(build_l_ensemble(comps, xi, varrho))


def _gradient_shapes(rng, trials: int) -> list:
    """(K, D, d) triples: the widest shapes first, then random ones."""
    shapes = [(3, 8, 3), (2, 8, 3)]
    for _ in range(trials - len(shapes)):
        shapes.append((int(rng.integers(2, 4)), int(rng.integers(3, 9)), int(rng.integers(1, 4))))
    return shapes


def test_upsilon_gradient_matches_finite_differences() -> None:
    rng = stream(5, "grad-upsilon")
    h = 1e-6
    for K, D, d in _gradient_shapes(rng, 10):
        comps = [init_component(D, d, rng) for _ in range(K)]
        xi, varrho = 0.1, float(rng.uniform(0.1, 1.0))
        k = int(rng.integers(K))
        analytic = grad_log_det_wrt_upsilon(comps, build_l_ensemble(comps, xi, varrho), k, varrho)
        numeric = np.zeros_like(analytic)
        up = comps[k].basis.upsilon
        for i in range(D):
            for j in range(d):
                e = np.zeros_like(up)
                e[i, j] = h
                plus = list(comps)
                minus = list(comps)
                plus[k] = comps[k].with_basis(Basis(up + e))
                minus[k] = comps[k].with_basis(Basis(up - e))
                numeric[i, j] = (_log_det(plus, xi, varrho) - _log_det(minus, xi, varrho)) / (2 * h)
        scale = max(np.abs(numeric).max(), 1e-3)
        assert np.abs(analytic - numeric).max() / scale < 1e-5


def test_upsilon_gradient_is_zero_for_one_component() -> None:
    comps = [init_component(4, 2, 0)]
    G = grad_log_det_wrt_upsilon(comps, build_l_ensemble(comps, 0.1, 0.1), 0, 0.1)
    assert not np.any(G)


def test_upsilon_gradient_is_constant_across_columns() -> None:
    comps = [init_component(5, 3, s) for s in range(3)]
    G = grad_log_det_wrt_upsilon(comps, build_l_ensemble(comps, 0.1, 0.5), 1, 0.5)
    assert_allclose(G, np.repeat(G[:, :1], 3, axis=1), rtol=0, atol=0)


def test_phi_gradient_matches_finite_differences() -> None:
    comps = [init_component(5, 3, s) for s in range(2)]
    xi, varrho, h = 0.4, 0.2, 1e-6
    phi = np.array([0.7, -0.3, 1.2])
    comps[0] = comps[0].with_scales(Scales(phi))
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        plus = [comps[0].with_scales(Scales(phi + e)), comps[1]]
        minus = [comps[0].with_scales(Scales(phi - e)), comps[1]]
        numeric = (_log_det(plus, xi, varrho) - _log_det(minus, xi, varrho)) / (2 * h)
        assert grad_log_det_wrt_phi(phi, xi, i) == pytest.approx(numeric, rel=1e-5)


def test_phi_subgradient_at_zero() -> None:
    phi = np.array([0.0, 1.0])
    assert grad_log_det_wrt_phi(phi, 0.5, 0) == 0.0
    assert grad_log_det_wrt_phi(phi, 0.5, 0, subgradient=1) == -0.5
    assert grad_log_det_wrt_phi(phi, 0.5, 0, subgradient=-1) == 0.5
    with pytest.raises(UsageError):
        grad_log_det_wrt_phi(phi, 0.5, 0, subgradient=2)
