"""
Inference: the variational EM engine.

    initialize π ~ Dirichlet(1), components at random, Y = 0
    Y ← per-sample gradient ascent under R = π
    repeat                                         (outer, |ΔL| < ε)
        M-step: π ← column means of R
        repeat                                     (inner, |ΔL₀| < ε)
            q(Z) ← Bayes rule given Y, W
            for each k: Υᵏ ← geodesic line search, Φᵏ ← coordinate ascent
            Y ← per-sample gradient ascent
        record the objective

Point estimates stand in for the posteriors over Y and W. Every Υ, Φ and Y
step is accepted only if it does not lower the objective.

The objective is

    Σ_n Σ_k R_nk [log π_k + log p(x_n | Wᵏ y_n)] + Σ_n log N(y_n; 0, I) + λ log det L(W)

One code y_n is shared by all components.
"""
from __future__ import annotations
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import softmax, xlogy

from depcam.core.components import Basis, Component, Scales, init_component, materialize
from depcam.core.data import BinaryDataset
from depcam.core.dpp_prior import (
    LEnsemble,
    build_l_ensemble,
    grad_log_det_wrt_phi,
    grad_log_det_wrt_upsilon,
    log_det_prior,
)
from depcam.core.expfam import log_likelihood, log_partition_grad
from depcam.core.manifold import line_search_geodesic, project_to_tangent
from depcam.core.rng import stream
from depcam.errors import FitAbortedError, NumericalError, UsageError
from depcam.models import FitConfig, FitReport
from depcam.utils.logger import FILE_ONLY, logger

STEP_START = 0.5
MAX_HALVINGS = 20
PREDICT_ROUNDS = 10
PREDICT_TOL = 1e-8
SIMPLEX_TOL = 1e-10

_LOG_2PI = float(np.log(2.0 * np.pi))

# (step, component index or -1 for Y, objective before, objective after)
Monitor = Callable[[str, int, float, float], None]


# ── state ──────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class MixtureModel:
    pi:         np.ndarray
    components: Tuple[Component, ...]
    xi:         float = 0.1
    varrho:     float = 0.1
    lam:        float = 10.0

    def __post_init__(self) -> None:
        comps = tuple(self.components)
        if not comps:
            raise UsageError("a mixture needs at least one component")
        shape = comps[0].basis.upsilon.shape
        for k, c in enumerate(comps):
            if c.basis.upsilon.shape != shape:
                raise UsageError(
                    f"component {k} has shape {c.basis.upsilon.shape}, expected {shape}"
                )
        pi = np.array(self.pi, dtype=float, copy=True)
        if pi.shape != (len(comps),):
            raise UsageError(f"expected {len(comps)} mixing weights, got shape {pi.shape}")
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > SIMPLEX_TOL:
            raise UsageError(f"mixing weights must lie on the simplex, got {pi}")
        if min(self.xi, self.varrho, self.lam) < 0:
            raise UsageError("xi, varrho and lambda must be non-negative")
        pi.setflags(write=False)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "components", comps)

    @property
    def K(self) -> int:
        return len(self.components)

    @property
    def D(self) -> int:
        return self.components[0].D

    @property
    def d(self) -> int:
        return self.components[0].d

    def weights(self) -> List[np.ndarray]:
        return [materialize(c) for c in self.components]

    def ensemble(self) -> LEnsemble:
        return build_l_ensemble(self.components, self.xi, self.varrho)

    def with_pi(self, pi) -> "MixtureModel":
        return MixtureModel(pi, self.components, self.xi, self.varrho, self.lam)

    def with_component(self, k: int, component: Component) -> "MixtureModel":
        comps = list(self.components)
        comps[k] = component
        return MixtureModel(self.pi, tuple(comps), self.xi, self.varrho, self.lam)

    def permuted(self, perm: Sequence[int]) -> "MixtureModel":
        """Model whose component j is this model's component perm[j]."""
        perm = list(perm)
        if sorted(perm) != list(range(self.K)):
            raise UsageError(f"{perm} is not a permutation of 0..{self.K - 1}")
        return MixtureModel(
            self.pi[perm], tuple(self.components[p] for p in perm), self.xi, self.varrho, self.lam
        )


@dataclass(frozen=True, eq=False)
class LatentState:
    Y: np.ndarray      # N×d MAP codes
    R: np.ndarray      # N×K responsibilities

    def __post_init__(self) -> None:
        if self.Y.shape[0] != self.R.shape[0]:
            raise UsageError(f"Y has {self.Y.shape[0]} rows but R has {self.R.shape[0]}")
        if np.any(self.R < 0) or np.any(np.abs(self.R.sum(axis=1) - 1.0) > SIMPLEX_TOL):
            raise UsageError("responsibility rows must lie on the simplex")

    @property
    def assignments(self) -> np.ndarray:
        return np.argmax(self.R, axis=1)


def as_matrix(X) -> np.ndarray:
    if isinstance(X, BinaryDataset):
        X = X.X
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise UsageError(f"expected an N×D data matrix, got shape {X.shape}")
    return X


def _check_shapes(X: np.ndarray, model: MixtureModel, Y: Optional[np.ndarray] = None) -> None:
    if X.shape[1] != model.D:
        raise UsageError(f"data has {X.shape[1]} features but the model expects D={model.D}")
    if Y is not None and Y.shape != (X.shape[0], model.d):
        raise UsageError(f"codes have shape {Y.shape}, expected {(X.shape[0], model.d)}")


# ── E-step pieces ──────────────────────────────────────────────────────

def component_log_likelihoods(X, Y: np.ndarray, model: MixtureModel) -> np.ndarray:
    """N×K matrix of log p(x_n | Wᵏ y_n)."""
    X = as_matrix(X)
    Y = np.asarray(Y, dtype=float)
    _check_shapes(X, model, Y)
    return np.stack([log_likelihood(X, Y @ W.T) for W in model.weights()], axis=1)


def log_weights(pi: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(pi)


def update_responsibilities(X, Y: np.ndarray, model: MixtureModel) -> np.ndarray:
    """R_nk ∝ π_k p(x_n | Wᵏ y_n); the shared p(y_n) cancels."""
    ll = component_log_likelihoods(X, Y, model)
    R = softmax(log_weights(model.pi)[None, :] + ll, axis=1)
    if not np.all(np.isfinite(R)):
        raise NumericalError("responsibilities are not finite")
    return R


def update_pi(R: np.ndarray) -> np.ndarray:
    """π_k = N_k / N."""
    R = np.asarray(R, dtype=float)
    pi = R.sum(axis=0) / R.shape[0]
    return pi / pi.sum()


def responsibility_entropy(R: np.ndarray) -> float:
    return float(-xlogy(R, R).sum())


# ── objective ──────────────────────────────────────────────────────────

def _code_log_prior(Y: np.ndarray) -> np.ndarray:
    """log N(y_n; 0, I) per row."""
    d = Y.shape[1]
    return -0.5 * np.einsum("nd,nd->n", Y, Y) - 0.5 * d * _LOG_2PI


def _prior_term(model: MixtureModel) -> Tuple[float, float]:
    """(λ log det L, jitter used). λ = 0 skips the prior altogether."""
    if model.lam == 0.0:
        return 0.0, 0.0
    ens = model.ensemble()
    return model.lam * log_det_prior(ens), ens.jitter


def _objective_parts(
    X: np.ndarray, Y: np.ndarray, R: np.ndarray, model: MixtureModel
) -> Tuple[float, float]:
    ll = component_log_likelihoods(X, Y, model)
    mixing = xlogy(R, model.pi[None, :]).sum()
    fit = (R * ll).sum()
    codes = _code_log_prior(Y).sum()
    prior, jitter = _prior_term(model)
    value = float(mixing + fit + codes + prior)
    if not np.isfinite(value):
        raise NumericalError(f"objective is not finite ({value})")
    return value, jitter


def objective(X, Y: np.ndarray, R: np.ndarray, model: MixtureModel) -> float:
    X = as_matrix(X)
    return _objective_parts(X, np.asarray(Y, dtype=float), np.asarray(R, dtype=float), model)[0]


# ── Y step ─────────────────────────────────────────────────────────────

def _code_objective(
    X: np.ndarray, Y: np.ndarray, R: np.ndarray, Ws: Sequence[np.ndarray]
) -> np.ndarray:
    """Per-sample −½‖y_n‖² + Σ_k R_nk log p(x_n | Wᵏ y_n)."""
    value = -0.5 * np.einsum("nd,nd->n", Y, Y)
    for k, W in enumerate(Ws):
        value = value + R[:, k] * log_likelihood(X, Y @ W.T)
    return value


def code_gradient(X, Y: np.ndarray, R: np.ndarray, model: MixtureModel) -> np.ndarray:
    """∂/∂y_n = −y_n + Σ_k R_nk Wᵏᵀ (x_n + g′(Wᵏ y_n))."""
    X = as_matrix(X)
    Y = np.asarray(Y, dtype=float)
    return _code_gradient(X, Y, np.asarray(R, dtype=float), model.weights())


def _code_gradient(
    X: np.ndarray, Y: np.ndarray, R: np.ndarray, Ws: Sequence[np.ndarray]
) -> np.ndarray:
    grad = -Y.copy()
    for k, W in enumerate(Ws):
        resid = X + log_partition_grad(Y @ W.T)
        grad += R[:, k:k + 1] * (resid @ W)
    return grad


def update_Y(X, R: np.ndarray, model: MixtureModel, Y: np.ndarray, iters: int = 5) -> np.ndarray:
    """
    Gradient ascent on every y_n independently, with backtracking.

    Each iteration starts at step 0.5 and halves (at most 20 times) until the
    per-sample objective does not decrease; rows that never qualify keep y_n.
    """
    X = as_matrix(X)
    Y = np.array(Y, dtype=float, copy=True)
    R = np.asarray(R, dtype=float)
    _check_shapes(X, model, Y)
    Ws = model.weights()
    current = _code_objective(X, Y, R, Ws)

    for _ in range(iters):
        grad = _code_gradient(X, Y, R, Ws)
        pending = np.any(grad != 0.0, axis=1)
        if not pending.any():
            break
        step = STEP_START
        new_Y = Y.copy()
        for _ in range(MAX_HALVINGS + 1):
            idx = np.flatnonzero(pending)
            if idx.size == 0:
                break
            trial = Y[idx] + step * grad[idx]
            value = _code_objective(X[idx], trial, R[idx], Ws)
            ok = value >= current[idx]
            new_Y[idx[ok]] = trial[ok]
            current[idx[ok]] = value[ok]
            pending[idx[ok]] = False
            step *= 0.5
        Y = new_Y
    return Y


# ── component steps ────────────────────────────────────────────────────

def _component_objective(
    X: np.ndarray,
    Y: np.ndarray,
    r: np.ndarray,
    model: MixtureModel,
    k: int,
    candidate: Component,
) -> float:
    """Terms of the objective that depend on component k."""
    value = float(r @ log_likelihood(X, Y @ materialize(candidate).T))
    if model.lam != 0.0:
        comps = list(model.components)
        comps[k] = candidate
        value += model.lam * log_det_prior(build_l_ensemble(comps, model.xi, model.varrho))
    return value


def _weighted_residual(X: np.ndarray, Y: np.ndarray, r: np.ndarray, comp: Component) -> np.ndarray:
    """Σ_n r_n (x_n + g′(W y_n)) y_nᵀ, the likelihood gradient with respect to W (D×d)."""
    resid = X + log_partition_grad(Y @ materialize(comp).T)
    return (r[:, None] * resid).T @ Y


def likelihood_grad_upsilon(
    X, R: np.ndarray, Y: np.ndarray, model: MixtureModel, k: int
) -> np.ndarray:
    """Euclidean gradient of the likelihood terms with respect to Υᵏ."""
    X = as_matrix(X)
    comp = model.components[k]
    G_W = _weighted_residual(X, np.asarray(Y, dtype=float), np.asarray(R)[:, k], comp)
    return G_W * comp.scales.phi[None, :]


def likelihood_grad_phi(
    X, R: np.ndarray, Y: np.ndarray, model: MixtureModel, k: int
) -> np.ndarray:
    """∂/∂Φᵏ_i of the likelihood terms, for every i: diag(Υᵏᵀ G_W)."""
    X = as_matrix(X)
    comp = model.components[k]
    G_W = _weighted_residual(X, np.asarray(Y, dtype=float), np.asarray(R)[:, k], comp)
    return np.einsum("ij,ij->j", comp.basis.upsilon, G_W)


def _owned_rows(X: np.ndarray, Y: np.ndarray, r: np.ndarray) -> Tuple[np.ndarray, ...]:
    """Restrict to the samples component k actually owns; r_n = 0 rows add nothing."""
    rows = r > 0.0
    if rows.all():
        return X, Y, r
    return X[rows], Y[rows], r[rows]


def update_component_upsilon(
    X, R: np.ndarray, Y: np.ndarray, model: MixtureModel, k: int
) -> Basis:
    """One projected-gradient geodesic step for Υᵏ."""
    X = as_matrix(X)
    X, Y, r = _owned_rows(X, np.asarray(Y, dtype=float), np.asarray(R, dtype=float)[:, k])
    comp = model.components[k]

    G = _weighted_residual(X, Y, r, comp) * comp.scales.phi[None, :]
    if model.lam != 0.0:
        ens = model.ensemble()
        G = G + model.lam * grad_log_det_wrt_upsilon(model.components, ens, k, model.varrho)
    direction = project_to_tangent(comp.basis, G)

    def along(basis: Basis) -> float:
        try:
            return _component_objective(X, Y, r, model, k, comp.with_basis(basis))
        except NumericalError:
            return float("nan")

    t_star, basis = line_search_geodesic(along, comp.basis, direction)
    logger.debug("component %d: geodesic step t=%.4g", k, t_star)
    return basis


def update_component_phi(
    X,
    R: np.ndarray,
    Y: np.ndarray,
    model: MixtureModel,
    k: int,
    sweeps: int = 2,
) -> Scales:
    """
    Coordinate ascent over the diagonal of Φᵏ.

    At Φᵏ_i ≠ 0 the ℓ₁ subgradient is sign(Φᵏ_i). At Φᵏ_i = 0 each of
    s ∈ {−1, 0, +1} is tried and the objective-best move is kept. A step
    that crosses zero also competes against landing exactly on zero.

    Moving Φᵏ_i shifts the natural parameters along the rank-one direction
    y_{·i} Υᵏ_{·i}ᵀ, so every trial value reuses the θ of the other coordinates.
    """
    X = as_matrix(X)
    X, Y, r = _owned_rows(X, np.asarray(Y, dtype=float), np.asarray(R, dtype=float)[:, k])
    comp = model.components[k]
    U = comp.basis.upsilon
    phi = comp.scales.phi.copy()

    def prior_at(p: np.ndarray) -> float:
        if model.lam == 0.0:
            return 0.0
        comps = list(model.components)
        comps[k] = comp.with_scales(Scales(p))
        return model.lam * log_det_prior(build_l_ensemble(comps, model.xi, model.varrho))

    for _ in range(sweeps):
        for i in range(comp.d):
            theta = Y @ (U * phi[None, :]).T
            shift = np.outer(Y[:, i], U[:, i])
            rest = theta - phi[i] * shift

            def along(c: float) -> float:
                p = phi.copy()
                p[i] = c
                try:
                    return float(r @ log_likelihood(X, rest + c * shift)) + prior_at(p)
                except NumericalError:
                    return float("nan")

            current = along(phi[i])
            if not np.isfinite(current):
                raise NumericalError(f"component {k}: objective is not finite in the scale update")
            lik_grad = float(((X + log_partition_grad(theta)) @ U[:, i]) @ (r * Y[:, i]))
            choices = (int(np.sign(phi[i])),) if phi[i] != 0.0 else (-1, 0, 1)
            best_value, best_phi = current, phi[i]
            for s in choices:
                grad = lik_grad + model.lam * grad_log_det_wrt_phi(phi, model.xi, i, s)
                cand_phi, cand_value = _coordinate_step(along, phi[i], grad, current)
                if cand_value > best_value:
                    best_value, best_phi = cand_value, cand_phi
            phi[i] = best_phi
    return Scales(phi)


def _coordinate_step(
    along: Callable[[float], float],
    start: float,
    grad: float,
    current: float,
) -> Tuple[float, float]:
    """Backtracking step on one coordinate; returns (new value, objective)."""
    if grad == 0.0 or not np.isfinite(grad):
        return start, current
    step = STEP_START
    for _ in range(MAX_HALVINGS + 1):
        candidates = [start + step * grad]
        if start != 0.0 and np.sign(candidates[0]) != np.sign(start):
            candidates.append(0.0)
        best = None
        for c in candidates:
            v = along(c)
            if np.isfinite(v) and (best is None or v > best[1]):
                best = (c, v)
        if best is not None and best[1] >= current:
            return best
        step *= 0.5
    return start, current


# ── the EM loop ────────────────────────────────────────────────────────

def init_model(D: int, cfg: FitConfig) -> MixtureModel:
    """π from a flat Dirichlet draw, components from init_component."""
    if cfg.d > D:
        raise UsageError(f"latent dimension d={cfg.d} exceeds data dimension D={D}")
    pi = stream(cfg.seed, "init", "pi").dirichlet(np.ones(cfg.K))
    comp_rng = stream(cfg.seed, "init", "components")
    comps = tuple(init_component(D, cfg.d, comp_rng) for _ in range(cfg.K))
    return MixtureModel(pi / pi.sum(), comps, cfg.xi, cfg.varrho, cfg.lam)


def fit(
    X,
    cfg: FitConfig,
    *,
    init: Optional[Tuple[MixtureModel, np.ndarray]] = None,
    monitor: Optional[Monitor] = None,
) -> Tuple[MixtureModel, LatentState, FitReport]:
    """
    Run variational EM to convergence.

    The codes take one round of gradient ascent before the first component
    step, whether the fit starts fresh or continues.

    `init` continues from an existing (model, Y) instead of a random start;
    `monitor` is called around every Υ, Φ and Y step with the full objective
    before and after it.
    """
    X = as_matrix(X)
    if X.shape[0] == 0:
        raise UsageError("cannot fit an empty dataset")

    if init is None:
        model = init_model(X.shape[1], cfg)
        Y = np.zeros((X.shape[0], cfg.d))
    else:
        model, Y = init
        Y = np.array(Y, dtype=float, copy=True)
    _check_shapes(X, model, Y)

    report = FitReport(seed=cfg.seed)
    eps = cfg.epsilon
    R = update_responsibilities(X, Y, model)

    def record(value: float, jitter: float) -> None:
        report.objective_trace.append(value)
        report.bound_trace.append(value + responsibility_entropy(R))
        if jitter > 0.0:
            report.jitter_events += 1

    def watched(step: str, k: int, before: Optional[float]) -> None:
        if monitor is not None and before is not None:
            monitor(step, k, before, objective(X, Y, R, model))

    try:
        L_new, jitter = _objective_parts(X, Y, R, model)
        record(L_new, jitter)

        # every Υ and Φ likelihood gradient vanishes at Y = 0; move the codes first
        before = objective(X, Y, R, model) if monitor else None
        Y = update_Y(X, R, model, Y, cfg.y_step_iters)
        watched("Y", -1, before)

        for outer in range(cfg.max_outer):
            L_old = L_new
            # M-step
            model = model.with_pi(update_pi(R))
            L0_new, _ = _objective_parts(X, Y, R, model)

            # E-step
            for inner in range(cfg.max_inner):
                L0_old = L0_new
                R = update_responsibilities(X, Y, model)
                for k in range(model.K):
                    before = objective(X, Y, R, model) if monitor else None
                    basis = update_component_upsilon(X, R, Y, model, k)
                    model = model.with_component(k, model.components[k].with_basis(basis))
                    watched("upsilon", k, before)

                    before = objective(X, Y, R, model) if monitor else None
                    scales = update_component_phi(X, R, Y, model, k, cfg.phi_sweeps)
                    model = model.with_component(k, model.components[k].with_scales(scales))
                    watched("phi", k, before)

                before = objective(X, Y, R, model) if monitor else None
                Y = update_Y(X, R, model, Y, cfg.y_step_iters)
                watched("Y", -1, before)

                L0_new, jitter = _objective_parts(X, Y, R, model)
                record(L0_new, jitter)
                report.inner_iters += 1
                logger.debug("outer %d inner %d: objective %.6f", outer, inner, L0_new)
                if abs(L0_new - L0_old) < eps:
                    break

            L_new = L0_new
            report.outer_iters = outer + 1
            logger.info(
                "outer %d: objective %.6f (delta %.3e)", outer, L_new, L_new - L_old
            )
            if abs(L_new - L_old) < eps:
                report.converged = True
                break
    except NumericalError as exc:
        report.aborted = True
        report.message = str(exc)
        logger.error(
            "fit aborted after %d outer iterations: %s", report.outer_iters, exc, extra=FILE_ONLY
        )
        raise FitAbortedError(str(exc), report) from exc

    if report.jitter_events:
        logger.warning("L-ensemble needed diagonal jitter %d times", report.jitter_events)
    return model, LatentState(Y, R), report


# ── prediction ─────────────────────────────────────────────────────────

def predict_many(
    X,
    model: MixtureModel,
    *,
    rounds: int = PREDICT_ROUNDS,
    tol: float = PREDICT_TOL,
    y_step_iters: int = 5,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Cluster unseen samples: (z*, q(z*), y*) for every row of X.

    Starts from q = π and y = 0, then alternates code ascent weighted by q
    with the Bayes update of q until q moves less than `tol` (max norm).
    Ties in the arg-max go to the lowest component index.
    """
    X = as_matrix(X)
    _check_shapes(X, model)
    N = X.shape[0]
    Q = np.tile(model.pi, (N, 1))
    Y = np.zeros((N, model.d))
    active = np.ones(N, dtype=bool)

    for _ in range(rounds):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Y[idx] = update_Y(X[idx], Q[idx], model, Y[idx], y_step_iters)
        Q_new = update_responsibilities(X[idx], Y[idx], model)
        change = np.abs(Q_new - Q[idx]).max(axis=1)
        Q[idx] = Q_new
        active[idx[change < tol]] = False

    return np.argmax(Q, axis=1), Q, Y


def predict(x_star, model: MixtureModel, **kwargs) -> Tuple[int, np.ndarray, np.ndarray]:
    x = np.asarray(x_star, dtype=float)
    if x.shape != (model.D,):
        raise UsageError(f"expected a sample of length {model.D}, got shape {x.shape}")
    z, Q, Y = predict_many(x[None, :], model, **kwargs)
    return int(z[0]), Q[0], Y[0]
