"""
End-to-end experiments on the prototype/duplicate/flip dataset.

These run the full cross-validation protocol on every physical core and take
minutes; they are deselected by default. Run them with `pytest -m slow`.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pandas as pd
import pytest

from depcam.cli import _cv_job, cv_jobs, resolve_workers
from depcam.core.data import generate_synthetic
from depcam.core.evaluation import clustering_accuracy, summarize_runs
from depcam.core.inference import fit, predict_many
from depcam.models import CVConfig, FitConfig, SyntheticConfig

pytestmark = pytest.mark.slow

SEEDS = 5
# iteration caps for every experiment fit; unregularized fits stop on these
CAPS = dict(max_outer=10, max_inner=5)


@pytest.fixture(scope="module")
def noisy():
    ds, _ = generate_synthetic(SyntheticConfig(seed=0))
    return ds


def _cv(ds, **grid) -> pd.DataFrame:
    cfg = CVConfig(folds=5, seeds=SEEDS, K=3, **CAPS, **grid)
    jobs = cv_jobs(ds, cfg)
    with ProcessPoolExecutor(max_workers=min(resolve_workers(0), len(jobs))) as pool:
        return pd.DataFrame(list(pool.map(_cv_job, jobs)))


@pytest.fixture(scope="module")
def lambda_sweep(noisy) -> pd.DataFrame:
    return _cv(noisy, lambda_list=[0.0, 10.0, 1000.0], d_list=[4])


def _mean(runs: pd.DataFrame, metric: str, **where) -> float:
    mask = np.ones(len(runs), dtype=bool)
    for key, value in where.items():
        mask &= runs[key].to_numpy() == value
    return float(runs.loc[mask, metric].mean())


def test_diversity_prior_does_not_hurt_test_accuracy(lambda_sweep) -> None:
    with_prior = _mean(lambda_sweep, "test_accuracy", lam=10.0)
    without = _mean(lambda_sweep, "test_accuracy", lam=0.0)
    assert with_prior >= without

    per_seed = lambda_sweep.groupby(["lam", "seed"])["test_accuracy"].mean().unstack("lam")
    assert int((per_seed[10.0] > per_seed[0.0]).sum()) >= 3


def test_overweighted_prior_degrades(lambda_sweep) -> None:
    assert _mean(lambda_sweep, "test_accuracy", lam=1000.0) <= _mean(
        lambda_sweep, "test_accuracy", lam=10.0
    )


def test_prior_prunes_dimensions(noisy) -> None:
    runs = _cv(noisy, lambda_list=[0.0, 10.0], d_list=[6])
    summary = summarize_runs(runs, ["lam"], ["mean_effective_dims"]).set_index("lam")
    assert summary.loc[10.0, "mean_effective_dims_mean"] < summary.loc[0.0, "mean_effective_dims_mean"]


def test_fewer_latent_dims_suffice_with_the_prior(noisy, lambda_sweep) -> None:
    small = _cv(noisy, lambda_list=[10.0], d_list=[3])
    baseline = _mean(lambda_sweep, "test_accuracy", lam=0.0, d=4)
    assert small["test_accuracy"].mean() >= baseline - 0.02


def test_clean_prototypes_are_recovered() -> None:
    perfect = 0
    for seed in range(SEEDS):
        noisy, clean = generate_synthetic(SyntheticConfig(flip_prob=0.0, seed=seed))
        model, state, _ = fit(noisy, FitConfig(K=3, d=4, seed=seed, **CAPS))
        acc, _ = clustering_accuracy(state.assignments, noisy.labels, 3)
        if acc == 1.0:
            perfect += 1
            _, first = np.unique(clean.X, axis=0, return_index=True)
            protos = clean.subset(np.sort(first))
            z, _, _ = predict_many(protos, model)
            held_out, _ = clustering_accuracy(z, protos.labels, 3)
            assert held_out == 1.0
    assert perfect >= 4


def test_inner_steps_monotone_over_ten_fits() -> None:
    violations = []

    def monitor(step: str, k: int, before: float, after: float) -> None:
        if after < before - 1e-9:
            violations.append((step, k, before, after))

    for seed in range(10):
        noisy, _ = generate_synthetic(SyntheticConfig(seed=seed))
        cfg = FitConfig(K=3, d=4, lam=10.0, seed=seed, max_outer=20, max_inner=5)
        fit(noisy, cfg, monitor=monitor)
    assert violations == []
