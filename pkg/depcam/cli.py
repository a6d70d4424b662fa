"""
Command runners. main.py declares the options; the functions here do the
work, write the data files and report through rich on stderr. Standard
output carries machine-readable key=value lines only.
"""
from __future__ import annotations
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import psutil
import typer
from rich.console import Console
from rich.table import Table
from rich.theme import Theme

from depcam.config import settings
from depcam.core.data import BinaryDataset, generate_synthetic, kfold_split, load_csv, save_csv
from depcam.core.evaluation import (
    clustering_accuracy,
    effective_dims,
    evaluate,
    export_components,
    export_hinton,
    export_loglik_map,
    export_reconstructions,
    summarize_runs,
)
from depcam.core.inference import fit, predict_many
from depcam.core.model_store import load_model, save_model
from depcam.core.rng import derive_seed
from depcam.errors import UsageError
from depcam.models import CVConfig, CVRun, EvalReport, FitConfig, FitReport, SyntheticConfig
from depcam.utils import logger

custom_theme = Theme({
    "info": "cyan",
    "warning": "yellow",
    "error": "bold red",
    "success": "bold green",
})

console = Console(theme=custom_theme, stderr=True)

EXPORT_KINDS = ("hinton", "means", "loglik", "components")
CV_METRICS = ["test_accuracy", "train_accuracy", "test_mean_log_likelihood", "mean_effective_dims"]


def parse_list(text: str, cast, flag: str) -> list:
    """'0,1,10' → [0.0, 1.0, 10.0]."""
    try:
        values = [cast(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise UsageError(f"{flag}: cannot parse {text!r} ({exc})") from exc
    if not values:
        raise UsageError(f"{flag}: expected a comma-separated list, got {text!r}")
    return values


def emit(lines: Sequence[str]) -> None:
    for line in lines:
        typer.echo(line)


# ── generate ───────────────────────────────────────────────────────────

def run_generate(
    cfg: SyntheticConfig, out: Path, clean_out: Optional[Path] = None
) -> BinaryDataset:
    noisy, clean = generate_synthetic(cfg)
    save_csv(noisy, out)
    if clean_out is not None:
        save_csv(clean, clean_out)
    logger.info("generated %d×%d synthetic dataset (seed %d)", noisy.N, noisy.D, cfg.seed)
    console.print(f"wrote {noisy.N}×{noisy.D} dataset to {out}", style="success")
    return noisy


# ── fit ────────────────────────────────────────────────────────────────

def write_trace(report: FitReport, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({
        "step": np.arange(len(report.objective_trace)),
        "objective": report.objective_trace,
        "bound": report.bound_trace,
    }).to_csv(path, index=False)


def fit_summary_lines(report: FitReport) -> List[str]:
    return [
        f"outer_iters={report.outer_iters}",
        f"inner_iters={report.inner_iters}",
        f"converged={str(report.converged).lower()}",
        f"final_objective={report.final_objective:.6f}",
        f"jitter_events={report.jitter_events}",
        f"seed={report.seed}",
    ]


def run_fit(data: Path, cfg: FitConfig, out: Path, trace_out: Optional[Path] = None) -> FitReport:
    ds = load_csv(data)
    with console.status(f"fitting K={cfg.K}, d={cfg.d}, lambda={cfg.lam:g} on {ds.N} samples"):
        model, _, report = fit(ds, cfg)
    save_model(model, out, seed=cfg.seed, report=report)
    if trace_out is not None:
        write_trace(report, trace_out)
    style = "success" if report.converged else "warning"
    status = "converged" if report.converged else "stopped at the iteration limit"
    console.print(
        f"{status} after {report.outer_iters} outer iterations; model written to {out}",
        style=style,
    )
    emit(fit_summary_lines(report))
    return report


# ── predict ────────────────────────────────────────────────────────────

def run_predict(model_path: Path, data: Path, out: Path) -> pd.DataFrame:
    model = load_model(model_path)
    ds = load_csv(data)
    if ds.D != model.D:
        raise UsageError(f"data has D={ds.D} but the model was fitted with D={model.D}")
    z, Q, Y = predict_many(ds, model)
    frame = pd.DataFrame({"sample_index": np.arange(ds.N), "z_star": z})
    for k in range(model.K):
        frame[f"posterior_{k}"] = Q[:, k]
    for j in range(model.d):
        frame[f"y_star_{j}"] = Y[:, j]
    out.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out, index=False)
    console.print(f"assigned {ds.N} samples to {model.K} components; wrote {out}", style="success")
    return frame


# ── eval ───────────────────────────────────────────────────────────────

def run_eval(model_path: Path, data: Path, tau: float = 0.05) -> EvalReport:
    model = load_model(model_path)
    ds = load_csv(data)
    if ds.labels is None:
        raise UsageError(f"{data} has no label column; eval needs ground-truth labels")
    if ds.D != model.D:
        raise UsageError(f"data has D={ds.D} but the model was fitted with D={model.D}")
    report = evaluate(model, ds, tau)
    emit(report.as_lines())
    return report


# ── cross-validation ───────────────────────────────────────────────────

def resolve_workers(requested: Optional[int]) -> int:
    workers = settings.cv_workers if requested is None else requested
    if workers < 0:
        raise UsageError(f"--workers must be non-negative, got {workers}")
    if workers == 0:
        workers = psutil.cpu_count(logical=False) or 1
    return workers


def _cv_job(job: Tuple[BinaryDataset, np.ndarray, np.ndarray, FitConfig, int, int, float]) -> Dict:
    """Fit on the training fold, score both folds. Top-level so it pickles."""
    ds, train_idx, test_idx, fit_cfg, seed, fold, tau = job
    train, test = ds.subset(train_idx), ds.subset(test_idx)
    model, state, report = fit(train, fit_cfg)
    dims = [effective_dims(c.scales, tau) for c in model.components]
    K = max(model.K, ds.n_classes)
    train_acc, _ = clustering_accuracy(state.assignments, train.labels, K)
    test_report = evaluate(model, test, tau)
    return CVRun(
        lam=fit_cfg.lam,
        d=fit_cfg.d,
        xi=fit_cfg.xi,
        varrho=fit_cfg.varrho,
        seed=seed,
        fold=fold,
        train_accuracy=train_acc,
        test_accuracy=test_report.accuracy,
        test_mean_log_likelihood=test_report.mean_log_likelihood,
        mean_effective_dims=float(np.mean(dims)),
        outer_iters=report.outer_iters,
        converged=report.converged,
    ).model_dump()


def cv_jobs(ds: BinaryDataset, cfg: CVConfig) -> List[tuple]:
    """
    Every (grid point, seed, fold) job, in output order.

    The fold split of seed s uses s itself; the fit seed of fold f is derived
    from (s, fold, f), so every grid point sees the same splits and starts.
    """
    jobs = []
    for lam, d, xi, varrho in cfg.grid():
        for s in range(cfg.seeds):
            for f, (train_idx, test_idx) in enumerate(kfold_split(ds.N, cfg.folds, s)):
                fit_cfg = FitConfig(
                    K=cfg.K, d=d, lam=lam, xi=xi, varrho=varrho,
                    epsilon=cfg.epsilon, max_outer=cfg.max_outer, max_inner=cfg.max_inner,
                    seed=derive_seed(s, "fold", f),
                )
                jobs.append((ds, train_idx, test_idx, fit_cfg, s, f, cfg.tau))
    return jobs


def summary_path_for(out: Path) -> Path:
    return out.with_name(f"{out.stem}_summary.csv")


def run_cv(
    data: Path, cfg: CVConfig, out: Path, summary_out: Optional[Path] = None
) -> pd.DataFrame:
    ds = load_csv(data)
    if ds.labels is None:
        raise UsageError(f"{data} has no label column; cross-validation needs labels")
    if max(cfg.d_list) > ds.D:
        raise UsageError(f"latent dimension {max(cfg.d_list)} exceeds data dimension D={ds.D}")
    jobs = cv_jobs(ds, cfg)
    workers = min(resolve_workers(cfg.workers), len(jobs))
    logger.info("cross-validation: %d jobs on %d workers", len(jobs), workers)

    with console.status(f"running {len(jobs)} cross-validation fits"):
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(_cv_job, jobs))
        else:
            rows = [_cv_job(job) for job in jobs]

    runs = pd.DataFrame(rows, columns=list(CVRun.model_fields))
    out.parent.mkdir(parents=True, exist_ok=True)
    runs.to_csv(out, index=False)

    summary = summarize_runs(runs, ["lam", "d", "xi", "varrho"], CV_METRICS)
    summary_out = summary_out or summary_path_for(out)
    summary_out.parent.mkdir(parents=True, exist_ok=True)
    summary.to_csv(summary_out, index=False)

    table = Table(title="cross-validation summary")
    for col in ("lambda", "d", "xi", "varrho", "test accuracy", "eff. dims"):
        table.add_column(col)
    for _, row in summary.iterrows():
        table.add_row(
            f"{row['lam']:g}", f"{int(row['d'])}", f"{row['xi']:g}", f"{row['varrho']:g}",
            f"{row['test_accuracy_mean']:.4f} ± {row['test_accuracy_std']:.4f}",
            f"{row['mean_effective_dims_mean']:.2f}",
        )
    console.print(table)
    emit([f"runs={len(runs)}", f"summary={summary_out}"])
    return summary


# ── export ─────────────────────────────────────────────────────────────

def run_export(
    model_path: Path,
    what: str,
    out: Path,
    data: Optional[Path] = None,
    fmt: str = "csv",
    top: int = 3,
) -> Path:
    if what not in EXPORT_KINDS:
        raise UsageError(f"--what must be one of {', '.join(EXPORT_KINDS)}, got {what!r}")
    model = load_model(model_path)

    if what == "hinton":
        path = export_hinton(model, out)
    elif what == "components":
        path = export_components(model, out, top)
    else:
        if data is None:
            raise UsageError(f"--what {what} needs --data")
        ds = load_csv(data)
        if ds.D != model.D:
            raise UsageError(f"data has D={ds.D} but the model was fitted with D={model.D}")
        _, Q, Y = predict_many(ds, model)
        writer = export_reconstructions if what == "means" else export_loglik_map
        path = writer(model, ds, Y, Q, out, fmt)

    console.print(f"exported {what} to {path}", style="success")
    return path
