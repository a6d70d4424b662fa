from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional

import typer
from pydantic import ValidationError
from rich.console import Console

from depcam import __version__
from depcam.cli import (
    console as err_console,
    parse_list,
    run_cv,
    run_eval,
    run_export,
    run_fit,
    run_generate,
    run_predict,
)
from depcam.errors import USAGE_ERRORS, DepcamError, UsageError
from depcam.models import CVConfig, FitConfig, SyntheticConfig
from depcam.utils import FILE_ONLY, logger, set_debug

app = typer.Typer(
    name="depcam",
    help="Diversified mixtures of exponential-family PCA for binary data.",
    add_completion=False,
)

console = Console()


@contextmanager
def guarded(command: str) -> Iterator[None]:
    """Exit 2 on usage errors, 1 on everything else that goes wrong."""
    try:
        yield
    except (*USAGE_ERRORS, ValidationError) as e:
        logger.error("%s: usage error: %s", command, str(e), extra=FILE_ONLY)
        err_console.print(f"error: {e}", style="error")
        raise typer.Exit(code=2)
    except (DepcamError, OSError) as e:
        logger.error("%s failed: %s", command, str(e), exc_info=True, extra=FILE_ONLY)
        err_console.print(f"error: {e}", style="error")
        raise typer.Exit(code=1)


@app.callback()
def callback(
    debug: bool = typer.Option(False, "--debug", "-d", help="Log at DEBUG level"),
) -> None:
    """Fit, evaluate and export DPP-diversified mixtures of binary PCAs."""
    if debug:
        set_debug(True)


@app.command()
def generate(
    out: Path = typer.Option(..., "--out", help="Noisy dataset CSV"),
    clean_out: Optional[Path] = typer.Option(None, "--clean-out", help="Noise-free copy"),
    classes: int = typer.Option(3, "--classes"),
    prototypes_per_class: int = typer.Option(3, "--prototypes-per-class"),
    copies: int = typer.Option(50, "--copies"),
    dims: int = typer.Option(16, "--dims"),
    flip: float = typer.Option(0.1, "--flip", help="Bit-flip probability"),
    means: str = typer.Option("0.9,0.5,0.1", "--means", help="Comma-separated class means"),
    seed: int = typer.Option(0, "--seed"),
) -> None:
    """Write the prototype/duplicate/flip synthetic dataset"""
    with guarded("generate"):
        cfg = SyntheticConfig(
            classes=classes,
            prototypes_per_class=prototypes_per_class,
            copies=copies,
            dims=dims,
            flip_prob=flip,
            class_means=parse_list(means, float, "--means"),
            seed=seed,
        )
        run_generate(cfg, out, clean_out)


@app.command("fit")
def fit_command(
    data: Path = typer.Option(..., "--data", help="Training CSV"),
    out: Path = typer.Option(..., "--out", help="Model JSON to write"),
    k: int = typer.Option(3, "--k", help="Number of components"),
    d: int = typer.Option(4, "--d", help="Latent dimension"),
    xi: float = typer.Option(0.1, "--xi", help="Sparsity weight of the quality term"),
    varrho: float = typer.Option(0.1, "--varrho", help="Similarity kernel width"),
    lam: float = typer.Option(10.0, "--lambda", help="Diversity prior weight; 0 disables it"),
    eps: float = typer.Option(1e-5, "--eps", help="Stopping tolerance on the objective"),
    max_outer: int = typer.Option(100, "--max-outer"),
    max_inner: int = typer.Option(50, "--max-inner"),
    seed: int = typer.Option(0, "--seed"),
    trace_out: Optional[Path] = typer.Option(None, "--trace-out", help="Objective trace CSV"),
) -> None:
    """Fit a mixture by variational EM"""
    with guarded("fit"):
        cfg = FitConfig(
            K=k, d=d, xi=xi, varrho=varrho, lam=lam,
            epsilon=eps, max_outer=max_outer, max_inner=max_inner, seed=seed,
        )
        run_fit(data, cfg, out, trace_out)


@app.command()
def predict(
    model: Path = typer.Option(..., "--model"),
    data: Path = typer.Option(..., "--data"),
    out: Path = typer.Option(..., "--out", help="Assignments CSV"),
) -> None:
    """Assign unseen samples to components"""
    with guarded("predict"):
        run_predict(model, data, out)


@app.command("eval")
def eval_command(
    model: Path = typer.Option(..., "--model"),
    data: Path = typer.Option(..., "--data", help="CSV with a label column"),
    tau: float = typer.Option(0.05, "--tau", help="Relative threshold for effective dimensions"),
) -> None:
    """Print accuracy, log-likelihood and effective dimensions"""
    with guarded("eval"):
        run_eval(model, data, tau)


@app.command()
def cv(
    data: Path = typer.Option(..., "--data", help="Labelled CSV"),
    out: Path = typer.Option(..., "--out", help="Per-run CSV"),
    summary_out: Optional[Path] = typer.Option(
        None, "--summary-out", help="Defaults to <out>_summary.csv"
    ),
    folds: int = typer.Option(5, "--folds"),
    k: int = typer.Option(3, "--k"),
    d: Optional[int] = typer.Option(None, "--d", help="Latent dimension (default 4)"),
    d_list: Optional[str] = typer.Option(None, "--d-list", help="Comma-separated latent dims"),
    xi: Optional[float] = typer.Option(None, "--xi"),
    xi_list: Optional[str] = typer.Option(None, "--xi-list"),
    varrho: Optional[float] = typer.Option(None, "--varrho"),
    varrho_list: Optional[str] = typer.Option(None, "--varrho-list"),
    lambda_list: str = typer.Option("0,1,10", "--lambda-list"),
    seeds: int = typer.Option(5, "--seeds", help="Seeds 0..n-1"),
    eps: float = typer.Option(1e-5, "--eps"),
    max_outer: int = typer.Option(100, "--max-outer"),
    max_inner: int = typer.Option(50, "--max-inner"),
    tau: float = typer.Option(0.05, "--tau"),
    workers: Optional[int] = typer.Option(None, "--workers", help="0 = one per physical core"),
) -> None:
    """k-fold cross-validation over a hyperparameter grid"""
    with guarded("cv"):
        cfg = CVConfig(
            folds=folds,
            seeds=seeds,
            K=k,
            lambda_list=parse_list(lambda_list, float, "--lambda-list"),
            d_list=_grid(d, d_list, int, "--d", 4),
            xi_list=_grid(xi, xi_list, float, "--xi", 0.1),
            varrho_list=_grid(varrho, varrho_list, float, "--varrho", 0.1),
            epsilon=eps,
            max_outer=max_outer,
            max_inner=max_inner,
            tau=tau,
            workers=workers,
        )
        run_cv(data, cfg, out, summary_out)


def _grid(single, listed: Optional[str], cast, flag: str, default) -> list:
    if single is not None and listed is not None:
        raise UsageError(f"pass either {flag} or {flag}-list, not both")
    if listed is not None:
        return parse_list(listed, cast, f"{flag}-list")
    return [default if single is None else single]


@app.command()
def export(
    model: Path = typer.Option(..., "--model"),
    what: str = typer.Option("hinton", "--what", help="hinton | means | loglik | components"),
    out: Path = typer.Option(..., "--out", help="CSV file, or a directory for --format pgm"),
    data: Optional[Path] = typer.Option(None, "--data", help="Needed for means and loglik"),
    fmt: str = typer.Option("csv", "--format", help="csv | pgm"),
    top: int = typer.Option(3, "--top", help="Directions per component for --what components"),
) -> None:
    """Write plot-ready figure data"""
    with guarded("export"):
        run_export(model, what, out, data, fmt, top)


@app.command()
def version() -> None:
    """Show version information"""
    console.print(f"depcam v{__version__}", style="bold cyan")


if __name__ == "__main__":
    app()
