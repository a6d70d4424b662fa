"""
Model persistence. A fitted mixture is stored as a versioned ModelFile JSON
document; loading re-validates every MixtureModel invariant.
"""
from __future__ import annotations
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import ValidationError

from depcam.core.components import Basis, Component, Scales
from depcam.core.inference import MixtureModel
from depcam.errors import DataParseError
from depcam.models import ComponentRecord, FitReport, FitStats, ModelFile

LOAD_ORTHONORMAL_TOL = 1e-6


def to_model_file(
    model: MixtureModel, seed: int = 0, report: Optional[FitReport] = None
) -> ModelFile:
    stats = FitStats()
    if report is not None:
        stats = FitStats(
            outer_iters=report.outer_iters,
            final_objective=report.final_objective,
            converged=report.converged,
        )
    return ModelFile(
        K=model.K,
        d=model.d,
        D=model.D,
        pi=[float(p) for p in model.pi],
        xi=model.xi,
        varrho=model.varrho,
        lam=model.lam,
        components=[
            ComponentRecord(
                upsilon=c.basis.upsilon.ravel(order="C").tolist(),
                phi=c.scales.phi.tolist(),
            )
            for c in model.components
        ],
        seed=seed,
        fit_stats=stats,
    )


def from_model_file(mf: ModelFile) -> MixtureModel:
    comps = []
    for rec in mf.components:
        basis = Basis(np.asarray(rec.upsilon, dtype=float).reshape(mf.D, mf.d))
        basis.check_orthonormal(LOAD_ORTHONORMAL_TOL)
        comps.append(Component(basis, Scales(rec.phi)))
    pi = np.asarray(mf.pi, dtype=float)
    # JSON round-off can push the sum a hair off the simplex
    if np.all(pi >= 0) and abs(pi.sum() - 1.0) < 1e-8:
        pi = pi / pi.sum()
    return MixtureModel(pi, tuple(comps), mf.xi, mf.varrho, mf.lam)


def save_model(
    model: MixtureModel,
    path: Path | str,
    *,
    seed: int = 0,
    report: Optional[FitReport] = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mf = to_model_file(model, seed, report)
    path.write_text(mf.model_dump_json(by_alias=True, indent=2))
    return path


def load_model(path: Path | str) -> MixtureModel:
    return from_model_file(read_model_file(path))


def read_model_file(path: Path | str) -> ModelFile:
    """The raw document, e.g. for its seed and fit statistics."""
    path = Path(path)
    try:
        return ModelFile.model_validate_json(path.read_text())
    except ValidationError as exc:
        raise DataParseError(
            f"{path}: not a valid model file ({exc.error_count()} errors)"
        ) from exc
