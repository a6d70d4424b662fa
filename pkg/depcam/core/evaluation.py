"""
Evaluation: clustering accuracy, effective dimensions, and figure-data exports.

Exports write plot-ready data only:

  hinton       CSV   component, dim_index, value, abs_value, sign
  means        CSV   one row of D mean parameters per sample
               PGM   one 8-bit image per sample
  loglik       CSV   one row of D per-entry log-likelihoods per sample
               PGM   0 → white, the most negative entry → black
  components   CSV   component, rank, dim_index, phi, w_0..w_{D-1}
"""
from __future__ import annotations
import itertools
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import linear_sum_assignment
from scipy.special import expit, log_expit, logsumexp

from depcam.core.components import Scales, materialize
from depcam.core.data import BinaryDataset
from depcam.core.inference import (
    MixtureModel,
    as_matrix,
    log_weights,
    component_log_likelihoods,
    predict_many,
)
from depcam.errors import UsageError
from depcam.models import EvalReport
from depcam.utils.logger import logger

EXHAUSTIVE_MAX_K = 6
DEFAULT_TAU = 0.05
FORMATS = ("csv", "pgm")


# ── accuracy ───────────────────────────────────────────────────────────

def _confusion(pred: np.ndarray, truth: np.ndarray, K: int) -> np.ndarray:
    """C[c, l] = #{n : pred_n = c, truth_n = l}."""
    C = np.zeros((K, K), dtype=np.int64)
    np.add.at(C, (pred, truth), 1)
    return C


def clustering_accuracy(pred, truth, K: int) -> Tuple[float, List[int]]:
    """
    Best agreement over all cluster → label bijections.

    Returns (accuracy, perm) with perm[c] the label matched to cluster c.
    Exhaustive for K ≤ 6 (ties go to the lexicographically smallest
    permutation), optimal assignment above.
    """
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise UsageError(
            f"pred and truth must be equal-length vectors, got {pred.shape} and {truth.shape}"
        )
    if K < 1:
        raise UsageError(f"K must be at least 1, got {K}")
    for name, v in (("pred", pred), ("truth", truth)):
        if v.size and (v.min() < 0 or v.max() >= K or not np.all(v == np.round(v))):
            raise UsageError(f"{name} entries must be integers in [0, {K})")
    if pred.size == 0:
        return 1.0, list(range(K))

    C = _confusion(pred.astype(np.int64), truth.astype(np.int64), K)
    if K <= EXHAUSTIVE_MAX_K:
        best, best_perm = -1, None
        rows = np.arange(K)
        for perm in itertools.permutations(range(K)):
            hits = int(C[rows, perm].sum())
            if hits > best:
                best, best_perm = hits, list(perm)
    else:
        rows, cols = linear_sum_assignment(C, maximize=True)
        best_perm = [int(c) for c in cols[np.argsort(rows)]]
        best = int(C[np.arange(K), best_perm].sum())
    return best / pred.size, best_perm


def effective_dims(phi: Scales | np.ndarray, tau: float = DEFAULT_TAU) -> int:
    """Number of |Φ_i| above tau · max |Φ|."""
    if not 0.0 < tau < 1.0:
        raise UsageError(f"tau must lie in (0, 1), got {tau}")
    p = np.abs(phi.phi if isinstance(phi, Scales) else np.asarray(phi, dtype=float))
    top = p.max() if p.size else 0.0
    if top == 0.0:
        return 0
    return int((p > tau * top).sum())


def mean_log_likelihood(X, Y: np.ndarray, model: MixtureModel) -> float:
    """mean_n log Σ_k π_k p(x_n | Wᵏ y_n)."""
    ll = component_log_likelihoods(X, Y, model)
    return float(logsumexp(log_weights(model.pi)[None, :] + ll, axis=1).mean())


def evaluate(model: MixtureModel, ds: BinaryDataset, tau: float = DEFAULT_TAU) -> EvalReport:
    """Predict every sample of a labelled dataset and score it."""
    if ds.labels is None:
        raise UsageError("evaluation needs a dataset with a label column")
    z, _, Y = predict_many(ds, model)
    K = max(model.K, ds.n_classes)
    acc, perm = clustering_accuracy(z, ds.labels, K)
    report = EvalReport(
        accuracy=acc,
        matched_permutation=perm[:model.K],
        mean_log_likelihood=mean_log_likelihood(ds, Y, model),
        effective_dims_per_component=[effective_dims(c.scales, tau) for c in model.components],
        n_samples=ds.N,
        tau=tau,
    )
    logger.info("evaluated %d samples: accuracy %.4f", ds.N, acc)
    return report


# ── exports ────────────────────────────────────────────────────────────

def _prepare(path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _check_format(fmt: str) -> str:
    fmt = fmt.lower()
    if fmt not in FORMATS:
        raise UsageError(f"unknown export format {fmt!r}; expected one of {', '.join(FORMATS)}")
    return fmt


def _image_shape(D: int) -> Tuple[int, int]:
    """(rows, cols): square when D is a perfect square, else a single row."""
    side = int(round(np.sqrt(D)))
    return (side, side) if side * side == D else (1, D)


def write_pgm(path: Path | str, gray: np.ndarray) -> None:
    """Binary P5 greymap, maxval 255."""
    gray = np.asarray(gray, dtype=np.uint8)
    if gray.ndim != 2:
        raise UsageError(f"a PGM image needs a 2-D array, got shape {gray.shape}")
    h, w = gray.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(gray.tobytes())


def read_pgm(path: Path | str) -> np.ndarray:
    data = Path(path).read_bytes()
    fields: List[bytes] = []
    pos = 0
    while len(fields) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1
    if fields[0] != b"P5":
        raise UsageError(f"{path} is not a binary PGM file")
    w, h = int(fields[1]), int(fields[2])
    return np.frombuffer(data[pos:pos + w * h], dtype=np.uint8).reshape(h, w)


def _write_images(directory: Path, values: np.ndarray) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    shape = _image_shape(values.shape[1])
    for n, row in enumerate(values):
        write_pgm(directory / f"sample_{n:05d}.pgm", row.reshape(shape))


def _to_gray(unit: np.ndarray) -> np.ndarray:
    """[0, 1] → {0..255}, rounding half up."""
    return np.floor(255.0 * np.clip(unit, 0.0, 1.0) + 0.5).astype(np.uint8)


def _assigned_thetas(model: MixtureModel, Y: np.ndarray, R: np.ndarray) -> np.ndarray:
    """θ_n = W^{k*} y_n with k* = argmax_k R_nk."""
    Y = np.asarray(Y, dtype=float)
    R = np.asarray(R, dtype=float)
    if Y.shape != (R.shape[0], model.d) or R.shape[1] != model.K:
        raise UsageError(
            f"Y {Y.shape} and R {R.shape} do not match the model (K={model.K}, d={model.d})"
        )
    Ws = np.stack(model.weights())                                  # K×D×d
    assigned = np.argmax(R, axis=1)
    return np.einsum("nij,nj->ni", Ws[assigned], Y)


def export_hinton(model: MixtureModel, path: Path | str) -> Path:
    rows = []
    for k, comp in enumerate(model.components):
        for i, v in enumerate(comp.scales.phi):
            rows.append({
                "component": k,
                "dim_index": i,
                "value": float(v),
                "abs_value": abs(float(v)),
                "sign": int(np.sign(v)),
            })
    path = _prepare(path)
    pd.DataFrame(rows, columns=["component", "dim_index", "value", "abs_value", "sign"]).to_csv(
        path, index=False
    )
    return path


def export_reconstructions(
    model: MixtureModel,
    X,
    Y: np.ndarray,
    R: np.ndarray,
    path: Path | str,
    fmt: str = "csv",
) -> Path:
    """
    Reconstructed mean parameters α_n = σ(W^{k*} y_n).

    `csv` writes one file with N rows; `pgm` treats `path` as a directory
    and writes sample_00000.pgm, sample_00001.pgm, ...
    """
    fmt = _check_format(fmt)
    X = as_matrix(X)
    if X.shape[1] != model.D:
        raise UsageError(f"data has {X.shape[1]} features but the model expects D={model.D}")
    alpha = expit(_assigned_thetas(model, Y, R))
    path = Path(path)
    if fmt == "csv":
        _prepare(path)
        pd.DataFrame(alpha, columns=[f"a{i}" for i in range(model.D)]).to_csv(path, index=False)
    else:
        _write_images(path, _to_gray(alpha))
    logger.debug("wrote %d reconstructions to %s (%s)", alpha.shape[0], path, fmt)
    return path


def loglik_map(model: MixtureModel, X, Y: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Per-entry x log α + (1 − x) log(1 − α), N×D, all ≤ 0."""
    X = as_matrix(X)
    theta = _assigned_thetas(model, Y, R)
    return X * theta + log_expit(-theta)


def export_loglik_map(
    model: MixtureModel,
    X,
    Y: np.ndarray,
    R: np.ndarray,
    path: Path | str,
    fmt: str = "csv",
) -> Path:
    fmt = _check_format(fmt)
    values = loglik_map(model, X, Y, R)
    path = Path(path)
    if fmt == "csv":
        _prepare(path)
        pd.DataFrame(values, columns=[f"ll{i}" for i in range(model.D)]).to_csv(path, index=False)
    else:
        floor = values.min()
        unit = np.ones_like(values) if floor == 0.0 else 1.0 - values / floor
        _write_images(path, _to_gray(unit))
    return path


def dominant_directions(
    model: MixtureModel, top: int
) -> List[Tuple[int, int, int, float, np.ndarray]]:
    """(component, rank, dim_index, phi, w) for the `top` largest |Φᵏ_j| of every component."""
    if top < 1:
        raise UsageError(f"top must be at least 1, got {top}")
    out = []
    for k, comp in enumerate(model.components):
        W = materialize(comp)
        order = np.argsort(-np.abs(comp.scales.phi), kind="stable")
        for rank, j in enumerate(order[:top]):
            out.append((k, rank, int(j), float(comp.scales.phi[j]), W[:, j]))
    return out


def export_components(model: MixtureModel, path: Path | str, top: int = 3) -> Path:
    records = []
    for k, rank, j, phi, w in dominant_directions(model, top):
        row = {"component": k, "rank": rank, "dim_index": j, "phi": phi}
        row.update({f"w_{i}": float(v) for i, v in enumerate(w)})
        records.append(row)
    columns = ["component", "rank", "dim_index", "phi"] + [f"w_{i}" for i in range(model.D)]
    path = _prepare(path)
    pd.DataFrame(records, columns=columns).to_csv(path, index=False)
    return path


def summarize_runs(
    frame: pd.DataFrame, keys: Sequence[str], metrics: Sequence[str]
) -> pd.DataFrame:
    """Mean and sample std of `metrics` per group of `keys`, in first-seen group order."""
    grouped = frame.groupby(list(keys), sort=False)[list(metrics)]
    summary = grouped.agg(["mean", "std"])
    summary.columns = [f"{m}_{stat}" for m, stat in summary.columns]
    summary["runs"] = grouped.size().values
    return summary.reset_index()
