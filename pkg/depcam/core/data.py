"""
Binary datasets: CSV ingestion, the prototype/duplicate/flip synthetic
generator, and k-fold splits.

CSV dialect: comma separated, optional header row, an optional final
column named "label" holding integer class ids. Every other cell must be
exactly 0 or 1.
"""
from __future__ import annotations
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from depcam.core.rng import stream
from depcam.errors import DataParseError, UsageError
from depcam.models import SyntheticConfig
from depcam.utils.logger import logger

LABEL_COLUMN = "label"


@dataclass(frozen=True, eq=False)
class BinaryDataset:
    X:             np.ndarray                    # N×D, uint8 in {0, 1}
    labels:        Optional[np.ndarray] = None   # N ints in [0, C)
    feature_names: Optional[Tuple[str, ...]] = None

    def __post_init__(self) -> None:
        X = np.asarray(self.X)
        if X.ndim != 2:
            raise UsageError(f"dataset must be a matrix, got shape {X.shape}")
        if not np.isin(X, (0, 1)).all():
            raise UsageError("dataset entries must be exactly 0 or 1")
        X = X.astype(np.uint8)
        X.setflags(write=False)
        object.__setattr__(self, "X", X)

        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (X.shape[0],):
                raise UsageError(f"expected {X.shape[0]} labels, got shape {labels.shape}")
            if labels.size and (labels.min() < 0 or not np.all(labels == np.round(labels))):
                raise UsageError("labels must be non-negative integers")
            labels = labels.astype(np.int64)
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)

        if self.feature_names is not None:
            names = tuple(str(n) for n in self.feature_names)
            if len(names) != X.shape[1]:
                raise UsageError(f"expected {X.shape[1]} feature names, got {len(names)}")
            object.__setattr__(self, "feature_names", names)

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def D(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return 0 if self.labels is None or not self.labels.size else int(self.labels.max()) + 1

    def subset(self, index: Sequence[int]) -> "BinaryDataset":
        index = np.asarray(index, dtype=np.int64)
        return BinaryDataset(
            X             = self.X[index],
            labels        = None if self.labels is None else self.labels[index],
            feature_names = self.feature_names,
        )

    def equals(self, other: "BinaryDataset") -> bool:
        if not np.array_equal(self.X, other.X):
            return False
        if (self.labels is None) != (other.labels is None):
            return False
        return self.labels is None or np.array_equal(self.labels, other.labels)


# ── synthetic generator ────────────────────────────────────────────────

def generate_synthetic(cfg: SyntheticConfig) -> Tuple[BinaryDataset, BinaryDataset]:
    """
    Returns (noisy, clean).

    1. per class, draw `prototypes_per_class` vectors with i.i.d. Bernoulli(class mean) bits
    2. repeat each prototype `copies` times, keeping class-major order
    3. flip every bit independently with probability `flip_prob`
    """
    proto_rng = stream(cfg.seed, "synthetic", "prototypes")
    flip_rng  = stream(cfg.seed, "synthetic", "flips")

    prototypes: List[np.ndarray] = []
    proto_labels: List[int] = []
    for c, mean in enumerate(cfg.class_means):
        draws = proto_rng.random((cfg.prototypes_per_class, cfg.dims)) < mean
        prototypes.extend(draws.astype(np.uint8))
        proto_labels.extend([c] * cfg.prototypes_per_class)

    clean_X = np.repeat(np.stack(prototypes), cfg.copies, axis=0)
    labels  = np.repeat(np.asarray(proto_labels, dtype=np.int64), cfg.copies)

    flips   = flip_rng.random(clean_X.shape) < cfg.flip_prob
    noisy_X = np.where(flips, 1 - clean_X, clean_X).astype(np.uint8)

    logger.debug(
        "synthetic data: %d samples, %d dims, %d bits flipped",
        clean_X.shape[0], cfg.dims, int(flips.sum()),
    )
    return BinaryDataset(noisy_X, labels), BinaryDataset(clean_X, labels)


# ── CSV I/O ────────────────────────────────────────────────────────────

def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def load_csv(path: Path | str) -> BinaryDataset:
    path = Path(path)
    try:
        frame = pd.read_csv(
            path,
            header=None,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=True,
        )
    except pd.errors.EmptyDataError as exc:
        raise DataParseError(f"{path}: file is empty") from exc
    except pd.errors.ParserError as exc:
        raise DataParseError(f"{path}: ragged rows ({exc})") from exc

    cells = frame.to_numpy(dtype=object)
    header: Optional[List[str]] = None
    if cells.shape[0] and not all(_is_number(str(t).strip()) for t in cells[0]):
        header = [str(t).strip() for t in cells[0]]
        cells = cells[1:]
    if cells.shape[0] == 0:
        raise DataParseError(f"{path}: no data rows")

    # pandas pads short rows with NaN (or "" with keep_default_na=False)
    for r, row in enumerate(cells, start=1):
        for c, tok in enumerate(row, start=1):
            if tok is None or (isinstance(tok, float) and np.isnan(tok)) or str(tok).strip() == "":
                raise DataParseError(
                    f"{path}: ragged or empty cell at row {r}, column {c}", row=r, column=c
                )

    has_labels = header is not None and header[-1] == LABEL_COLUMN
    n_features = cells.shape[1] - (1 if has_labels else 0)
    if n_features < 1:
        raise DataParseError(f"{path}: no feature columns")

    X = np.empty((cells.shape[0], n_features), dtype=np.uint8)
    for r, row in enumerate(cells, start=1):
        for c in range(n_features):
            tok = str(row[c]).strip()
            if tok not in ("0", "1"):
                try:
                    value = float(tok)
                except ValueError:
                    value = None
                if value not in (0.0, 1.0):
                    raise DataParseError(
                        f"{path}: non-binary value {tok!r} at row {r}, column {c + 1}",
                        row=r, column=c + 1,
                    )
                tok = "1" if value == 1.0 else "0"
            X[r - 1, c] = 1 if tok == "1" else 0

    labels = None
    if has_labels:
        raw = [str(t).strip() for t in cells[:, -1]]
        try:
            values = [float(t) for t in raw]
        except ValueError as exc:
            raise DataParseError(f"{path}: label column is not numeric ({exc})") from exc
        labels = np.asarray(values)
        bad = np.flatnonzero((labels < 0) | (labels != np.round(labels)))
        if bad.size:
            r = int(bad[0]) + 1
            raise DataParseError(
                f"{path}: invalid label {raw[bad[0]]!r} at row {r}", row=r, column=cells.shape[1]
            )
        labels = labels.astype(np.int64)

    names = tuple(header[:n_features]) if header is not None else None
    return BinaryDataset(X, labels, names)


def save_csv(ds: BinaryDataset, path: Path | str) -> None:
    path = Path(path)
    names = list(ds.feature_names) if ds.feature_names else []
    # an all-numeric header without a label column would load back as a data row
    if not names or (ds.labels is None and all(_is_number(n) for n in names)):
        names = [f"f{i}" for i in range(ds.D)]
    frame = pd.DataFrame(ds.X.astype(np.int64), columns=names)
    if ds.labels is not None:
        frame[LABEL_COLUMN] = ds.labels
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)


# ── cross-validation folds ─────────────────────────────────────────────

def kfold_split(N: int, folds: int, seed: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Seeded shuffle cut into `folds` contiguous blocks; block f is test fold f."""
    if folds < 2:
        raise UsageError(f"need at least 2 folds, got {folds}")
    if N < folds:
        raise UsageError(f"cannot split {N} samples into {folds} folds")
    perm = stream(seed, "kfold").permutation(N)
    blocks = np.array_split(perm, folds)
    splits = []
    for f, test in enumerate(blocks):
        train = np.concatenate([b for g, b in enumerate(blocks) if g != f])
        splits.append((np.sort(train), np.sort(test)))
    return splits
