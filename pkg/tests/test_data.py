"""Binary datasets, the synthetic generator, CSV I/O and k-fold splits."""
from __future__ import annotations
from pathlib import Path

import numpy as np
import pytest

from depcam.core.data import BinaryDataset, generate_synthetic, kfold_split, load_csv, save_csv
from depcam.errors import DataParseError, UsageError
from depcam.models import SyntheticConfig


# ── BinaryDataset ──────────────────────────────────────────────────────

def test_dataset_rejects_non_binary_entries() -> None:
    with pytest.raises(UsageError):
        BinaryDataset(np.array([[0, 2]]))


def test_dataset_rejects_bad_labels() -> None:
    with pytest.raises(UsageError):
        BinaryDataset(np.zeros((2, 3)), labels=np.array([0, -1]))
    with pytest.raises(UsageError):
        BinaryDataset(np.zeros((2, 3)), labels=np.array([0]))


def test_subset_keeps_labels() -> None:
    ds = BinaryDataset(np.eye(3), labels=np.array([0, 1, 2]))
    sub = ds.subset([2, 0])
    assert sub.X.tolist() == [[0, 0, 1], [1, 0, 0]]
    assert sub.labels.tolist() == [2, 0]


# ── generator ──────────────────────────────────────────────────────────

def test_default_generator_shape() -> None:
    noisy, clean = generate_synthetic(SyntheticConfig())
    assert (noisy.N, noisy.D) == (450, 16)
    assert np.bincount(noisy.labels).tolist() == [150, 150, 150]
    assert np.array_equal(noisy.labels, clean.labels)


def test_zero_flip_gives_clean_copy() -> None:
    noisy, clean = generate_synthetic(SyntheticConfig(flip_prob=0.0, seed=5))
    assert noisy.equals(clean)


def test_clean_data_repeats_each_prototype() -> None:
    _, clean = generate_synthetic(SyntheticConfig(copies=7, seed=2))
    blocks = clean.X.reshape(9, 7, 16)
    assert np.all(blocks == blocks[:, :1, :])


def test_flip_fraction_concentrates() -> None:
    for seed in range(5):
        noisy, clean = generate_synthetic(SyntheticConfig(seed=seed))
        fraction = np.mean(noisy.X != clean.X)
        assert 0.08 <= fraction <= 0.12


def test_generator_is_deterministic() -> None:
    a, _ = generate_synthetic(SyntheticConfig(seed=9))
    b, _ = generate_synthetic(SyntheticConfig(seed=9))
    c, _ = generate_synthetic(SyntheticConfig(seed=10))
    assert a.equals(b)
    assert not a.equals(c)


def test_class_means_must_match_classes() -> None:
    with pytest.raises(ValueError):
        SyntheticConfig(classes=2)
    with pytest.raises(ValueError):
        SyntheticConfig(class_means=[1.5, 0.5, 0.1])


# ── CSV ────────────────────────────────────────────────────────────────

def test_csv_round_trip(tmp_path: Path) -> None:
    noisy, _ = generate_synthetic(SyntheticConfig())
    path = tmp_path / "data.csv"
    save_csv(noisy, path)
    loaded = load_csv(path)
    assert loaded.equals(noisy)
    assert loaded.feature_names == tuple(f"f{i}" for i in range(16))


def test_numeric_feature_names_are_replaced_on_save(tmp_path: Path) -> None:
    path = tmp_path / "numeric.csv"
    save_csv(BinaryDataset(np.array([[0, 1], [1, 0]]), None, ("0", "1")), path)
    loaded = load_csv(path)
    assert loaded.N == 2
    assert loaded.X.tolist() == [[0, 1], [1, 0]]
    assert loaded.labels is None
    assert loaded.feature_names == ("f0", "f1")


def test_header_with_label_column(tmp_path: Path) -> None:
    path = tmp_path / "labelled.csv"
    path.write_text("a,b,c,label\n0,1,1,2\n1,0,0,0\n")
    ds = load_csv(path)
    assert ds.X.tolist() == [[0, 1, 1], [1, 0, 0]]
    assert ds.labels.tolist() == [2, 0]
    assert ds.feature_names == ("a", "b", "c")


def test_headerless_file_has_no_labels(tmp_path: Path) -> None:
    path = tmp_path / "plain.csv"
    path.write_text("0,1\n1,1\n")
    ds = load_csv(path)
    assert ds.labels is None
    assert ds.X.tolist() == [[0, 1], [1, 1]]


def test_non_binary_value_reports_coordinates(tmp_path: Path) -> None:
    path = tmp_path / "bad.csv"
    rows = ["f0,f1,f2,f3,f4,f5"] + ["0,1,0,1,0,1"] * 4
    rows[3] = "0,1,0,1,2,1"
    path.write_text("\n".join(rows) + "\n")
    with pytest.raises(DataParseError) as info:
        load_csv(path)
    assert (info.value.row, info.value.column) == (3, 5)
    assert "row 3, column 5" in str(info.value)


def test_ragged_rows_are_rejected(tmp_path: Path) -> None:
    path = tmp_path / "ragged.csv"
    path.write_text("0,1,0\n1,1\n")
    with pytest.raises(DataParseError):
        load_csv(path)


def test_empty_file_is_rejected(tmp_path: Path) -> None:
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(DataParseError):
        load_csv(path)


# ── k-fold ─────────────────────────────────────────────────────────────

def test_kfold_sizes_and_partition() -> None:
    splits = kfold_split(450, 5, seed=0)
    assert [len(test) for _, test in splits] == [90] * 5
    tests = np.concatenate([test for _, test in splits])
    assert sorted(tests.tolist()) == list(range(450))
    for train, test in splits:
        assert len(np.intersect1d(train, test)) == 0
        assert len(train) + len(test) == 450


def test_kfold_is_deterministic() -> None:
    a = kfold_split(37, 4, seed=3)
    b = kfold_split(37, 4, seed=3)
    for (ta, sa), (tb, sb) in zip(a, b):
        assert np.array_equal(ta, tb) and np.array_equal(sa, sb)


def test_kfold_rejects_bad_arguments() -> None:
    with pytest.raises(UsageError):
        kfold_split(10, 1, seed=0)
    with pytest.raises(UsageError):
        kfold_split(3, 5, seed=0)
