"""Iris ingestion and the stratified 60/45/45 split."""
from __future__ import annotations

import csv
import hashlib
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .classifier import Split

IRIS_SHA256 = "09d1766be79ec606b4c045059bc4b0d3e6a693b61d1cdfc6bdd45af42531df65"
SPLIT_PER_CLASS = (20, 15, 15)
CLASS_NAMES = ("setosa", "versicolor", "virginica")


class DataError(ValueError):
    pass


def bundled_iris_path() -> Path:
    return Path(str(resources.files("qasclf") / "data" / "iris.csv"))


def _label(token: str, lineno: int) -> int:
    name = token.strip().lower()
    if name.startswith("iris-"):
        name = name[5:]
    if name in CLASS_NAMES:
        return CLASS_NAMES.index(name)
    if name in ("0", "1", "2"):
        return int(name)
    raise DataError(f"line {lineno}: unknown class label {token!r}")


def read_iris_csv(path: Union[str, Path]) -> tuple:
    """Raw features (N, 4) and integer labels from an Iris-shaped CSV.

    A header line is skipped when its first field is not numeric.
    """
    rows, labels = [], []
    with open(path, newline="") as fh:
        for lineno, record in enumerate(csv.reader(fh), start=1):
            if not record or all(not f.strip() for f in record):
                continue
            if len(record) != 5:
                raise DataError(f"line {lineno}: expected 5 columns (4 features + label), got {len(record)}")
            try:
                feats = [float(f) for f in record[:4]]
            except ValueError:
                if lineno == 1 and not rows:
                    continue
                raise DataError(f"line {lineno}: non-numeric feature in {record[:4]}") from None
            rows.append(feats)
            labels.append(_label(record[4], lineno))
    if not rows:
        raise DataError(f"{path}: no samples")
    return np.array(rows), np.array(labels, dtype=int)


def minmax(X: np.ndarray) -> np.ndarray:
    lo, hi = X.min(axis=0), X.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return (X - lo) / span


def load_iris(path: Optional[Union[str, Path]] = None, verify: bool = True) -> Split:
    """Load Iris with every feature column min-max scaled to [0, 1].

    Without ``path`` the bundled copy is used and its checksum verified.
    """
    if path is None:
        path = bundled_iris_path()
        if verify:
            digest = hashlib.sha256(path.read_bytes()).hexdigest()
            if digest != IRIS_SHA256:
                raise DataError(f"bundled iris.csv checksum mismatch: {digest}")
    X, y = read_iris_csv(path)
    return Split(minmax(X), y)


def split(data: Split, seed: int = 0, per_class=SPLIT_PER_CLASS) -> tuple:
    """Stratified train/valid/test split, shuffled within each class."""
    rng = np.random.default_rng(seed)
    classes, counts = np.unique(data.y, return_counts=True)
    need = sum(per_class)
    if np.any(counts != need):
        raise DataError(f"every class needs {need} samples, got {dict(zip(classes.tolist(), counts.tolist()))}")
    parts = [[], [], []]
    for c in classes:
        idx = rng.permutation(np.flatnonzero(data.y == c))
        cuts = np.cumsum(per_class)[:-1]
        for part, chunk in zip(parts, np.split(idx, cuts)):
            part.append(chunk)
    out = []
    for chunks in parts:
        idx = np.sort(np.concatenate(chunks))
        out.append(Split(data.X[idx], data.y[idx]))
    return tuple(out)
