"""Readout-error model and calibration-matrix correction.

``F[i, j]`` is the probability of reading basis state ``i`` when ``j`` was
prepared, so columns of ``F`` sum to one and a measured distribution is
``F @ P``. Correction solves that linear system for ``P``.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

logger = logging.getLogger(__name__)

COLUMN_TOL = 1e-9
SINGULAR_TOL = 1e-12
COND_THRESHOLD = 1e8


class ReadoutError(ValueError):
    pass


class SingularCalibrationError(ReadoutError):
    pass


def _as_square(F) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[0] != F.shape[1]:
        raise ReadoutError(f"calibration matrix must be square, got shape {F.shape}")
    return F


def _check_shapes(F: np.ndarray, P: np.ndarray) -> None:
    if P.shape[-1] != F.shape[0]:
        raise ReadoutError(f"probability vector of length {P.shape[-1]} does not match {F.shape} matrix")


@dataclass
class Diagnostics:
    column_deviation: np.ndarray
    range_violations: list
    condition_number: float

    @property
    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.column_deviation)))

    @property
    def ill_conditioned(self) -> bool:
        return not np.isfinite(self.condition_number) or self.condition_number > COND_THRESHOLD

    @property
    def ok(self) -> bool:
        return self.max_deviation <= COLUMN_TOL and not self.range_violations and not self.ill_conditioned


def validate(F) -> Diagnostics:
    """Column-sum deviations, out-of-range entries and the condition number."""
    F = _as_square(F)
    deviation = 1.0 - F.sum(axis=0)
    bad = [(int(i), int(j)) for i, j in zip(*np.nonzero((F < 0) | (F > 1)))]
    with np.errstate(divide="ignore"):
        cond = float(np.linalg.cond(F))
    return Diagnostics(deviation, bad, cond)


def apply(F, P) -> np.ndarray:
    """Measured distribution ``F @ P``."""
    F = _as_square(F)
    P = np.asarray(P, dtype=float)
    _check_shapes(F, P)
    return F @ P


def correct(F, P_measured, name: str = "F", log_clip: bool = True) -> np.ndarray:
    """Solve ``F @ P = P_measured`` and project the result back onto the simplex.

    Negative entries are clipped to zero and the vector renormalized; when
    the raw solution already lies in the simplex it is returned as is.
    """
    F = _as_square(F)
    Pm = np.asarray(P_measured, dtype=float)
    _check_shapes(F, Pm)
    s = np.linalg.svd(F, compute_uv=False)
    if s[-1] <= SINGULAR_TOL * max(s[0], 1.0):
        raise SingularCalibrationError(f"calibration matrix {name} is singular (smallest singular value {s[-1]:.3e})")
    P = np.linalg.solve(F, Pm)
    if np.any(P < 0):
        if log_clip:
            logger.info("clipping %d negative entries after readout correction", int(np.sum(P < 0)))
        P = np.clip(P, 0.0, None)
        total = P.sum()
        if total <= 0:
            raise ReadoutError("corrected distribution has no positive mass")
        P = P / total
    return P


def synthetic(num_qubits: int, error: float = 0.05, rng=None) -> np.ndarray:
    """Random diagonally dominant calibration matrix.

    Each column keeps ``1 - e`` on the diagonal, with ``e`` drawn up to
    ``error``, and spreads ``e`` over the other outcomes.
    """
    rng = np.random.default_rng(rng)
    dim = 2**num_qubits
    F = np.zeros((dim, dim))
    for j in range(dim):
        e = rng.uniform(0, error)
        off = rng.dirichlet(np.ones(dim - 1)) * e
        F[:, j] = np.insert(off, j, 1 - e)
    return F


def basis_labels(num_qubits: int) -> list:
    return [format(i, f"0{num_qubits}b") for i in range(2**num_qubits)]


def save_csv(F, path: Union[str, Path]) -> None:
    """Row-major CSV with the basis labels as header."""
    F = _as_square(F)
    n = F.shape[0].bit_length() - 1
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(basis_labels(n))
        for row in F:
            writer.writerow([repr(float(v)) for v in row])


def load_csv(path: Union[str, Path]) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ReadoutError(f"{path}: empty calibration file")
    header, body = rows[0], rows[1:]
    dim = len(header)
    if dim < 2 or dim & (dim - 1) or header != basis_labels(dim.bit_length() - 1):
        raise ReadoutError(f"{path}: header must list the {dim} basis labels in order")
    try:
        F = np.array([[float(v) for v in r] for r in body])
    except ValueError as exc:
        raise ReadoutError(f"{path}: non-numeric entry") from exc
    if F.shape != (dim, dim):
        raise ReadoutError(f"{path}: expected {dim}x{dim} values, got {F.shape}")
    diag = validate(F)
    if diag.max_deviation > COLUMN_TOL or diag.range_violations:
        raise ReadoutError(f"{path}: not column-stochastic (max deviation {diag.max_deviation:.2e})")
    return F


class ReadoutCorrector(TransformerMixin, BaseEstimator):
    """Row-wise readout correction of probability vectors.

    ``fit`` only validates the calibration matrix; ``transform`` corrects each
    row of ``X`` and ``inverse_transform`` re-applies the readout error.
    """

    def __init__(self, calibration: Optional[np.ndarray] = None):
        self.calibration = calibration

    def fit(self, X=None, y=None):
        F = _as_square(self.calibration)
        self.diagnostics_ = validate(F)
        if self.diagnostics_.ill_conditioned:
            raise SingularCalibrationError(f"calibration matrix condition number {self.diagnostics_.condition_number:.3e}")
        self.calibration_ = F
        self.n_features_in_ = F.shape[0]
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = check_array(X)
        return np.stack([correct(self.calibration_, row) for row in X])

    def inverse_transform(self, X):
        check_is_fitted(self)
        X = check_array(X)
        return X @ self.calibration_.T
