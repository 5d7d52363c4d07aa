"""PCA of training trajectories and 2-D loss scans in the component plane."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .circuits import CircuitTemplate
from .classifier import Model, Split, Trajectory, mse_loss, target_of
from .sim import DephasingChannel, Observable

DEFAULT_RANGE = (-math.pi, math.pi)
DEFAULT_RESOLUTION = 51


class LandscapeError(ValueError):
    pass


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (2, d), rows e0 and e1
    explained_variance_ratio: np.ndarray

    @property
    def dim(self) -> int:
        return self.mean.size

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance_ratio": self.explained_variance_ratio.tolist(),
            "loadings": loadings(self).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PcaModel":
        return cls(np.array(d["mean"]), np.array(d["components"]), np.array(d["explained_variance_ratio"]))


def _as_points(trajectory) -> np.ndarray:
    if isinstance(trajectory, Trajectory):
        trajectory = trajectory.as_array()
    return np.asarray(trajectory, dtype=float)


def fit_pca(trajectory, num_components: int = 2) -> PcaModel:
    """Top principal components of the trajectory's parameter vectors.

    Rows are centred, the covariance uses the ``T - 1`` divisor and each
    component is flipped so its largest-magnitude entry is positive.
    """
    theta = _as_points(trajectory)
    if theta.ndim != 2:
        raise LandscapeError(f"trajectory must be a 2-D array, got shape {theta.shape}")
    T, d = theta.shape
    if T < 3 or d < 2:
        raise LandscapeError(f"need at least 3 steps and 2 parameters, got T={T}, d={d}")
    mean = theta.mean(axis=0)
    cov = np.cov(theta, rowvar=False, ddof=1)
    total = float(np.trace(cov))
    if total <= 0:
        raise LandscapeError("trajectory has zero variance")
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:num_components]
    comps = evecs[:, order].T
    for c in comps:
        if c[np.argmax(np.abs(c))] < 0:
            c *= -1
    ratios = np.clip(evals[order], 0, None) / total
    return PcaModel(mean, comps, ratios)


def project(model: PcaModel, theta) -> np.ndarray:
    """Coordinates ``e_i . (theta - mean)``; accepts a vector or a stack."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] != model.dim:
        raise LandscapeError(f"expected dimension {model.dim}, got {theta.shape[-1]}")
    return (theta - model.mean) @ model.components.T


def lift(model: PcaModel, coords) -> np.ndarray:
    return model.mean + np.asarray(coords, dtype=float) @ model.components


def loadings(model: PcaModel) -> np.ndarray:
    """Absolute first component: each parameter's weight in it."""
    return np.abs(model.components[0])


def path_deviation(points) -> float:
    """Largest distance of projected path points from the chord joining its ends."""
    pts = np.asarray(points, dtype=float)
    chord = pts[-1] - pts[0]
    rel = pts - pts[0]
    norm = np.linalg.norm(chord)
    if norm == 0:
        return float(np.max(np.linalg.norm(rel, axis=1)))
    cross = rel[:, 0] * chord[1] - rel[:, 1] * chord[0]
    return float(np.max(np.abs(cross)) / norm)


@dataclass
class LossGrid:
    c0: np.ndarray
    c1: np.ndarray
    loss: np.ndarray  # loss[i, j] at (c0[i], c1[j])
    path: np.ndarray

    @property
    def resolution(self) -> tuple:
        return self.loss.shape

    def rows(self):
        for i, a in enumerate(self.c0):
            for j, b in enumerate(self.c1):
                yield float(a), float(b), float(self.loss[i, j])


def scan(
    template: CircuitTemplate,
    model: PcaModel,
    data: Split,
    ranges: Sequence = (DEFAULT_RANGE, DEFAULT_RANGE),
    resolution: Union[int, Sequence[int]] = DEFAULT_RESOLUTION,
    noise: DephasingChannel = DephasingChannel(),
    trajectory=None,
    observable: Optional[Observable] = None,
    target_mode: str = "midpoint",
    chunk: int = 4096,
) -> LossGrid:
    """Training loss on the grid ``mean + c0 e0 + c1 e1``."""
    res = (resolution, resolution) if np.isscalar(resolution) else tuple(resolution)
    if len(res) != 2 or min(res) < 2:
        raise LandscapeError(f"resolution must be at least 2 per axis, got {resolution}")
    (a0, b0), (a1, b1) = ranges
    c0, c1 = np.linspace(a0, b0, res[0]), np.linspace(a1, b1, res[1])
    coords = np.stack(np.meshgrid(c0, c1, indexing="ij"), axis=-1).reshape(-1, 2)
    thetas = lift(model, coords)
    if thetas.shape[1] != template.num_params:
        raise LandscapeError(f"PCA dimension {model.dim} does not match template with {template.num_params} parameters")
    evaluator = Model(template, noise, observable) if observable is not None else Model(template, noise)
    m = len(data)
    targets = target_of(data.y, target_mode)
    per = max(1, chunk // m)
    losses = np.empty(len(thetas))
    for start in range(0, len(thetas), per):
        block = thetas[start : start + per]
        out = evaluator.outputs(np.repeat(block, m, axis=0), np.tile(data.X, (len(block), 1))).reshape(len(block), m)
        losses[start : start + per] = [mse_loss(o, targets) for o in out]
    path = project(model, _as_points(trajectory)) if trajectory is not None else np.empty((0, 2))
    return LossGrid(c0, c1, losses.reshape(res), path)


def save_grid_csv(grid: LossGrid, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["c0", "c1", "loss"])
        for row in grid.rows():
            w.writerow([repr(v) for v in row])


def save_path_csv(grid: LossGrid, path, losses=None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "c0", "c1"] + (["loss"] if losses is not None else []))
        for t, (a, b) in enumerate(grid.path):
            w.writerow([t, repr(float(a)), repr(float(b))] + ([repr(float(losses[t]))] if losses is not None else []))


def save_model_json(model: PcaModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n")


class TrajectoryPCA(TransformerMixin, BaseEstimator):
    """Estimator wrapper: ``fit`` on trajectory rows, ``transform`` projects."""

    def __init__(self, n_components: int = 2):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = check_array(X)
        self.model_ = fit_pca(X, self.n_components)
        self.components_ = self.model_.components
        self.mean_ = self.model_.mean
        self.explained_variance_ratio_ = self.model_.explained_variance_ratio
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self)
        return project(self.model_, check_array(X))

    def inverse_transform(self, X):
        check_is_fitted(self)
        return lift(self.model_, check_array(X))
