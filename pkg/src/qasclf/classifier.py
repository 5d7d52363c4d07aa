"""Variational quantum classifier on the dense simulator.

Features are angle-encoded with one RY per qubit, the ansatz runs under the
dephasing channel, and the prediction is the ground-state population of
one readout qubit (the last one by default). Three labels are read off
that single number by fixed bands.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .circuits import CircuitTemplate
from .sim import (
    ROTATIONS,
    DephasingChannel,
    Gate,
    Observable,
    evolve,
    ground_states,
    marginal_zero,
    populations,
)

logger = logging.getLogger(__name__)

NUM_FEATURES = 4
FEATURE_TOL = 1e-9
BAND_EDGES = (1 / 6, 1 / 2, 5 / 6)
SHIFT = math.pi / 2
# qubit 0 only sees sepal features through one CZ per block at shallow depth
DEFAULT_OBSERVABLE_QUBIT = 3


class ClassifierError(ValueError):
    pass


def _check_features(X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[-1] != NUM_FEATURES:
        raise ClassifierError(f"expected {NUM_FEATURES} features, got {X.shape[-1]}")
    if X.min() < -FEATURE_TOL or X.max() > 1 + FEATURE_TOL:
        raise ClassifierError("features must be normalized to [0, 1]")
    return X


def encode(x) -> list:
    """Angle encoding: ``RY(x_j)`` on qubit ``j``."""
    x = _check_features(x)[0]
    return [Gate("RY", (j,), angle=float(v)) for j, v in enumerate(x)]


def _encoding_block() -> list:
    # angles are read from the first NUM_FEATURES columns of the angle matrix
    return [Gate("RY", (j,), param=j) for j in range(NUM_FEATURES)]


def _shifted(template: CircuitTemplate) -> list:
    off = NUM_FEATURES
    return [
        [Gate(g.kind, g.qubits, g.angle, None if g.param is None else g.param + off) for g in block]
        for block in template.blocks
    ]


@dataclass(frozen=True)
class Readout:
    """Optional readout-error stage applied to the final outcome distribution."""

    matrix: np.ndarray
    correct: bool = False

    def __call__(self, probs: np.ndarray) -> np.ndarray:
        from . import readout

        noisy = probs @ np.asarray(self.matrix).T
        if not self.correct:
            return noisy
        return np.stack([readout.correct(self.matrix, p, log_clip=False) for p in noisy])


class Model:
    """Binds a template, noise and observable into a batched evaluator."""

    def __init__(
        self,
        template: CircuitTemplate,
        noise: DephasingChannel = DephasingChannel(),
        observable: Observable = Observable(DEFAULT_OBSERVABLE_QUBIT),
        readout: Optional[Readout] = None,
    ):
        if template.num_qubits != NUM_FEATURES:
            raise ClassifierError(f"classifier uses {NUM_FEATURES} qubits, template has {template.num_qubits}")
        self.template = template
        self.noise = noise
        self.observable = observable
        self.readout = readout
        self._blocks = _shifted(template)

    @property
    def num_params(self) -> int:
        return self.template.num_params

    def outputs(self, params: np.ndarray, X: np.ndarray) -> np.ndarray:
        """Expectations for paired rows of ``params`` (B, d) and ``X`` (B, 4)."""
        X = _check_features(X)
        params = np.asarray(params, dtype=float)
        if params.ndim == 1:
            params = np.broadcast_to(params, (len(X), params.size))
        if params.shape[-1] != self.num_params:
            raise ClassifierError(f"expected {self.num_params} parameters, got {params.shape[-1]}")
        angles = np.concatenate([X, params], axis=1)
        rho = ground_states(len(X), NUM_FEATURES)
        rho = evolve(rho, [_encoding_block()], angles, self.noise if self.noise.include_encoding else DephasingChannel())
        rho = evolve(rho, self._blocks, angles, self.noise)
        probs = populations(rho)
        if self.readout is not None:
            probs = self.readout(probs)
        return marginal_zero(probs, NUM_FEATURES, self.observable.qubit)

    def output_grad(self, params: np.ndarray, X: np.ndarray) -> tuple:
        """Outputs (m,) and parameter-shift derivatives (m, d) at one ``params``."""
        X = _check_features(X)
        for g in self.template.parameterized_gates():
            if g.kind not in ROTATIONS:
                raise ClassifierError(f"parameter shift needs rotation gates, found {g.kind}")
        params = np.asarray(params, dtype=float)
        m, d = len(X), self.num_params
        shifts = np.concatenate([np.zeros((1, d)), SHIFT * np.eye(d), -SHIFT * np.eye(d)])
        stack = (params[None, :] + shifts)[:, None, :].repeat(m, axis=1)
        out = self.outputs(stack.reshape(-1, d), np.tile(X, (len(shifts), 1))).reshape(len(shifts), m)
        grad = (out[1 : d + 1] - out[d + 1 :]) / 2
        return out[0], grad.T


def forward(template: CircuitTemplate, params, x, noise: DephasingChannel = DephasingChannel()) -> float:
    return float(Model(template, noise).outputs(params, x)[0])


def predict_label(o) -> np.ndarray | int:
    """Map expectation values in [0, 1] to class labels by fixed bands.

    Band edges are inclusive on the right. Values above 5/6 are clamped to
    class 2.
    """
    o_arr = np.asarray(o, dtype=float)
    if np.any(o_arr < -FEATURE_TOL) or np.any(o_arr > 1 + FEATURE_TOL):
        raise ClassifierError("expectation values must lie in [0, 1]")
    labels = np.minimum(np.searchsorted(BAND_EDGES, o_arr, side="left"), 2)
    return int(labels) if labels.ndim == 0 else labels


def target_of(label, mode: str = "midpoint"):
    """Regression target for a label: ``label / 3`` (band midpoints) or the raw label."""
    arr = np.asarray(label)
    if not np.all(np.isin(arr, (0, 1, 2))):
        raise ClassifierError(f"labels must be in {{0, 1, 2}}, got {label}")
    if mode == "midpoint":
        out = arr / 3.0
    elif mode == "raw":
        out = arr.astype(float)
    else:
        raise ClassifierError(f"unknown target mode {mode!r}")
    return float(out) if out.ndim == 0 else out


def mse_loss(outputs, targets) -> float:
    o, y = np.asarray(outputs, dtype=float), np.asarray(targets, dtype=float)
    if o.shape != y.shape:
        raise ClassifierError(f"shape mismatch {o.shape} vs {y.shape}")
    if o.size == 0:
        raise ClassifierError("mse_loss of an empty batch")
    return float(np.sum((o - y) ** 2) / (2 * o.size))


def accuracy(template, params, X, y, noise: DephasingChannel = DephasingChannel(), model: Optional[Model] = None) -> float:
    y = np.asarray(y)
    if len(y) == 0:
        raise ClassifierError("accuracy of an empty dataset")
    model = model or Model(template, noise)
    return float(np.mean(predict_label(model.outputs(params, X)) == y))


def parameter_shift_grad(template, params, X, y, noise=DephasingChannel(), target_mode="midpoint", model=None) -> np.ndarray:
    """Gradient of the batch MSE, built from parameter-shift derivatives."""
    return loss_and_grad(model or Model(template, noise), params, X, y, target_mode)[1]


def loss_and_grad(model: Model, params, X, y, target_mode: str = "midpoint") -> tuple:
    targets = target_of(np.asarray(y), target_mode)
    out, dout = model.output_grad(params, X)
    residual = out - targets
    return mse_loss(out, targets), residual @ dout / len(out)


@dataclass
class TrainConfig:
    learning_rate: float = 0.2
    batch_size: int = 4
    epochs: int = 50
    seed: int = 0
    noise: DephasingChannel = field(default_factory=DephasingChannel)
    target_mode: str = "midpoint"
    observable_qubit: int = DEFAULT_OBSERVABLE_QUBIT

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ClassifierError("learning_rate must be non-negative")
        if self.batch_size < 1:
            raise ClassifierError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ClassifierError("epochs must be >= 0")


@dataclass
class Trajectory:
    """Parameter vectors and training losses, one row per recorded step."""

    params: list = field(default_factory=list)
    losses: list = field(default_factory=list)

    def append(self, theta, loss: float) -> None:
        theta = np.array(theta, dtype=float)
        if self.params and theta.shape != self.params[0].shape:
            raise ClassifierError("trajectory vectors must share one dimension")
        self.params.append(theta)
        self.losses.append(float(loss))

    def as_array(self) -> np.ndarray:
        return np.stack(self.params)

    def __len__(self) -> int:
        return len(self.params)


@dataclass
class Split:
    X: np.ndarray
    y: np.ndarray

    def __len__(self) -> int:
        return len(self.y)


@dataclass
class TrainResult:
    params: np.ndarray
    trajectory: Trajectory
    history: list

    @property
    def final(self) -> dict:
        return self.history[-1]


def init_params(num_params: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-math.pi, math.pi, size=num_params)


def minibatches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def evaluate(model: Model, params, data: dict, target_mode: str = "midpoint") -> dict:
    row = {}
    for name, split in data.items():
        if split is None or len(split) == 0:
            continue
        out = model.outputs(params, split.X)
        if name == "train":
            row["train_loss"] = mse_loss(out, target_of(split.y, target_mode))
        row[f"{name}_accuracy"] = float(np.mean(predict_label(out) == split.y))
    return row


def train(
    template: CircuitTemplate,
    train_data: Split,
    config: TrainConfig,
    valid_data: Optional[Split] = None,
    test_data: Optional[Split] = None,
    init: Optional[np.ndarray] = None,
    readout: Optional[Readout] = None,
    rng: Optional[np.random.Generator] = None,
) -> TrainResult:
    """Mini-batch SGD with parameter-shift gradients.

    The trajectory holds the starting point plus one entry per epoch; the
    history holds one metrics dict per epoch. ``rng`` overrides the
    generator seeded from ``config.seed``.
    """
    if config.epochs < 1:
        raise ClassifierError("train needs epochs >= 1")
    rng = np.random.default_rng(config.seed) if rng is None else rng
    model = Model(template, config.noise, Observable(config.observable_qubit), readout)
    params = init_params(template.num_params, rng) if init is None else np.array(init, dtype=float)
    if params.shape != (template.num_params,):
        raise ClassifierError(f"initial parameters must have length {template.num_params}")
    data = {"train": train_data, "valid": valid_data, "test": test_data}
    trajectory = Trajectory()
    trajectory.append(params, evaluate(model, params, {"train": train_data}, config.target_mode)["train_loss"])
    history = []
    for epoch in range(1, config.epochs + 1):
        for idx in minibatches(len(train_data), config.batch_size, rng):
            _, grad = loss_and_grad(model, params, train_data.X[idx], train_data.y[idx], config.target_mode)
            params = params - config.learning_rate * grad
        row = {"epoch": epoch, **evaluate(model, params, data, config.target_mode)}
        trajectory.append(params, row["train_loss"])
        history.append(row)
        logger.debug("epoch %d %s", epoch, row)
    return TrainResult(params, trajectory, history)
