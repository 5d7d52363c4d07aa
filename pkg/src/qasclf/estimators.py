"""scikit-learn style wrappers around the training and search pipelines."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.model_selection import train_test_split
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .circuits import SearchSpace, build_haa, build_hea, realize
from .classifier import (
    DEFAULT_OBSERVABLE_QUBIT,
    FEATURE_TOL,
    ClassifierError,
    Model,
    Split,
    TrainConfig,
    predict_label,
    train,
)
from .qas import run_search
from .sim import DephasingChannel, Observable

BUILDERS = {"hea": build_hea, "haa": build_haa}


def _check_inputs(X, y=None):
    if y is None:
        X = check_array(X)
    else:
        X, y = check_X_y(X, y)
        if not np.all(np.isin(y, (0, 1, 2))):
            raise ClassifierError("labels must be integers in {0, 1, 2}")
        y = y.astype(int)
    if X.shape[1] != 4:
        raise ClassifierError(f"expected 4 features, got {X.shape[1]}")
    if X.min() < -FEATURE_TOL or X.max() > 1 + FEATURE_TOL:
        raise ClassifierError("features must be min-max normalized to [0, 1]")
    return X if y is None else (X, y)


class _Base(ClassifierMixin, BaseEstimator):
    def _config(self) -> TrainConfig:
        noise = DephasingChannel(self.noise, self.placement)
        return TrainConfig(self.learning_rate, self.batch_size, self.epochs, self.seed, noise, self.target_mode, self.observable_qubit)

    def decision_function(self, X):
        """Ground-state population of the readout qubit for each row."""
        check_is_fitted(self)
        return self.model_.outputs(self.params_, _check_inputs(X))

    def predict(self, X):
        return predict_label(self.decision_function(X))


class QuantumClassifier(_Base):
    """Fixed-ansatz classifier (``"hea"`` or ``"haa"``) trained by parameter-shift SGD."""

    def __init__(
        self,
        ansatz: str = "hea",
        num_blocks: int = 2,
        noise: float = 0.0,
        placement: str = "block",
        learning_rate: float = 0.2,
        batch_size: int = 4,
        epochs: int = 50,
        seed: int = 0,
        observable_qubit: int = DEFAULT_OBSERVABLE_QUBIT,
        target_mode: str = "midpoint",
    ):
        self.ansatz = ansatz
        self.num_blocks = num_blocks
        self.noise = noise
        self.placement = placement
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.observable_qubit = observable_qubit
        self.target_mode = target_mode

    def fit(self, X, y):
        X, y = _check_inputs(X, y)
        if self.ansatz not in BUILDERS:
            raise ClassifierError(f"unknown ansatz {self.ansatz!r}")
        template = BUILDERS[self.ansatz](self.num_blocks)
        config = self._config()
        result = train(template, Split(X, y), config)
        self.template_ = template
        self.model_ = Model(template, config.noise, Observable(self.observable_qubit))
        self.params_ = result.params
        self.history_ = result.history
        self.trajectory_ = result.trajectory
        self.classes_ = unique_labels(np.array([0, 1, 2]))
        self.n_features_in_ = 4
        return self


class QASClassifier(_Base):
    """Architecture search plus fine-tuning.

    Without an explicit validation set a stratified ``valid_fraction`` of the
    training rows ranks the candidates.
    """

    def __init__(
        self,
        num_blocks: int = 2,
        noise: float = 0.0,
        placement: str = "block",
        learning_rate: float = 0.2,
        batch_size: int = 4,
        supernet_epochs: int = 40,
        epochs: int = 10,
        num_supernets: int = 5,
        num_samples: int = 100,
        aggregate: str = "best",
        seed: int = 0,
        observable_qubit: int = DEFAULT_OBSERVABLE_QUBIT,
        target_mode: str = "midpoint",
        valid_fraction: float = 3 / 7,
    ):
        self.num_blocks = num_blocks
        self.noise = noise
        self.placement = placement
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.supernet_epochs = supernet_epochs
        self.epochs = epochs
        self.num_supernets = num_supernets
        self.num_samples = num_samples
        self.aggregate = aggregate
        self.seed = seed
        self.observable_qubit = observable_qubit
        self.target_mode = target_mode
        self.valid_fraction = valid_fraction

    def fit(self, X, y, X_valid=None, y_valid=None):
        X, y = _check_inputs(X, y)
        if X_valid is None:
            X, X_valid, y, y_valid = train_test_split(
                X, y, test_size=self.valid_fraction, stratify=y, random_state=self.seed
            )
        else:
            X_valid, y_valid = _check_inputs(X_valid, y_valid)
        space = SearchSpace(self.num_blocks)
        config = self._config()
        result = run_search(
            space, Split(X, y), Split(X_valid, y_valid), None, config,
            self.num_supernets, self.supernet_epochs, self.num_samples, self.epochs, self.aggregate,
        )
        template = realize(space, result.winner.genotype)
        self.search_ = result
        self.genotype_ = result.winner.genotype
        self.template_ = template
        self.model_ = Model(template, config.noise, Observable(self.observable_qubit))
        self.params_ = result.finetune.params
        self.classes_ = unique_labels(np.array([0, 1, 2]))
        self.n_features_in_ = 4
        return self
