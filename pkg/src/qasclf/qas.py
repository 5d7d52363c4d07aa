"""Quantum architecture search with supernets and weight sharing.

Each supernet owns a parameter pool with one angle per (block, qubit, gate
kind). Binding a genotype picks the angle for the chosen kind at every
position, so two architectures that agree at a position share that angle.
Training samples one architecture per mini-batch, takes an SGD step on its
bound parameters and writes them back into the pool.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .circuits import Genotype, SearchSpace, check_genotype, random_genotype, realize
from .classifier import (
    DEFAULT_OBSERVABLE_QUBIT,
    Model,
    Split,
    TrainConfig,
    TrainResult,
    evaluate,
    loss_and_grad,
    minibatches,
    predict_label,
    train,
)
from .sim import DephasingChannel, Observable

logger = logging.getLogger(__name__)


class SearchError(ValueError):
    pass


class ParameterPool:
    """Shared angles indexed by ``(block, qubit, gate kind)``."""

    def __init__(self, space: SearchSpace, angles: np.ndarray):
        shape = (space.num_blocks, space.num_qubits, len(space.single_gate_candidates))
        angles = np.array(angles, dtype=float)
        if angles.shape != shape:
            raise SearchError(f"pool shape {angles.shape} does not match search space {shape}")
        self.space = space
        self.angles = angles

    @classmethod
    def uniform(cls, space: SearchSpace, rng: np.random.Generator) -> "ParameterPool":
        shape = (space.num_blocks, space.num_qubits, len(space.single_gate_candidates))
        return cls(space, rng.uniform(-math.pi, math.pi, size=shape))

    def __len__(self) -> int:
        return self.angles.size

    def _index(self, g: Genotype) -> tuple:
        check_genotype(self.space, g)
        kinds = self.space.single_gate_candidates
        k = np.array([[kinds.index(c) for c in row] for row in g.choices])
        L, n = k.shape
        return np.repeat(np.arange(L), n), np.tile(np.arange(n), L), k.ravel()

    def bind(self, g: Genotype) -> np.ndarray:
        """Parameter vector for ``realize(space, g)``, in slot order."""
        return self.angles[self._index(g)].copy()

    def write_back(self, g: Genotype, params) -> None:
        params = np.asarray(params, dtype=float)
        idx = self._index(g)
        if params.shape != (len(idx[0]),):
            raise SearchError(f"expected {len(idx[0])} bound parameters, got {params.shape}")
        self.angles[idx] = params

    def copy(self) -> "ParameterPool":
        return ParameterPool(self.space, self.angles.copy())


@dataclass
class Supernet:
    space: SearchSpace
    pool: ParameterPool
    id: int
    history: list = field(default_factory=list)


@dataclass
class RankedCandidate:
    genotype: Genotype
    supernet_id: int
    valid_accuracy: float
    params: np.ndarray
    sample_index: int

    @property
    def cz_count(self) -> int:
        return self.genotype.cz_count

    def sort_key(self) -> tuple:
        return (-self.valid_accuracy, self.cz_count, self.sample_index)

    def to_dict(self) -> dict:
        return {
            "genotype": self.genotype.to_string(),
            "supernet_id": self.supernet_id,
            "valid_accuracy": self.valid_accuracy,
            "cz_count": self.cz_count,
            "sample_index": self.sample_index,
        }


class _TemplateCache(dict):
    def __init__(self, space: SearchSpace, noise: DephasingChannel, observable: Observable):
        super().__init__()
        self.space, self.noise, self.observable = space, noise, observable

    def __missing__(self, g: Genotype) -> Model:
        model = Model(realize(self.space, g), self.noise, self.observable)
        if len(self) < 4096:
            self[g] = model
        return model


def init_pools(space: SearchSpace, count: int = 5, seed: int = 0) -> list:
    """``count`` independent supernets with angles drawn from U[-pi, pi]."""
    if count < 1:
        raise SearchError(f"need at least one supernet, got {count}")
    rng = np.random.default_rng(seed)
    return [Supernet(space, ParameterPool.uniform(space, rng), i) for i in range(count)]


def supernet_step(pool: ParameterPool, model: Model, g: Genotype, X, y, config: TrainConfig) -> tuple:
    """One SGD step on the angles bound by ``g``; returns ``(loss, grad)``.

    Only the ``4L`` entries bound by ``g`` are written.
    """
    params = pool.bind(g)
    loss, grad = loss_and_grad(model, params, X, y, config.target_mode)
    pool.write_back(g, params - config.learning_rate * grad)
    return loss, grad


def train_supernet(net: Supernet, train_data: Split, config: TrainConfig, sample_per: str = "batch") -> Supernet:
    """Weight-sharing SGD on one supernet; returns a trained copy.

    Mini-batch order and architecture sampling draw from separate streams,
    so a space with a single genotype reproduces plain :func:`train` run
    with the same batch generator.
    """
    if sample_per not in ("batch", "epoch"):
        raise SearchError(f"sample_per must be 'batch' or 'epoch', got {sample_per!r}")
    batch_rng = np.random.default_rng(np.random.SeedSequence([config.seed, net.id]))
    arch_rng = np.random.default_rng(np.random.SeedSequence([config.seed, net.id, 1]))
    pool = net.pool.copy()
    models = _TemplateCache(net.space, config.noise, Observable(config.observable_qubit))
    history = []
    for epoch in range(1, config.epochs + 1):
        losses = []
        g = random_genotype(net.space, arch_rng)
        for idx in minibatches(len(train_data), config.batch_size, batch_rng):
            if sample_per == "batch":
                g = random_genotype(net.space, arch_rng)
            loss, _ = supernet_step(pool, models[g], g, train_data.X[idx], train_data.y[idx], config)
            losses.append(loss)
        history.append({"epoch": epoch, "supernet": net.id, "sampled_loss": float(np.mean(losses))})
        logger.debug("supernet %d epoch %d loss %.5f", net.id, epoch, history[-1]["sampled_loss"])
    return Supernet(net.space, pool, net.id, net.history + history)


def train_supernets(supernets: Sequence[Supernet], train_data: Split, config: TrainConfig, sample_per: str = "batch") -> list:
    return [train_supernet(net, train_data, config, sample_per) for net in supernets]


def _accuracies(model: Model, param_sets: np.ndarray, data: Split) -> np.ndarray:
    k, m = len(param_sets), len(data)
    out = model.outputs(np.repeat(param_sets, m, axis=0), np.tile(data.X, (k, 1))).reshape(k, m)
    return np.mean(predict_label(out) == data.y[None, :], axis=1)


def search(
    supernets: Sequence[Supernet],
    valid_data: Split,
    num_samples: int = 100,
    seed: int = 0,
    noise: DephasingChannel = DephasingChannel(),
    observable_qubit: int = DEFAULT_OBSERVABLE_QUBIT,
    aggregate: str = "best",
) -> list:
    """Rank randomly sampled architectures by validation accuracy.

    With ``aggregate="best"`` each genotype is scored under every supernet
    and keeps its best one. ``"best-supernet"`` first picks the supernet with
    the highest mean accuracy over the samples and ranks under it alone.
    Duplicate samples are evaluated once.
    """
    if not supernets:
        raise SearchError("no supernets to search")
    if valid_data is None or len(valid_data) == 0:
        raise SearchError("empty validation set")
    if num_samples < 1:
        raise SearchError("num_samples must be >= 1")
    if aggregate not in ("best", "best-supernet"):
        raise SearchError(f"unknown aggregate {aggregate!r}")
    space = supernets[0].space
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EA2C4]))
    seen = {}
    for i in range(num_samples):
        g = random_genotype(space, rng)
        seen.setdefault(g, i)
    if len(seen) < num_samples:
        logger.info("search: %d duplicate samples dropped", num_samples - len(seen))
    obs = Observable(observable_qubit)
    scores = {}
    for g in seen:
        params = np.stack([net.pool.bind(g) for net in supernets])
        scores[g] = (params, _accuracies(Model(realize(space, g), noise, obs), params, valid_data))
    if aggregate == "best-supernet":
        means = np.mean([acc for _, acc in scores.values()], axis=0)
        allowed = [int(np.argmax(means))]
    else:
        allowed = list(range(len(supernets)))
    ranked = []
    for g, i in seen.items():
        params, acc = scores[g]
        j = max(allowed, key=lambda s: (acc[s], -s))
        ranked.append(RankedCandidate(g, supernets[j].id, float(acc[j]), params[j], i))
    ranked.sort(key=RankedCandidate.sort_key)
    return ranked


def fine_tune(
    best: RankedCandidate,
    space: SearchSpace,
    train_data: Split,
    config: TrainConfig,
    valid_data: Optional[Split] = None,
    test_data: Optional[Split] = None,
) -> TrainResult:
    """Train the winning architecture starting from its inherited angles.

    ``config.epochs == 0`` returns the inherited parameters with their
    metrics and no optimization.
    """
    template = realize(space, best.genotype)
    if config.epochs == 0:
        from .classifier import Trajectory

        model = Model(template, config.noise, Observable(config.observable_qubit))
        data = {"train": train_data, "valid": valid_data, "test": test_data}
        row = {"epoch": 0, **evaluate(model, best.params, data, config.target_mode)}
        traj = Trajectory()
        traj.append(best.params, row["train_loss"])
        return TrainResult(best.params.copy(), traj, [row])
    return train(template, train_data, config, valid_data, test_data, init=best.params)


@dataclass
class SearchResult:
    supernets: list
    ranking: list
    winner: RankedCandidate
    finetune: TrainResult

    def report(self) -> dict:
        return {
            "candidates": [c.to_dict() for c in self.ranking],
            "winner": self.winner.to_dict(),
            "finetune": self.finetune.history,
            "supernet_history": [row for net in self.supernets for row in net.history],
        }


def run_search(
    space: SearchSpace,
    train_data: Split,
    valid_data: Split,
    test_data: Optional[Split] = None,
    config: Optional[TrainConfig] = None,
    num_supernets: int = 5,
    supernet_epochs: int = 40,
    num_samples: int = 100,
    finetune_epochs: int = 10,
    aggregate: str = "best",
    sample_per: str = "batch",
) -> SearchResult:
    """Init pools, train supernets, rank candidates, fine-tune the winner."""
    config = config or TrainConfig()
    nets = init_pools(space, num_supernets, config.seed)
    nets = train_supernets(nets, train_data, replace(config, epochs=supernet_epochs), sample_per)
    ranking = search(nets, valid_data, num_samples, config.seed, config.noise, config.observable_qubit, aggregate)
    winner = ranking[0]
    result = fine_tune(winner, space, train_data, replace(config, epochs=finetune_epochs), valid_data, test_data)
    return SearchResult(nets, ranking, winner, result)
