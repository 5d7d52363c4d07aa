"""Run configuration, experiment orchestration and run records.

Every experiment writes into its own directory: ``config.json``,
``metrics.csv`` and a ``record.json`` run record, plus experiment-specific
artifacts. Only the record carries wall-clock timings, so metrics files are
byte-identical across reruns of one config.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import landscape as ls
from . import readout as ro
from .circuits import Genotype, SearchSpace, build_haa, build_hea, realize
from .classifier import DEFAULT_OBSERVABLE_QUBIT, Readout, TrainConfig, train
from .data import load_iris, split
from .qas import run_search
from .sim import DephasingChannel, Observable, Placement

logger = logging.getLogger(__name__)

SCHEMA = "qasclf.run/1"
KINDS = ("train-hea", "train-haa", "qas", "landscape", "sweep")
READOUT_MODES = ("off", "simulate", "correct")
METRIC_COLUMNS = ("epoch", "train_loss", "train_accuracy", "valid_accuracy", "test_accuracy")
SWEEP_LAYERS = (2, 4, 6)
SWEEP_NOISE = (0.05, 0.1, 0.15)
SWEEP_SEEDS = 10


class ConfigError(ValueError):
    pass


def _floats(text) -> tuple:
    if isinstance(text, (tuple, list)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _ints(text) -> tuple:
    return tuple(int(v) for v in _floats(text))


@dataclass
class RunConfig:
    kind: str = "train-hea"
    num_blocks: int = 2
    noise: float = 0.0
    placement: str = "block"
    seed: int = 0
    split_seed: Optional[int] = None
    epochs: int = 50
    learning_rate: float = 0.2
    batch_size: int = 4
    observable_qubit: int = DEFAULT_OBSERVABLE_QUBIT
    target_mode: str = "midpoint"
    dataset: Optional[str] = None
    calibration: Optional[str] = None
    readout: str = "off"
    output: str = "runs/latest"
    # search
    num_supernets: int = 5
    supernet_epochs: int = 40
    num_samples: int = 100
    finetune_epochs: int = 10
    aggregate: str = "best"
    sample_per: str = "batch"
    # landscape
    ansatz: str = "haa"
    genotype: Optional[str] = None
    resolution: int = 51
    scan_range: float = math.pi
    # sweep
    layers: tuple = SWEEP_LAYERS
    noise_levels: tuple = SWEEP_NOISE
    num_seeds: int = SWEEP_SEEDS
    workers: int = 1

    def __post_init__(self):
        self.layers = _ints(self.layers)
        self.noise_levels = _floats(self.noise_levels)
        self.validate()

    def validate(self) -> None:
        checks = [
            (self.kind in KINDS, f"kind must be one of {KINDS}"),
            (self.num_blocks >= 1, "num_blocks must be >= 1"),
            (0 <= self.noise <= 0.5, "noise must be in [0, 0.5]"),
            (self.placement in tuple(p.value for p in Placement), "placement must be 'block' or 'gate'"),
            (self.epochs >= 1, "epochs must be >= 1"),
            (self.learning_rate > 0, "learning_rate must be positive"),
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (0 <= self.observable_qubit < 4, "observable_qubit must be in [0, 3]"),
            (self.target_mode in ("midpoint", "raw"), "target_mode must be 'midpoint' or 'raw'"),
            (self.readout in READOUT_MODES, f"readout must be one of {READOUT_MODES}"),
            (self.readout == "off" or self.calibration, "readout simulation needs a calibration file"),
            (self.num_supernets >= 1, "num_supernets must be >= 1"),
            (self.supernet_epochs >= 1, "supernet_epochs must be >= 1"),
            (self.num_samples >= 1, "num_samples must be >= 1"),
            (self.finetune_epochs >= 0, "finetune_epochs must be >= 0"),
            (self.aggregate in ("best", "best-supernet"), "aggregate must be 'best' or 'best-supernet'"),
            (self.sample_per in ("batch", "epoch"), "sample_per must be 'batch' or 'epoch'"),
            (self.ansatz in ("hea", "haa"), "ansatz must be 'hea' or 'haa'"),
            (self.resolution >= 2, "resolution must be >= 2"),
            (self.scan_range > 0, "scan_range must be positive"),
            (len(self.layers) > 0 and min(self.layers) >= 1, "layers must be positive integers"),
            (len(self.noise_levels) > 0 and all(0 <= p <= 0.5 for p in self.noise_levels), "noise levels must lie in [0, 0.5]"),
            (self.num_seeds >= 1, "num_seeds must be >= 1"),
            (self.workers >= 1, "workers must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = set(d) - set(known)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        out = {}
        for k, v in d.items():
            default = known[k].default
            if v is None or k in ("layers", "noise_levels"):
                out[k] = v
            elif isinstance(default, bool):
                out[k] = str(v).lower() in ("1", "true", "yes")
            elif isinstance(default, int) or k == "split_seed":
                out[k] = int(v)
            elif isinstance(default, float):
                out[k] = float(v)
            else:
                out[k] = str(v)
        return cls(**out)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["layers"], d["noise_levels"] = list(self.layers), list(self.noise_levels)
        return d

    @property
    def channel(self) -> DephasingChannel:
        return DephasingChannel(self.noise, self.placement)

    def train_config(self, epochs: Optional[int] = None) -> TrainConfig:
        return TrainConfig(
            self.learning_rate, self.batch_size, self.epochs if epochs is None else epochs,
            self.seed, self.channel, self.target_mode, self.observable_qubit,
        )


def read_config_file(path) -> dict:
    """Flat ``key = value`` text; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _fmt(v) -> str:
    if v is None or v == "":
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_metrics(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in METRIC_COLUMNS])


def _write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _data(cfg: RunConfig):
    data = load_iris(cfg.dataset)
    return split(data, cfg.seed if cfg.split_seed is None else cfg.split_seed)


def _readout(cfg: RunConfig) -> Optional[Readout]:
    if cfg.readout == "off":
        return None
    F = ro.load_csv(cfg.calibration)
    if F.shape != (16, 16):
        raise ConfigError(f"classifier calibration must be 16x16, got {F.shape}")
    return Readout(F, correct=cfg.readout == "correct")


def _template(cfg: RunConfig, ansatz: str):
    if cfg.genotype:
        return realize(SearchSpace(cfg.num_blocks), Genotype.from_string(cfg.genotype))
    return (build_hea if ansatz == "hea" else build_haa)(cfg.num_blocks)


def _record(cfg: RunConfig, history, timings: dict, **extra) -> dict:
    final = history[-1] if history else {}
    return {
        "schema": SCHEMA,
        "config": cfg.to_dict(),
        "metrics": history,
        "final": {k: v for k, v in final.items() if k != "epoch"},
        "timings": timings,
        **extra,
    }


def run_train(cfg: RunConfig, out: Path) -> dict:
    t0 = time.perf_counter()
    tr, va, te = _data(cfg)
    ansatz = cfg.kind.split("-")[1]
    template = _template(cfg, ansatz)
    result = train(template, tr, cfg.train_config(), va, te, readout=_readout(cfg))
    write_metrics(result.history, out / "metrics.csv")
    return _record(
        cfg, result.history, {"train_seconds": time.perf_counter() - t0},
        params=result.params.tolist(), cz_count=template.cz_count,
    )


def run_qas(cfg: RunConfig, out: Path) -> dict:
    t0 = time.perf_counter()
    tr, va, te = _data(cfg)
    space = SearchSpace(cfg.num_blocks)
    res = run_search(
        space, tr, va, te, cfg.train_config(), cfg.num_supernets, cfg.supernet_epochs,
        cfg.num_samples, cfg.finetune_epochs, cfg.aggregate, cfg.sample_per,
    )
    write_metrics(res.finetune.history, out / "metrics.csv")
    _write_json(res.report(), out / "search_report.json")
    return _record(
        cfg, res.finetune.history, {"search_seconds": time.perf_counter() - t0},
        genotype=res.winner.genotype.to_string(), cz_count=res.winner.cz_count,
        params=res.finetune.params.tolist(),
    )


def run_landscape(cfg: RunConfig, out: Path) -> dict:
    t0 = time.perf_counter()
    tr, va, te = _data(cfg)
    template = _template(cfg, cfg.ansatz)
    result = train(template, tr, cfg.train_config(), va, te)
    model = ls.fit_pca(result.trajectory)
    r = cfg.scan_range
    grid = ls.scan(
        template, model, tr, ((-r, r), (-r, r)), cfg.resolution, cfg.channel,
        trajectory=result.trajectory, observable=Observable(cfg.observable_qubit),
        target_mode=cfg.target_mode,
    )
    write_metrics(result.history, out / "metrics.csv")
    ls.save_grid_csv(grid, out / "landscape_grid.csv")
    ls.save_path_csv(grid, out / "trajectory.csv", result.trajectory.losses)
    ls.save_model_json(model, out / "pca.json")
    summary = {
        "explained_variance_ratio": model.explained_variance_ratio.tolist(),
        "loadings": ls.loadings(model).tolist(),
        "path_deviation": ls.path_deviation(grid.path),
        "cz_count": template.cz_count,
    }
    return _record(cfg, result.history, {"landscape_seconds": time.perf_counter() - t0}, landscape=summary)


def sweep_seed(cfg: RunConfig, num_blocks: int, noise: float, seed: int) -> dict:
    """One HEA run and one QAS run on the same split and seed."""
    cell = dataclasses.replace(cfg, kind="qas", num_blocks=num_blocks, noise=noise, seed=seed, split_seed=None)
    tr, va, te = _data(cell)
    hea = train(build_hea(num_blocks), tr, cell.train_config(), va, te)
    res = run_search(
        SearchSpace(num_blocks), tr, va, te, cell.train_config(), cell.num_supernets, cell.supernet_epochs,
        cell.num_samples, cell.finetune_epochs, cell.aggregate, cell.sample_per,
    )
    return {
        "num_blocks": num_blocks,
        "noise": noise,
        "seed": seed,
        "hea_test_accuracy": hea.final["test_accuracy"],
        "qas_test_accuracy": res.finetune.final["test_accuracy"],
        "qas_valid_accuracy": res.winner.valid_accuracy,
        "genotype": res.winner.genotype.to_string(),
        "cz_count": res.winner.cz_count,
    }


SWEEP_COLUMNS = ("num_blocks", "noise", "seed", "hea_test_accuracy", "qas_test_accuracy", "qas_valid_accuracy", "genotype", "cz_count")


def _sweep_cell(args) -> tuple:
    cfg, L, p, out = args
    cell_dir = Path(out) / f"L{L}_p{p:g}"
    cell_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    try:
        for s in range(cfg.seed, cfg.seed + cfg.num_seeds):
            rows.append(sweep_seed(cfg, L, p, s))
            logger.info("sweep L=%d p=%g seed=%d hea=%.3f qas=%.3f", L, p, s, rows[-1]["hea_test_accuracy"], rows[-1]["qas_test_accuracy"])
    except Exception as exc:  # a failed cell must not take the others down
        logger.error("sweep cell L=%d p=%g failed: %s", L, p, exc)
        _write_json({"error": f"{type(exc).__name__}: {exc}", "completed": rows}, cell_dir / "error.json")
        return L, p, rows, str(exc)
    with open(cell_dir / "runs.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in SWEEP_COLUMNS])
    return L, p, rows, None


def summarize(rows) -> dict:
    hea = np.array([r["hea_test_accuracy"] for r in rows])
    qas = np.array([r["qas_test_accuracy"] for r in rows])
    return {
        "median_hea": float(np.median(hea)),
        "median_qas": float(np.median(qas)),
        "mean_hea": float(hea.mean()),
        "mean_qas": float(qas.mean()),
        "mean_qas_cz": float(np.mean([r["cz_count"] for r in rows])),
        "runs": len(rows),
    }


def run_sweep(cfg: RunConfig, out: Path) -> dict:
    t0 = time.perf_counter()
    jobs = [(cfg, L, p, str(out)) for L in cfg.layers for p in cfg.noise_levels]
    summary_path = out / "metrics.csv"
    cells, errors = [], {}
    with open(summary_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("num_blocks", "noise", "median_hea", "median_qas", "mean_hea", "mean_qas", "mean_qas_cz", "runs"))
        fh.flush()
        if cfg.workers > 1:
            with ProcessPoolExecutor(cfg.workers) as pool:
                results = list(pool.map(_sweep_cell, jobs))
        else:
            results = map(_sweep_cell, jobs)
        for L, p, rows, err in results:
            if err:
                errors[f"L{L}_p{p:g}"] = err
            if rows:
                s = summarize(rows)
                cells.append({"num_blocks": L, "noise": p, **s})
                w.writerow([L, repr(p)] + [_fmt(s[k]) for k in ("median_hea", "median_qas", "mean_hea", "mean_qas", "mean_qas_cz")] + [s["runs"]])
                fh.flush()
    rec = _record(cfg, [], {"sweep_seconds": time.perf_counter() - t0}, cells=cells, errors=errors)
    rec["table"] = {f"L{c['num_blocks']}": {} for c in cells}
    for c in cells:
        rec["table"][f"L{c['num_blocks']}"][f"{c['noise']:g}"] = {"hea": c["median_hea"], "qas": c["median_qas"]}
    return rec


RUNNERS = {"train-hea": run_train, "train-haa": run_train, "qas": run_qas, "landscape": run_landscape, "sweep": run_sweep}


def run(cfg: RunConfig) -> dict:
    """Execute one experiment and write its run directory."""
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(cfg.to_dict(), out / "config.json")
    record = RUNNERS[cfg.kind](cfg, out)
    _write_json(record, out / "record.json")
    return record


def rerun(record_path) -> dict:
    """Re-execute a run from its ``record.json``."""
    rec = json.loads(Path(record_path).read_text())
    if rec.get("schema") != SCHEMA:
        raise ConfigError(f"unsupported record schema {rec.get('schema')!r}")
    return run(RunConfig.from_dict(rec["config"]))
