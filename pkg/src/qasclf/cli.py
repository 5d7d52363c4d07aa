"""Command-line entry point: ``qasclf {train,qas,landscape,sweep,readout-check}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields

import numpy as np

from . import readout as ro
from .experiments import RunConfig, read_config_file, run

logger = logging.getLogger("qasclf")

# flags shared by every experiment subcommand; defaults come from RunConfig
COMMON = {
    "num_blocks": ("-L", "--num-blocks", int, "ansatz blocks L"),
    "noise": ("-p", "--noise", float, "dephasing strength"),
    "placement": (None, "--placement", str, "channel placement: block or gate"),
    "seed": (None, "--seed", int, "training seed (also the split seed unless --split-seed)"),
    "split_seed": (None, "--split-seed", int, "data split seed"),
    "epochs": (None, "--epochs", int, "training epochs"),
    "learning_rate": (None, "--learning-rate", float, "SGD step size"),
    "batch_size": (None, "--batch-size", int, "mini-batch size"),
    "observable_qubit": (None, "--observable-qubit", int, "readout qubit"),
    "target_mode": (None, "--target-mode", str, "midpoint or raw"),
    "dataset": (None, "--dataset", str, "Iris-shaped CSV (default: bundled copy)"),
    "calibration": (None, "--calibration", str, "16x16 calibration matrix CSV"),
    "readout": (None, "--readout", str, "off, simulate or correct"),
    "output": ("-o", "--output", str, "run directory"),
}
SEARCH = {
    "num_supernets": (None, "--num-supernets", int, "independent supernets"),
    "supernet_epochs": (None, "--supernet-epochs", int, "weight-sharing epochs"),
    "num_samples": (None, "--num-samples", int, "architectures ranked"),
    "finetune_epochs": (None, "--finetune-epochs", int, "fine-tuning epochs for the winner"),
    "aggregate": (None, "--aggregate", str, "best or best-supernet"),
    "sample_per": (None, "--sample-per", str, "batch or epoch"),
}
LANDSCAPE = {
    "ansatz": (None, "--ansatz", str, "hea or haa"),
    "genotype": (None, "--genotype", str, "architecture string, overrides --ansatz"),
    "resolution": (None, "--resolution", int, "grid points per axis"),
    "scan_range": (None, "--scan-range", float, "half-width of the scan in component units"),
}
SWEEP = {
    "layers": (None, "--layers", str, "comma-separated L values"),
    "noise_levels": (None, "--noise-levels", str, "comma-separated noise strengths"),
    "num_seeds": (None, "--num-seeds", int, "seeds per cell"),
    "workers": (None, "--workers", int, "parallel cells"),
}


def _add(parser, table) -> None:
    for dest, (short, long, typ, help_) in table.items():
        names = [n for n in (short, long) if n]
        parser.add_argument(*names, dest=dest, type=typ, default=None, help=help_)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qasclf", description="Noise-aware quantum classifier experiments on Iris.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment(name, help_, *tables):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="key = value config file; flags override it")
        for t in (COMMON,) + tables:
            _add(p, t)
        return p

    p = experiment("train", "train a fixed ansatz")
    p.add_argument("--ansatz", dest="ansatz", choices=("hea", "haa"), default="hea")
    p.add_argument("--genotype", dest="genotype", default=None, help="train a searched architecture instead")
    experiment("qas", "architecture search, then fine-tune the winner", SEARCH)
    experiment("landscape", "train, fit PCA on the trajectory and scan the loss", LANDSCAPE)
    experiment("sweep", "HEA vs QAS over layers x noise x seeds", SEARCH, SWEEP)

    rc = sub.add_parser("readout-check", help="validate a calibration matrix and its round trip")
    src = rc.add_mutually_exclusive_group(required=True)
    src.add_argument("--calibration", help="calibration matrix CSV")
    src.add_argument("--synthetic", type=int, metavar="N", help="generate a random N-qubit matrix")
    rc.add_argument("--error", type=float, default=0.05, help="max off-diagonal mass for --synthetic")
    rc.add_argument("--seed", type=int, default=0)
    rc.add_argument("--trials", type=int, default=100)
    rc.add_argument("--save", help="write the (synthetic) matrix to this CSV")
    return parser


def config_from_args(args) -> RunConfig:
    values = read_config_file(args.config) if getattr(args, "config", None) else {}
    if args.command == "train":
        values["kind"] = f"train-{args.ansatz}"
    else:
        values["kind"] = args.command
    names = {f.name for f in fields(RunConfig)}
    for k, v in vars(args).items():
        if k in names and k != "kind" and v is not None:
            values[k] = v
    if args.command == "train":
        values.pop("ansatz", None)
    return RunConfig.from_dict(values)


def readout_check(args) -> int:
    if args.calibration:
        F = ro.load_csv(args.calibration)
    else:
        F = ro.synthetic(args.synthetic, args.error, args.seed)
    if args.save:
        ro.save_csv(F, args.save)
    diag = ro.validate(F)
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.trials):
        P = rng.dirichlet(np.ones(len(F)))
        worst = max(worst, float(np.max(np.abs(ro.correct(F, ro.apply(F, P), log_clip=False) - P))))
    report = {
        "dimension": len(F),
        "max_column_deviation": diag.max_deviation,
        "range_violations": diag.range_violations,
        "condition_number": diag.condition_number,
        "ill_conditioned": diag.ill_conditioned,
        "round_trip_max_error": worst,
        "ok": diag.ok and worst <= 1e-9,
    }
    print(json.dumps(report, indent=2))
    return 0 if report["ok"] else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "readout-check":
            return readout_check(args)
        cfg = config_from_args(args)
        record = run(cfg)
    except (ValueError, OSError) as exc:
        print(f"qasclf {args.command}: error: {exc}", file=sys.stderr)
        return 2
    summary = {k: record[k] for k in ("final", "genotype", "cells", "landscape", "errors") if record.get(k)}
    print(json.dumps({"output": cfg.output, **summary}, indent=2, sort_keys=True))
    return 1 if record.get("errors") else 0


if __name__ == "__main__":
    sys.exit(main())
