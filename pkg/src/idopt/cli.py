"""Command line: ``train``, ``density``, ``optimize`` and ``report``.

Exit codes: 0 success, 1 runtime failure, 2 configuration or validation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import models
from .cases import CaseConfig, load_case_inputs, resolve_constraints, run_case
from .dataset import DataError, encode_all, load_csv, preprocess, titanic_path
from .domain import SchemaError
from .optimizer import read_trajectory_csv


class ConfigError(Exception):
    pass


def _load_data(path):
    path = Path(path) if path else titanic_path()
    if not path.exists():
        raise ConfigError(f"data file not found: {path}")
    return load_csv(path)


def cmd_train(args) -> int:
    data = _load_data(args.data)
    train, test = preprocess(data, args.split, args.seed)
    if args.model == "mlp":
        model = models.mlp_train(train.features, train.labels, seed=args.seed)
    elif args.model == "forest":
        model = models.forest_train(train.features, train.labels, seed=args.seed)
    else:
        raise ConfigError(f"unknown model kind {args.model!r}; choose mlp or forest")
    scores = model.evaluate(test.features)
    metrics = {"auc": models.roc_auc(test.labels, scores),
               "accuracy": models.accuracy(test.labels, scores),
               "n_train": len(train.labels), "n_test": len(test.labels)}
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    models.save_model(model, out, schema=train.schema.to_json(), metrics=metrics,
                      seed=args.seed, split=args.split)
    print(f"{args.model}: test auc={metrics['auc']:.3f} accuracy={metrics['accuracy']:.3f} "
          f"({metrics['n_test']} test rows) -> {out}")
    return 0


def cmd_density(args) -> int:
    if not args.bandwidth > 0:
        raise ConfigError(f"bandwidth must be > 0, got {args.bandwidth}")
    data = _load_data(args.data)
    full = encode_all(data, args.split, args.seed)
    kde = models.KdeModel(full.features, args.bandwidth)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    models.save_model(kde, out, schema=full.schema.to_json())
    print(f"kde: {full.features.shape[0]} support rows, {full.features.shape[1]} dims, "
          f"bandwidth {args.bandwidth} -> {out}")
    return 0


def cmd_optimize(args) -> int:
    cfg_path = Path(args.config)
    if not cfg_path.exists():
        raise ConfigError(f"config file not found: {cfg_path}")
    case = CaseConfig.load(cfg_path)
    if args.seed is not None:
        case.optimizer = replace(case.optimizer, seed=args.seed)
    try:
        model, schema, density = load_case_inputs(case, args.model)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None
    # fail on unknown feature or modality names before any computation
    resolve_constraints(schema, case.constraints)

    domain, traj, report = run_case(case, model, schema, density)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    traj.write_csv(out / f"{case.name}_trajectory.csv")
    with open(out / f"{case.name}_report.json", "w") as fh:
        json.dump(report, fh, indent=2)
    print(f"{case.name}: {len(traj)} iterations, final objective {report['final_objective']:.4f}, "
          f"final mean {report['final_mean']:.4f} -> {out}")
    return 0


def cmd_report(args) -> int:
    path = Path(args.trajectory)
    if not path.exists():
        raise ConfigError(f"trajectory file not found: {path}")
    traj = read_trajectory_csv(path)
    obj = traj.column("objective")
    mean = traj.column("mean")
    sig = traj[-1].half_lengths
    best_obj = int(np.argmax(obj))
    best_mean = int(np.argmax(mean))
    lines = [
        f"records        {len(traj)}",
        f"objective      first {obj[0]:.6g}  last {obj[-1]:.6g}  best {obj[best_obj]:.6g} "
        f"(iter {traj[best_obj].iteration})",
        f"mean           first {mean[0]:.6g}  last {mean[-1]:.6g}  best {mean[best_mean]:.6g} "
        f"(iter {traj[best_mean].iteration})",
        f"final sigma    min {sig.min():.6g}  median {np.median(sig):.6g}  max {sig.max():.6g}",
    ]
    print("\n".join(lines))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="idopt", description="Iterative box-domain optimization.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a classifier on the tabular data")
    t.add_argument("--data", help="CSV path (default: bundled Titanic data)")
    t.add_argument("--model", default="mlp", help="mlp or forest")
    t.add_argument("--out", required=True, help="output model JSON")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--split", type=float, default=0.8, help="training fraction")
    t.set_defaults(func=cmd_train)

    d = sub.add_parser("density", help="fit a Gaussian KDE on every encoded row")
    d.add_argument("--data")
    d.add_argument("--bandwidth", type=float, default=0.2)
    d.add_argument("--out", required=True, help="output KDE JSON")
    d.add_argument("--seed", type=int, default=0, help="split seed for normalization statistics")
    d.add_argument("--split", type=float, default=0.8)
    d.set_defaults(func=cmd_density)

    o = sub.add_parser("optimize", help="run one case configuration")
    o.add_argument("--config", required=True)
    o.add_argument("--out", required=True, help="output directory")
    o.add_argument("--model", help="model JSON overriding the config's model")
    o.add_argument("--seed", type=int, help="override the optimizer seed")
    o.set_defaults(func=cmd_optimize)

    r = sub.add_parser("report", help="summarize a trajectory CSV")
    r.add_argument("trajectory")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, SchemaError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
