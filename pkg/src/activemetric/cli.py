"""Command-line entry points: synth, experiment, eval, session, serve."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .dataset import DatasetError, load_csv, make_synthetic_gaussians, save_csv, split, standardize
from .evaluation import ExperimentConfig, one_nn_accuracy, run_experiment, triplet_accuracy
from .metric import MetricWeights
from .session import Session, SessionConfig, SessionError, load_session
from .server import serve as serve_http

logger = logging.getLogger(__name__)


def _add_data_flags(p: argparse.ArgumentParser):
    p.add_argument("--data", required=True, help="CSV dataset path")
    p.add_argument("--label-col", default=None, help="name of the class-label column")
    p.add_argument("--id-col", default=None, help="optional instance-id column")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="activemetric",
        description="Active distance-metric learning from relative-comparison queries",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic Gaussian-blob CSV")
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--per-class", type=int, default=40)
    p.add_argument("--dim", type=int, default=6)
    p.add_argument("--informative", type=int, default=2)
    p.add_argument("--separation", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("experiment", help="multi-seed policy comparison")
    _add_data_flags(p)
    p.add_argument("--policies", default="info,random",
                   help="comma list from info,random,nonredundant,info_exact")
    p.add_argument("--runs", type=int, default=None,
                   help="default 10 (50 with --full)")
    p.add_argument("--budget", type=int, default=None,
                   help="default 40 (100 with --full)")
    p.add_argument("--checkpoints", default=None, help="comma list, e.g. 0,10,20,40")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-fraction", type=float, default=0.5)
    p.add_argument("--pool-factor", type=int, default=100)
    p.add_argument("--sample-cap", type=int, default=200_000,
                   help="max test triplets per accuracy evaluation")
    p.add_argument("--noise", type=float, default=0.0, help="oracle yes/no flip rate")
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--full", action="store_true",
                   help="benchmark-scale protocol: 50 runs x 100 queries unless overridden")
    p.add_argument("--trace-scores", action="store_true",
                   help="record per-iteration top candidate scores in histories")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("eval", help="score a saved metric on a dataset split")
    _add_data_flags(p)
    p.add_argument("--metric", required=True, help="metric JSON ({'weights': [...]} or array)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-fraction", type=float, default=0.5)
    p.add_argument("--sample-cap", type=int, default=200_000)
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--out", default=None, help="optional JSON output path")

    p = sub.add_parser("session", help="create or continue a labeling session")
    session_sub = p.add_subparsers(dest="session_command", required=True)

    ps = session_sub.add_parser("start", help="create a session (simulated runs to completion)")
    _add_data_flags(ps)
    ps.add_argument("--budget", type=int, required=True)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--oracle", choices=("simulated", "human"), default="simulated")
    ps.add_argument("--noise", type=float, default=0.0)
    ps.add_argument("--test-fraction", type=float, default=0.5)
    ps.add_argument("--no-standardize", action="store_true")
    ps.add_argument("--pool-factor", type=int, default=100)
    ps.add_argument("--out", required=True, help="session directory")

    pr = session_sub.add_parser("resume", help="replay a session directory and continue")
    pr.add_argument("--out", required=True, help="session directory")

    p = sub.add_parser("serve", help="HTTP service for a human labeler")
    p.add_argument("--data", default=None, help="CSV dataset path (new session)")
    p.add_argument("--label-col", default=None)
    p.add_argument("--id-col", default=None)
    p.add_argument("--budget", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-fraction", type=float, default=0.5)
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--pool-factor", type=int, default=100)
    p.add_argument("--resume", default=None, help="existing session directory")
    p.add_argument("--out", default=None, help="session directory for a new session")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=None,
                   help="default 8000, or ACTIVEMETRIC_PORT")
    p.add_argument("--static-dir", default=None, help="frontend bundle to serve at /")

    return parser


def _load_dataset(args):
    return load_csv(args.data, label_column=args.label_col, id_column=args.id_col)


def _cmd_synth(args) -> int:
    ds = make_synthetic_gaussians(
        args.classes, args.per_class, args.dim, args.informative, args.separation, args.seed
    )
    save_csv(ds, args.out)
    print(f"wrote {ds.n} x {ds.dim} dataset with {ds.num_classes} classes to {args.out}")
    return 0


def _cmd_experiment(args) -> int:
    dataset = _load_dataset(args)
    runs = args.runs if args.runs is not None else (50 if args.full else 10)
    budget = args.budget if args.budget is not None else (100 if args.full else 40)
    checkpoints = None
    if args.checkpoints:
        checkpoints = tuple(int(c) for c in args.checkpoints.split(","))
    config = ExperimentConfig(
        dataset=dataset,
        policies=tuple(args.policies.split(",")),
        runs=runs,
        budget=budget,
        checkpoints=checkpoints,
        seed=args.seed,
        test_fraction=args.test_fraction,
        standardize=not args.no_standardize,
        pool_factor=args.pool_factor,
        triplet_sample_cap=args.sample_cap,
        noise_rate=args.noise,
        trace_top=10 if args.trace_scores else 0,
    )
    report = run_experiment(config)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    (out / "report.csv").write_text(report.to_csv())
    (out / "curves_triplet.tsv").write_text(report.to_curves_tsv("triplet_mean"))
    (out / "curves_onenn.tsv").write_text(report.to_curves_tsv("onenn_mean"))
    with open(out / "history.jsonl", "w", encoding="utf-8") as fh:
        for rec in report.raw:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    final = report.checkpoints[-1]
    for policy in report.policies:
        cell = report.cells[policy][final]
        print(
            f"{policy}: triplet {cell['triplet_mean']:.4f}, 1nn {cell['onenn_mean']:.4f}, "
            f"yes/no proportion {report.yes_no_proportion[policy]:.3f}"
        )
    print(f"report written to {out}")
    return 0


def _cmd_eval(args) -> int:
    dataset = _load_dataset(args)
    raw = json.loads(Path(args.metric).read_text())
    weights = raw["weights"] if isinstance(raw, dict) else raw
    w = MetricWeights(np.asarray(weights, dtype=np.float64))
    spl = split(dataset, args.test_fraction, args.seed)
    data = dataset if args.no_standardize else standardize(dataset, spl)
    train, test = data.view(spl.train_indices), data.view(spl.test_indices)
    result = {
        "triplet_accuracy": triplet_accuracy(w, test, args.sample_cap, seed=args.seed),
        "one_nn_accuracy": one_nn_accuracy(w, train, test),
        "n_train": len(train),
        "n_test": len(test),
    }
    text = json.dumps(result, sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    return 0


def _session_config(args, oracle: str) -> SessionConfig:
    return SessionConfig(
        budget=args.budget,
        seed=args.seed,
        oracle=oracle,
        noise_rate=getattr(args, "noise", 0.0),
        test_fraction=args.test_fraction,
        standardize=not args.no_standardize,
        pool_factor=args.pool_factor,
    )


def _cmd_session_start(args) -> int:
    dataset = _load_dataset(args)
    config = _session_config(args, args.oracle)
    session = Session.create(dataset, config, args.out)
    if args.oracle == "simulated":
        session.run_simulated()
        print(f"simulated session complete: {session.budget_used} queries answered")
    else:
        print(f"human session initialized at {args.out}; run `activemetric serve --resume {args.out}`")
    print(f"session files in {args.out}")
    return 0


def _cmd_session_resume(args) -> int:
    session = load_session(args.out)
    if session.config.oracle != "simulated":
        print("human sessions resume through `activemetric serve --resume DIR`", file=sys.stderr)
        return 1
    session.run_simulated()
    print(f"session complete: {session.budget_used} queries answered")
    return 0


def _cmd_serve(args) -> int:
    if bool(args.resume) == bool(args.data):
        print("serve needs exactly one of --data (new) or --resume DIR", file=sys.stderr)
        return 2
    if args.resume:
        session = load_session(args.resume)
    else:
        if not args.out:
            print("--out DIR is required for a new served session", file=sys.stderr)
            return 2
        dataset = _load_dataset(args)
        session = Session.create(dataset, _session_config(args, "human"), args.out)
    port = args.port if args.port is not None else int(os.environ.get("ACTIVEMETRIC_PORT", "8000"))
    serve_http(session, host=args.host, port=port, static_dir=args.static_dir)
    return 0


def cli_dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {
        "synth": _cmd_synth,
        "experiment": _cmd_experiment,
        "eval": _cmd_eval,
        "serve": _cmd_serve,
    }
    try:
        if args.command == "session":
            if args.session_command == "start":
                return _cmd_session_start(args)
            return _cmd_session_resume(args)
        return handlers[args.command](args)
    except (DatasetError, SessionError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
