"""Command-line orchestration of the experiment matrix.

Verbs:
  run     one training run from a config file plus flag overrides
  matrix  a named suite of conditions x seeds (flexibility / access / specorch)
  curves  aggregate run directories into a plotting-ready CSV
  serve   training with a live human labeler over HTTP plus the web UI

Run directories are laid out as {out}/{env}/{algorithm}/{condition}/{seed}
and contain metrics.jsonl, config.resolved, and checkpoints/.
"""

from __future__ import annotations

import argparse
import csv
import signal
import sys
import threading
from pathlib import Path

from .config import TrainerConfig, defaults_for, load_config, save_resolved
from .trainer import RunMetrics, Trainer

SUITES = ("flexibility", "access", "specorch")


def run_dir_for(out_root, config: TrainerConfig) -> Path:
    return (
        Path(out_root)
        / config.env_id
        / config.algorithm
        / config.condition
        / f"seed{config.seed}"
    )


def execute_run(config: TrainerConfig, out_root, feedback_source=None,
                quiet: bool = False) -> Path:
    run_dir = run_dir_for(out_root, config)
    run_dir.mkdir(parents=True, exist_ok=True)
    save_resolved(config, run_dir / "config.resolved")
    trainer = Trainer(config, feedback_source=feedback_source)
    try:
        metrics = trainer.run()
    finally:
        trainer.metrics.write_jsonl(run_dir / "metrics.jsonl")
        trainer.save_checkpoints(run_dir / "checkpoints")
    if not quiet:
        final = metrics.records[-1]["mean_return"] if metrics.records else float("nan")
        print(f"[{config.env_id} {config.algorithm} {config.condition} "
              f"seed{config.seed}] final mean return {final:.2f} "
              f"({trainer.labels_used} labels)")
    return run_dir


def _resolve_config(args) -> TrainerConfig:
    overrides = {
        "seed": args.seed,
        "hb_fraction": args.hb,
        "epsilon": args.epsilon,
        "algorithm": args.algo,
        "env_id": args.env,
        "total_steps": args.steps,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.config:
        return load_config(args.config, overrides)
    env_id = overrides.pop("env_id", None)
    if env_id is None:
        raise ValueError("env_id: pass --env or a --config file naming it")
    base = defaults_for(env_id, overrides.pop("algorithm", "pebble"))
    data = {**base.to_dict(), "env_id": env_id, "algorithm": base.algorithm}
    data.update(overrides)
    return TrainerConfig.from_dict(data)


def cmd_run(args) -> int:
    config = _resolve_config(args)
    execute_run(config, args.out)
    return 0


def cmd_matrix(args) -> int:
    base = _resolve_config(args)
    conditions: list[dict] = []
    if args.suite == "flexibility":
        conditions = [{"epsilon": 1, "hb_fraction": 1.0},
                      {"epsilon": 3, "hb_fraction": 1.0}]
    elif args.suite == "access":
        conditions = [{"epsilon": 1, "hb_fraction": hb} for hb in (1.0, 0.5, 0.0)]
    elif args.suite == "specorch":
        conditions = [{"epsilon": 1, "hb_fraction": 1.0, "algorithm": algo}
                      for algo in ("pebble", "rune", "surf")]
    run_dirs = []
    for cond in conditions:
        for seed in args.seeds:
            data = {**base.to_dict(), **cond, "seed": seed}
            config = TrainerConfig.from_dict(data)
            run_dirs.append(execute_run(config, args.out))
    write_curves(run_dirs, Path(args.out) / f"{args.suite}_curves.csv")
    return 0


def condition_label(config: TrainerConfig) -> str:
    return f"{config.algorithm}:{config.condition}"


def write_curves(run_dirs, out_path) -> None:
    """Align checkpoints by step per condition and write a CSV of the
    cross-seed mean and standard deviation of the evaluation return."""
    import numpy as np

    groups: dict[str, list[list[dict]]] = {}
    for run_dir in run_dirs:
        run_dir = Path(run_dir)
        config = load_config(run_dir / "config.resolved")
        metrics = RunMetrics.read_jsonl(run_dir / "metrics.jsonl")
        groups.setdefault(condition_label(config), []).append(metrics.records)

    rows = []
    for label in sorted(groups):
        runs = groups[label]
        step_sets = [tuple(r["step"] for r in run) for run in runs]
        if len(set(step_sets)) > 1:
            all_steps = sorted({s for steps in step_sets for s in steps})
            bad = [s for s in all_steps
                   if any(s not in steps for steps in step_sets)]
            raise ValueError(
                f"misaligned checkpoints for condition {label}: steps {bad}"
            )
        for i, step in enumerate(step_sets[0]):
            values = np.array([run[i]["mean_return"] for run in runs])
            rows.append(
                {"step": step, "condition": label,
                 "mean_return": float(values.mean()),
                 "std_return": float(values.std())}
            )
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as f:
        writer = csv.DictWriter(
            f, fieldnames=["step", "condition", "mean_return", "std_return"]
        )
        writer.writeheader()
        writer.writerows(rows)


def cmd_curves(args) -> int:
    write_curves(args.run_dirs, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_serve(args) -> int:
    import socket

    import uvicorn

    from .envs import make_env
    from .feedback import FeedbackService, RemoteFeedbackSource
    from .server import create_app

    with socket.socket() as probe:
        try:
            probe.bind((args.host, args.port))
        except OSError as err:
            raise ValueError(f"port {args.port} on {args.host} unavailable: {err}")

    config = _resolve_config(args)
    env = make_env(config.env_id)
    service = FeedbackService(env)
    source = RemoteFeedbackSource(service, timeout=config.remote_timeout)
    app = create_app(service, static_dir=args.ui)

    server = uvicorn.Server(
        uvicorn.Config(app, host=args.host, port=args.port, log_level="warning")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()

    def _terminate(signum, frame):
        raise SystemExit(143)

    signal.signal(signal.SIGTERM, _terminate)
    print(f"feedback service on http://{args.host}:{args.port} "
          f"(env {config.env_id}); training starts now")
    try:
        execute_run(config, args.out, feedback_source=source)
    finally:
        server.should_exit = True
        thread.join(timeout=5.0)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="teampref")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="YAML config file")
        p.add_argument("--env", default=None, help="environment id")
        p.add_argument("--algo", default=None, choices=["pebble", "rune", "surf"])
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--hb", type=float, default=None,
                       help="human-policy access budget fraction")
        p.add_argument("--epsilon", type=int, default=None,
                       help="size of the human policy set")
        p.add_argument("--steps", type=int, default=None, help="total training steps")
        p.add_argument("--out", default="runs", help="output root directory")

    p_run = sub.add_parser("run", help="one training run")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_matrix = sub.add_parser("matrix", help="run an experiment suite")
    common(p_matrix)
    p_matrix.add_argument("--suite", required=True, choices=SUITES)
    p_matrix.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    p_matrix.set_defaults(func=cmd_matrix)

    p_curves = sub.add_parser("curves", help="aggregate runs into a CSV")
    p_curves.add_argument("run_dirs", nargs="+")
    p_curves.add_argument("--out", default="curves.csv")
    p_curves.set_defaults(func=cmd_curves)

    p_serve = sub.add_parser("serve", help="train with a live human labeler")
    common(p_serve)
    p_serve.add_argument("--port", type=int, default=8712)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--ui", default=None, help="static UI directory to serve")
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
