"""Command line entry point: ``sensorsel {simulate,front,metrics,compare}``."""
import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .. import infometrics, moo, selection
from . import config as cfg
from . import output, runner

log = logging.getLogger("sensorsel")


def _u64(text):
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must lie in [0, 2**64), got {value}")
    return value


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _common(p, multi_config=False):
    if multi_config:
        p.add_argument("--config", action="append", required=True, metavar="PATH",
                       help="config file; repeat for each run to compare")
    else:
        p.add_argument("--config", metavar="PATH", help="config file (defaults apply when omitted)")
    p.add_argument("--seed", type=_u64, help="master seed (overrides run.seed)")
    p.add_argument("--out", metavar="DIR", default=".", help="output directory (default: current)")
    p.add_argument("--workers", type=_positive, help="worker processes (overrides run.workers)")
    p.add_argument("--trials", type=_positive, help="Monte Carlo trials (overrides run.trials)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key, e.g. --set filter.particles=2000")


def build_parser():
    parser = argparse.ArgumentParser(prog="sensorsel", description="Multiobjective sensor selection for target tracking.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="full Monte Carlo run; writes mse.csv, fronts and a manifest")
    _common(p)

    p = sub.add_parser("front", help="dump the Pareto front of one step of one trial")
    _common(p)
    p.add_argument("--step", type=_positive, default=1)
    p.add_argument("--trial", type=int, default=0)

    p = sub.add_parser("metrics", help="per-sensor FI and MI for the predicted cloud of one step")
    _common(p)
    p.add_argument("--step", type=_positive, default=1)
    p.add_argument("--trial", type=int, default=0)

    p = sub.add_parser("compare", help="run several configs and join their MSE curves")
    _common(p, multi_config=True)
    return parser


def resolve_config(path, args):
    config = cfg.load_config(path) if path else cfg.ExperimentConfig()
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise cfg.ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value
    for key, value in (("run.seed", args.seed), ("run.workers", args.workers), ("run.trials", args.trials)):
        if value is not None:
            overrides[key] = value
    return cfg.apply_overrides(config, overrides)


# -- subcommands -------------------------------------------------------------------------

def cmd_simulate(config, out):
    summary = runner.run_monte_carlo(config)
    files = output.write_results(summary, out, config)
    print(f"{summary.trials} trials, {summary.steps} steps, {summary.wall_clock:.1f}s; "
          f"terminal MSE {summary.mse[-1]:.6g}; wrote {len(files)} files to {out}")
    return summary


def _capture(config, trial, step):
    """Predicted cloud, selection-scene table and front at ``step`` of ``trial``."""
    snap = {}

    def grab(t, predicted, table, front):
        if t == step:
            snap.update(predicted=predicted, table=table, front=front)

    short = cfg.apply_overrides(config, {"run.steps": step})
    runner.run_trial(short, runner.trial_seed(config.run.seed, trial), trial_index=trial, on_step=grab)
    return snap


def cmd_front(config, out, step, trial):
    snap = _capture(config, trial, step)
    setup = runner.build_setup(config)
    front = snap["front"]
    if front is None:
        # schemes without a front: build one for the configured metric
        metric = config.selection.metric
        table = infometrics.compute_metric_table(setup.select_scene, snap["predicted"],
                                                 fi=metric == "fi", mi=metric == "miub")
        objective = moo.FisherGap(table) if metric == "fi" else moo.MiubGap(table)
        rng = runner.nsga_rng(runner.trial_seed(config.run.seed, trial), step)
        front = selection.as_points(moo.nsga2_run(objective, len(table), runner.nsga_config(config), rng))
    snapshot = runner.front_snapshot(front, setup.active, len(setup.field))
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    path = output.write_front(snapshot, out / f"front_{step}.csv")
    conf = out / "config.txt"
    conf.write_text(cfg.dumps(config, include_workers=False))
    output.write_manifest(out / "manifest.json", config, [path, conf, out / "manifest.json"],
                          {"command": "front", "trial": trial, "step": step})
    print(f"{len(snapshot.objectives)} front points at step {step} of trial {trial} -> {path}")
    return snapshot


def metric_rows(config, predicted):
    setup = runner.build_setup(config)
    table = infometrics.compute_metric_table(setup.scene, predicted)
    base = float(infometrics.logdet(table.prior_fi))
    gains = infometrics.logdet(table.prior_fi[None] + table.per_sensor_fi) - base
    center = predicted.weights @ predicted.states[:, :2]
    dist = np.hypot(*(setup.field.positions - center).T)
    return [
        (i, dist[i], setup.field.probs[i], gains[i], table.per_sensor_mi[i])
        for i in range(len(setup.field))
    ]


def cmd_metrics(config, out, step, trial):
    snap = _capture(config, trial, step)
    rows = metric_rows(config, snap["predicted"])
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    path = output.write_metrics(rows, out / "metrics.csv")
    conf = out / "config.txt"
    conf.write_text(cfg.dumps(config, include_workers=False))
    output.write_manifest(out / "manifest.json", config, [path, conf, out / "manifest.json"],
                          {"command": "metrics", "trial": trial, "step": step})
    print(f"{len(rows)} sensors at step {step} of trial {trial} -> {path}")
    return rows


def _labels(paths):
    labels, seen = [], {}
    for p in paths:
        stem = Path(p).stem or "run"
        seen[stem] = seen.get(stem, 0) + 1
        labels.append(stem if seen[stem] == 1 else f"{stem}_{seen[stem]}")
    return labels


def cmd_compare(configs, labels, out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    curves = []
    for label, config in zip(labels, configs):
        summary = runner.run_monte_carlo(config)
        output.write_results(summary, out / label, config)
        curves.append(summary.mse)
        print(f"{label}: terminal MSE {summary.mse[-1]:.6g} over {summary.trials} trials")
    steps = min(len(c) for c in curves)
    rows = [[t + 1] + [output.fmt_float(c[t]) for c in curves] for t in range(steps)]
    path = output.write_rows(out / "compare.csv", ["step"] + [f"mse_{lab}" for lab in labels], rows)
    print(f"joined MSE table -> {path}")
    return path


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "compare":
            configs = [resolve_config(p, args) for p in args.config]
            cmd_compare(configs, _labels(args.config), args.out)
            return 0
        config = resolve_config(args.config, args)
        if args.command == "simulate":
            cmd_simulate(config, args.out)
        elif args.command == "front":
            cmd_front(config, args.out, args.step, args.trial)
        else:
            cmd_metrics(config, args.out, args.step, args.trial)
    except (cfg.ConfigError, runner.RunFailed, runner.TrialError, OSError) as exc:
        print(f"sensorsel: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
