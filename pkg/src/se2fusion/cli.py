"""Command-line interface.

Verbs:
  run         fuse one dataset with one strategy and export results
  batch       all strategies x rejection on/off, comparison table
  synth       generate a synthetic dataset as CSV files
  graph-dump  build the pose graph (no optimization) and save its text form

Datasets come either from CSV files (--gnss/--odo/--truth) or from the
synthetic generator (--synth PROFILE with --seed and error-model flags).
"""

from __future__ import annotations

import argparse
import os
import sys

from .builders import BuilderConfig, NodeRate, Strategy, build
from .dataset import ExperimentConfig, export_results, load_dataset, \
    render_metrics_record, run_batch, run_experiment
from .gnss import reject_outliers
from .graph import save as save_graph
from .solver import SolverConfig
from .synth import GnssErrorModel, OdoErrorModel, TrajectoryProfile, \
    generate_synthetic


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _add_dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gnss", help="GNSS CSV path")
    p.add_argument("--odo", help="odometry CSV path")
    p.add_argument("--truth", help="ground-truth CSV path")
    p.add_argument("--synth", choices=[x.value for x in TrajectoryProfile],
                   help="generate the dataset instead of loading files")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", type=float, default=600.0,
                   help="synthetic duration in seconds")
    p.add_argument("--bias", default="0,0",
                   help="synthetic GNSS bias as 'x,y' meters")
    p.add_argument("--ar1-rho", type=float, default=0.0)
    p.add_argument("--ar1-sigma", type=float, default=0.0,
                   help="stationary planar noise dispersion in meters")
    p.add_argument("--outlier-rate", type=float, default=0.0)
    p.add_argument("--outlier-magnitude", type=float, default=0.0)
    p.add_argument("--drift", type=float, default=0.0,
                   help="odometry multiplicative drift fraction")
    p.add_argument("--standstill", default=None,
                   help="synthetic standstill as 'start,duration' seconds")


def _add_experiment_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strategy", choices=["g1", "g2", "g3"], default="g2")
    p.add_argument("--no-outlier-rejection", action="store_true")
    p.add_argument("--metrics-literal", action="store_true")
    p.add_argument("--trace", action="store_true",
                   help="print one line per solver iteration")
    p.add_argument("--identity-strength", type=float, default=1e6)
    p.add_argument("--node-rate",
                   choices=[x.value for x in NodeRate],
                   default=NodeRate.PER_GNSS_FIX.value)


def _pair(text, what):
    try:
        a, b = text.split(",")
        return float(a), float(b)
    except ValueError:
        raise SystemExit(f"bad {what}: expected 'a,b', got {text!r}")


def _dataset_from_args(args):
    if args.synth is not None:
        standstill = _pair(args.standstill, "--standstill") \
            if args.standstill else None
        return generate_synthetic(
            args.seed, TrajectoryProfile(args.synth),
            GnssErrorModel(bias=_pair(args.bias, "--bias"),
                           ar1_rho=args.ar1_rho, ar1_sigma=args.ar1_sigma,
                           outlier_rate=args.outlier_rate,
                           outlier_magnitude=args.outlier_magnitude),
            OdoErrorModel(drift_fraction=args.drift),
            duration=args.duration, standstill=standstill)
    if not args.gnss or not args.odo:
        raise SystemExit("need --gnss and --odo (or --synth PROFILE)")
    return load_dataset(args.gnss, args.odo, args.truth)


def _experiment_config(args) -> ExperimentConfig:
    return ExperimentConfig(
        strategy=Strategy(args.strategy),
        outlier_rejection=not args.no_outlier_rejection,
        solver=SolverConfig(),
        builder=BuilderConfig(strategy=Strategy(args.strategy),
                              node_rate=NodeRate(args.node_rate),
                              identity_edge_strength=args.identity_strength),
        seed=args.seed,
        metrics_literal=args.metrics_literal)


def _cmd_run(args) -> int:
    dataset = _dataset_from_args(args)
    cfg = _experiment_config(args)
    trace = sys.stdout.write if args.trace else None
    trajectory, fused, raw, solve, graph = run_experiment(
        dataset, cfg, trace=trace, keep_graph=True)
    if args.out:
        export_results(trajectory, fused, raw, solve, args.out, dataset,
                       graph=graph if args.dump_graph else None)
    sys.stdout.write(render_metrics_record(dataset.name, fused, raw, solve))
    return 0


def _cmd_batch(args) -> int:
    dataset = _dataset_from_args(args)
    base = _experiment_config(args)
    record, table = run_batch([dataset], base)
    os.makedirs(args.out, exist_ok=True)
    rec_path = os.path.join(args.out, "batch_record.txt")
    tab_path = os.path.join(args.out, "batch_table.txt")
    with open(rec_path, "w") as fh:
        fh.write(record)
    with open(tab_path, "w") as fh:
        fh.write(table)
    sys.stdout.write(table)
    return 0


def _cmd_synth(args) -> int:
    dataset = _dataset_from_args(args)
    os.makedirs(args.out, exist_ok=True)
    gnss_path = os.path.join(args.out, f"{dataset.name}_gnss.csv")
    odo_path = os.path.join(args.out, f"{dataset.name}_odo.csv")
    truth_path = os.path.join(args.out, f"{dataset.name}_truth.csv")
    with open(gnss_path, "w", newline="") as fh:
        fh.write("t,utm_x,utm_y,zone,epx,epy,epv\n")
        for r in dataset.gnss:
            fh.write(f"{_fmt(r.timestamp)},{_fmt(r.position[0])},"
                     f"{_fmt(r.position[1])},local,{_fmt(r.epx)},"
                     f"{_fmt(r.epy)},{_fmt(r.epv)}\n")
    with open(odo_path, "w", newline="") as fh:
        fh.write("t,yaw_rate,velocity\n")
        s = dataset.odometry
        for t, w, v in zip(s.timestamps, s.yaw_rates, s.velocities):
            fh.write(f"{_fmt(t)},{_fmt(w)},{_fmt(v)}\n")
    with open(truth_path, "w", newline="") as fh:
        fh.write("t,utm_x,utm_y\n")
        for t, p in zip(dataset.truth.timestamps, dataset.truth.positions):
            fh.write(f"{_fmt(t)},{_fmt(p[0])},{_fmt(p[1])}\n")
    sys.stdout.write(f"wrote {gnss_path}\nwrote {odo_path}\n"
                     f"wrote {truth_path}\n")
    return 0


def _cmd_graph_dump(args) -> int:
    dataset = _dataset_from_args(args)
    cfg = _experiment_config(args)
    readings = list(dataset.gnss)
    for r in readings:
        r.accepted = True
    if cfg.outlier_rejection:
        reject_outliers(readings, dataset.odometry)
    accepted = [r for r in readings if r.accepted]
    graph = build(accepted, dataset.odometry,
                  BuilderConfig(strategy=cfg.strategy,
                                node_rate=cfg.builder.node_rate,
                                identity_edge_strength=
                                cfg.builder.identity_edge_strength))
    save_graph(graph, args.out)
    sys.stdout.write(f"wrote {args.out} ({len(graph.nodes)} nodes, "
                     f"{len(graph.edges)} edges)\n")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="se2fusion",
        description="Pose-graph fusion of GNSS fixes with vehicle odometry")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="fuse one dataset, one strategy")
    _add_dataset_args(p_run)
    _add_experiment_args(p_run)
    p_run.add_argument("--out", help="output directory")
    p_run.add_argument("--dump-graph", action="store_true")
    p_run.set_defaults(fn=_cmd_run)

    p_batch = sub.add_parser("batch",
                             help="all strategies x rejection on/off")
    _add_dataset_args(p_batch)
    _add_experiment_args(p_batch)
    p_batch.add_argument("--out", required=True, help="output directory")
    p_batch.set_defaults(fn=_cmd_batch)

    p_synth = sub.add_parser("synth", help="write a synthetic dataset")
    _add_dataset_args(p_synth)
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.set_defaults(fn=_cmd_synth)

    p_dump = sub.add_parser("graph-dump",
                            help="build and save the pose graph")
    _add_dataset_args(p_dump)
    _add_experiment_args(p_dump)
    p_dump.add_argument("--out", required=True, help="output file")
    p_dump.set_defaults(fn=_cmd_graph_dump)

    args = parser.parse_args(argv)
    if args.synth is None and args.verb == "synth":
        raise SystemExit("synth needs --synth PROFILE")
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
