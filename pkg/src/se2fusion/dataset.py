"""Dataset ingestion, experiment orchestration and result export.

CSV schemas (headers mandatory):

* GNSS, geographic:   t,lat,lon,epx,epy,epv
* GNSS, pre-projected: t,utm_x,utm_y,zone,epx,epy,epv
* odometry:           t,yaw_rate,velocity
* ground truth:       t,utm_x,utm_y

On load the first GNSS fix becomes the frame origin and is subtracted
from every absolute coordinate (GNSS and truth), which keeps the floats
the solver sees small.  Machine-readable outputs print floats with 17
significant digits; human tables use 3 decimals.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .builders import BuilderConfig, NodeRate, Strategy, _node_times, \
    build, vehicle_trajectory
from .errors import DivisionByZeroMetricError, EmptyInputError, \
    MixedUtmZonesError, NonMonotonicTimestampsError, ParseError
from .gnss import GnssReading, latlon_to_utm, reject_outliers
from .graph import save as save_graph
from .metrics import MetricsReport, compute_metrics, improvements, match_pps
from .odometry import OdometryStream
from .solver import SolveReport, SolverConfig, optimize


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class TruthTrack:
    timestamps: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=float)
        self.positions = np.asarray(self.positions, dtype=float)


@dataclass
class Dataset:
    name: str
    gnss: list
    odometry: OdometryStream
    truth: TruthTrack | None = None
    frame_origin: tuple = (0.0, 0.0)


@dataclass
class ExperimentConfig:
    strategy: Strategy = Strategy.G2
    outlier_rejection: bool = True
    solver: SolverConfig = field(default_factory=SolverConfig)
    builder: BuilderConfig = field(default_factory=BuilderConfig)
    seed: int = 0
    metrics_literal: bool = False


def _read_rows(path, expected_header):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}:1: empty file") from None
        header = [h.strip() for h in header]
        if header != expected_header:
            raise ParseError(
                f"{path}:1: expected header {','.join(expected_header)}, "
                f"got {','.join(header)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(expected_header):
                raise ParseError(
                    f"{path}:{lineno}: expected {len(expected_header)} "
                    f"fields, got {len(row)}")
            try:
                rows.append(([float(v) for v in row], lineno))
            except ValueError:
                # keep the raw strings for schemas with a text column
                rows.append((row, lineno))
        return rows


def _sniff_gnss_header(path):
    with open(path, newline="") as fh:
        first = fh.readline()
    names = [h.strip() for h in first.strip().split(",")]
    if names == ["t", "lat", "lon", "epx", "epy", "epv"]:
        return "geo"
    if names == ["t", "utm_x", "utm_y", "zone", "epx", "epy", "epv"]:
        return "utm"
    raise ParseError(f"{path}:1: unrecognized GNSS header {first.strip()!r}")


def _load_gnss(path):
    kind = _sniff_gnss_header(path)
    readings = []
    zones = set()
    if kind == "geo":
        rows = _read_rows(path, ["t", "lat", "lon", "epx", "epy", "epv"])
        for row, lineno in rows:
            try:
                t, lat, lon, epx, epy, epv = [float(v) for v in row]
            except (TypeError, ValueError):
                raise ParseError(f"{path}:{lineno}: non-numeric field") \
                    from None
            e, n, zone = latlon_to_utm(lat, lon)
            zones.add(zone)
            readings.append(GnssReading(t, (e, n), epx, epy, epv))
    else:
        rows = _read_rows(path, ["t", "utm_x", "utm_y", "zone",
                                 "epx", "epy", "epv"])
        for row, lineno in rows:
            try:
                t = float(row[0])
                x = float(row[1])
                y = float(row[2])
                zone = str(row[3]).strip()
                epx, epy, epv = (float(row[4]), float(row[5]),
                                 float(row[6]))
            except (TypeError, ValueError):
                raise ParseError(f"{path}:{lineno}: non-numeric field") \
                    from None
            zones.add(zone)
            readings.append(GnssReading(t, (x, y), epx, epy, epv))
    if len(zones) > 1:
        raise MixedUtmZonesError(
            f"{path}: readings span UTM zones {sorted(zones)}")
    ts = [r.timestamp for r in readings]
    for k, (a, b) in enumerate(zip(ts, ts[1:])):
        if b <= a:
            raise NonMonotonicTimestampsError(
                f"{path}: timestamp at data line {k + 3} not increasing")
    return readings


def _load_numeric(path, header):
    rows = _read_rows(path, header)
    out = []
    for row, lineno in rows:
        try:
            out.append([float(v) for v in row])
        except (TypeError, ValueError):
            raise ParseError(f"{path}:{lineno}: non-numeric field") from None
    return np.array(out, dtype=float).reshape(len(out), len(header))


def load_dataset(gnss_path, odo_path, truth_path=None,
                 name=None) -> Dataset:
    """Load CSV streams into a local-frame Dataset.

    The first GNSS fix defines the frame origin, subtracted from all
    absolute coordinates (fixes and truth alike).
    """
    readings = _load_gnss(gnss_path)
    if not readings:
        raise ParseError(f"{gnss_path}: no GNSS readings")
    odo = _load_numeric(odo_path, ["t", "yaw_rate", "velocity"])
    if odo.shape[0] == 0:
        raise ParseError(f"{odo_path}: no odometry samples")
    if np.any(np.diff(odo[:, 0]) <= 0.0):
        k = int(np.argmax(np.diff(odo[:, 0]) <= 0.0))
        raise NonMonotonicTimestampsError(
            f"{odo_path}: timestamp at data line {k + 3} not increasing")
    origin = (float(readings[0].position[0]), float(readings[0].position[1]))
    for r in readings:
        r.position = r.position - np.asarray(origin)
    stream = OdometryStream(odo[:, 0], odo[:, 1], odo[:, 2])
    truth = None
    if truth_path is not None:
        tr = _load_numeric(truth_path, ["t", "utm_x", "utm_y"])
        if np.any(np.diff(tr[:, 0]) <= 0.0):
            raise NonMonotonicTimestampsError(
                f"{truth_path}: timestamps not strictly increasing")
        truth = TruthTrack(tr[:, 0], tr[:, 1:] - np.asarray(origin))
    if name is None:
        name = os.path.splitext(os.path.basename(gnss_path))[0]
    return Dataset(name, readings, stream, truth, origin)


def run_experiment(dataset: Dataset, config: ExperimentConfig | None = None,
                   trace=None, keep_graph: bool = False):
    """Screen, build, optimize and score one dataset.

    Returns (trajectory, fused_report, raw_report, solve_report) where
    trajectory is the list of (timestamp, Pose2) at accepted fixes.  Raw
    GNSS metrics are computed over all readings, accepted or not, since
    the comparison baseline is the unfiltered receiver output.
    Non-convergence is reported in the SolveReport, not raised.  With
    keep_graph=True the optimized graph is appended as a fifth element.
    """
    cfg = config if config is not None else ExperimentConfig()
    readings = list(dataset.gnss)
    for r in readings:
        r.accepted = True
    rate = 0.0
    if cfg.outlier_rejection:
        result = reject_outliers(readings, dataset.odometry)
        rate = result.rejection_rate
    accepted = [r for r in readings if r.accepted]

    graph = build(accepted, dataset.odometry,
                  BuilderConfig(strategy=cfg.strategy,
                                node_rate=cfg.builder.node_rate,
                                identity_edge_strength=
                                cfg.builder.identity_edge_strength))
    report = optimize(graph, cfg.solver, trace=trace)
    poses = vehicle_trajectory(graph)
    if cfg.builder.node_rate is NodeRate.PER_GNSS_FIX:
        times = [r.timestamp for r in accepted]
    else:
        times = _node_times(accepted, dataset.odometry,
                            NodeRate.PER_ODOMETRY_SAMPLE)
    trajectory = list(zip(times, poses))

    fused_metrics = None
    raw_metrics = None
    if dataset.truth is not None:
        est_t = [t for t, _ in trajectory]
        est_xy = [(p.x, p.y) for _, p in trajectory]
        pairs, _ = match_pps(est_t, est_xy,
                             dataset.truth.timestamps,
                             dataset.truth.positions)
        fused_metrics = compute_metrics(pairs, literal=cfg.metrics_literal,
                                        rejection_rate=rate)
        raw_t = [r.timestamp for r in readings]
        raw_xy = [tuple(r.position) for r in readings]
        raw_pairs, _ = match_pps(raw_t, raw_xy,
                                 dataset.truth.timestamps,
                                 dataset.truth.positions)
        raw_metrics = compute_metrics(raw_pairs,
                                      literal=cfg.metrics_literal,
                                      rejection_rate=0.0)
        try:
            fused_metrics.improvement_vs_gnss = improvements(fused_metrics,
                                                             raw_metrics)
        except DivisionByZeroMetricError:
            # perfect raw GNSS: improvement percentages are undefined
            fused_metrics.improvement_vs_gnss = None
    if keep_graph:
        return trajectory, fused_metrics, raw_metrics, report, graph
    return trajectory, fused_metrics, raw_metrics, report


def export_results(trajectory, fused: MetricsReport | None,
                   raw: MetricsReport | None, solve: SolveReport,
                   out_dir, dataset: Dataset, graph=None) -> list:
    """Write trajectory, metrics record and error scatter to out_dir.

    Returns the list of written paths.  Fails before creating anything
    when the trajectory is empty.
    """
    if not trajectory:
        raise EmptyInputError("refusing to export an empty trajectory")
    os.makedirs(out_dir, exist_ok=True)
    written = []

    traj_path = os.path.join(out_dir, f"{dataset.name}_fused.csv")
    with open(traj_path, "w", newline="") as fh:
        fh.write("t,x,y,theta\n")
        for t, p in trajectory:
            fh.write(f"{_fmt(t)},{_fmt(p.x)},{_fmt(p.y)},{_fmt(p.theta)}\n")
    written.append(traj_path)

    rec_path = os.path.join(out_dir, f"{dataset.name}_metrics.txt")
    with open(rec_path, "w") as fh:
        fh.write(render_metrics_record(dataset.name, fused, raw, solve))
    written.append(rec_path)

    if fused is not None and dataset.truth is not None:
        scatter_path = os.path.join(out_dir, f"{dataset.name}_scatter.csv")
        est_t = [t for t, _ in trajectory]
        est_xy = [(p.x, p.y) for _, p in trajectory]
        prs, _ = match_pps(est_t, est_xy, dataset.truth.timestamps,
                           dataset.truth.positions)
        with open(scatter_path, "w", newline="") as fh:
            fh.write("t,err_x,err_y\n")
            for p in prs:
                fh.write(f"{_fmt(p.timestamp)},"
                         f"{_fmt(p.estimate[0] - p.truth[0])},"
                         f"{_fmt(p.estimate[1] - p.truth[1])}\n")
        written.append(scatter_path)

    if graph is not None:
        gpath = os.path.join(out_dir, f"{dataset.name}_graph.txt")
        save_graph(graph, gpath)
        written.append(gpath)
    return written


def render_metrics_record(name, fused, raw, solve) -> str:
    """Key/value record plus a small fixed-width table, both diffable."""
    lines = [f"dataset: {name}"]
    if solve is not None:
        lines.append(f"converged: {solve.converged}")
        lines.append(f"iterations: {solve.iterations}")
        lines.append(f"initial_error: {_fmt(solve.initial_error)}")
        lines.append(f"final_error: {_fmt(solve.final_error)}")
        lines.append(f"termination: {solve.termination.value}")
    for label, rep in (("fused", fused), ("gnss", raw)):
        if rep is None:
            continue
        lines.append(f"{label}.max_offset: {_fmt(rep.max_offset)}")
        lines.append(f"{label}.accuracy: {_fmt(rep.accuracy)}")
        lines.append(f"{label}.precision: {_fmt(rep.precision)}")
        lines.append(f"{label}.n: {rep.n}")
        if rep.rejection_rate is not None:
            lines.append(f"{label}.rejection_rate: "
                         f"{_fmt(rep.rejection_rate)}")
    if fused is not None and fused.improvement_vs_gnss is not None:
        imp = fused.improvement_vs_gnss
        lines.append(f"improvement.max_offset: {_fmt(imp[0])}")
        lines.append(f"improvement.accuracy: {_fmt(imp[1])}")
        lines.append(f"improvement.precision: {_fmt(imp[2])}")
    if fused is not None and raw is not None:
        lines.append("")
        lines.append(render_table(
            ["row", "Max [m]", "Acc [m]", "Prec [m]"],
            [["fused", fused.max_offset, fused.accuracy, fused.precision],
             ["gnss", raw.max_offset, raw.accuracy, raw.precision]]))
    return "\n".join(lines) + "\n"


def run_batch(datasets, config: ExperimentConfig | None = None,
              strategies=(Strategy.G1, Strategy.G2, Strategy.G3),
              rejections=(True, False)):
    """Run every strategy x rejection combination over the datasets.

    Returns (record, table): a machine key/value record with 17
    significant digits and a human comparison table with per-dataset
    rows, an Average row and an improvement-vs-GNSS row computed from
    the averages (mirroring how published summary tables derive their
    percentage rows).
    """
    base = config if config is not None else ExperimentConfig()
    record = []
    tables = []
    for strat in strategies:
        for rej in rejections:
            cfg = ExperimentConfig(
                strategy=strat, outlier_rejection=rej, solver=base.solver,
                builder=base.builder, seed=base.seed,
                metrics_literal=base.metrics_literal)
            tag = f"{strat.value}.{'on' if rej else 'off'}"
            rows = []
            sums_f = np.zeros(3)
            sums_g = np.zeros(3)
            for ds in datasets:
                _, fused, raw, solve = run_experiment(ds, cfg)
                f = (fused.max_offset, fused.accuracy, fused.precision)
                g = (raw.max_offset, raw.accuracy, raw.precision)
                sums_f += np.asarray(f)
                sums_g += np.asarray(g)
                rows.append([ds.name, *f])
                for metric, val in zip(("max_offset", "accuracy",
                                        "precision"), f):
                    record.append(f"{tag}.{ds.name}.{metric}: {_fmt(val)}")
                record.append(f"{tag}.{ds.name}.converged: "
                              f"{solve.converged}")
                record.append(f"{tag}.{ds.name}.rejection_rate: "
                              f"{_fmt(fused.rejection_rate)}")
            avg_f = sums_f / len(datasets)
            avg_g = sums_g / len(datasets)
            rows.append(["Average", *[float(v) for v in avg_f]])
            for metric, val in zip(("max_offset", "accuracy", "precision"),
                                   avg_f):
                record.append(f"{tag}.Average.{metric}: {_fmt(val)}")
            imp = [100.0 * (g - f) / g if g != 0.0 else float("nan")
                   for f, g in zip(avg_f, avg_g)]
            rows.append(["Improvement w.r.t. GNSS (%)",
                         *[float(v) for v in imp]])
            for metric, val in zip(("max_offset", "accuracy", "precision"),
                                   imp):
                record.append(f"{tag}.improvement.{metric}: {_fmt(val)}")
            tables.append(
                f"strategy={strat.value} rejection="
                f"{'on' if rej else 'off'}\n"
                + render_table(["dataset", "Max [m]", "Acc [m]",
                                "Prec [m]"], rows))
    return "\n".join(record) + "\n", "\n\n".join(tables) + "\n"


def render_table(header, rows) -> str:
    """Fixed-width text table; numbers with 3 decimals."""
    def cell(v):
        return f"{v:.3f}" if isinstance(v, float) else str(v)

    grid = [header] + [[cell(v) for v in row] for row in rows]
    widths = [max(len(r[c]) for r in grid) for c in range(len(header))]
    out = []
    for r, row in enumerate(grid):
        out.append("  ".join(s.rjust(w) for s, w in zip(row, widths)))
        if r == 0:
            out.append("  ".join("-" * w for w in widths))
    return "\n".join(out)
