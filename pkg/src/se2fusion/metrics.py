"""Trajectory quality metrics against RTK ground truth.

All metrics operate on PPS-aligned (estimate, truth) pose pairs. Offsets
estimate minus truth. Three scalar metrics:

* max_offset: largest Euclidean offset over the set.
* accuracy: Euclidean norm of the signed mean offset (the bias).
* precision: dispersion of the offsets about the mean offset, with the
  1/(n-1) sample normalization.

precision() has a second, literal reading in which the mean offset is
subtracted from the estimate coordinates themselves rather than from the
offsets; it is exposed behind literal=True and the --metrics-literal CLI
flag. The default follows the dispersion-about-mean-offset reading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivisionByZeroMetricError, EmptyInputError, \
    NeedTwoPosesError

PPS_MATCH_TOLERANCE_S = 0.05


@dataclass(frozen=True)
class PpsPose:
    timestamp: float
    estimate: tuple
    truth: tuple


@dataclass
class MetricsReport:
    max_offset: float
    accuracy: float
    precision: float
    mean_offset: tuple
    n: int
    rejection_rate: float | None = None
    improvement_vs_gnss: tuple | None = None


def _offsets(poses) -> np.ndarray:
    est = np.array([p.estimate for p in poses], dtype=float)
    tru = np.array([p.truth for p in poses], dtype=float)
    return est - tru


def max_offset(poses) -> float:
    """Largest Euclidean estimate-truth distance over the set."""
    if not poses:
        raise EmptyInputError("no poses to evaluate")
    off = _offsets(poses)
    return float(np.max(np.hypot(off[:, 0], off[:, 1])))


def accuracy(poses):
    """Norm of the signed mean offset; returns (value, (mu_x, mu_y))."""
    if not poses:
        raise EmptyInputError("no poses to evaluate")
    off = _offsets(poses)
    mu = off.mean(axis=0)
    return float(np.hypot(mu[0], mu[1])), (float(mu[0]), float(mu[1]))


def precision(poses, literal: bool = False) -> float:
    """Sample dispersion sqrt(sum(D_i^2) / (n-1)).

    D_i defaults to the distance of each offset from the mean offset.
    With literal=True, D_i is instead the distance of each estimate
    coordinate from the mean offset (no truth subtraction), which is the
    alternative printed-formula reading.
    """
    if len(poses) < 2:
        raise NeedTwoPosesError("precision needs at least two poses")
    off = _offsets(poses)
    mu = off.mean(axis=0)
    if literal:
        est = np.array([p.estimate for p in poses], dtype=float)
        d = est - mu
    else:
        d = off - mu
    return float(math.sqrt(np.sum(d * d) / (len(poses) - 1)))


def improvements(fused: MetricsReport, gnss: MetricsReport):
    """Percent improvement of fused over raw GNSS per metric.

    100 * (gnss - fused) / gnss for max_offset, accuracy and precision;
    positive numbers mean the fused estimate is better.
    """
    out = []
    for name in ("max_offset", "accuracy", "precision"):
        g = getattr(gnss, name)
        f = getattr(fused, name)
        if g == 0.0:
            raise DivisionByZeroMetricError(
                f"raw GNSS {name} is zero; improvement undefined")
        out.append(100.0 * (g - f) / g)
    return tuple(out)


def match_pps(est_times, est_positions, truth_times, truth_positions,
              tolerance: float = PPS_MATCH_TOLERANCE_S):
    """Pair estimates with the nearest ground-truth sample in time.

    Returns (pairs, dropped): PpsPose list for estimates having a truth
    sample within the tolerance, and the count of estimates that had
    none.
    """
    est_times = np.asarray(est_times, dtype=float)
    est_positions = np.asarray(est_positions, dtype=float)
    truth_times = np.asarray(truth_times, dtype=float)
    truth_positions = np.asarray(truth_positions, dtype=float)
    pairs = []
    dropped = 0
    idx = np.searchsorted(truth_times, est_times)
    for k, t in enumerate(est_times):
        best = None
        for j in (idx[k] - 1, idx[k]):
            if 0 <= j < truth_times.size:
                dt = abs(float(truth_times[j] - t))
                if best is None or dt < best[0]:
                    best = (dt, j)
        if best is None or best[0] > tolerance:
            dropped += 1
            continue
        j = best[1]
        pairs.append(PpsPose(float(t),
                             (float(est_positions[k, 0]),
                              float(est_positions[k, 1])),
                             (float(truth_positions[j, 0]),
                              float(truth_positions[j, 1]))))
    return pairs, dropped


def compute_metrics(poses, literal: bool = False,
                    rejection_rate: float | None = None) -> MetricsReport:
    """Bundle the three metrics over one matched pose set."""
    acc, mu = accuracy(poses)
    return MetricsReport(
        max_offset=max_offset(poses), accuracy=acc,
        precision=precision(poses, literal=literal), mean_offset=mu,
        n=len(poses), rejection_rate=rejection_rate)
