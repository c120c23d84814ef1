"""GNSS reading model: UTM projection, per-fix information matrices and
screening of implausible fixes against integrated odometry.

A fix carries receiver-reported 95% accuracy bounds epx/epy (and epv,
stored but unused in this planar system).  Its information matrix is
diag((epx/2)^-2, (epy/2)^-2, 0): position rows weighted by the implied
standard deviation, heading row zero because a position fix says nothing
about orientation.

Screening compares each candidate fix against the last accepted one: the
GNSS displacement must agree with the odometry arc length within 15 m and
the GNSS bearing change (needing two prior accepted fixes) must agree
with the integrated yaw within 1.5 degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientCoverageError, NonMonotonicTimestampsError, \
    OutOfUtmDomainError
from .odometry import OdometryStream, preintegrate
from .se2 import wrap_angle

HEADING_TOLERANCE_DEG = 1.5
DISPLACEMENT_TOLERANCE_M = 15.0
# below this leg length a bearing is numerically meaningless (standstill)
STANDSTILL_DISPLACEMENT_M = 0.5

# WGS-84 ellipsoid and the universal transverse Mercator scale factor
_WGS84_A = 6378137.0
_WGS84_F = 1.0 / 298.257223563
_E2 = _WGS84_F * (2.0 - _WGS84_F)
_EP2 = _E2 / (1.0 - _E2)
_K0 = 0.9996
_FALSE_EASTING = 500000.0
_FALSE_NORTHING_SOUTH = 10000000.0


@dataclass
class GnssReading:
    timestamp: float
    position: np.ndarray
    epx: float
    epy: float
    epv: float = 0.0
    accepted: bool = True

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        if self.position.shape != (2,):
            raise ValueError("position must be a 2-vector (utm_x, utm_y)")
        if not np.all(np.isfinite(self.position)):
            raise ValueError("position must be finite")
        if not (self.epx > 0.0 and self.epy > 0.0):
            raise ValueError("epx and epy must be positive")


def latlon_to_utm(latitude: float, longitude: float):
    """Project WGS-84 geographic coordinates to UTM.

    Returns (easting, northing, zone) with the zone identifier like
    "32N"; the natural zone of the point is always used (no Norway or
    Svalbard exceptions).  Southern-hemisphere points get the 10000 km
    false northing.  Standard transverse Mercator series, good to well
    under a centimeter inside the zone.
    """
    if abs(latitude) > 84.0:
        raise OutOfUtmDomainError(
            f"latitude {latitude:g} outside the UTM domain (|lat| <= 84)")
    lon = math.fmod(longitude + 180.0, 360.0)
    if lon < 0.0:
        lon += 360.0
    lon -= 180.0
    zone = min(int((lon + 180.0) // 6.0) + 1, 60)
    lon0 = math.radians(zone * 6 - 183)

    phi = math.radians(latitude)
    lam = math.radians(lon)
    sin_phi = math.sin(phi)
    cos_phi = math.cos(phi)
    tan_phi = math.tan(phi)

    n_rad = _WGS84_A / math.sqrt(1.0 - _E2 * sin_phi * sin_phi)
    t = tan_phi * tan_phi
    c = _EP2 * cos_phi * cos_phi
    a_par = cos_phi * (lam - lon0)

    e2 = _E2
    e4 = e2 * e2
    e6 = e4 * e2
    m = _WGS84_A * (
        (1.0 - e2 / 4.0 - 3.0 * e4 / 64.0 - 5.0 * e6 / 256.0) * phi
        - (3.0 * e2 / 8.0 + 3.0 * e4 / 32.0 + 45.0 * e6 / 1024.0)
        * math.sin(2.0 * phi)
        + (15.0 * e4 / 256.0 + 45.0 * e6 / 1024.0) * math.sin(4.0 * phi)
        - (35.0 * e6 / 3072.0) * math.sin(6.0 * phi))

    a2 = a_par * a_par
    a3 = a2 * a_par
    a4 = a2 * a2
    a5 = a4 * a_par
    a6 = a4 * a2
    easting = _K0 * n_rad * (
        a_par + (1.0 - t + c) * a3 / 6.0
        + (5.0 - 18.0 * t + t * t + 72.0 * c - 58.0 * _EP2) * a5 / 120.0
    ) + _FALSE_EASTING
    northing = _K0 * (
        m + n_rad * tan_phi * (
            a2 / 2.0 + (5.0 - t + 9.0 * c + 4.0 * c * c) * a4 / 24.0
            + (61.0 - 58.0 * t + t * t + 600.0 * c - 330.0 * _EP2)
            * a6 / 720.0))
    if latitude < 0.0:
        northing += _FALSE_NORTHING_SOUTH
    hemisphere = "N" if latitude >= 0.0 else "S"
    return easting, northing, f"{zone}{hemisphere}"


def gnss_information(reading: GnssReading) -> np.ndarray:
    """Information matrix of one fix: diag((epx/2)^-2, (epy/2)^-2, 0)."""
    return np.diag([(reading.epx / 2.0) ** -2.0,
                    (reading.epy / 2.0) ** -2.0, 0.0])


@dataclass
class RejectionResult:
    readings: list
    rejection_rate: float
    uncovered: int


def reject_outliers(readings, odo,
                    heading_tol_deg: float = HEADING_TOLERANCE_DEG,
                    displacement_tol_m: float = DISPLACEMENT_TOLERANCE_M
                    ) -> RejectionResult:
    """Flag fixes whose motion disagrees with the integrated odometry.

    Each candidate is compared against the last accepted fix: both the
    displacement test (GNSS distance vs odometry arc length, 15 m) and
    the bearing-change test (vs integrated yaw, 1.5 deg) must pass.  The
    bearing test needs two prior accepted fixes and legs of at least
    0.5 m on both sides, otherwise it is skipped.  The first reading is
    accepted by default.  Fixes whose window the odometry does not cover
    are rejected and counted separately in the result.

    The readings' accepted flags are set in place; the result carries the
    same list plus the rejection rate in percent.
    """
    readings = list(readings)
    stream = odo if isinstance(odo, OdometryStream) \
        else OdometryStream.from_samples(odo)
    ts = [r.timestamp for r in readings]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise NonMonotonicTimestampsError(
            "GNSS timestamps must be strictly increasing")

    heading_tol = math.radians(heading_tol_deg)
    prev = None
    prevprev = None
    rejected = 0
    uncovered = 0
    for reading in readings:
        if prev is None:
            reading.accepted = True
            prev = reading
            continue
        try:
            pre = preintegrate(stream, prev.timestamp, reading.timestamp)
        except InsufficientCoverageError:
            reading.accepted = False
            rejected += 1
            uncovered += 1
            continue
        leg = reading.position - prev.position
        disp = float(np.hypot(leg[0], leg[1]))
        ok = abs(disp - pre.arc_length) < displacement_tol_m
        if ok and prevprev is not None:
            prior = prev.position - prevprev.position
            prior_disp = float(np.hypot(prior[0], prior[1]))
            if prior_disp >= STANDSTILL_DISPLACEMENT_M \
                    and disp >= STANDSTILL_DISPLACEMENT_M:
                bearing_change = math.atan2(leg[1], leg[0]) \
                    - math.atan2(prior[1], prior[0])
                err = wrap_angle(bearing_change - pre.heading_change)
                ok = abs(err) < heading_tol
        reading.accepted = ok
        if ok:
            prevprev = prev
            prev = reading
        else:
            rejected += 1
    rate = 100.0 * rejected / len(readings) if readings else 0.0
    return RejectionResult(readings, rate, uncovered)
