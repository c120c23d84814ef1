"""UTM projection, per-fix information weighting and outlier screening."""

import math

import numpy as np
import pytest

from helpers import utm_krueger
from se2fusion.errors import NonMonotonicTimestampsError, OutOfUtmDomainError
from se2fusion.gnss import GnssReading, gnss_information, latlon_to_utm, \
    reject_outliers
from se2fusion.odometry import OdometryStream


def test_zone31_equator_central_meridian():
    easting, northing, zone = latlon_to_utm(0.0, 3.0)
    assert easting == pytest.approx(500000.0, abs=1e-6)
    assert northing == pytest.approx(0.0, abs=1e-6)
    assert zone == "31N"


def test_matches_high_precision_oracle():
    points = [
        (48.137154, 11.576124),
        (40.712800, -74.006000),
        (-33.868800, 151.209300),
        (63.430500, 10.395100),
        (1.352100, 103.819800),
        (-54.801900, -68.303000),
        (83.500000, -30.000000),
    ]
    for lat, lon in points:
        easting, northing, _ = latlon_to_utm(lat, lon)
        oe, on = utm_krueger(lat, lon)
        assert easting == pytest.approx(oe, abs=0.01)
        assert northing == pytest.approx(on, abs=0.01)


def test_projection_is_deterministic():
    a = latlon_to_utm(48.1, 11.6)
    b = latlon_to_utm(48.1, 11.6)
    assert a[0] == b[0] and a[1] == b[1] and a[2] == b[2]


def test_polar_latitudes_rejected():
    with pytest.raises(OutOfUtmDomainError):
        latlon_to_utm(85.0, 10.0)
    with pytest.raises(OutOfUtmDomainError):
        latlon_to_utm(-84.5, 10.0)
    latlon_to_utm(84.0, 10.0)
    latlon_to_utm(-84.0, 10.0)


def test_zone_identifiers():
    assert latlon_to_utm(52.5, 13.4)[2] == "33N"
    assert latlon_to_utm(-33.9, 18.4)[2] == "34S"
    assert latlon_to_utm(10.0, 179.9)[2] == "60N"
    assert latlon_to_utm(10.0, -179.9)[2] == "1N"


def test_southern_hemisphere_false_northing():
    _, northing_n, _ = latlon_to_utm(0.001, 20.0)
    _, northing_s, _ = latlon_to_utm(-0.001, 20.0)
    assert northing_s > 9.99e6
    assert northing_n < 1000.0


def test_information_from_reported_accuracy():
    r = GnssReading(0.0, (0.0, 0.0), epx=2.0, epy=2.0)
    assert np.allclose(gnss_information(r), np.diag([1.0, 1.0, 0.0]))
    r = GnssReading(0.0, (0.0, 0.0), epx=4.0, epy=2.0)
    assert gnss_information(r)[0, 0] == pytest.approx(0.25)
    r = GnssReading(0.0, (0.0, 0.0), epx=1.0, epy=3.0)
    assert np.allclose(gnss_information(r),
                       np.diag([4.0, 4.0 / 9.0, 0.0]))


def test_information_never_constrains_heading():
    rng = np.random.default_rng(7)
    for _ in range(100):
        r = GnssReading(0.0, (0.0, 0.0), epx=rng.uniform(0.1, 30.0),
                        epy=rng.uniform(0.1, 30.0))
        info = gnss_information(r)
        assert info[2, 2] == 0.0
        assert info[0, 0] > 0.0 and info[1, 1] > 0.0


def test_reading_validation():
    with pytest.raises(ValueError):
        GnssReading(0.0, (0.0, 0.0), epx=0.0, epy=1.0)
    with pytest.raises(ValueError):
        GnssReading(0.0, (0.0, 0.0), epx=1.0, epy=-2.0)
    with pytest.raises(ValueError):
        GnssReading(0.0, (np.nan, 0.0), epx=1.0, epy=1.0)
    with pytest.raises(ValueError):
        GnssReading(0.0, (1.0, 2.0, 3.0), epx=1.0, epy=1.0)


def _straight_drive(n_fixes, speed=10.0):
    """Fixes each second along +x with a matching 25 Hz odometry stream."""
    t = np.arange(0.0, float(n_fixes), 0.04)
    stream = OdometryStream(t, np.zeros_like(t), np.full_like(t, speed))
    readings = [GnssReading(float(k), (speed * k, 0.0), 2.0, 2.0)
                for k in range(n_fixes)]
    return readings, stream


def test_consistent_fixes_all_accepted():
    readings, stream = _straight_drive(20)
    result = reject_outliers(readings, stream)
    assert all(r.accepted for r in result.readings)
    assert result.rejection_rate == 0.0
    assert result.uncovered == 0


def test_displacement_jump_rejected():
    readings, stream = _straight_drive(6)
    readings[3] = GnssReading(3.0, (30.0 + 40.0, 0.0), 2.0, 2.0)
    result = reject_outliers(readings, stream)
    assert not result.readings[3].accepted
    assert result.rejection_rate == pytest.approx(100.0 / 6.0)


def test_heading_discrepancy_rejected():
    readings, stream = _straight_drive(6)
    # keep the displacement but swing the bearing by 2 degrees
    leg = 10.0
    bad = (20.0 + leg * math.cos(math.radians(2.0)),
           leg * math.sin(math.radians(2.0)))
    readings[3] = GnssReading(3.0, bad, 2.0, 2.0)
    result = reject_outliers(readings, stream)
    assert not result.readings[3].accepted
    # 1.4 degrees stays inside the tolerance
    ok = (20.0 + leg * math.cos(math.radians(1.4)),
          leg * math.sin(math.radians(1.4)))
    readings, stream = _straight_drive(6)
    readings[3] = GnssReading(3.0, ok, 2.0, 2.0)
    result = reject_outliers(readings, stream)
    assert result.readings[3].accepted


def test_first_reading_accepted_by_default():
    readings, stream = _straight_drive(4)
    readings[0] = GnssReading(0.0, (-900.0, 400.0), 2.0, 2.0)
    result = reject_outliers(readings, stream)
    assert result.readings[0].accepted


def test_rejection_anchor_stays_at_last_accepted():
    readings, stream = _straight_drive(5)
    readings[2] = GnssReading(2.0, (500.0, 0.0), 2.0, 2.0)
    result = reject_outliers(readings, stream)
    flags = [r.accepted for r in result.readings]
    # fix 3 is compared against fix 1 over a two-second window: the GNSS
    # displacement is 20 m and so is the odometry arc, so it survives
    assert flags == [True, True, False, True, True]


def test_corrupted_subset_exactly_flagged():
    readings, stream = _straight_drive(60)
    corrupt = {7, 23, 41}
    for k in corrupt:
        pos = (10.0 * k, 50.0)
        readings[k] = GnssReading(float(k), pos, 2.0, 2.0)
    result = reject_outliers(readings, stream)
    flagged = {k for k, r in enumerate(result.readings) if not r.accepted}
    assert flagged == corrupt
    assert result.rejection_rate == pytest.approx(100.0 * 3 / 60)


def test_uncovered_windows_counted():
    readings, _ = _straight_drive(5)
    t = np.arange(0.0, 2.0, 0.04)
    short = OdometryStream(t, np.zeros_like(t), np.full_like(t, 10.0))
    result = reject_outliers(readings, short)
    flags = [r.accepted for r in result.readings]
    assert flags == [True, True, True, False, False]
    assert result.uncovered == 2
    assert result.rejection_rate == pytest.approx(40.0)


def test_standstill_skips_bearing_test():
    n = 8
    t = np.arange(0.0, float(n), 0.04)
    stream = OdometryStream(t, np.zeros_like(t), np.zeros_like(t))
    rng = np.random.default_rng(3)
    readings = []
    for k in range(n):
        jitter = rng.uniform(-0.1, 0.1, size=2)
        readings.append(GnssReading(float(k), jitter, 2.0, 2.0))
    result = reject_outliers(readings, stream)
    # bearings between sub-half-meter legs are noise, only displacement
    # is checked, and 0.2 m against a zero arc passes easily
    assert all(r.accepted for r in result.readings)


def test_flags_are_set_in_place():
    readings, stream = _straight_drive(6)
    readings[3] = GnssReading(3.0, (600.0, 0.0), 2.0, 2.0)
    result = reject_outliers(readings, stream)
    assert readings[3].accepted is False
    assert result.readings[3] is readings[3]


def test_threshold_overrides():
    readings, stream = _straight_drive(6)
    readings[3] = GnssReading(3.0, (30.0 + 5.0, 0.0), 2.0, 2.0)
    assert reject_outliers(readings, stream).readings[3].accepted
    for r in readings:
        r.accepted = True
    result = reject_outliers(readings, stream, displacement_tol_m=4.0)
    assert not result.readings[3].accepted


def test_non_monotonic_fixes_raise():
    readings, stream = _straight_drive(4)
    readings[2] = GnssReading(1.0, (20.0, 0.0), 2.0, 2.0)
    with pytest.raises(NonMonotonicTimestampsError):
        reject_outliers(readings, stream)


def test_rejection_is_deterministic():
    def run():
        readings, stream = _straight_drive(30)
        readings[11] = GnssReading(11.0, (110.0, 80.0), 2.0, 2.0)
        readings[17] = GnssReading(17.0, (170.0, -60.0), 2.0, 2.0)
        result = reject_outliers(readings, stream)
        return [r.accepted for r in result.readings], result.rejection_rate

    first = run()
    second = run()
    assert first == second
