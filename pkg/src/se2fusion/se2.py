"""SE(2) pose algebra: composition, exp/log charts, edge residuals and Jacobians.

A pose is (x, y, theta) with theta always stored in (-pi, pi].  Tangent
vectors are length-3 numpy arrays (dx, dy, dtheta) expressed in the body
frame.  Local perturbations are applied on the right throughout the
codebase:

    x (+) delta = compose(x, exp_map(delta))

and the residual of an edge with measurement zij between poses xi, xj is

    e = log_map(inverse(zij) * inverse(xi) * xj)

Jacobians returned by edge_jacobians are consistent with that retraction,
which is what the solver differentiates against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# Below this heading magnitude the sin(t)/t style ratios switch to their
# 4th-order Taylor expansions; direct evaluation loses digits to cancellation.
SMALL_ANGLE = 1e-4

Tangent3 = np.ndarray
"""Body-frame increment (dx, dy, dtheta); plain length-3 float array."""


def wrap_angle(theta: float) -> float:
    """Map an angle onto the half-open interval (-pi, pi]."""
    r = math.fmod(theta + math.pi, TWO_PI)
    if r <= 0.0:
        r += TWO_PI
    return r - math.pi


@dataclass(frozen=True)
class Pose2:
    """A planar rigid-body pose. The heading is normalized on construction."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])


IDENTITY = Pose2(0.0, 0.0, 0.0)


def compose(a: Pose2, b: Pose2) -> Pose2:
    """Group product a*b: b interpreted in a's frame."""
    c = math.cos(a.theta)
    s = math.sin(a.theta)
    return Pose2(a.x + c * b.x - s * b.y,
                 a.y + s * b.x + c * b.y,
                 a.theta + b.theta)


def inverse(a: Pose2) -> Pose2:
    """Group inverse: compose(a, inverse(a)) is the identity."""
    c = math.cos(a.theta)
    s = math.sin(a.theta)
    return Pose2(-(c * a.x + s * a.y), s * a.x - c * a.y, -a.theta)


def _sin_ratios(t: float) -> tuple[float, float]:
    # A = sin(t)/t, B = (1 - cos(t))/t
    if abs(t) < SMALL_ANGLE:
        t2 = t * t
        return 1.0 - t2 / 6.0 * (1.0 - t2 / 20.0), 0.5 * t * (1.0 - t2 / 12.0)
    return math.sin(t) / t, (1.0 - math.cos(t)) / t


def _half_cot(t: float) -> float:
    # f(t) = (t/2) / tan(t/2), the diagonal of the inverse translation factor
    if abs(t) < SMALL_ANGLE:
        t2 = t * t
        return 1.0 - t2 / 12.0 - t2 * t2 / 720.0
    return 0.5 * t / math.tan(0.5 * t)


def _half_cot_prime(t: float) -> float:
    # derivative of _half_cot, needed by the log-map Jacobian
    if abs(t) < SMALL_ANGLE:
        return -t / 6.0 - t * t * t / 180.0
    hs = math.sin(0.5 * t)
    return 0.5 / math.tan(0.5 * t) - 0.25 * t / (hs * hs)


def exp_map(v: Tangent3) -> Pose2:
    """Exponential chart: map a body-frame increment onto the group."""
    dx = float(v[0])
    dy = float(v[1])
    dt = float(v[2])
    a, b = _sin_ratios(dt)
    return Pose2(a * dx - b * dy, b * dx + a * dy, dt)


def log_map(p: Pose2) -> Tangent3:
    """Logarithm chart, the exact inverse of exp_map on (-pi, pi].

    The translation part is V(theta)^-1 @ (x, y) where V is the usual
    SE(2) translation factor; its inverse has the closed form
    [[f, t/2], [-t/2, f]] with f = (t/2)/tan(t/2).
    """
    f = _half_cot(p.theta)
    h = 0.5 * p.theta
    return np.array([f * p.x + h * p.y, -h * p.x + f * p.y, p.theta])


def retract(x: Pose2, delta: Tangent3) -> Pose2:
    """Apply a tangent increment on the right of x (the solver update)."""
    return compose(x, exp_map(delta))


def edge_residual(xi: Pose2, xj: Pose2, zij: Pose2) -> Tangent3:
    """Tangent-space mismatch between the measured and the implied relative pose."""
    return log_map(compose(inverse(zij), compose(inverse(xi), xj)))


def _log_jacobian(p: Pose2) -> np.ndarray:
    # coordinate Jacobian of log_map at p
    f = _half_cot(p.theta)
    fp = _half_cot_prime(p.theta)
    return np.array([
        [f, 0.5 * p.theta, fp * p.x + 0.5 * p.y],
        [-0.5 * p.theta, f, -0.5 * p.x + fp * p.y],
        [0.0, 0.0, 1.0],
    ])


def edge_jacobians(xi: Pose2, xj: Pose2,
                   zij: Pose2) -> tuple[np.ndarray, np.ndarray]:
    """Analytic derivatives of edge_residual w.r.t. right perturbations.

    Returns (d e / d xi, d e / d xj), both 3x3, for perturbations applied
    as x <- compose(x, exp_map(delta)).  Derived by chaining the coordinate
    Jacobians of the group product with the log-map Jacobian; verified
    against central finite differences in the test suite.
    """
    d = compose(inverse(xi), xj)
    e_group = compose(inverse(zij), d)
    L = _log_jacobian(e_group)

    # right-composition by exp(delta) at the identity rotates the increment
    # by the residual element's heading
    ce = math.cos(e_group.theta)
    se = math.sin(e_group.theta)
    Jj = L @ np.array([[ce, -se, 0.0], [se, ce, 0.0], [0.0, 0.0, 1.0]])

    # xi enters through inverse(xi): an increment delta on xi becomes
    # exp(-delta) left-multiplied onto d, then carried through inverse(zij)
    cz = math.cos(zij.theta)
    sz = math.sin(zij.theta)
    rot_zinv = np.array([[cz, sz, 0.0], [-sz, cz, 0.0], [0.0, 0.0, 1.0]])
    shift = np.array([[1.0, 0.0, -d.y], [0.0, 1.0, d.x], [0.0, 0.0, 1.0]])
    Ji = -(L @ rot_zinv @ shift)
    return Ji, Jj
