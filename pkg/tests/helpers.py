"""Independent oracles backing the test suite.

Every routine here recomputes a package result along a different route
(dense instead of sparse algebra, finite differences instead of analytic
calculus, a different projection series, literal formula transcriptions)
so that agreement between package and oracle is evidence, not tautology.
Oracles intentionally avoid importing the module they check wherever the
algorithm itself is under test; shared primitives (Pose2 composition)
are reused only where the primitive has its own independent oracle.
"""

import math

import numpy as np

from se2fusion.se2 import Pose2, compose, exp_map, inverse, edge_residual


# ---------------------------------------------------------------------------
# SE(2) via homogeneous 3x3 matrices (oracle for compose/inverse)

def homogeneous(p):
    c, s = math.cos(p.theta), math.sin(p.theta)
    return np.array([[c, -s, p.x], [s, c, p.y], [0.0, 0.0, 1.0]])


def from_homogeneous(T):
    return Pose2(T[0, 2], T[1, 2], math.atan2(T[1, 0], T[0, 0]))


# ---------------------------------------------------------------------------
# Central finite differences of the edge residual

def fd_edge_jacobians(xi, xj, zij, h=1e-6):
    Ji = np.zeros((3, 3))
    Jj = np.zeros((3, 3))
    for k in range(3):
        d = np.zeros(3)
        d[k] = h
        rp = edge_residual(compose(xi, exp_map(d)), xj, zij)
        rm = edge_residual(compose(xi, exp_map(-d)), xj, zij)
        Ji[:, k] = (rp - rm) / (2.0 * h)
        rp = edge_residual(xi, compose(xj, exp_map(d)), zij)
        rm = edge_residual(xi, compose(xj, exp_map(-d)), zij)
        Jj[:, k] = (rp - rm) / (2.0 * h)
    return Ji, Jj


# ---------------------------------------------------------------------------
# Dense brute-force solver (same update rules, dense algebra, no sparsity)

def dense_system(graph):
    """Full normal equations over free nodes by explicit block loops."""
    from se2fusion.se2 import edge_jacobians

    free = [n.id for n in graph.nodes if not n.fixed]
    col = {nid: 3 * k for k, nid in enumerate(free)}
    m = 3 * len(free)
    H = np.zeros((m, m))
    b = np.zeros(m)
    chi = 0.0
    for edge in graph.edges:
        xi = graph.nodes[edge.from_id].pose
        xj = graph.nodes[edge.to_id].pose
        e = edge_residual(xi, xj, edge.measurement)
        Ji, Jj = edge_jacobians(xi, xj, edge.measurement)
        omega = edge.information
        chi += float(e @ omega @ e)
        blocks = []
        if edge.from_id in col:
            blocks.append((col[edge.from_id], Ji))
        if edge.to_id in col:
            blocks.append((col[edge.to_id], Jj))
        for ca, Ja in blocks:
            b[ca:ca + 3] -= Ja.T @ omega @ e
            for cb, Jb in blocks:
                H[ca:ca + 3, cb:cb + 3] += Ja.T @ omega @ Jb
    return H, b, chi, free


def _dense_solve(H, b):
    lam = 0.0
    damp = np.where(np.diag(H) > 0.0, np.diag(H), 1.0)
    for _ in range(8):
        try:
            delta = np.linalg.solve(H + lam * np.diag(damp), b)
        except np.linalg.LinAlgError:
            delta = None
        if delta is not None and np.all(np.isfinite(delta)) \
                and np.linalg.norm(H @ delta - b) <= 1e-6 * (np.linalg.norm(b) + 1.0):
            return delta
        lam = 1e-9 if lam == 0.0 else lam * 10.0
    raise np.linalg.LinAlgError("dense normal equations unsolvable")


def dense_dogleg_combine(gn, cauchy, b, radius):
    gn_norm = float(np.linalg.norm(gn))
    if gn_norm <= radius:
        return gn
    c_norm = float(np.linalg.norm(cauchy))
    bnorm = float(np.linalg.norm(b))
    if c_norm >= radius:
        if bnorm == 0.0:
            return np.zeros_like(b)
        return (radius / bnorm) * b
    d = gn - cauchy
    a = float(d @ d)
    bq = 2.0 * float(cauchy @ d)
    c = c_norm * c_norm - radius * radius
    t = (-bq + math.sqrt(bq * bq - 4.0 * a * c)) / (2.0 * a)
    return cauchy + t * d


def dogleg_rootfind(H, b, radius):
    """Boundary point of the dogleg path by 1-D root finding.

    Walks 0 -> Cauchy -> Gauss-Newton and brackets the radius crossing
    with brentq instead of solving the boundary quadratic in closed form.
    Only valid when the Gauss-Newton step lies outside the trust region.
    """
    from scipy.optimize import brentq

    H = np.asarray(H)
    gn = np.linalg.solve(H, b)
    bb = float(b @ b)
    bHb = float(b @ H @ b)
    cauchy = (bb / bHb) * b if bHb > 0.0 else np.zeros_like(b)
    c_norm = float(np.linalg.norm(cauchy))
    if c_norm >= radius:
        t = brentq(lambda s: np.linalg.norm(s * cauchy) - radius, 0.0, 1.0,
                   xtol=1e-15)
        return t * cauchy
    d = gn - cauchy
    t = brentq(lambda s: np.linalg.norm(cauchy + s * d) - radius, 0.0, 1.0,
               xtol=1e-15)
    return cauchy + t * d


def _apply(graph, free, delta):
    saved = []
    for k, nid in enumerate(free):
        saved.append(graph.nodes[nid].pose)
        graph.nodes[nid].pose = compose(graph.nodes[nid].pose,
                                        exp_map(delta[3 * k:3 * k + 3]))
    return saved


def _snapshot(graph, free):
    return np.array([graph.nodes[n].pose.as_array() for n in free])


def dense_optimize(graph, max_iterations=100, radius=1e4,
                   abs_tol=1e-9, rel_tol=1e-9, step_tol=1e-9,
                   record_steps=None):
    """Dogleg to convergence with dense algebra only.

    Follows the same update rules as the production solver (accept when
    the error drops and the model predicts a drop, gain-ratio thresholds
    0.25/0.75 with shrink x0.5 / grow x2, reject always halves) so the two
    implementations must walk the same iterate path; assembly, the linear
    solve, and bookkeeping are all plain dense numpy. Mutates the graph
    in place like the production solver. Returns True on convergence.
    """
    for _ in range(max_iterations):
        H, b, chi, free = dense_system(graph)
        gn = _dense_solve(H, b)
        bb = float(b @ b)
        bHb = float(b @ H @ b)
        cauchy = (bb / bHb) * b if bHb > 0.0 else np.zeros_like(b)
        while True:
            delta = dense_dogleg_combine(gn, cauchy, b, radius)
            step = float(np.linalg.norm(delta))
            if step <= step_tol:
                new_chi = chi
                break
            saved = _apply(graph, free, delta)
            _, _, trial, _ = dense_system(graph)
            predicted = 2.0 * float(b @ delta) - float(delta @ H @ delta)
            if trial < chi and predicted > 0.0:
                rho = (chi - trial) / predicted
                if rho < 0.25:
                    radius *= 0.5
                elif rho > 0.75:
                    radius *= 2.0
                new_chi = trial
                break
            for k, nid in enumerate(free):
                graph.nodes[nid].pose = saved[k]
            radius *= 0.5
            if radius < 1e-12:
                return False
        if record_steps is not None:
            record_steps.append(_snapshot(graph, free))
        decrease = chi - new_chi
        if new_chi <= abs_tol or (0.0 <= decrease <= rel_tol * chi) \
                or step <= step_tol:
            return True
    return False


# ---------------------------------------------------------------------------
# Fine-step quadrature oracle for odometry pre-integration

def integrate_fine(times, yaw_rates, velocities, t0, t1, n=100001):
    """Integrate interpolated rates on a dense uniform grid.

    Heading by cumulative trapezoid of yaw rate, translation by trapezoid
    of v*cos(theta), v*sin(theta): a different discretization family than
    the closed-form per-interval rule under test.
    """
    tq = np.linspace(t0, t1, n)
    w = np.interp(tq, times, yaw_rates)
    v = np.interp(tq, times, velocities)
    dt = np.diff(tq)
    theta = np.concatenate(([0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * dt)))
    cx = v * np.cos(theta)
    cy = v * np.sin(theta)
    dx = float(np.sum(0.5 * (cx[1:] + cx[:-1]) * dt))
    dy = float(np.sum(0.5 * (cy[1:] + cy[:-1]) * dt))
    arc = float(np.sum(0.5 * (np.abs(v[1:]) + np.abs(v[:-1])) * dt))
    return dx, dy, float(theta[-1]), arc


# ---------------------------------------------------------------------------
# Transverse Mercator oracle: Krueger n-series (6th order)

_WGS84_A = 6378137.0
_WGS84_F = 1.0 / 298.257223563
_K0 = 0.9996


def utm_krueger(lat_deg, lon_deg):
    """Project via the Krueger n-series with conformal latitude.

    Sixth-order expansion in the third flattening; sub-millimeter inside
    a UTM zone, an entirely different series family from the package's
    longitude-power expansion. Returns (easting, northing) for the
    point's natural zone with standard false easting/northing.
    """
    e2 = _WGS84_F * (2.0 - _WGS84_F)
    e = math.sqrt(e2)
    n = _WGS84_F / (2.0 - _WGS84_F)

    zone = min(int((lon_deg + 180.0) // 6.0) + 1, 60)
    lon0 = math.radians(6.0 * zone - 183.0)
    phi = math.radians(lat_deg)
    dlon = math.radians(lon_deg) - lon0

    t = math.tan(phi)
    sigma = math.sinh(e * math.atanh(e * t / math.sqrt(1.0 + t * t)))
    tp = t * math.sqrt(1.0 + sigma * sigma) - sigma * math.sqrt(1.0 + t * t)
    xip = math.atan2(tp, math.cos(dlon))
    etap = math.asinh(math.sin(dlon) / math.hypot(tp, math.cos(dlon)))

    A = _WGS84_A / (1.0 + n) * (1.0 + n * n / 4.0 + n ** 4 / 64.0
                                + n ** 6 / 256.0)
    alpha = (
        n / 2.0 - 2.0 * n ** 2 / 3.0 + 5.0 * n ** 3 / 16.0
        + 41.0 * n ** 4 / 180.0 - 127.0 * n ** 5 / 288.0
        + 7891.0 * n ** 6 / 37800.0,
        13.0 * n ** 2 / 48.0 - 3.0 * n ** 3 / 5.0 + 557.0 * n ** 4 / 1440.0
        + 281.0 * n ** 5 / 630.0 - 1983433.0 * n ** 6 / 1935360.0,
        61.0 * n ** 3 / 240.0 - 103.0 * n ** 4 / 140.0
        + 15061.0 * n ** 5 / 26880.0 + 167603.0 * n ** 6 / 181440.0,
        49561.0 * n ** 4 / 161280.0 - 179.0 * n ** 5 / 168.0
        + 6601661.0 * n ** 6 / 7257600.0,
        34729.0 * n ** 5 / 80640.0 - 3418889.0 * n ** 6 / 1995840.0,
        212378941.0 * n ** 6 / 319334400.0,
    )
    xi = xip
    eta = etap
    for j, a in enumerate(alpha, start=1):
        xi += a * math.sin(2.0 * j * xip) * math.cosh(2.0 * j * etap)
        eta += a * math.cos(2.0 * j * xip) * math.sinh(2.0 * j * etap)

    easting = 500000.0 + _K0 * A * eta
    northing = _K0 * A * xi
    if lat_deg < 0.0:
        northing += 10000000.0
    return easting, northing


def meridian_arc_quad(lat_deg):
    """Meridian arc length from the equator by adaptive quadrature."""
    from scipy.integrate import quad

    e2 = _WGS84_F * (2.0 - _WGS84_F)

    def integrand(phi):
        return _WGS84_A * (1.0 - e2) / (1.0 - e2 * math.sin(phi) ** 2) ** 1.5

    val, _ = quad(integrand, 0.0, math.radians(lat_deg), epsabs=1e-10,
                  epsrel=1e-12, limit=200)
    return val


# ---------------------------------------------------------------------------
# Literal transcriptions of the offset metrics (plain loops, no numpy)

def literal_max_offset(pairs):
    worst = 0.0
    for est, tru in pairs:
        d = math.sqrt((est[0] - tru[0]) ** 2 + (est[1] - tru[1]) ** 2)
        worst = max(worst, d)
    return worst


def literal_accuracy(pairs):
    mx = sum(e[0] - t[0] for e, t in pairs) / len(pairs)
    my = sum(e[1] - t[1] for e, t in pairs) / len(pairs)
    return math.sqrt(mx * mx + my * my), (mx, my)


def literal_precision(pairs):
    """Prose reading: dispersion of the offsets about the mean offset."""
    n = len(pairs)
    mx = sum(e[0] - t[0] for e, t in pairs) / n
    my = sum(e[1] - t[1] for e, t in pairs) / n
    total = 0.0
    for e, t in pairs:
        total += ((e[0] - t[0]) - mx) ** 2 + ((e[1] - t[1]) - my) ** 2
    return math.sqrt(total / (n - 1))


def literal_precision_printed(pairs):
    """Printed-formula reading: mean offset subtracted from the estimates."""
    n = len(pairs)
    mx = sum(e[0] - t[0] for e, t in pairs) / n
    my = sum(e[1] - t[1] for e, t in pairs) / n
    total = 0.0
    for e, t in pairs:
        total += (e[0] - mx) ** 2 + (e[1] - my) ** 2
    return math.sqrt(total / (n - 1))


def literal_improvement(gnss_value, fused_value):
    return 100.0 * (gnss_value - fused_value) / gnss_value


# ---------------------------------------------------------------------------
# Random-graph factory shared by solver tests

def random_pose(rng, span=10.0):
    return Pose2(rng.uniform(-span, span), rng.uniform(-span, span),
                 rng.uniform(-math.pi, math.pi))


def random_chain_graph(rng, n_nodes, n_absolute=3, noise=0.05,
                       perturb=1.0):
    """Chain of relative edges plus a few absolute ties to a fixed anchor.

    Ground-truth poses are drawn at random, measurements are truth-exact
    plus tangent noise, and initial node poses are perturbed truth, so the
    optimum is near (not at) the truth: a generic well-posed instance.
    Returns (graph, truth_poses).
    """
    from se2fusion.graph import Edge, EdgeKind, PoseGraph
    from se2fusion.se2 import log_map

    truth = [Pose2(0.0, 0.0, 0.0)]
    for _ in range(n_nodes - 1):
        step = Pose2(rng.uniform(0.5, 3.0), rng.uniform(-1.0, 1.0),
                     rng.uniform(-0.7, 0.7))
        truth.append(compose(truth[-1], step))

    graph = PoseGraph()
    graph.add_node(truth[0], fixed=True)
    for p in truth[1:]:
        d = rng.normal(0.0, perturb, 3) * np.array([1.0, 1.0, 0.3])
        graph.add_node(compose(p, exp_map(d)))

    def noisy(z):
        return compose(z, exp_map(rng.normal(0.0, noise, 3)
                                  * np.array([1.0, 1.0, 0.2])))

    for k in range(n_nodes - 1):
        z = noisy(compose(inverse(truth[k]), truth[k + 1]))
        info = np.diag(rng.uniform(0.5, 4.0, 3))
        graph.add_edge(Edge(k, k + 1, z, info, EdgeKind.ODOMETRY))
    for k in rng.choice(np.arange(1, n_nodes), size=min(n_absolute,
                                                        n_nodes - 1),
                        replace=False):
        z = noisy(truth[int(k)])
        info = np.diag([rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), 0.0])
        graph.add_edge(Edge(0, int(k), z, info, EdgeKind.GNSS_ABSOLUTE))
    return graph, truth


def clone_graph(graph):
    from se2fusion.graph import Edge, PoseGraph

    g = PoseGraph()
    for node in graph.nodes:
        g.add_node(Pose2(node.pose.x, node.pose.y, node.pose.theta),
                   fixed=node.fixed, kind=node.kind)
    for e in graph.edges:
        g.add_edge(Edge(e.from_id, e.to_id, e.measurement,
                        e.information.copy(), e.kind))
    return g
