"""Sparse nonlinear least-squares over pose graphs.

Minimizes the weighted squared residual sum over all non-fixed nodes with
one of three step strategies: plain Gauss-Newton, Levenberg-Marquardt, or
Powell's dogleg (the default).  The normal equations are assembled into a
scipy sparse matrix whose sparsity pattern is computed once per graph; the
linear solve uses a SuperLU factorization with a fill-reducing ordering,
falling back to lambda*diag regularization when factorization fails.

Updates are applied on the right, pose <- compose(pose, exp_map(delta)),
matching the Jacobians produced by the se2 module.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import GaugeUnderconstrainedError, SingularSystemError
from .graph import PoseGraph
from .se2 import edge_jacobians, edge_residual, retract

# regularization ladder for near-singular normal equations
_LAMBDA_LADDER = (1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3)
_MIN_TRUST_RADIUS = 1e-12
_MAX_LM_LAMBDA = 1e12


class Method(enum.Enum):
    GAUSS_NEWTON = "gauss_newton"
    LEVENBERG_MARQUARDT = "levenberg_marquardt"
    DOGLEG = "dogleg"


class Termination(enum.Enum):
    ABS_TOL = "abs_tol"
    REL_TOL = "rel_tol"
    STEP_TOL = "step_tol"
    MAX_ITER = "max_iter"
    TRUST_REGION_COLLAPSE = "trust_region_collapse"


@dataclass
class SolverConfig:
    method: Method = Method.DOGLEG
    max_iterations: int = 100
    abs_error_tol: float = 1e-9
    rel_error_tol: float = 1e-9
    step_tol: float = 1e-9
    trust_region_init: float = 1e4
    lm_lambda_init: float = 1e-4


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    initial_error: float
    final_error: float
    termination: Termination


class _Assembler:
    """Normal-equation assembly with a once-computed sparsity pattern."""

    def __init__(self, graph: PoseGraph):
        self.free_ids = [n.id for n in graph.nodes if not n.fixed]
        self.offset = {nid: 3 * k for k, nid in enumerate(self.free_ids)}
        self.n = 3 * len(self.free_ids)
        base = np.arange(3)
        rows: list[np.ndarray] = []
        cols: list[np.ndarray] = []
        self.spans: list[tuple[int, int]] = []
        nnz = 0
        for edge in graph.edges:
            io = self.offset.get(edge.from_id, -1)
            jo = self.offset.get(edge.to_id, -1)
            blocks = []
            if io >= 0:
                blocks.append((io, io))
            if jo >= 0:
                blocks.append((jo, jo))
            if io >= 0 and jo >= 0:
                blocks.append((io, jo))
                blocks.append((jo, io))
            for r0, c0 in blocks:
                rows.append(np.repeat(base + r0, 3))
                cols.append(np.tile(base + c0, 3))
            self.spans.append((io, jo))
            nnz += 9 * len(blocks)
        self.rows = np.concatenate(rows) if rows else np.zeros(0, dtype=int)
        self.cols = np.concatenate(cols) if cols else np.zeros(0, dtype=int)
        self.nnz = nnz

    def assemble(self, graph: PoseGraph):
        """Linearize every edge at the current poses.

        Returns (H, b, chi) where H is csc, b = -sum J'Omega e and chi is
        the current total error (a free byproduct of the pass).
        """
        data = np.empty(self.nnz)
        b = np.zeros(self.n)
        chi = 0.0
        pos = 0
        nodes = graph.nodes
        for edge, (io, jo) in zip(graph.edges, self.spans):
            xi = nodes[edge.from_id].pose
            xj = nodes[edge.to_id].pose
            omega = edge.information
            e = edge_residual(xi, xj, edge.measurement)
            oe = omega @ e
            chi += float(e @ oe)
            if io < 0 and jo < 0:
                continue
            Ji, Jj = edge_jacobians(xi, xj, edge.measurement)
            if io >= 0:
                Wi = omega @ Ji
                data[pos:pos + 9] = (Ji.T @ Wi).ravel()
                pos += 9
                b[io:io + 3] -= Ji.T @ oe
            if jo >= 0:
                Wj = omega @ Jj
                data[pos:pos + 9] = (Jj.T @ Wj).ravel()
                pos += 9
                b[jo:jo + 3] -= Jj.T @ oe
            if io >= 0 and jo >= 0:
                Hij = Ji.T @ Wj
                data[pos:pos + 9] = Hij.ravel()
                data[pos + 9:pos + 18] = Hij.T.ravel()
                pos += 18
        H = sp.coo_matrix((data, (self.rows, self.cols)),
                          shape=(self.n, self.n)).tocsc()
        return H, b, chi


def _chi_square(graph: PoseGraph) -> float:
    chi = 0.0
    for edge in graph.edges:
        e = edge_residual(graph.nodes[edge.from_id].pose,
                          graph.nodes[edge.to_id].pose, edge.measurement)
        chi += float(e @ (edge.information @ e))
    return chi


def build_linear_system(graph: PoseGraph):
    """Return (H, b) of the reduced normal equations at the current poses.

    Rows/columns belonging to fixed nodes are removed; free nodes are
    ordered by node id, three consecutive variables each.
    """
    H, b, _ = _Assembler(graph).assemble(graph)
    return H, b


def _solve_normal(H: sp.spmatrix, b: np.ndarray) -> np.ndarray:
    """Factor-and-solve with escalating diagonal regularization on failure."""
    n = H.shape[0]
    if n == 0:
        return np.zeros(0)
    diag = H.diagonal()
    # zero diagonal entries get unit damping, otherwise lambda*diag would
    # leave an exactly singular row singular
    damp = np.where(diag > 0.0, diag, 1.0)
    bnorm = float(np.linalg.norm(b))
    for lam in (0.0,) + _LAMBDA_LADDER:
        M = H if lam == 0.0 else (H + sp.diags(lam * damp)).tocsc()
        try:
            lu = splu(M, permc_spec="MMD_AT_PLUS_A",
                      diag_pivot_thresh=0.001,
                      options={"SymmetricMode": True})
            x = lu.solve(b)
        except RuntimeError:
            continue
        if not np.all(np.isfinite(x)):
            continue
        resid = float(np.linalg.norm(M @ x - b))
        if resid <= 1e-6 * (bnorm + 1.0):
            return x
    raise SingularSystemError(
        "normal equations could not be factorized even with "
        f"regularization up to {_LAMBDA_LADDER[-1]:g}")


def _dogleg_combine(gn: np.ndarray, cauchy: np.ndarray, b: np.ndarray,
                    bnorm: float, radius: float) -> np.ndarray:
    gn_norm = float(np.linalg.norm(gn))
    if gn_norm <= radius:
        return gn
    c_norm = float(np.linalg.norm(cauchy))
    if c_norm >= radius:
        if bnorm == 0.0:
            return np.zeros_like(b)
        return (radius / bnorm) * b
    # walk from the Cauchy point toward the Gauss-Newton point until the
    # trust-region boundary: ||cauchy + tau*(gn - cauchy)|| = radius
    d = gn - cauchy
    a = float(d @ d)
    bq = 2.0 * float(cauchy @ d)
    c = c_norm * c_norm - radius * radius
    tau = (-bq + math.sqrt(bq * bq - 4.0 * a * c)) / (2.0 * a)
    return cauchy + tau * d


def dogleg_step(H, b: np.ndarray, trust_radius: float) -> np.ndarray:
    """Classical Powell dogleg increment for the model 0.5 d'Hd - b'd.

    Returns the Gauss-Newton step when it fits inside the trust region,
    the scaled steepest-descent step when even the Cauchy point does not,
    and the boundary interpolation point otherwise.
    """
    Hs = sp.csc_matrix(H)
    gn = _solve_normal(Hs, b)
    bHb = float(b @ (Hs @ b))
    bb = float(b @ b)
    cauchy = (bb / bHb) * b if bHb > 0.0 else np.zeros_like(b)
    return _dogleg_combine(gn, cauchy, b, math.sqrt(bb), trust_radius)


def _predicted_decrease(H, b: np.ndarray, delta: np.ndarray) -> float:
    # chi(x (+) d) ~ chi - 2 b'd + d'Hd for the residual convention used here
    return 2.0 * float(b @ delta) - float(delta @ (H @ delta))


def optimize(graph: PoseGraph, config: SolverConfig | None = None,
             trace=None) -> SolveReport:
    """Minimize the graph's total error in place over all non-fixed nodes.

    Fixed node poses are never touched.  When `trace` is given (a callable
    or a writable file-like), one line per iteration is emitted with
    "iteration chi2 step_norm radius"; the last column is the trust-region
    radius for dogleg, lambda for Levenberg-Marquardt and 0 for plain
    Gauss-Newton.
    """
    cfg = config if config is not None else SolverConfig()
    if not any(n.fixed for n in graph.nodes):
        raise GaugeUnderconstrainedError(
            "graph has no fixed node; the optimum is gauge-invariant")
    sink = trace.write if hasattr(trace, "write") else trace

    asm = _Assembler(graph)
    initial = _chi_square(graph)
    if asm.n == 0:
        return SolveReport(True, 0, initial, initial, Termination.STEP_TOL)

    chi = initial
    radius = cfg.trust_region_init
    lam = cfg.lm_lambda_init
    converged = False
    termination = Termination.MAX_ITER
    iterations = 0

    def emit(it: int, chi_now: float, step: float, knob: float) -> None:
        if sink is not None:
            sink(f"{it} {chi_now:.17g} {step:.17g} {knob:.17g}\n")

    def apply_step(delta: np.ndarray) -> list:
        saved = []
        for nid in asm.free_ids:
            node = graph.nodes[nid]
            saved.append(node.pose)
            off = asm.offset[nid]
            node.pose = retract(node.pose, delta[off:off + 3])
        return saved

    def revert(saved: list) -> None:
        for nid, pose in zip(asm.free_ids, saved):
            graph.nodes[nid].pose = pose

    for it in range(1, cfg.max_iterations + 1):
        iterations = it
        H, b, chi = asm.assemble(graph)

        if cfg.method is Method.GAUSS_NEWTON:
            delta = _solve_normal(H, b)
            step_norm = float(np.linalg.norm(delta))
            apply_step(delta)
            new_chi = _chi_square(graph)
            knob = 0.0
        elif cfg.method is Method.LEVENBERG_MARQUARDT:
            diag = H.diagonal()
            damp = np.where(diag > 0.0, diag, 1.0)
            new_chi = None
            while True:
                M = (H + sp.diags(lam * damp)).tocsc()
                delta = _solve_normal(M, b)
                step_norm = float(np.linalg.norm(delta))
                if step_norm <= cfg.step_tol:
                    new_chi = chi
                    break
                saved = apply_step(delta)
                trial = _chi_square(graph)
                pred = _predicted_decrease(H, b, delta)
                if trial < chi and pred > 0.0:
                    lam = max(lam * 0.1, 1e-15)
                    new_chi = trial
                    break
                revert(saved)
                lam *= 10.0
                if lam > _MAX_LM_LAMBDA:
                    emit(it, chi, step_norm, lam)
                    return SolveReport(False, it, initial, chi,
                                       Termination.TRUST_REGION_COLLAPSE)
            knob = lam
        else:  # dogleg
            gn = _solve_normal(H, b)
            bb = float(b @ b)
            bHb = float(b @ (H @ b))
            cauchy = (bb / bHb) * b if bHb > 0.0 else np.zeros_like(b)
            bnorm = math.sqrt(bb)
            new_chi = None
            while True:
                delta = _dogleg_combine(gn, cauchy, b, bnorm, radius)
                step_norm = float(np.linalg.norm(delta))
                if step_norm <= cfg.step_tol:
                    new_chi = chi
                    break
                saved = apply_step(delta)
                trial = _chi_square(graph)
                pred = _predicted_decrease(H, b, delta)
                if trial < chi and pred > 0.0:
                    rho = (chi - trial) / pred
                    if rho < 0.25:
                        radius *= 0.5
                    elif rho > 0.75:
                        radius *= 2.0
                    new_chi = trial
                    break
                revert(saved)
                radius *= 0.5
                if radius < _MIN_TRUST_RADIUS:
                    emit(it, chi, step_norm, radius)
                    return SolveReport(False, it, initial, chi,
                                       Termination.TRUST_REGION_COLLAPSE)
            knob = radius

        emit(it, new_chi, step_norm, knob)
        decrease = chi - new_chi
        if new_chi <= cfg.abs_error_tol:
            converged, termination = True, Termination.ABS_TOL
        elif 0.0 <= decrease <= cfg.rel_error_tol * chi:
            converged, termination = True, Termination.REL_TOL
        elif step_norm <= cfg.step_tol:
            converged, termination = True, Termination.STEP_TOL
        chi = new_chi
        if converged:
            break

    return SolveReport(converged, iterations, initial, chi, termination)
