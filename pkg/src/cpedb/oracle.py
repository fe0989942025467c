"""Minimax oracle over constrained matching polytopes.

Approximates  max_{x in P(A1,R1)} min_{y in P(A2,R2)} (1/l) x^T Q y  by
projected subgradient ascent on the concave g(x) = min_y (1/l) x^T Q y, with
Frank-Wolfe approximate projections whose linear steps are min-cost maximum
matchings. Also hosts the enumeration-based references used to validate it.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import _oracle_core as core
from ._kernels import mwmc_ws
from .errors import BudgetExceeded, InfeasibleConstraints, InfeasibleMinSide
from .graph import (BipartiteGraph, ConstraintPair, Matching, enumerate_maximum_matchings,
                    mwmc, NO_CONSTRAINTS)

SENTINEL = -1.0


@dataclass(frozen=True)
class OracleConfig:
    """How the oracle runs.

    projection: "pairwise" (pairwise Frank-Wolfe, exact line search) or "fw"
        (step 2/(t+1) as in the textbook projection routine).
    step: "paper" uses the fixed eta = 2l/(K sqrt(T)); "anytime" uses
        eta_t = D/(G sqrt(t)) with the tight constants D = sqrt(2l), G = sqrt(m)/l.
    certify: stop once a duality certificate shows the best value is within eps.
    max_iter: hard cap on subgradient iterations (T from the accuracy formula if smaller).
    """
    projection: str = "pairwise"
    step: str = "anytime"
    certify: bool = True
    max_iter: int = 200_000
    proj_floor: float = 1e-6
    proj_max_iter: int = 100_000
    strict: bool = False  # raise BudgetExceeded when the cap is hit uncertified

    def __post_init__(self):
        if self.projection not in ("pairwise", "fw"):
            raise ValueError("projection must be 'pairwise' or 'fw'")
        if self.step not in ("paper", "anytime"):
            raise ValueError("step must be 'paper' or 'anytime'")


@dataclass
class PolytopePoint:
    vertices: np.ndarray  # (k, l) edge ids per position
    weights: np.ndarray  # (k,) convex weights
    m: int
    dense: np.ndarray = field(init=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.int64).reshape(len(self.weights), -1)
        self.weights = np.asarray(self.weights, dtype=float)
        self.dense = core.dense(self.vertices, self.weights, len(self.weights), self.m) \
            if len(self.weights) else np.zeros(self.m)

    @classmethod
    def vertex(cls, M: Matching):
        return cls(np.array([M.edge_ids]), np.ones(1), M.m)

    @property
    def support(self):
        return [(Matching(tuple(int(e) for e in v), self.m), float(w))
                for v, w in zip(self.vertices, self.weights)]

    def check(self, G: BipartiteGraph, c: ConstraintPair | None = None, tol=1e-9):
        """Assert the invariants: simplex weights, feasible support, sum x = l."""
        assert np.all(self.weights > 0) and abs(self.weights.sum() - 1) <= tol
        ok = np.ones(G.m, bool) if c is None else c.allowed_mask(G)
        for v in self.vertices:
            G.matching(v)
            assert ok[v].all(), f"support vertex {v} violates {c}"
        assert np.all(self.dense >= -tol) and np.all(self.dense <= 1 + tol)
        assert abs(self.dense.sum() - G.l) <= 1e-9 * G.l
        return True


@dataclass
class OracleResult:
    value: float
    point: PolytopePoint | None
    iterations: int = 0
    projection_steps: int = 0
    upper_bound: float = math.inf
    certified: bool = False
    ybar: np.ndarray | None = None


def _allowed(G, c):
    return np.ones(G.m, bool) if c is None else c.allowed_mask(G)


def _first_vertex(G, allowed):
    out = np.empty(G.l, dtype=np.int64)
    if not mwmc_ws(G.eid, np.zeros(G.m), allowed, G.bonus, out, G.workspace()):
        return None
    return out


def inner_min(x, Q, G: BipartiteGraph, c2: ConstraintPair | None = None):
    """(min_y (1/l) x^T Q y over P(A2, R2), minimizing vertex)."""
    xd = x.dense if isinstance(x, PolytopePoint) else np.asarray(x, dtype=float)
    allowed = _allowed(G, c2)
    y = np.empty(G.l, dtype=np.int64)
    v = core.inner_min(G.eid, G.bonus, np.asarray(Q, float), allowed, xd, G.l, y,
                       G.workspace(), np.empty(G.m), np.empty(G.m))
    if math.isnan(v):
        raise InfeasibleConstraints(f"no maximum matching satisfies {c2}")
    return float(v), Matching(tuple(int(e) for e in y), G.m)


def projection_iterations(l, eps):
    return math.ceil(16 * l * l / (eps * eps))


def approx_project(p, G: BipartiteGraph, c: ConstraintPair | None, eps: float, method="fw",
                   start: PolytopePoint | None = None, max_iter=None):
    """Point of P(A, R) within eps of the Euclidean projection of p.

    Runs at most ceil(16 l^2 / eps^2) Frank-Wolfe steps from the
    lexicographically smallest feasible vertex (or ``start``), stopping early
    once the Frank-Wolfe gap certifies the accuracy.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    allowed = _allowed(G, c)
    if start is None:
        v0 = _first_vertex(G, allowed)
        if v0 is None:
            raise InfeasibleConstraints(f"no maximum matching satisfies {c}")
        V, lam = v0[None, :].copy(), np.ones(1)
    else:
        V, lam = start.vertices.copy(), start.weights.copy()
    maxit = projection_iterations(G.l, eps) if max_iter is None else max_iter
    V, lam, ns, _, it, gap = core.project(G.eid, G.bonus, allowed, np.asarray(p, float), V, lam,
                                          len(lam), eps, maxit, method == "pairwise",
                                          G.workspace())
    pt = PolytopePoint(V[:ns], lam[:ns], G.m)
    pt.iterations, pt.gap = it, gap
    return pt


def oracle_parameters(G: BipartiteGraph, eps: float, cfg: OracleConfig):
    """(T, eta0, step_mode, eps') following the accuracy formulas."""
    K = max(G.K, 1)
    l = G.l
    T = math.ceil((4 * l * K) ** 2 / eps ** 2)
    proj_eps = max(eps / (2 * K * math.sqrt(T)), cfg.proj_floor)
    if cfg.step == "paper":
        return min(T, cfg.max_iter), 2 * l / (K * math.sqrt(T)), 0, proj_eps, T
    D, Gl = math.sqrt(2 * l), math.sqrt(G.m) / l
    return min(T, cfg.max_iter), D / Gl, 1, proj_eps, T


def _y_valid(y, c2, G):
    if y is None or len(y) != G.m:
        return False
    acc, rej = list(c2.accepted), list(c2.rejected)
    return np.all(np.abs(y[acc] - 1) <= 1e-12) and np.all(np.abs(y[rej]) <= 1e-12)


def minimax_oracle(G: BipartiteGraph, c1: ConstraintPair | None, c2: ConstraintPair | None, Q,
                   eps: float, cfg: OracleConfig | None = None, warm: OracleResult | None = None):
    """eps-accurate value of max_{x in P(c1)} min_{y in P(c2)} (1/l) x^T Q y.

    Returns the best evaluated iterate (value never above the optimum). An
    empty max side gives the -1 sentinel; an empty min side is an error.
    ``warm`` (a previous result) seeds the start point and the certificate.
    """
    cfg = cfg or OracleConfig()
    c1 = c1 or NO_CONSTRAINTS
    c2 = c2 or NO_CONSTRAINTS
    allowY = c2.allowed_mask(G)
    if _first_vertex(G, allowY) is None:
        raise InfeasibleMinSide(f"min side {c2} is empty")
    allowX = c1.allowed_mask(G)
    v0 = _first_vertex(G, allowX)
    if v0 is None:
        return OracleResult(SENTINEL, None, certified=True)
    T, eta0, mode, proj_eps, T_full = oracle_parameters(G, eps, cfg)
    V, lam = v0[None, :].copy(), np.ones(1)
    ywarm = np.zeros(0)
    if warm is not None and warm.point is not None:
        if np.all(allowX[warm.point.vertices]):
            V, lam = warm.point.vertices.copy(), warm.point.weights.copy()
        if cfg.certify and _y_valid(warm.ybar, c2, G):
            ywarm = warm.ybar
    Q = np.ascontiguousarray(Q, dtype=float)
    best, bV, blam, nb, ybar, it, ps, ub = core.subgradient(
        G.eid, G.bonus, Q, allowX, allowY, eps, V, lam, len(lam), ywarm, T, mode, eta0,
        proj_eps, cfg.proj_max_iter, cfg.projection == "pairwise", cfg.certify, G.workspace(),
        core.make_scratch(G.l, G.m))
    certified = bool(cfg.certify and ub - best <= eps)
    if cfg.certify and not certified and cfg.strict:
        raise BudgetExceeded(f"oracle not certified after {it} iterations (T={T_full}); "
                             f"gap {ub - best:.3g} > eps {eps}; try a larger eps or max_iter")
    return OracleResult(float(best), PolytopePoint(bV[:nb], blam[:nb], G.m), int(it), int(ps),
                        float(ub), certified, ybar)


def payoff_matrix(G, c1, c2, Q, cap=24):
    X = enumerate_maximum_matchings(G, c1, cap)
    Y = enumerate_maximum_matchings(G, c2, cap)
    TX = np.array([M.edge_ids for M in X])
    TY = np.array([M.edge_ids for M in Y])
    A = np.asarray(Q)[TX[:, None, :], TY[None, :, :]].sum(axis=2) / G.l
    return A, X, Y


def exact_game_value(G: BipartiteGraph, c1, c2, Q, tol=1e-9, cap=24):
    """Value of the finite game over enumerated vertices, by linear programming."""
    try:
        Y = enumerate_maximum_matchings(G, c2, cap)
    except InfeasibleConstraints:
        raise InfeasibleMinSide(f"min side {c2} is empty") from None
    try:
        A, X, Y = payoff_matrix(G, c1, c2, Q, cap)
    except InfeasibleConstraints:
        return SENTINEL
    nx, ny = A.shape
    # maximize v s.t. A^T x >= v, sum x = 1, x >= 0
    cobj = np.zeros(nx + 1)
    cobj[-1] = -1.0
    A_ub = np.hstack([-A.T, np.ones((ny, 1))])
    A_eq = np.hstack([np.ones((1, nx)), np.zeros((1, 1))])
    res = linprog(cobj, A_ub=A_ub, b_ub=np.zeros(ny), A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * nx + [(None, None)], method="highs",
                  options={"primal_feasibility_tolerance": tol, "dual_feasibility_tolerance": tol})
    if res.status != 0:
        raise RuntimeError(f"linprog failed: {res.message}")
    return float(-res.fun)


def exact_projection(p, vertices):
    """Euclidean projection of p onto conv(vertices) by exhaustive active-set search.

    For each vertex subset S solve min ||V_S^T lam - p|| s.t. sum lam = 1 in the
    affine hull; keep solutions with lam >= 0; the closest one is the projection.
    """
    Vt = np.asarray(vertices, dtype=float)
    p = np.asarray(p, dtype=float)
    best, best_d = None, math.inf
    k = len(Vt)
    for r in range(1, k + 1):
        for S in itertools.combinations(range(k), r):
            B = Vt[list(S)]
            # KKT of equality-constrained least squares
            M = np.zeros((r + 1, r + 1))
            M[:r, :r] = B @ B.T
            M[:r, r] = 1.0
            M[r, :r] = 1.0
            rhs = np.concatenate([B @ p, [1.0]])
            sol = np.linalg.lstsq(M, rhs, rcond=None)[0]
            lam = sol[:r]
            if lam.min() < -1e-10 or abs(lam.sum() - 1) > 1e-8:
                continue
            z = lam @ B
            d = np.linalg.norm(z - p)
            if d < best_d - 1e-13:
                best, best_d = z, d
    return best
