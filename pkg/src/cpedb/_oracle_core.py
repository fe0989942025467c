"""Compiled Frank-Wolfe projection and projected-subgradient loops.

A point of a matching polytope is kept as a support: V (rows = vertices as
per-position edge ids), lam (convex weights), ns (live rows), plus its dense
vector z. Functions return possibly reallocated (V, lam).
"""
import math

import numpy as np
from numba import njit

from ._kernels import mwmc_ws

DROP = 1e-12


@njit(cache=True)
def dense(V, lam, ns, m):
    z = np.zeros(m)
    for i in range(ns):
        for j in range(V.shape[1]):
            z[V[i, j]] += lam[i]
    return z


@njit(cache=True)
def min_cost(eid, cost, allowed, bonus, out, ws, neg):
    for e in range(cost.shape[0]):
        neg[e] = -cost[e]
    return mwmc_ws(eid, neg, allowed, bonus, out, ws)


@njit(cache=True)
def _find(V, ns, s):
    for i in range(ns):
        same = True
        for j in range(s.shape[0]):
            if V[i, j] != s[j]:
                same = False
                break
        if same:
            return i
    return -1


@njit(cache=True)
def _append(V, lam, ns, s, w):
    if ns == V.shape[0]:
        V2 = np.empty((2 * ns + 1, V.shape[1]), dtype=np.int64)
        lam2 = np.zeros(2 * ns + 1)
        V2[:ns] = V[:ns]
        lam2[:ns] = lam[:ns]
        V, lam = V2, lam2
    V[ns] = s
    lam[ns] = w
    return V, lam, ns + 1


@njit(cache=True)
def _compact(V, lam, ns):
    """Drop weights below DROP and renormalize."""
    k = 0
    tot = 0.0
    for i in range(ns):
        if lam[i] > DROP:
            V[k] = V[i]
            lam[k] = lam[i]
            tot += lam[i]
            k += 1
    for i in range(k):
        lam[i] /= tot
    return k


@njit(cache=True)
def project(eid, bonus, allowed, p, V, lam, ns, eps, maxit, pairwise, ws):
    """Approximately project p onto conv{allowed matchings}, warm-started at (V, lam).

    Stops once the Frank-Wolfe gap certifies ||z - Pi(p)|| <= eps (gap <= eps^2/2,
    the objective being 1-strongly convex) or after ``maxit`` linear steps.
    ``pairwise`` selects pairwise steps with exact line search; otherwise the
    classic 2/(t+1) schedule. Returns (V, lam, ns, z, iterations, gap).
    """
    m = p.shape[0]
    l = eid.shape[0]
    z = dense(V, lam, ns, m)
    grad = np.empty(m)
    neg = np.empty(m)
    s = np.empty(l, dtype=np.int64)
    gap_tol = 0.5 * eps * eps
    it = 0
    gap = np.inf
    while it < maxit:
        for e in range(m):
            grad[e] = z[e] - p[e]
        min_cost(eid, grad, allowed, bonus, s, ws, neg)
        gs = 0.0
        for j in range(l):
            gs += grad[s[j]]
        gz = 0.0
        for e in range(m):
            gz += grad[e] * z[e]
        gap = gz - gs
        if gap <= gap_tol:
            break
        it += 1
        if pairwise:
            a = -1
            best = -np.inf
            for i in range(ns):
                gv = 0.0
                for j in range(l):
                    gv += grad[V[i, j]]
                if gv > best:
                    best = gv
                    a = i
            common = 0
            for j in range(l):
                if V[a, j] == s[j]:
                    common += 1
            dd = 2.0 * (l - common)
            if dd == 0.0:
                break
            gamma = (best - gs) / dd
            drop = False
            if gamma >= lam[a]:
                gamma = lam[a]
                drop = True
            for j in range(l):
                z[V[a, j]] -= gamma
                z[s[j]] += gamma
            lam[a] -= gamma
            k = _find(V, ns, s)
            if k >= 0:
                lam[k] += gamma
            else:
                V, lam, ns = _append(V, lam, ns, s, gamma)
            if drop or lam[a] <= DROP:
                ns = _compact(V, lam, ns)
                z = dense(V, lam, ns, m)
        else:
            gamma = 2.0 / (it + 1.0)
            for i in range(ns):
                lam[i] *= 1.0 - gamma
            for e in range(m):
                z[e] *= 1.0 - gamma
            for j in range(l):
                z[s[j]] += gamma
            k = _find(V, ns, s)
            if k >= 0:
                lam[k] += gamma
            else:
                V, lam, ns = _append(V, lam, ns, s, gamma)
            if gamma >= 1.0:
                ns = _compact(V, lam, ns)
                z = dense(V, lam, ns, m)
    ns = _compact(V, lam, ns)
    z = dense(V, lam, ns, m)
    return V, lam, ns, z, it, gap


@njit(cache=True)
def inner_min(eid, bonus, Q, allowY, x, l, y, ws, cost, neg):
    """g(x) = min_y (1/l) x^T Q y; writes the minimizing vertex into y; nan if infeasible."""
    m = x.shape[0]
    cost[:] = 0.0
    for e in range(m):
        if x[e] != 0.0:
            for f in range(m):
                cost[f] += x[e] * Q[e, f]
    for f in range(m):
        cost[f] /= l
    if not min_cost(eid, cost, allowY, bonus, y, ws, neg):
        return np.nan
    v = 0.0
    for j in range(l):
        v += cost[y[j]]
    return v


@njit(cache=True)
def best_response_max(eid, bonus, Q, allowX, ybar, l, x, ws, wts):
    """h(ybar) = max_x (1/l) x^T Q ybar; writes the maximizing vertex into x."""
    m = ybar.shape[0]
    wts[:] = 0.0
    for f in range(m):
        if ybar[f] != 0.0:
            for e in range(m):
                wts[e] += Q[e, f] * ybar[f]
    for e in range(m):
        wts[e] /= l
    if not mwmc_ws(eid, wts, allowX, bonus, x, ws):
        return np.nan
    v = 0.0
    for j in range(l):
        v += wts[x[j]]
    return v


@njit(cache=True)
def make_scratch(l, m):
    """Buffers reused across ``subgradient`` calls."""
    return (np.empty(m), np.empty(m), np.empty(m), np.empty(m), np.empty(m), np.empty(m),
            np.empty(l, dtype=np.int64), np.empty(l, dtype=np.int64))


@njit(cache=True)
def subgradient(eid, bonus, Q, allowX, allowY, eps, V, lam, ns, ywarm, T, step_mode, eta0,
                proj_eps, proj_maxit, pairwise, certify, ws, scr):
    """Projected subgradient ascent on g over conv(allowX), tracking the best iterate.

    step_mode 0: fixed eta0; 1: eta0 / sqrt(t). With ``certify`` the loop stops
    as soon as min_t h(ybar_t) - max_t g(x_t) <= eps, ybar_t being the running
    average of the inner minimizers (or ``ywarm`` if it certifies already).
    Returns (best value, V, lam, ns of best point, ybar, iterations,
    projection steps, upper bound); ybar lives in ``scr`` and is overwritten
    by the next call.
    """
    l = eid.shape[0]
    m = Q.shape[0]
    cost, neg, grad, p, ysum, ybar, y0, xr = scr
    ysum[:] = 0.0
    ybar[:] = 0.0
    x = dense(V, lam, ns, m)
    best = -np.inf
    bV = V
    blam = lam
    nb = ns
    moved = False
    ub = np.inf
    if certify and ywarm.shape[0] == m:
        h = best_response_max(eid, bonus, Q, allowX, ywarm, l, xr, ws, cost)
        ub = h
        ybar[:] = ywarm
    proj_steps = 0
    t = 0
    while t < T:
        t += 1
        g = inner_min(eid, bonus, Q, allowY, x, l, y0, ws, cost, neg)
        if g > best:
            best = g
            if moved:
                bV = V[:ns].copy()
                blam = lam[:ns].copy()
            nb = ns
        for j in range(l):
            ysum[y0[j]] += 1.0
        if certify:
            for e in range(m):
                ybar[e] = ysum[e] / t
            h = best_response_max(eid, bonus, Q, allowX, ybar, l, xr, ws, cost)
            if h < ub:
                ub = h
            if ub - best <= eps:
                break
        for e in range(m):
            grad[e] = 0.0
        for j in range(l):
            f = y0[j]
            for e in range(m):
                grad[e] += Q[e, f]
        eta = eta0 if step_mode == 0 else eta0 / math.sqrt(t)
        for e in range(m):
            p[e] = x[e] + eta * grad[e] / l
        if not moved:
            # the best point may alias the start support; detach before projecting
            V = V[:ns].copy()
            lam = lam[:ns].copy()
            moved = True
        V, lam, ns, x, it, _ = project(eid, bonus, allowX, p, V, lam, ns, proj_eps, proj_maxit,
                                       pairwise, ws)
        proj_steps += it
    if not certify:
        for e in range(m):
            ybar[e] = ysum[e] / max(t, 1)
    return best, bV, blam, nb, ybar, t, proj_steps, ub
