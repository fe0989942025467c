"""Numba kernels shared by the matching oracles and the online algorithms.

Matchings are passed around as int64 arrays of length l holding the edge id
used at each position (positions in increasing order, so ids are sorted).
"""
import numpy as np
from numba import njit

# relative tolerance under which two matching weights count as tied
REL_TOL = 1e-12
# edges beyond this index get no lexicographic bonus (int64 headroom)
LEX_BITS = 50


def lex_bonus(m):
    """bonus[i] = 2**(L-1-i): a larger bonus sum <=> lexicographically smaller set."""
    L = min(m, LEX_BITS)
    b = np.zeros(m, dtype=np.int64)
    for i in range(L):
        b[i] = np.int64(1) << np.int64(L - 1 - i)
    return b


@njit(cache=True)
def _lexless(a1, a2, b1, b2, tol):
    if a1 < b1 - tol:
        return True
    if a1 > b1 + tol:
        return False
    return a2 < b2


@njit(cache=True)
def make_workspace_t(l, n, table):
    """Workspace for ``mwmc_ws``: the table of all maximum matchings (sorted
    lexicographically) when small enough to scan, else an empty (0, l) array,
    which selects the Hungarian solve."""
    return table


@njit(cache=True)
def make_workspace(l, n):
    return np.zeros((0, l), dtype=np.int64)


@njit(cache=True)
def hungarian(c1, c2, out, tol):
    """Min-cost assignment of every row to a distinct column (rows <= cols).

    Costs are pairs (c1, c2) ordered lexicographically, the first
    compared up to ``tol``. Shortest augmenting path with potentials,
    O(r^2 c). The column of each row is written to ``out``.
    """
    nr, nc = c1.shape
    u1 = np.zeros(nr + 1)
    u2 = np.zeros(nr + 1, dtype=np.int64)
    v1 = np.zeros(nc + 1)
    v2 = np.zeros(nc + 1, dtype=np.int64)
    p = np.zeros(nc + 1, dtype=np.int64)
    way = np.zeros(nc + 1, dtype=np.int64)
    m1 = np.empty(nc + 1)
    m2 = np.empty(nc + 1, dtype=np.int64)
    used = np.empty(nc + 1, dtype=np.bool_)
    for i in range(1, nr + 1):
        p[0] = i
        j0 = 0
        m1[:] = np.inf
        m2[:] = 0
        used[:] = False
        while True:
            used[j0] = True
            i0 = p[j0]
            d1 = np.inf
            d2 = np.int64(0)
            j1 = 0
            for j in range(1, nc + 1):
                if not used[j]:
                    r1 = c1[i0 - 1, j - 1] - u1[i0] - v1[j]
                    r2 = c2[i0 - 1, j - 1] - u2[i0] - v2[j]
                    if _lexless(r1, r2, m1[j], m2[j], tol):
                        m1[j] = r1
                        m2[j] = r2
                        way[j] = j0
                    if _lexless(m1[j], m2[j], d1, d2, tol):
                        d1 = m1[j]
                        d2 = m2[j]
                        j1 = j
            for j in range(nc + 1):
                if used[j]:
                    u1[p[j]] += d1
                    u2[p[j]] += d2
                    v1[j] -= d1
                    v2[j] -= d2
                else:
                    m1[j] -= d1
                    m2[j] -= d2
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    for j in range(1, nc + 1):
        if p[j] > 0:
            out[p[j] - 1] = j - 1


@njit(cache=True)
def _shift(w, allowed, l):
    W = 0.0
    for e in range(w.shape[0]):
        if allowed[e] and abs(w[e]) > W:
            W = abs(w[e])
    return 1.0 + 2.0 * l * W


@njit(cache=True, inline="always")
def _scan(table, w, allowed, out):
    """Table version of ``mwmc_ws``: the first (lexicographically smallest)
    allowed matching whose weight is within the tie tolerance of the best."""
    l = table.shape[1]
    tol = 1e-12 * _shift(w, allowed, l) * l
    best = -np.inf
    for r in range(table.shape[0]):
        s = 0.0
        for j in range(l):
            e = table[r, j]
            if not allowed[e]:
                s = -np.inf
                break
            s += w[e]
        if s > best:
            best = s
    if best == -np.inf:
        out[:] = -1
        return False
    for r in range(table.shape[0]):
        s = 0.0
        for j in range(l):
            e = table[r, j]
            if not allowed[e]:
                s = -np.inf
                break
            s += w[e]
        if s >= best - tol:
            out[:] = table[r]
            return True
    return False


@njit(cache=True, inline="always")
def mwmc_ws(eid, w, allowed, bonus, out, ws):
    """Max-weight matching among matchings covering every position.

    ``eid[j, c]`` is the edge id of (c, j) or -1. Disallowed edges are treated
    as absent. Weights are shifted by C = 1 + 2 l max|w| so that covering one
    more position always beats any weight difference; non-edges score 0.
    Ties (relative 1e-12) go to the lexicographically smallest edge set.
    Writes edge ids into ``out`` and returns False when no matching covers
    all positions.
    """
    if ws.shape[0] > 0:
        return _scan(ws, w, allowed, out)
    return _mwmc_hungarian(eid, w, allowed, bonus, out)


@njit(cache=True)
def _mwmc_hungarian(eid, w, allowed, bonus, out):
    l, n = eid.shape
    C = _shift(w, allowed, l)
    c1 = np.empty((l, n))
    c2 = np.empty((l, n), dtype=np.int64)
    for j in range(l):
        for c in range(n):
            e = eid[j, c]
            if e >= 0 and allowed[e]:
                c1[j, c] = -(w[e] + C)
                c2[j, c] = -bonus[e]
            else:
                c1[j, c] = 0.0
                c2[j, c] = 0
    cols = np.empty(l, dtype=np.int64)
    hungarian(c1, c2, cols, 1e-12 * C * l)
    ok = True
    for j in range(l):
        e = eid[j, cols[j]]
        if e < 0 or not allowed[e]:
            ok = False
            out[j] = -1
        else:
            out[j] = e
    return ok


@njit(cache=True)
def mwmc(eid, w, allowed, bonus, out):
    l, n = eid.shape
    return mwmc_ws(eid, w, allowed, bonus, out, make_workspace(l, n))


@njit(cache=True)
def mwmc_value(w, M):
    s = 0.0
    for j in range(M.shape[0]):
        s += w[M[j]]
    return s
