"""Compiled round loops for CAR-Cond and the verification stage of CAR-Verify.

Both loops are resumable: all state lives in arrays owned by the caller, and
a call returns as soon as it would need a sample beyond ``budget`` (SUSPEND)
or beyond the pre-drawn uniforms ``u`` (REFILL). A duel (e, f) is won by e
when the next uniform is below truth[e, f]. Edge status codes: 0 undecided,
1 accepted, 2 rejected.
"""
import math

import numpy as np
from numba import njit

from . import _oracle_core as core
from ._kernels import make_workspace_t, mwmc_ws

DONE, SUSPEND, REFILL, STUCK, ERROR = 0, 1, 2, 3, 4
UND, ACC, REJ = 0, 1, 2
STALL_ROUNDS = 64

# scalar slots of the CAR-Cond state vector
T_, Q_, CUR, NPAIRS, UPTR, SAMPLES, GUARD, CALLS, ITERS, UNCERT, STALL, DONE_ = range(12)
N_SCAL = 12
# monitor slots: coverage held so far, safety violations under coverage,
# first uncovered round (0 = none), rounds checked
COV, VIOL, FIRST_UNCOV, CHECKED = range(4)
# oracle option slots
O_STEP, O_CERT, O_MAXIT, O_FLOOR, O_PMAXIT, O_PAIRWISE = range(6)


@njit(cache=True)
def allowed_from(status, cand, pos, n, l, extra_acc, extra_rej, out):
    """Edges surviving the constraint surgery for (A, R) = status plus one extra accept/reject."""
    m = status.shape[0]
    cblk = np.zeros(n, dtype=np.bool_)
    pblk = np.zeros(l, dtype=np.bool_)
    for a in range(m):
        if status[a] == ACC or a == extra_acc:
            cblk[cand[a]] = True
            pblk[pos[a]] = True
    for e in range(m):
        if status[e] == REJ or e == extra_rej:
            out[e] = False
        elif status[e] == ACC or e == extra_acc:
            out[e] = True
        else:
            out[e] = not (cblk[cand[e]] or pblk[pos[e]])
    # two accepted edges sharing a vertex make the set infeasible
    for a in range(m):
        if (status[a] == ACC or a == extra_acc) and status[a] != REJ:
            for b in range(a + 1, m):
                if (status[b] == ACC or b == extra_acc) and (cand[a] == cand[b] or pos[a] == pos[b]):
                    out[a] = False
                    out[b] = False


@njit(cache=True)
def feasible(eid, bonus, allowed, ws, out, zeros):
    return mwmc_ws(eid, zeros, allowed, bonus, out, ws)


@njit(cache=True)
def bounds(Tp, Wp, comparable, t, delta, K, Pu, Pl):
    """Upper/lower confidence matrices: clamp(p-hat +/- c_t), 1/2 diagonal, 0 if incomparable."""
    m = Tp.shape[0]
    L = math.log(4.0 * K * float(t) ** 3 / delta)
    for e in range(m):
        for f in range(m):
            if e == f:
                Pu[e, f] = 0.5
                Pl[e, f] = 0.5
            elif not comparable[e, f]:
                Pu[e, f] = 0.0
                Pl[e, f] = 0.0
            elif Tp[e, f] == 0:
                Pu[e, f] = 1.0
                Pl[e, f] = 0.0
            else:
                ph = Wp[e, f] / Tp[e, f]
                c = math.sqrt(L / (2.0 * Tp[e, f]))
                Pu[e, f] = min(1.0, ph + c)
                Pl[e, f] = max(0.0, ph - c)


@njit(cache=True)
def build_pairs(status, pos, comparable, pairs):
    """All comparable pairs (e < f) of undecided edges; returns their count."""
    m = status.shape[0]
    k = 0
    for e in range(m):
        if status[e] != UND:
            continue
        for f in range(e + 1, m):
            if status[f] == UND and comparable[e, f]:
                pairs[k, 0] = e
                pairs[k, 1] = f
                k += 1
    return k


@njit(cache=True)
def oracle_params(l, m, K, eps, opt):
    """(T, eta0, eps') for accuracy eps: T from (4 l K / eps)^2 capped at max_iter.

    Fixed step 2l/(K sqrt(T)) or, for the anytime schedule, eta0 = D/G with
    D = sqrt(2l) and G = sqrt(m)/l.
    """
    Tfull = math.ceil((4.0 * l * K) ** 2 / (eps * eps))
    T = min(Tfull, int(opt[O_MAXIT]))
    proj = max(eps / (2.0 * K * math.sqrt(Tfull)), opt[O_FLOOR])
    if opt[O_STEP] == 0:
        eta = 2.0 * l / (K * math.sqrt(Tfull))
    else:
        eta = math.sqrt(2.0 * l) * l / math.sqrt(m)
    return T, eta, proj


@njit(cache=True)
def oracle_call(eid, bonus, Q, allowX, allowY, eps, T, eta0, proj_eps, opt,
                wV, wlam, wns, wy, wyok, slot_e, slot_k, ws, vtx, zeros, stats, V, lam, scr, noy):
    """minimax value over (allowX, allowY) warm-started from cache slot (slot_e, slot_k).

    V and lam are (S + 1)-row scratch buffers, scr the subgradient scratch.
    """
    l = eid.shape[0]
    m = Q.shape[0]
    S = wV.shape[2]
    # keep the cached support vertices that remain feasible
    ns = 0
    tot = 0.0
    for i in range(wns[slot_e, slot_k]):
        ok = True
        for j in range(l):
            if not allowX[wV[slot_e, slot_k, i, j]]:
                ok = False
                break
        if ok:
            V[ns] = wV[slot_e, slot_k, i]
            lam[ns] = wlam[slot_e, slot_k, i]
            tot += lam[ns]
            ns += 1
    if ns == 0:
        feasible(eid, bonus, allowX, ws, vtx, zeros)
        V[0] = vtx
        lam[0] = 1.0
        ns = 1
    else:
        for i in range(ns):
            lam[i] /= tot
    ywarm = noy
    if wyok[slot_e, slot_k]:
        good = True
        for f in range(m):
            if not allowY[f] and wy[slot_e, slot_k, f] > 1e-12:
                good = False
                break
        if good:
            ywarm = wy[slot_e, slot_k]
    best, bV, blam, nb, ybar, it, ps, ub = core.subgradient(
        eid, bonus, Q, allowX, allowY, eps, V, lam, ns, ywarm, T, int(opt[O_STEP]), eta0,
        proj_eps, int(opt[O_PMAXIT]), opt[O_PAIRWISE] != 0, opt[O_CERT] != 0, ws, scr)
    stats[0] += 1
    stats[1] += it
    if opt[O_CERT] != 0 and ub - best > eps:
        stats[2] += 1
    # cache: the S heaviest support vertices, renormalized
    if nb <= S:
        for i in range(nb):
            wV[slot_e, slot_k, i] = bV[i]
            wlam[slot_e, slot_k, i] = blam[i]
        wns[slot_e, slot_k] = nb
    else:
        order = np.argsort(-blam[:nb])
        tot = 0.0
        for i in range(S):
            tot += blam[order[i]]
        for i in range(S):
            wV[slot_e, slot_k, i] = bV[order[i]]
            wlam[slot_e, slot_k, i] = blam[order[i]] / tot
        wns[slot_e, slot_k] = S
    wy[slot_e, slot_k] = ybar
    wyok[slot_e, slot_k] = True
    return best


@njit(cache=True)
def cond_run(eid, cand, pos, bonus, table, n, K, delta, truth, comparable, status, Tp, Wp, sc, pairs,
             wV, wlam, wns, wy, wyok, u, budget, counts, cls_round, target, mon, opt):
    """Advance CAR-Cond. Returns DONE (status holds A = the answer), SUSPEND, REFILL or STUCK."""
    l = eid.shape[0]
    m = status.shape[0]
    ws = make_workspace_t(l, n, table)
    vtx = np.empty(l, dtype=np.int64)
    zeros = np.zeros(m)
    Vb = np.empty((wV.shape[2] + 1, l), dtype=np.int64)
    lamb = np.zeros(wV.shape[2] + 1)
    scr = core.make_scratch(l, m)
    noy = np.zeros(0)
    Pu = np.empty((m, m))
    Pl = np.empty((m, m))
    allowY = np.empty(m, dtype=np.bool_)
    allowX = np.empty(m, dtype=np.bool_)
    allowI = np.empty(m, dtype=np.bool_)
    allowE = np.empty(m, dtype=np.bool_)
    stats = np.zeros(3, dtype=np.int64)
    monitor = target.shape[0] == m
    while True:
        while sc[CUR] < sc[NPAIRS]:
            if budget == 0:
                return SUSPEND
            if sc[UPTR] >= u.shape[0]:
                return REFILL
            e = pairs[sc[CUR], 0]
            f = pairs[sc[CUR], 1]
            won = u[sc[UPTR]] < truth[e, f]
            sc[UPTR] += 1
            Tp[e, f] += 1
            Tp[f, e] += 1
            if won:
                Wp[e, f] += 1
            else:
                Wp[f, e] += 1
            counts[e, f] += 1
            budget -= 1
            sc[CUR] += 1
            sc[SAMPLES] += 1
        t = sc[T_]
        q = sc[Q_]
        eps = 0.5 ** q
        T, eta0, proj_eps = oracle_params(l, m, K, eps, opt)
        bounds(Tp, Wp, comparable, t, delta, K, Pu, Pl)
        if monitor and mon[COV] == 1:
            for e in range(m):
                for f in range(m):
                    if comparable[e, f] and (truth[e, f] > Pu[e, f] or truth[e, f] < Pl[e, f]):
                        mon[COV] = 0
            if mon[COV] == 0:
                mon[FIRST_UNCOV] = t
        status0 = status.copy()
        allowed_from(status0, cand, pos, n, l, -1, -1, allowY)
        progress = False
        for e in range(m):
            if status0[e] != UND:
                continue
            allowed_from(status0, cand, pos, n, l, e, -1, allowI)
            feasI = allowY[e] and feasible(eid, bonus, allowI, ws, vtx, zeros)
            allowed_from(status0, cand, pos, n, l, -1, e, allowE)
            feasE = feasible(eid, bonus, allowE, ws, vtx, zeros)
            InU = -1.0
            InL = -1.0
            ExU = -1.0
            ExL = -1.0
            if feasI:
                InU = oracle_call(eid, bonus, Pu, allowI, allowY, eps, T, eta0, proj_eps, opt,
                                  wV, wlam, wns, wy, wyok, e, 0, ws, vtx, zeros, stats, Vb, lamb, scr, noy)
                InL = oracle_call(eid, bonus, Pl, allowI, allowY, eps, T, eta0, proj_eps, opt,
                                  wV, wlam, wns, wy, wyok, e, 1, ws, vtx, zeros, stats, Vb, lamb, scr, noy)
            if feasE:
                ExU = oracle_call(eid, bonus, Pu, allowE, allowY, eps, T, eta0, proj_eps, opt,
                                  wV, wlam, wns, wy, wyok, e, 2, ws, vtx, zeros, stats, Vb, lamb, scr, noy)
                ExL = oracle_call(eid, bonus, Pl, allowE, allowY, eps, T, eta0, proj_eps, opt,
                                  wV, wlam, wns, wy, wyok, e, 3, ws, vtx, zeros, stats, Vb, lamb, scr, noy)
            dec = UND
            if InL > ExU + eps:
                dec = ACC
            elif ExL > InU + eps:
                dec = REJ
            if dec != UND:
                status[e] = dec
                allowed_from(status, cand, pos, n, l, -1, -1, allowX)
                if not feasible(eid, bonus, allowX, ws, vtx, zeros):
                    # only reachable outside the confidence event: keep (A, R) feasible
                    status[e] = UND
                    sc[GUARD] += 1
                else:
                    cls_round[e] = t
                    progress = True
                    na = 0
                    for a in range(m):
                        if status[a] == ACC:
                            na += 1
                    if na == l:
                        sc[DONE_] = 1
                        break
        sc[CALLS] += stats[0]
        sc[ITERS] += stats[1]
        sc[UNCERT] += stats[2]
        stats[:] = 0
        if monitor and mon[COV] == 1:
            mon[CHECKED] += 1
            for e in range(m):
                if (status[e] == ACC and not target[e]) or (status[e] == REJ and target[e]):
                    mon[VIOL] += 1
                    break
        if sc[DONE_] == 1:
            return DONE
        sc[T_] = t + 1
        if t + 1 > 4 ** q:
            sc[Q_] = q + 1
        sc[NPAIRS] = build_pairs(status, pos, comparable, pairs)
        sc[CUR] = 0
        if sc[NPAIRS] == 0 and not progress:
            sc[STALL] += 1
            if sc[STALL] >= STALL_ROUNDS:
                return STUCK
        else:
            sc[STALL] = 0


@njit(cache=True)
def second_best(Mhat, Q, eid, pos, bonus, ws, allowed, vtx, best):
    """max over M != Mhat of (1/l) sum_j Q[M_j, Mhat_j]; writes the argmax into ``best``.

    Per-edge weight Q[e, Mhat(s(e))]; the best of l solves, each deleting one
    edge of Mhat. Ties go to the lexicographically smallest matching.
    Returns -inf when Mhat is the only maximum matching.
    """
    l = eid.shape[0]
    m = Q.shape[0]
    w = np.empty(m)
    for e in range(m):
        w[e] = Q[e, Mhat[pos[e]]]
    bv = -np.inf
    for i in range(l):
        allowed[:] = True
        allowed[Mhat[i]] = False
        if not mwmc_ws(eid, w, allowed, bonus, vtx, ws):
            continue
        v = 0.0
        for j in range(l):
            v += w[vtx[j]]
        v /= l
        tol = 1e-12 * max(1.0, abs(v))
        better = bv == -np.inf or v > bv + tol
        if not better and abs(v - bv) <= tol:
            for j in range(l):
                if vtx[j] != best[j]:
                    better = vtx[j] < best[j]
                    break
        if better:
            bv = v
            best[:] = vtx
    return bv


@njit(cache=True)
def verify_run(eid, pos, bonus, table, n, K, delta, truth, comparable, Mhat, Tp, Wp, sc, u, budget, counts):
    """Advance the verification loop. sc = [t, uptr, samples, rounds].

    Returns DONE (hypothesis confirmed), ERROR (hypothesis rejected), SUSPEND or REFILL.
    """
    l = eid.shape[0]
    m = Tp.shape[0]
    ws = make_workspace_t(l, n, table)
    vtx = np.empty(l, dtype=np.int64)
    Mt = np.empty(l, dtype=np.int64)
    tmp = np.empty(l, dtype=np.int64)
    allowed = np.empty(m, dtype=np.bool_)
    Pu = np.empty((m, m))
    Pl = np.empty((m, m))
    while True:
        t = sc[0]
        bounds(Tp, Wp, comparable, t, delta, K, Pu, Pl)
        if second_best(Mhat, Pl, eid, pos, bonus, ws, allowed, vtx, tmp) >= 0.5:
            return ERROR
        Mt[:] = -1
        if second_best(Mhat, Pu, eid, pos, bonus, ws, allowed, vtx, Mt) <= 0.5:
            return DONE
        L = math.log(4.0 * K * float(t) ** 3 / delta)
        bc = -1.0
        be = -1
        bf = -1
        for j in range(l):
            e = Mt[j]
            f = Mhat[j]
            if e != f:
                c = 1.0 if Tp[e, f] == 0 else math.sqrt(L / (2.0 * Tp[e, f]))
                if c > bc:
                    bc = c
                    be = e
                    bf = f
        if budget == 0:
            return SUSPEND
        if sc[1] >= u.shape[0]:
            return REFILL
        won = u[sc[1]] < truth[be, bf]
        sc[1] += 1
        Tp[be, bf] += 1
        Tp[bf, be] += 1
        if won:
            Wp[be, bf] += 1
        else:
            Wp[bf, be] += 1
        counts[be, bf] += 1
        budget -= 1
        sc[2] += 1
        sc[0] = t + 1
