"""CLUCB-Borda-PAC and CLUCB-Borda-Exact.

Borda identification reduces to combinatorial pure exploration with edge
rewards w(e) = E_{M' uniform}[p(e, e(M', s(e)))]: a duel of e against the
edge of a uniformly sampled matching at e's position is an unbiased pull of
w(e). The round loop runs compiled; opponents come from the sampler in
buffered batches and duel outcomes are resolved against the environment's
hidden matrix, with pulls accounted back to the environment.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from . import _kernels as kn
from .env import DuelEnvironment
from .errors import BudgetExceeded
from .graph import BipartiteGraph, Matching
from .sampler import SamplerConfig, sample_matchings

SAMPLE_CAP = 10 ** 8
EXACT_TOL = 1e-9

STOP, BREAK, REFILL, CAPPED = 0, 1, 2, 3


@dataclass
class BordaRunTrace:
    rounds: int = 0
    samples: int = 0
    pulls_per_edge: list = field(default_factory=list)
    matching: tuple | None = None
    stop_reason: str = ""
    epochs: list = field(default_factory=list)  # (q, eps_q, delta_q, rounds)
    self_duels: int = 0
    eta: float = 0.0
    sampler_mode: str = "exact"
    rounds_recorded: dict | None = None


@njit(cache=True)
def _rounds(eid, pos, bonus, table, K, delta, eps, exact, truth, opp, T_edge, S_edge, t0,
            max_rounds, counts, seed, reveal, rec_z, rec_M, rec_Mt, rec_n):
    """Run rounds t0, t0+1, ... of one CLUCB phase.

    Returns (status, t, opponents used, M_t, Mtilde_t, diff, self duels);
    ``t`` is the round that stopped (or the next round to run on REFILL/CAPPED).
    """
    np.random.seed(seed)
    l = eid.shape[0]
    m = pos.shape[0]
    allowed = np.ones(m, dtype=np.bool_)
    wbar = np.zeros(m)
    c = np.empty(m)
    wt = np.empty(m)
    Mt = np.empty(l, dtype=np.int64)
    Mtil = np.empty(l, dtype=np.int64)
    inM = np.zeros(m, dtype=np.bool_)
    inMt = np.zeros(m, dtype=np.bool_)
    ws = kn.make_workspace_t(l, eid.shape[1], table)
    used = 0
    selfd = 0
    t = t0
    done = 0
    diff = 0.0
    while True:
        for e in range(m):
            if T_edge[e] > 0:
                wbar[e] = S_edge[e] / T_edge[e]
            else:
                wbar[e] = 0.0
        kn.mwmc_ws(eid, wbar, allowed, bonus, Mt, ws)
        L = math.log(4.0 * K * t ** 3 / delta)
        inM[:] = False
        for j in range(l):
            inM[Mt[j]] = True
        for e in range(m):
            if T_edge[e] > 0:
                c[e] = math.sqrt(L / (2.0 * T_edge[e]))
            else:
                c[e] = 1.0
            if inM[e]:
                wt[e] = wbar[e] - c[e] - 0.25 * eps
            else:
                wt[e] = wbar[e] + c[e] + 0.25 * eps
        kn.mwmc_ws(eid, wt, allowed, bonus, Mtil, ws)
        diff = kn.mwmc_value(wt, Mtil) - kn.mwmc_value(wt, Mt)
        if exact:
            if diff <= 1e-9:
                return STOP, t, used, Mt, Mtil, diff, selfd
            if diff <= l * eps:
                return BREAK, t, used, Mt, Mtil, diff, selfd
        elif diff <= l * eps:
            return STOP, t, used, Mt, Mtil, diff, selfd
        if done >= max_rounds:
            return CAPPED, t, used, Mt, Mtil, diff, selfd
        if used >= opp.shape[0]:
            return REFILL, t, used, Mt, Mtil, diff, selfd
        inMt[:] = False
        for j in range(l):
            inMt[Mtil[j]] = True
        z = -1
        best = -1.0
        for e in range(m):
            if inM[e] != inMt[e] and c[e] > best:
                best = c[e]
                z = e
        f = opp[used, pos[z]]
        used += 1
        if f == z:
            x = 1.0 if np.random.random() < 0.5 else 0.0
            selfd += 1
        else:
            x = 1.0 if np.random.random() < truth[z, f] else 0.0
            counts[z, f] += 1
        T_edge[z] += 1
        if reveal.shape[0] > 0:
            S_edge[z] = reveal[z] * T_edge[z]
        else:
            S_edge[z] += x
        k = t - 1
        if k < rec_n:
            rec_z[k] = z
            for j in range(l):
                rec_M[k, j] = Mt[j]
                rec_Mt[k, j] = Mtil[j]
        t += 1
        done += 1


class _Phase:
    """One CLUCB phase (the whole PAC run, or one Exact epoch)."""

    def __init__(self, env, G, delta, eps, exact, sampler_cfg, srng, record, reveal):
        self.env, self.G, self.delta, self.eps, self.exact = env, G, delta, eps, exact
        self.cfg, self.srng = sampler_cfg, srng
        self.T = np.zeros(G.m, dtype=np.int64)
        self.S = np.zeros(G.m)
        self.record = record
        self.reveal = np.zeros(0) if reveal is None else np.asarray(reveal, dtype=float)
        n = record
        self.rec = (np.zeros(n, np.int64), np.zeros((n, G.l), np.int64), np.zeros((n, G.l), np.int64))

    def run(self, budget):
        """Returns (status, matching, rounds, samples, self duels)."""
        G, env = self.G, self.env
        truth = env._truth.p
        t, samples, selfd, B = 1, 0, 0, 1024
        while True:
            opp = sample_matchings(G, self.cfg, self.srng, B)
            counts = np.zeros((G.m, G.m), dtype=np.int64)
            st, t, used, Mt, _, _, sd = _rounds(
                G.eid, G.pos, G.bonus, G.scan_table, float(G.K), self.delta, self.eps, self.exact, truth, opp,
                self.T, self.S, t, budget - samples, counts, env.kernel_seed(), self.reveal,
                *self.rec, self.record)
            env.record_bulk(counts)
            samples += int(counts.sum())
            selfd += sd
            if st != REFILL:
                return st, Matching(tuple(int(e) for e in Mt), G.m), t, samples, selfd
            B = min(2 * B, 1 << 17)


def _sampler_rng(env, cfg):
    seed = cfg.seed if cfg.seed is not None else [env.seed, 0x5A4D]
    return np.random.default_rng(seed)


def clucb_borda_pac(env: DuelEnvironment, G: BipartiteGraph, delta: float, epsilon: float,
                    sampler_cfg: SamplerConfig | None = None, sample_cap=SAMPLE_CAP,
                    record_rounds=0, reveal=None):
    """Returns (M, trace) with B(M) >= B(M*) - epsilon w.p. >= 1 - delta.

    ``record_rounds`` keeps (z_t, M_t, Mtilde_t) for the first rounds;
    ``reveal`` (test hook) forces the empirical mean of a pulled edge to the given value.
    """
    if not 0 < delta < 1 or epsilon <= 0:
        raise ValueError("need delta in (0,1) and epsilon > 0")
    cfg = replace(sampler_cfg or SamplerConfig(), eta=min(epsilon / 8, 0.999))
    ph = _Phase(env, G, delta, epsilon, False, cfg, _sampler_rng(env, cfg), record_rounds, reveal)
    st, M, t, samples, selfd = ph.run(sample_cap)
    tr = BordaRunTrace(rounds=t if st == STOP else t - 1, samples=samples,
                       pulls_per_edge=ph.T.tolist(), matching=M.edge_ids,
                       stop_reason="pac-gap-closed", self_duels=selfd, eta=cfg.eta,
                       sampler_mode=cfg.mode)
    if record_rounds:
        tr.rounds_recorded = _recorded(ph, tr.rounds)
    if st == CAPPED:
        tr.stop_reason = "budget-exceeded"
        raise BudgetExceeded(f"sample cap {sample_cap} reached", tr)
    return M, tr


def _recorded(ph, rounds):
    n = min(rounds, ph.record)
    z, a, b = ph.rec
    return {"z": z[:n].tolist(), "M": a[:n].tolist(), "Mtilde": b[:n].tolist()}


def clucb_borda_exact(env: DuelEnvironment, G: BipartiteGraph, delta: float,
                      sampler_cfg: SamplerConfig | None = None, sample_cap=SAMPLE_CAP,
                      max_epochs=60):
    """Epochs q = 1, 2, ... of PAC with eps_q = 2^-q, delta_q = delta / (2 q^2), fresh statistics.

    Returns M_t at the first round where the adjusted optimum equals the
    unadjusted one (difference <= 1e-9); a difference <= l eps_q ends the epoch.
    """
    if not 0 < delta < 1:
        raise ValueError("need delta in (0,1)")
    base = sampler_cfg or SamplerConfig()
    srng = _sampler_rng(env, base)
    tr = BordaRunTrace(sampler_mode=base.mode)
    pulls = np.zeros(G.m, dtype=np.int64)
    for q in range(1, max_epochs + 1):
        eps_q, delta_q = 2.0 ** -q, delta / (2 * q * q)
        cfg = replace(base, eta=eps_q / 8)
        ph = _Phase(env, G, delta_q, eps_q, True, cfg, srng, 0, None)
        st, M, t, samples, selfd = ph.run(sample_cap - tr.samples)
        rounds = t if st != CAPPED else t - 1
        tr.epochs.append((q, eps_q, delta_q, rounds))
        tr.rounds += rounds
        tr.samples += samples
        tr.self_duels += selfd
        pulls += ph.T
        tr.pulls_per_edge = pulls.tolist()
        tr.eta = cfg.eta
        if st == STOP:
            tr.matching = M.edge_ids
            tr.stop_reason = "exact-equality"
            return M, tr
        if st == CAPPED:
            tr.stop_reason = "budget-exceeded"
            raise BudgetExceeded(f"sample cap {sample_cap} reached in epoch {q}", tr)
    tr.stop_reason = "budget-exceeded"
    raise BudgetExceeded(f"no exact stop within {max_epochs} epochs", tr)
