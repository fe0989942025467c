"""Preference matrices, matching-vs-matching preference and ground-truth oracles.

Everything here is brute force over the enumerated decision class and meant
as a reference for tests and experiment reports.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NonUniqueWinner
from .graph import BipartiteGraph, Matching, enumerate_maximum_matchings, width

TIE_TOL = 1e-12
ANTISYM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PreferenceMatrix:
    p: np.ndarray
    comparable: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        comp = np.array(self.comparable, dtype=bool)
        m = p.shape[0]
        if p.shape != (m, m) or comp.shape != (m, m):
            raise ValueError("p and comparable must be square and of equal shape")
        if not np.all(np.isfinite(p)) or p.min() < 0 or p.max() > 1:
            raise ValueError("probabilities must lie in [0, 1]")
        if not np.all(np.diag(p) == 0.5) or not np.all(np.diag(comp)):
            raise ValueError("diagonal must be 1/2 and comparable")
        if np.any(comp != comp.T):
            raise ValueError("comparability must be symmetric")
        if np.any(p[~comp] != 0):
            raise ValueError("incomparable entries must be 0")
        off = comp & ~np.eye(m, dtype=bool)
        if np.any(np.abs(p + p.T - 1)[off] > ANTISYM_TOL):
            raise ValueError("p[i,j] + p[j,i] must equal 1 on comparable pairs")
        p.setflags(write=False)
        comp.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "comparable", comp)

    @property
    def m(self):
        return self.p.shape[0]

    @classmethod
    def from_upper(cls, G: BipartiteGraph, upper):
        """Build from {(i, j): p_ij} over comparable i < j; the rest is synthesized."""
        p = np.zeros((G.m, G.m))
        np.fill_diagonal(p, 0.5)
        comp = G.comparable
        for (i, j), v in dict(upper).items():
            i, j = int(i), int(j)
            if i == j or not comp[i, j]:
                raise ValueError(f"entry ({i},{j}) is not a comparable pair")
            p[i, j], p[j, i] = v, 1.0 - v
        missing = [(i, j) for i, j in G.comparable_pairs if (i, j) not in upper and (j, i) not in upper]
        if missing:
            raise ValueError(f"missing comparable entries {missing}")
        return cls(p, comp)

    @classmethod
    def constant(cls, G: BipartiteGraph, value=0.5):
        return cls.from_upper(G, {pr: value for pr in G.comparable_pairs})

    def scaled(self, s):
        """Shrink every comparable entry toward 1/2 by the factor s."""
        p = np.where(self.comparable, 0.5 + s * (self.p - 0.5), 0.0)
        return PreferenceMatrix(p, self.comparable)

    def entries(self):
        m = self.m
        return [[i, j, float(self.p[i, j])] for i in range(m) for j in range(i + 1, m) if self.comparable[i, j]]

    def to_dict(self):
        return {"m": self.m, "entries": self.entries()}

    def digest(self):
        return hashlib.sha256(np.ascontiguousarray(self.p).tobytes()).hexdigest()[:16]


def preference_from_dict(G: BipartiteGraph, d, perm=None):
    """Parse {m, entries: [[i, j, p], ...]}; ``perm`` remaps file edge order to canonical."""
    if int(d["m"]) != G.m:
        raise ValueError(f"preference has m={d['m']} but the graph has {G.m} edges")
    up = {}
    for i, j, v in d["entries"]:
        i, j = int(i), int(j)
        if perm is not None:
            i, j = perm[i], perm[j]
        if i > j:
            i, j, v = j, i, 1.0 - float(v)
        up[(i, j)] = float(v)
    return PreferenceMatrix.from_upper(G, up)


def matching_preference(M1: Matching, M2: Matching, P: PreferenceMatrix):
    """f(M1, M2) = (1/l) sum_j p[e(M1,j), e(M2,j)]."""
    a, b = M1.edge_ids, M2.edge_ids
    return float(sum(P.p[x, y] for x, y in zip(a, b)) / len(a))


def preference_table(ms, P: PreferenceMatrix):
    """F[a, b] = f(ms[a], ms[b]) for an enumeration ``ms``."""
    T = np.array([M.edge_ids for M in ms], dtype=np.int64)
    l = T.shape[1]
    return P.p[T[:, None, :], T[None, :, :]].sum(axis=2) / l


def borda_score(M: Matching, P: PreferenceMatrix, ms):
    return float(np.mean([matching_preference(M, y, P) for y in ms]))


def edge_rewards(P: PreferenceMatrix, G: BipartiteGraph, ms=None):
    """w(e) = (1/|M|) sum_{M'} p[e, e(M', s(e))]; sum_{e in M} w(e) = l B(M)."""
    ms = enumerate_maximum_matchings(G) if ms is None else ms
    T = np.array([M.edge_ids for M in ms], dtype=np.int64)
    opp = T[:, G.pos]  # opp[k, e] = edge of matching k at e's position
    return P.p[np.arange(G.m)[None, :], opp].mean(axis=0)


def edge_reward(e, P, G, ms=None):
    return float(edge_rewards(P, G, ms)[e])


def find_borda_winner(P: PreferenceMatrix, G: BipartiteGraph, ms=None):
    ms = enumerate_maximum_matchings(G) if ms is None else ms
    B = preference_table(ms, P).mean(axis=1)
    order = np.argsort(-B, kind="stable")
    if len(ms) > 1 and B[order[0]] - B[order[1]] <= TIE_TOL:
        raise NonUniqueWinner(f"Borda scores tie: {ms[order[0]]} and {ms[order[1]]}")
    return ms[int(order[0])]


def find_condorcet_winner(P: PreferenceMatrix, G: BipartiteGraph, ms=None):
    ms = enumerate_maximum_matchings(G) if ms is None else ms
    F = preference_table(ms, P)
    np.fill_diagonal(F, np.inf)
    winners = [k for k in range(len(ms)) if np.all(F[k] > 0.5 + TIE_TOL)]
    return ms[winners[0]] if winners else None


def positions_differing(M1: Matching, M2: Matching):
    """d_{M1,M2}: positions whose edges differ."""
    return sum(a != b for a, b in zip(M1.edge_ids, M2.edge_ids))


def _max_or_ninf(vals):
    return max(vals) if vals else -math.inf


@dataclass
class GapReport:
    borda_winner: tuple | None
    condorcet_winner: tuple | None
    width: int
    borda_gap: list | None = None
    borda_gap_min: float | None = None
    condorcet_gap: list | None = None
    pair_gap: dict | None = None
    verification_gap: dict | None = None
    H_borda: float | None = None
    H_cond_ver: float | None = None
    notes: list = field(default_factory=list)

    def H_borda_eps(self, eps):
        """sum_e min(width^2 / gap^2, 1/eps^2)."""
        if self.borda_gap is None:
            return None
        return float(sum(min(self.width ** 2 / g ** 2 if g > 0 else math.inf, 1 / eps ** 2)
                         for g in self.borda_gap))

    def to_dict(self):
        d = dict(self.__dict__)
        if self.pair_gap is not None:
            d["pair_gap"] = {f"{i},{j}": v for (i, j), v in self.pair_gap.items()}
        if self.verification_gap is not None:
            d["verification_gap"] = {str(k): v for k, v in self.verification_gap.items()}
        return d


def _inv_sq(g):
    return 0.0 if math.isinf(g) else 1.0 / g ** 2


def compute_gaps(G: BipartiteGraph, P: PreferenceMatrix, ms=None):
    ms = enumerate_maximum_matchings(G) if ms is None else ms
    rep = GapReport(None, None, width(G))
    if len(ms) < 2:
        rep.notes.append("unique maximum matching: width 0 and gaps undefined")
    w = edge_rewards(P, G, ms)
    W = np.array([w[list(M.edge_ids)].sum() for M in ms])
    try:
        Mb = find_borda_winner(P, G, ms)
    except NonUniqueWinner as exc:
        rep.notes.append(f"borda: {exc}")
        Mb = None
    if Mb is not None:
        rep.borda_winner = Mb.edge_ids
        wstar = float(W[ms.index(Mb)])
        gaps = []
        for e in range(G.m):
            if e in Mb:
                other = [W[k] for k, M in enumerate(ms) if e not in M]
            else:
                other = [W[k] for k, M in enumerate(ms) if e in M]
            gaps.append(float(wstar - _max_or_ninf(other)))
        rep.borda_gap = gaps
        rep.borda_gap_min = min(gaps)
        rep.H_borda = float(sum(_inv_sq(g) for g in gaps))
    Mc = find_condorcet_winner(P, G, ms)
    if Mc is None:
        rep.notes.append("condorcet: no winner")
        return rep
    rep.condorcet_winner = Mc.edge_ids
    fstar = [matching_preference(M, Mc, P) for M in ms]
    cg = []
    for e in range(G.m):
        if e in Mc:
            other = [fstar[k] for k, M in enumerate(ms) if e not in M]
        else:
            other = [fstar[k] for k, M in enumerate(ms) if e in M]
        cg.append(float(0.5 - _max_or_ninf(other)))
    rep.condorcet_gap = cg
    rep.pair_gap = {(i, j): max(cg[i], cg[j]) for i, j in G.comparable_pairs}
    vg = {}
    for e in range(G.m):
        if e in Mc:
            continue
        vals = [(G.l / positions_differing(Mc, M)) * (0.5 - fstar[k])
                for k, M in enumerate(ms) if e in M and M != Mc]
        vg[e] = float(min(vals)) if vals else math.inf
    rep.verification_gap = vg
    rep.H_cond_ver = float(sum(_inv_sq(g) for g in vg.values()))
    return rep


def load_instance(path):
    """Instance file: graph keys plus an embedded ``preference`` object."""
    from .graph import graph_from_dict
    d = json.loads(Path(path).read_text())
    G, perm = graph_from_dict(d)
    if "preference" not in d:
        raise ValueError(f"{path}: instance has no 'preference' object")
    return G, preference_from_dict(G, d["preference"], perm), perm


def instance_to_dict(G, P):
    d = G.to_dict()
    d["preference"] = P.to_dict()
    return d
