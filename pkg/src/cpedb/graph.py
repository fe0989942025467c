"""Bipartite candidate/position graphs, maximum matchings and matching oracles.

Edges are stored position-major, candidate-minor; edge index i always refers
to the i-th edge of that order. A "maximum matching" covers every position.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import _kernels as kn
from .errors import InfeasibleConstraints, InstanceTooLarge

ENUM_CAP = 24
# below this many maximum matchings, linear steps scan a table instead of solving
SCAN_MAX = 64


@dataclass(frozen=True)
class BipartiteGraph:
    n_candidates: int
    n_positions: int
    edges: tuple  # ((candidate, position), ...) in canonical order

    def __post_init__(self):
        edges = tuple((int(c), int(j)) for c, j in self.edges)
        object.__setattr__(self, "edges", edges)
        n, l = self.n_candidates, self.n_positions
        if l < 1 or n < l:
            raise ValueError(f"need 1 <= positions <= candidates, got l={l}, n={n}")
        for c, j in edges:
            if not (0 <= c < n and 0 <= j < l):
                raise ValueError(f"edge {(c, j)} out of range")
        if list(edges) != sorted(set(edges), key=lambda e: (e[1], e[0])):
            raise ValueError("edges must be unique and sorted position-major, candidate-minor")
        out = np.empty(l, dtype=np.int64)
        if not kn.mwmc(self.eid, np.zeros(self.m), np.ones(self.m, bool), self.bonus, out):
            raise ValueError("graph has no matching covering every position")

    @classmethod
    def from_edges(cls, n_candidates, n_positions, edges):
        """Build from edges in any order; returns (graph, perm) with perm[k] the
        canonical index of input edge k."""
        edges = [(int(c), int(j)) for c, j in edges]
        if len(set(edges)) != len(edges):
            raise ValueError("duplicate edge")
        order = sorted(range(len(edges)), key=lambda k: (edges[k][1], edges[k][0]))
        perm = [0] * len(edges)
        for new, old in enumerate(order):
            perm[old] = new
        return cls(n_candidates, n_positions, tuple(edges[k] for k in order)), perm

    @property
    def m(self):
        return len(self.edges)

    @property
    def l(self):
        return self.n_positions

    @cached_property
    def cand(self):
        return np.array([c for c, _ in self.edges], dtype=np.int64)

    @cached_property
    def pos(self):
        return np.array([j for _, j in self.edges], dtype=np.int64)

    @cached_property
    def eid(self):
        """(l, n) array: edge id of (candidate c, position j), -1 if absent."""
        a = -np.ones((self.n_positions, self.n_candidates), dtype=np.int64)
        for i, (c, j) in enumerate(self.edges):
            a[j, c] = i
        return a

    @cached_property
    def bonus(self):
        return kn.lex_bonus(self.m)

    @cached_property
    def position_buckets(self):
        b = [[] for _ in range(self.n_positions)]
        for i, (_, j) in enumerate(self.edges):
            b[j].append(i)
        return tuple(tuple(x) for x in b)

    @cached_property
    def comparable(self):
        return self.pos[:, None] == self.pos[None, :]

    @cached_property
    def K(self):
        """Number of distinct duels: sum_j |E_j|(|E_j|-1)/2."""
        return sum(len(b) * (len(b) - 1) // 2 for b in self.position_buckets)

    @cached_property
    def comparable_pairs(self):
        """All (i, j), i < j, sharing a position, in lexicographic order."""
        return tuple((a, b) for bucket in self.position_buckets
                     for ia, a in enumerate(bucket) for b in bucket[ia + 1:])

    @cached_property
    def scan_table(self):
        """All maximum matchings when there are at most SCAN_MAX of them, else empty."""
        empty = np.zeros((0, self.n_positions), dtype=np.int64)
        if self.m > ENUM_CAP:
            return empty
        tab = matching_table(self)
        return tab if len(tab) <= SCAN_MAX else empty

    def workspace(self):
        return kn.make_workspace_t(self.n_positions, self.n_candidates, self.scan_table)

    def matching(self, edge_ids):
        return Matching.of(self, edge_ids)

    def to_dict(self):
        return {"candidates": self.n_candidates, "positions": self.n_positions,
                "edges": [list(e) for e in self.edges]}


@dataclass(frozen=True, order=True)
class Matching:
    edge_ids: tuple
    m: int = field(compare=False)

    @classmethod
    def of(cls, G: BipartiteGraph, edge_ids):
        ids = tuple(sorted(int(e) for e in edge_ids))
        if len(ids) != G.n_positions:
            raise ValueError(f"a maximum matching has {G.n_positions} edges, got {len(ids)}")
        if any(not 0 <= e < G.m for e in ids):
            raise ValueError("edge id out of range")
        if len({G.edges[e][0] for e in ids}) != len(ids) or len({G.edges[e][1] for e in ids}) != len(ids):
            raise ValueError(f"{ids} is not a matching")
        return cls(ids, G.m)

    @property
    def chi(self):
        x = np.zeros(self.m)
        x[list(self.edge_ids)] = 1.0
        return x

    def __contains__(self, e):
        return e in self.edge_ids

    def __iter__(self):
        return iter(self.edge_ids)

    def __len__(self):
        return len(self.edge_ids)

    def __str__(self):
        return "{" + ",".join(f"e{e + 1}" for e in self.edge_ids) + "}"


@dataclass(frozen=True)
class ConstraintPair:
    accepted: frozenset = frozenset()
    rejected: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "accepted", frozenset(int(e) for e in self.accepted))
        object.__setattr__(self, "rejected", frozenset(int(e) for e in self.rejected))
        if self.accepted & self.rejected:
            raise ValueError("accepted and rejected sets overlap")

    def validate(self, G: BipartiteGraph):
        for e in self.accepted | self.rejected:
            if not 0 <= e < G.m:
                raise ValueError(f"edge {e} out of range")
        a = sorted(self.accepted)
        if len({G.edges[e][0] for e in a}) != len(a) or len({G.edges[e][1] for e in a}) != len(a):
            raise ValueError("accepted edges are not a partial matching")
        return self

    def allowed_mask(self, G: BipartiteGraph):
        """Edges surviving the surgery: R deleted, edges touching an accepted edge deleted."""
        self.validate(G)
        ok = np.ones(G.m, dtype=bool)
        ok[list(self.rejected)] = False
        for a in self.accepted:
            ca, ja = G.edges[a]
            clash = (G.cand == ca) | (G.pos == ja)
            clash[a] = False
            ok &= ~clash
        return ok

    def to_dict(self):
        return {"accepted": sorted(self.accepted), "rejected": sorted(self.rejected)}


NO_CONSTRAINTS = ConstraintPair()


def _mask(G, c):
    return np.ones(G.m, dtype=bool) if c is None else c.allowed_mask(G)


def restrict(G: BipartiteGraph, c: ConstraintPair):
    """Subgraph realizing the constraints plus the map sub-edge -> original edge."""
    ok = _mask(G, c)
    out = np.empty(G.n_positions, dtype=np.int64)
    if not kn.mwmc(G.eid, np.zeros(G.m), ok, G.bonus, out):
        raise InfeasibleConstraints(f"no maximum matching satisfies {c}")
    keep = np.flatnonzero(ok)
    sub = BipartiteGraph(G.n_candidates, G.n_positions, tuple(G.edges[i] for i in keep))
    return sub, keep


def enumerate_maximum_matchings(G: BipartiteGraph, c: ConstraintPair | None = None, cap=ENUM_CAP):
    """All maximum matchings satisfying c, sorted lexicographically."""
    if G.m > cap:
        raise InstanceTooLarge(f"{G.m} edges exceeds the enumeration cap {cap}")
    ok = _mask(G, c)
    buckets = [[e for e in b if ok[e]] for b in G.position_buckets]
    res, cur, used = [], [], set()

    def rec(j):
        if j == G.n_positions:
            res.append(Matching(tuple(cur), G.m))
            return
        for e in buckets[j]:
            cnd = G.edges[e][0]
            if cnd not in used:
                used.add(cnd)
                cur.append(e)
                rec(j + 1)
                cur.pop()
                used.discard(cnd)

    rec(0)
    if not res:
        raise InfeasibleConstraints(f"no maximum matching satisfies {c}")
    return res


def matching_table(G: BipartiteGraph, c: ConstraintPair | None = None, cap=ENUM_CAP):
    """Enumeration as an (|M|, l) int array of edge ids."""
    return np.array([M.edge_ids for M in enumerate_maximum_matchings(G, c, cap)], dtype=np.int64)


def mwmc(G: BipartiteGraph, w, c: ConstraintPair | None = None):
    w = np.asarray(w, dtype=float)
    if w.shape != (G.m,) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be a finite vector of length m")
    out = np.empty(G.n_positions, dtype=np.int64)
    if not kn.mwmc(G.eid, w, _mask(G, c), G.bonus, out):
        raise InfeasibleConstraints(f"no maximum matching satisfies {c}")
    return Matching(tuple(int(e) for e in out), G.m)


def min_cost_maximum_matching(G: BipartiteGraph, costs, c: ConstraintPair | None = None):
    return mwmc(G, -np.asarray(costs, dtype=float), c)


def _largest_component(G, edge_set):
    parent = {}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for e in edge_set:
        c, j = G.edges[e]
        for v in (("c", c), ("s", j)):
            parent.setdefault(v, v)
        ra, rb = find(("c", c)), find(("s", j))
        if ra != rb:
            parent[ra] = rb
    sizes = {}
    for e in edge_set:
        r = find(("c", G.edges[e][0]))
        sizes[r] = sizes.get(r, 0) + 1
    return max(sizes.values())


def width(G: BipartiteGraph, cap=ENUM_CAP):
    """Largest component (edge count) of M1 u M2 over distinct maximum matchings; 0 if |M| = 1."""
    ms = enumerate_maximum_matchings(G, None, cap)
    best = 0
    for a in range(len(ms)):
        for b in range(a + 1, len(ms)):
            best = max(best, _largest_component(G, set(ms[a].edge_ids) | set(ms[b].edge_ids)))
    return best


def graph_from_dict(d):
    """Parse {candidates, positions, edges}; returns (graph, perm)."""
    try:
        n, l, edges = int(d["candidates"]), int(d["positions"]), d["edges"]
    except KeyError as exc:
        raise ValueError(f"graph is missing key {exc}") from None
    return BipartiteGraph.from_edges(n, l, [tuple(e) for e in edges])


def load_graph(path):
    return graph_from_dict(json.loads(Path(path).read_text()))
