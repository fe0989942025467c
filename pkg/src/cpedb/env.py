"""Simulated duel environment and the shared confidence-bound machinery."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IncomparablePair
from .preference import PreferenceMatrix

GENERATOR = "numpy.random.PCG64"


class DuelEnvironment:
    """Hidden preference matrix, a seeded generator and sample accounting.

    Algorithms only see outcomes of ``sample_duel``; the ``_truth`` attribute
    is read by compiled simulation loops that resolve duels inline and then
    report their pulls back through ``record_bulk``.
    """

    def __init__(self, truth: PreferenceMatrix, seed: int = 0):
        self._truth = truth
        self.seed = int(seed)
        self.rng = np.random.default_rng(self.seed)
        self.per_pair_samples = np.zeros((truth.m, truth.m), dtype=np.int64)
        self.total_samples = 0

    def sample_duel(self, e: int, f: int) -> bool:
        if e == f or not self._truth.comparable[e, f]:
            raise IncomparablePair(f"edges {e} and {f} cannot duel")
        self.per_pair_samples[e, f] += 1
        self.total_samples += 1
        return bool(self.rng.random() < self._truth.p[e, f])

    def record_bulk(self, counts):
        """Account for pulls resolved inside a compiled loop (counts[e, f] = pulls of (e, f))."""
        counts = np.asarray(counts, dtype=np.int64)
        self.per_pair_samples += counts
        self.total_samples += int(counts.sum())

    def kernel_seed(self):
        """Seed for the Mersenne Twister used inside compiled loops, drawn from this env's stream."""
        return int(self.rng.integers(2 ** 31))

    def metadata(self):
        return {"seed": self.seed, "generator": GENERATOR,
                "kernel_generator": "numba MT19937 seeded from the environment stream",
                "truth_sha256_16": self._truth.digest()}


def confidence_radius(T, t, delta, K):
    """sqrt(ln(4 K t^3 / delta) / (2 T)), and 1 where T = 0. Vectorized over T."""
    if t < 1:
        raise ValueError("round t must be >= 1")
    T = np.asarray(T, dtype=float)
    L = math.log(4.0 * K * float(t) ** 3 / delta)
    with np.errstate(divide="ignore"):
        r = np.sqrt(L / (2.0 * T))
    r = np.where(T > 0, r, 1.0)
    return float(r) if r.ndim == 0 else r


@dataclass
class DuelStats:
    """Pairwise counts/wins plus Algorithm-1 style per-edge counters."""
    m: int
    T_pair: np.ndarray = None
    wins_pair: np.ndarray = None
    T_edge: np.ndarray = None
    sum_edge: np.ndarray = None
    round: int = 0

    def __post_init__(self):
        m = self.m
        if self.T_pair is None:
            self.T_pair = np.zeros((m, m), dtype=np.int64)
            self.wins_pair = np.zeros((m, m), dtype=np.int64)
            self.T_edge = np.zeros(m, dtype=np.int64)
            self.sum_edge = np.zeros(m)

    def record_pair(self, e, f, e_won: bool):
        self.T_pair[e, f] += 1
        self.T_pair[f, e] += 1
        if e_won:
            self.wins_pair[e, f] += 1
        else:
            self.wins_pair[f, e] += 1

    def record_edge(self, e, x):
        self.T_edge[e] += 1
        self.sum_edge[e] += x

    @property
    def mean_edge(self):
        """w-bar(e), 0 where unpulled."""
        out = np.zeros(self.m)
        np.divide(self.sum_edge, self.T_edge, out=out, where=self.T_edge > 0)
        return out

    @property
    def phat(self):
        """Empirical win rates; 1/2 on the diagonal and where unsampled."""
        out = np.full((self.m, self.m), 0.5)
        np.divide(self.wins_pair, self.T_pair, out=out, where=self.T_pair > 0)
        return out


def pair_radius(stats: DuelStats, e, f, delta, K, t=None):
    return confidence_radius(stats.T_pair[e, f], stats.round if t is None else t, delta, K)


def edge_radius(stats: DuelStats, e, delta, K, t=None):
    return confidence_radius(stats.T_edge[e], stats.round if t is None else t, delta, K)


def bound_matrices(stats: DuelStats, delta, K, comparable, t=None):
    """(Pbar, Punder): clamp(p-hat +/- c); diagonal 1/2; incomparable entries 0."""
    t = stats.round if t is None else t
    c = confidence_radius(stats.T_pair, t, delta, K)
    ph = stats.phat
    up = np.minimum(1.0, ph + c)
    lo = np.maximum(0.0, ph - c)
    up[~comparable] = 0.0
    lo[~comparable] = 0.0
    np.fill_diagonal(up, 0.5)
    np.fill_diagonal(lo, 0.5)
    return up, lo
