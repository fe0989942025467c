import math

import numpy as np
import pytest

from cpedb import DuelEnvironment, DuelStats, IncomparablePair, PreferenceMatrix, confidence_radius
from cpedb.env import bound_matrices, edge_radius, pair_radius
from cpedb.graph import BipartiteGraph
from cpedb.instances import fig1


def test_duel_extremes_and_frequency():
    G, P = fig1()
    env = DuelEnvironment(P, 0)
    assert all(env.sample_duel(0, 2) for _ in range(200))  # p = 1
    assert not any(env.sample_duel(3, 4) for _ in range(200))  # p = 0
    wins = sum(env.sample_duel(1, 0) for _ in range(10_000))
    assert abs(wins / 10_000 - 0.55) <= 0.02
    assert env.total_samples == 10_400
    assert env.per_pair_samples[1, 0] == 10_000
    with pytest.raises(IncomparablePair):
        env.sample_duel(0, 3)
    with pytest.raises(IncomparablePair):
        env.sample_duel(1, 1)


def test_half_probability_frequency():
    G = BipartiteGraph(2, 1, ((0, 0), (1, 0)))
    env = DuelEnvironment(PreferenceMatrix.constant(G), 7)
    assert abs(np.mean([env.sample_duel(0, 1) for _ in range(10_000)]) - 0.5) <= 0.02


def test_determinism():
    G, P = fig1()
    a, b = DuelEnvironment(P, 42), DuelEnvironment(P, 42)
    seq = [(1, 0), (0, 2), (1, 2), (3, 4)] * 50
    assert [a.sample_duel(*s) for s in seq] == [b.sample_duel(*s) for s in seq]
    assert a.kernel_seed() == b.kernel_seed()
    assert np.array_equal(a.per_pair_samples, b.per_pair_samples)


def test_radius():
    assert confidence_radius(0, 1, 0.1, 10) == 1.0
    assert confidence_radius(200, 1, 0.1, 10) == pytest.approx(math.sqrt(math.log(400) / 400))
    assert confidence_radius(200, 1, 0.1, 10) == pytest.approx(0.1224, abs=1e-4)
    r = confidence_radius(np.array([10, 20, 40, 80]), 3, 0.1, 4)
    assert np.all(np.diff(r) < 0)
    with pytest.raises(ValueError):
        confidence_radius(1, 0, 0.1, 4)


def test_stats_and_bounds():
    s = DuelStats(3)
    s.round = 1
    assert pair_radius(s, 0, 1, 0.1, 3) == 1.0
    assert edge_radius(s, 0, 0.1, 3) == 1.0
    comp = np.ones((3, 3), bool)
    up, lo = bound_matrices(s, 0.1, 3, comp)
    assert up[0, 1] == 1.0 and lo[0, 1] == 0.0  # p-hat 1/2 with radius 1 clamps
    assert up[1, 1] == 0.5 and lo[1, 1] == 0.5
    s.record_pair(0, 1, True)
    s.record_pair(0, 1, True)
    s.record_pair(1, 0, True)
    assert s.phat[0, 1] == pytest.approx(2 / 3) and s.phat[1, 0] == pytest.approx(1 / 3)
    s.record_edge(2, 0.25)
    s.record_edge(2, 0.75)
    assert s.mean_edge[2] == 0.5 and s.mean_edge[0] == 0


def test_monte_carlo_coverage():
    """1000 duels per comparable pair; the truth lies in [Punder, Pbar] in >= 1 - delta of trials."""
    G, P = fig1()
    delta, trials, miss = 0.1, 200, 0
    pairs = G.comparable_pairs
    for seed in range(trials):
        rng = np.random.default_rng(seed)
        s = DuelStats(G.m)
        s.round = 1
        for i, j in pairs:
            w = int((rng.random(1000) < P.p[i, j]).sum())
            s.T_pair[i, j] = s.T_pair[j, i] = 1000
            s.wins_pair[i, j], s.wins_pair[j, i] = w, 1000 - w
        up, lo = bound_matrices(s, delta, G.K, G.comparable)
        if np.any(P.p > up + 1e-12) or np.any(P.p < lo - 1e-12):
            miss += 1
    assert miss / trials <= delta
