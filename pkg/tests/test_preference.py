import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cpedb import (NonUniqueWinner, PreferenceMatrix, borda_score, compute_gaps,
                   edge_rewards, enumerate_maximum_matchings, find_borda_winner,
                   find_condorcet_winner, matching_preference)
from cpedb.graph import BipartiteGraph, Matching
from cpedb.instances import fig1, random_instance, random_preference, rps_instance
from cpedb.preference import preference_from_dict

import refs

E1, E2, E3, E4, E5 = range(5)


@pytest.fixture
def inst():
    return fig1()


def M(G, *e):
    return Matching.of(G, e)


def test_matching_preference_examples(inst):
    G, P = inst
    assert matching_preference(M(G, E2, E5), M(G, E1, E4), P) == pytest.approx(0.775, abs=1e-12)
    for X in enumerate_maximum_matchings(G):
        assert matching_preference(X, X, P) == 0.5


def test_borda_scores(inst):
    G, P = inst
    ms = enumerate_maximum_matchings(G)
    assert abs(borda_score(M(G, E1, E5), P, ms) - 0.64) <= 1e-12
    assert abs(borda_score(M(G, E2, E5), P, ms) - 0.615) <= 1e-12
    assert abs(sum(borda_score(X, P, ms) for X in ms) - len(ms) / 2) <= 1e-12


def test_edge_rewards(inst):
    G, P = inst
    w = edge_rewards(P, G)
    assert np.allclose(w, [0.58, 0.53, 0.28, 0.2, 0.7], atol=1e-12)
    assert abs(w[E1] + w[E5] - 1.28) <= 1e-12
    assert np.all(edge_rewards(PreferenceMatrix.constant(G), G) == 0.5)


def test_winners(inst):
    G, P = inst
    assert find_borda_winner(P, G).edge_ids == (E1, E5)
    assert find_condorcet_winner(P, G).edge_ids == (E2, E5)
    sym = PreferenceMatrix.constant(G)
    with pytest.raises(NonUniqueWinner):
        find_borda_winner(sym, G)
    assert find_condorcet_winner(sym, G) is None
    Gr, Pr = rps_instance(0.6)
    assert find_condorcet_winner(Pr, Gr) is None


def test_two_matching_borda_gap():
    G = BipartiteGraph(2, 1, ((0, 0), (1, 0)))
    # B(a) = (0.5 + 0.6) / 2 = 0.55, B(b) = 0.45: gap 0.1
    P = PreferenceMatrix.from_upper(G, {(0, 1): 0.6})
    assert find_borda_winner(P, G).edge_ids == (0,)


def test_gaps_fig1(inst):
    G, P = inst
    r = compute_gaps(G, P)
    assert r.borda_winner == (E1, E5) and r.condorcet_winner == (E2, E5) and r.width == 4
    assert np.allclose(r.borda_gap, [0.05, 0.05, 0.3, 0.5, 0.5], atol=1e-12)
    assert np.allclose(r.condorcet_gap, [0.025, 0.025, 0.025, 0.25, 0.25], atol=1e-12)
    assert r.verification_gap[E1] == pytest.approx(0.05, abs=1e-12)
    assert r.verification_gap[E3] == pytest.approx(0.05, abs=1e-12)
    assert r.verification_gap[E4] == pytest.approx(0.275, abs=1e-12)
    assert set(r.verification_gap) == {E1, E3, E4}
    assert r.H_borda == pytest.approx(2 / 0.05 ** 2 + 1 / 0.3 ** 2 + 2 / 0.5 ** 2)
    assert r.H_borda == pytest.approx(819.11, abs=0.01)
    assert r.H_cond_ver == pytest.approx(813.22, abs=0.01)
    assert r.borda_gap_min == pytest.approx(0.05)
    for (i, j), v in r.pair_gap.items():
        assert v == max(r.condorcet_gap[i], r.condorcet_gap[j])
    # sum_e min(16/gap^2, 400) at eps = 0.05: e1, e2 hit the ceiling
    assert r.H_borda_eps(0.05) == pytest.approx(400 + 400 + 16 / 0.09 + 16 / 0.25 + 16 / 0.25)
    json.dumps(r.to_dict())


def test_validation(inst):
    G, P = inst
    p = np.array(P.p)
    p[0, 1] = 0.5  # breaks p + p^T = 1
    with pytest.raises(ValueError):
        PreferenceMatrix(p, P.comparable)
    with pytest.raises(ValueError):
        PreferenceMatrix.from_upper(G, {(0, 1): 0.4})  # missing entries
    with pytest.raises(ValueError):
        PreferenceMatrix.from_upper(G, {(0, 3): 0.4, (0, 1): 0.45, (0, 2): 1.0, (1, 2): 0.55, (3, 4): 0.0})


def test_json_round_trip(inst):
    G, P = inst
    Q = preference_from_dict(G, json.loads(json.dumps(P.to_dict())))
    assert np.array_equal(Q.p, P.p)


def test_scaled_moves_toward_half(inst):
    G, P = inst
    Q = P.scaled(0.5)
    assert Q.p[0, 2] == 0.75 and Q.p[3, 4] == 0.25 and Q.p[0, 3] == 0


instances = st.integers(0, 10 ** 6).map(lambda s: random_instance(np.random.default_rng(s)))


@given(instances)
def test_reduction_identity_and_antisymmetry(inst):
    G, P = inst
    ms = enumerate_maximum_matchings(G)
    w = edge_rewards(P, G, ms)
    edges = G.edges
    raw = refs.matchings_by_subsets(G.l, edges)
    for X in ms:
        assert abs(w[list(X.edge_ids)].sum() - G.l * borda_score(X, P, ms)) <= 1e-12
        assert abs(borda_score(X, P, ms) - refs.borda(X.edge_ids, raw, P.p, edges)) <= 1e-12
    for X in ms[:4]:
        for Y in ms[:4]:
            assert abs(matching_preference(X, Y, P) + matching_preference(Y, X, P) - 1) <= 1e-12


@given(instances)
def test_gap_properties(inst):
    G, P = inst
    ms = enumerate_maximum_matchings(G)
    if len(ms) < 2:
        return
    r = compute_gaps(G, P, ms)
    if r.borda_winner is not None:
        w = edge_rewards(P, G, ms)
        best = max(ms, key=lambda X: w[list(X.edge_ids)].sum())
        assert best.edge_ids == r.borda_winner
        assert all(g > 0 for g in r.borda_gap)
    if r.condorcet_winner is not None:
        for e, vg in r.verification_gap.items():
            assert vg >= r.condorcet_gap[e] - 1e-12


@given(st.integers(0, 10 ** 6))
def test_planted_condorcet_winner_found(seed):
    rng = np.random.default_rng(seed)
    G, _ = random_instance(rng)
    Mp = enumerate_maximum_matchings(G)[0]
    P = random_preference(rng, G, planted=Mp.edge_ids, margin=0.05)
    assert find_condorcet_winner(P, G) == Mp
    rep = compute_gaps(G, P)
    assert all(g > 0 for g in rep.condorcet_gap if not math.isinf(g))
