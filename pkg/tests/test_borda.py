import numpy as np
import pytest

from cpedb import (BudgetExceeded, DuelEnvironment, PreferenceMatrix, SamplerConfig,
                   clucb_borda_exact, clucb_borda_pac, enumerate_maximum_matchings)
from cpedb.graph import BipartiteGraph
from cpedb.instances import fig1
from cpedb.preference import borda_score

BORDA = (0, 4)


def test_pac_trace_consistency():
    G, P = fig1()
    env = DuelEnvironment(P, 3)
    M, tr = clucb_borda_pac(env, G, 0.1, 0.05, record_rounds=50)
    assert tr.samples == env.total_samples
    # one pull per executed round; self duels are pulls without an environment sample
    assert sum(tr.pulls_per_edge) == tr.rounds - 1
    assert tr.samples + tr.self_duels == tr.rounds - 1
    assert tr.stop_reason == "pac-gap-closed" and tr.matching == M.edge_ids
    rec = tr.rounds_recorded
    assert len(rec["z"]) == 50
    for z, a, b in zip(rec["z"], rec["M"], rec["Mtilde"]):
        assert (z in a) != (z in b)  # the pulled edge lies in the symmetric difference
    # the first round pulls the lowest-index edge of the symmetric difference (all radii 1)
    assert rec["z"][0] == min(set(rec["M"][0]) ^ set(rec["Mtilde"][0]))


def test_pac_is_epsilon_correct_across_seeds():
    G, P = fig1()
    ms = enumerate_maximum_matchings(G)
    best = borda_score(G.matching(BORDA), P, ms)
    for seed in range(10):
        M, _ = clucb_borda_pac(DuelEnvironment(P, seed), G, 0.1, 0.1)
        assert borda_score(M, P, ms) >= best - 0.1


def test_large_epsilon():
    G, P = fig1()
    # any matching is 1-optimal; the run ends with a valid matching after finitely many samples
    M, tr = clucb_borda_pac(DuelEnvironment(P, 0), G, 0.1, 1.0)
    assert M.edge_ids in [x.edge_ids for x in enumerate_maximum_matchings(G)]
    # with every radius at 1, round 1 closes the gap once l eps >= 2 l (1 + eps / 4), i.e. eps >= 4
    M, tr = clucb_borda_pac(DuelEnvironment(P, 0), G, 0.1, 4.0)
    assert tr.rounds == 1 and tr.samples == 0


def test_reveal_hook_forces_means():
    G, P = fig1()
    reveal = np.array([0.9, 0.1, 0.1, 0.1, 0.9])
    M, tr = clucb_borda_pac(DuelEnvironment(P, 0), G, 0.1, 0.05, reveal=reveal)
    assert M.edge_ids == (0, 4)


def test_two_matching_instance():
    G = BipartiteGraph(2, 1, ((0, 0), (1, 0)))
    P = PreferenceMatrix.from_upper(G, {(0, 1): 0.9})  # B gap 0.4 > eps
    for seed in range(5):
        M, tr = clucb_borda_pac(DuelEnvironment(P, seed), G, 0.1, 0.05)
        assert M.edge_ids == (0,) and tr.samples < 10 ** 5
        M, tr = clucb_borda_exact(DuelEnvironment(P, seed), G, 0.1)
        assert M.edge_ids == (0,)


def test_exact_epochs():
    G, P = fig1()
    env = DuelEnvironment(P, 1)
    M, tr = clucb_borda_exact(env, G, 0.1)
    assert M.edge_ids == BORDA and tr.stop_reason == "exact-equality"
    assert tr.samples == env.total_samples
    for i, (q, eps_q, delta_q, rounds) in enumerate(tr.epochs):
        assert q == i + 1 and eps_q == 2.0 ** -q and delta_q == pytest.approx(0.1 / (2 * q * q))
        assert rounds >= 1
    assert tr.eta == tr.epochs[-1][1] / 8
    assert tr.rounds == sum(r for *_, r in tr.epochs)


def test_budget_exceeded_carries_trace():
    G, P = fig1()
    with pytest.raises(BudgetExceeded) as ei:
        clucb_borda_exact(DuelEnvironment(P, 0), G, 0.1, sample_cap=500)
    assert ei.value.trace.stop_reason == "budget-exceeded"
    assert ei.value.trace.samples <= 500


def test_seeded_determinism_and_mcmc_mode():
    G, P = fig1()
    a = clucb_borda_pac(DuelEnvironment(P, 9), G, 0.1, 0.05)[1]
    b = clucb_borda_pac(DuelEnvironment(P, 9), G, 0.1, 0.05)[1]
    assert a == b
    M, tr = clucb_borda_pac(DuelEnvironment(P, 9), G, 0.1, 0.1, SamplerConfig("mcmc"))
    assert tr.sampler_mode == "mcmc" and tr.eta == pytest.approx(0.1 / 8)
    assert M.edge_ids in [x.edge_ids for x in enumerate_maximum_matchings(G)]


def test_parameter_validation():
    G, P = fig1()
    with pytest.raises(ValueError):
        clucb_borda_pac(DuelEnvironment(P), G, 1.5, 0.1)
    with pytest.raises(ValueError):
        clucb_borda_pac(DuelEnvironment(P), G, 0.1, 0.0)
    with pytest.raises(ValueError):
        clucb_borda_exact(DuelEnvironment(P), G, 0.0)
