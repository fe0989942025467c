import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cpedb import BipartiteGraph, SamplerConfig, enumerate_maximum_matchings, sample_matchings
from cpedb.instances import fig1_graph, random_graph
from cpedb.sampler import augment, histogram, sample_matching, tv_distance


def fiber_sizes(G):
    A = augment(G)
    return Counter(A.project(M).edge_ids for M in enumerate_maximum_matchings(A.graph))


def test_augment_fig1():
    G = fig1_graph()
    A = augment(G)
    assert A.fictitious_positions == 2
    extra = [e for e, b in enumerate(A.edge_map) if b < 0]
    assert len(extra) == 8  # two fictitious positions, each joined to all 4 candidates
    sizes = fiber_sizes(G)
    assert len(sizes) == 5 and set(sizes.values()) == {2}
    assert sum(sizes.values()) == 10


def test_augment_square_and_trivial():
    G = BipartiteGraph(2, 2, ((0, 0), (1, 0), (1, 1)))
    assert augment(G).graph.m == G.m
    G1 = BipartiteGraph(1, 1, ((0, 0),))
    assert augment(G1).graph.m == 1 and sum(fiber_sizes(G1).values()) == 1


@settings(max_examples=25)
@given(st.integers(0, 10 ** 6))
def test_fiber_size_is_factorial(seed):
    rng = np.random.default_rng(seed)
    l = int(rng.integers(1, 3))
    n = l + int(rng.integers(0, 3))
    G = random_graph(rng, n, l, 0.6)
    if augment(G).graph.m > 24:
        return
    sizes = fiber_sizes(G)
    assert set(sizes.values()) == {math.factorial(n - l)}
    assert len(sizes) == len(enumerate_maximum_matchings(G))


def test_unique_matching_both_modes():
    G = BipartiteGraph(2, 2, ((0, 0), (1, 1)))
    rng = np.random.default_rng(0)
    for cfg in (SamplerConfig(), SamplerConfig("mcmc")):
        d = sample_matchings(G, cfg, rng, 50)
        assert np.all(d == [0, 1])


def test_tv_examples():
    assert tv_distance([1, 1, 1, 1, 1]) == 0
    assert tv_distance([1, 0, 0, 0, 0]) == pytest.approx(0.8)
    G = fig1_graph()
    d = sample_matchings(G, SamplerConfig(), np.random.default_rng(3), 50_000)
    assert tv_distance(histogram(d, G)) < 0.02


def test_mcmc_is_seeded():
    G = fig1_graph()
    a = sample_matchings(G, SamplerConfig("mcmc"), np.random.default_rng(5), 200)
    b = sample_matchings(G, SamplerConfig("mcmc"), np.random.default_rng(5), 200)
    assert np.array_equal(a, b)
    assert sample_matching(G, SamplerConfig(), np.random.default_rng(1)).edge_ids in \
        [M.edge_ids for M in enumerate_maximum_matchings(G)]


def test_mcmc_larger_graph_close_to_uniform():
    G = random_graph(np.random.default_rng(11), 5, 3, 0.6)
    k = len(enumerate_maximum_matchings(G))
    d = sample_matchings(G, SamplerConfig("mcmc"), np.random.default_rng(2), 8_000)
    h = histogram(d, G)
    # 3 sigma of the multinomial TV at this size is well under 0.05
    assert tv_distance(h) <= 0.05, (k, h)


def test_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig("gibbs")
    with pytest.raises(ValueError):
        SamplerConfig(eta=1.0)
    with pytest.raises(ValueError):
        SamplerConfig(mcmc_steps=0)
