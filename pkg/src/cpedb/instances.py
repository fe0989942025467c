"""Built-in instances and random instance generators."""
import numpy as np

from .graph import BipartiteGraph
from .preference import PreferenceMatrix


def fig1_graph():
    """4 candidates, 2 positions: e1..e3 at s1 (c1..c3), e4, e5 at s2 (c3, c4)."""
    return BipartiteGraph(4, 2, ((0, 0), (1, 0), (2, 0), (2, 1), (3, 1)))


def fig1_preference():
    G = fig1_graph()
    return PreferenceMatrix.from_upper(G, {(0, 1): 0.45, (0, 2): 1.0, (1, 2): 0.55, (3, 4): 0.0})


def fig1():
    return fig1_graph(), fig1_preference()


def width_example_graph():
    """5 candidates, 3 positions; the path c1-s1-c2-s2-c3 gives width 4."""
    return BipartiteGraph(5, 3, ((0, 0), (1, 0), (1, 1), (2, 1), (3, 2), (4, 2)))


def rps_instance(p=0.6):
    """One position, three edges in a preference cycle (no Condorcet winner)."""
    G = BipartiteGraph(3, 1, ((0, 0), (1, 0), (2, 0)))
    return G, PreferenceMatrix.from_upper(G, {(0, 1): p, (1, 2): p, (0, 2): 1 - p})


def random_graph(rng, n, l, density=0.5, max_edges=None):
    """Random graph that contains at least one matching covering all positions."""
    while True:
        perm = rng.permutation(n)[:l]
        mask = rng.random((l, n)) < density
        mask[np.arange(l), perm] = True
        edges = [(int(c), int(j)) for j in range(l) for c in range(n) if mask[j, c]]
        if max_edges is None or len(edges) <= max_edges:
            return BipartiteGraph(n, l, tuple(edges))


def random_preference(rng, G, planted=None, margin=0.0):
    """Uniform random comparable entries. With ``planted`` (edge ids), those edges
    beat every rival at their position with probability >= 1/2 + margin, which makes
    the planted matching a Condorcet winner when margin > 0."""
    up = {}
    planted = set() if planted is None else set(planted)
    for i, j in G.comparable_pairs:
        v = float(rng.random())
        if i in planted:
            v = 0.5 + margin + (0.5 - margin) * v
        elif j in planted:
            v = (0.5 - margin) * v
        up[(i, j)] = v
    return PreferenceMatrix.from_upper(G, up)


def random_instance(rng, n_max=5, l_max=3, m_max=16, density=0.5):
    while True:
        l = int(rng.integers(1, l_max + 1))
        n = int(rng.integers(l, n_max + 1))
        G = random_graph(rng, n, l, density)
        if 1 <= G.m <= m_max:
            return G, random_preference(rng, G)
