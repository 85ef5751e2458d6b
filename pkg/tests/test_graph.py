import numpy as np
import pytest

from evovoter import OpinionGraph
from evovoter.oracle import adjacency_from_graph, pair_counts, triple_counts


def brute_pair_counts(g):
    # n10 counts unordered discordant edges; n11/n00 count ordered pairs
    n10 = n11 = n00 = 0
    op = g.opinions()
    for u, v in g.edges():
        a, b = op[u], op[v]
        if a != b:
            n10 += 1
        elif a == 1:
            n11 += 2
        else:
            n00 += 2
    return n10, n11, n00


def test_regular_build_degrees():
    rng = np.random.default_rng(0)
    g = OpinionGraph.build_regular(200, 6, rng=rng)
    assert np.all(g.degrees() == 6)
    g.validate()


def test_er_build_mean_degree():
    rng = np.random.default_rng(1)
    g = OpinionGraph.build_er(3000, 12.0, rng=rng)
    assert abs(g.degrees().mean() - 12.0) < 0.5
    g.validate()


def test_counts_match_brute_force():
    rng = np.random.default_rng(2)
    g = OpinionGraph.build_er(120, 5.0, rng=rng)
    g.assign_opinions(rng, 0.4)
    assert (g.n10, g.n11, g.n00) == brute_pair_counts(g)
    assert g.n10 + (g.n11 + g.n00) // 2 == g.n_edges
    assert g.d_max == g.degrees().max()


def test_exact_count_opinion_mode():
    rng = np.random.default_rng(3)
    g = OpinionGraph.build_regular(100, 4, rng=rng)
    g.assign_opinions(rng, 0.3, mode="exact_count")
    assert g.n1 == 30


def test_flip_and_rewire_keep_counts_consistent():
    rng = np.random.default_rng(4)
    g = OpinionGraph.build_er(80, 6.0, rng=rng)
    g.assign_opinions(rng, 0.5)
    for _ in range(400):
        op = rng.integers(0, 3)
        if op == 0:
            g.flip(int(rng.integers(0, g.n)))
        elif g.n10 > 0:
            x, y = g.sample_discordant(rng)
            z = int(rng.integers(0, g.n))
            if z != x and not g.has_edge(x, z):
                g.rewire(x, y, z)
    assert (g.n10, g.n11, g.n00) == brute_pair_counts(g)
    g.validate()


def test_sample_discordant_is_uniform():
    rng = np.random.default_rng(5)
    g = OpinionGraph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)],
                                opinions=[1, 0, 1, 0])
    op = g.opinions()
    counts = {}
    for _ in range(8000):
        pair = g.sample_discordant(rng)
        assert op[pair[0]] == 1 and op[pair[1]] == 0
        counts[pair] = counts.get(pair, 0) + 1
    assert len(counts) == 4
    freqs = np.array(list(counts.values())) / 8000
    assert np.all(np.abs(freqs - 1 / 4) < 0.02)


def test_triple_counts_match_oracle_enumeration():
    rng = np.random.default_rng(6)
    g = OpinionGraph.build_er(60, 5.0, rng=rng)
    g.assign_opinions(rng, 0.5)
    tc = g.triple_counts()
    opinion, adj = adjacency_from_graph(g)
    ref = triple_counts(opinion, adj)
    assert {"n" + k: v for k, v in ref.items()} == tc.as_dict()


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    g = OpinionGraph.build_er(50, 4.0, rng=rng)
    g.assign_opinions(rng, 0.5)
    path = tmp_path / "g.graph"
    g.save(path)
    h = OpinionGraph.load(path)
    assert h.n == g.n
    assert np.array_equal(h.opinions(), g.opinions())
    assert sorted(h.edges()) == sorted(g.edges())
    assert (h.n10, h.n11, h.n00) == (g.n10, g.n11, g.n00)


def test_add_remove_edge():
    g = OpinionGraph.from_edges(5, [(0, 1)], opinions=[1, 0, 0, 1, 1])
    assert g.n10 == 1
    g.add_edge(0, 3)
    assert g.n11 == 2  # ordered convention: concordant edges count twice
    g.remove_edge(0, 1)
    assert g.n10 == 0 and g.n_edges == 1
    with pytest.raises(ValueError):
        g.add_edge(0, 3)  # duplicate edge


def test_ensure_capacity_preserves_state():
    rng = np.random.default_rng(8)
    g = OpinionGraph.build_er(40, 4.0, rng=rng)
    g.assign_opinions(rng, 0.5)
    before = (g.n10, g.n11, g.n00, sorted(g.edges()))
    hub = int(np.argmax(g.degrees()))
    for v in range(g.n):
        if v != hub and not g.has_edge(hub, v):
            g.add_edge(hub, v)
    g.validate()
    g2 = OpinionGraph.from_edges(40, before[3],
                                 opinions=g.opinions())
    assert (g2.n10, g2.n11, g2.n00) == before[:3]
