import numpy as np
import pytest
from scipy import stats

from keyfuse.cograph import greedy_dominating_set
from keyfuse.walker import (
    WalkConfig,
    WalkError,
    biased_step_dist,
    check_walks,
    deepwalk_walks,
    dominating_step_dist,
    exem_walks,
    generate_walks,
    load_walks,
    node2vec_walks,
    save_walks,
    uniform_step_dist,
)
from tests.test_cograph import graph_from_edges


def test_single_edge_alternates():
    g = graph_from_edges(2, [(0, 1)])
    cfg = WalkConfig(walks_per_node=2, walk_length=4, seed=0)
    corpus = deepwalk_walks(g, cfg)
    assert corpus.walks == [[0, 1, 0, 1]] * 2 + [[1, 0, 1, 0]] * 2


def test_isolated_node_walk_length_one():
    g = graph_from_edges(3, [(0, 1)])
    cfg = WalkConfig(walks_per_node=3, walk_length=5, seed=0)
    corpus = deepwalk_walks(g, cfg)
    iso_walks = [w for w in corpus.walks if w[0] == 2]
    assert iso_walks == [[2]] * 3


def test_deepwalk_uniform_next_step_chisquare():
    # triangle: every step should be uniform over the two other nodes
    g = graph_from_edges(3, [(0, 1), (1, 2), (0, 2)])
    cfg = WalkConfig(walks_per_node=30, walk_length=1200, seed=123)
    corpus = deepwalk_walks(g, cfg)
    counts = {}
    for walk in corpus.walks:
        for cur, nxt in zip(walk, walk[1:]):
            counts.setdefault(cur, {}).setdefault(nxt, 0)
            counts[cur][nxt] += 1
    for cur, nxts in counts.items():
        observed = [nxts.get(v, 0) for v in g.adjacency[cur]]
        assert sum(observed) > 10_000
        _, pvalue = stats.chisquare(observed)
        assert pvalue > 0.01


def test_walk_edge_validity():
    g = graph_from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (2, 5)])
    cfg = WalkConfig(walks_per_node=4, walk_length=20, seed=9)
    for strategy in ("deepwalk", "node2vec"):
        corpus = generate_walks(g, strategy, cfg)
        check_walks(g, corpus)
    dom = greedy_dominating_set(g)
    check_walks(g, exem_walks(g, dom, cfg))


def test_determinism_byte_for_byte(tmp_path):
    g = graph_from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)])
    cfg = WalkConfig(walks_per_node=3, walk_length=10, p=0.5, q=2.0, seed=77)
    p1, p2 = tmp_path / "a.walks", tmp_path / "b.walks"
    save_walks(p1, node2vec_walks(g, cfg))
    save_walks(p2, node2vec_walks(g, cfg))
    assert p1.read_bytes() == p2.read_bytes()


def test_node2vec_return_probability_hand_computed():
    # path 0-1-2, standing at 1 having come from 0, p=0.25, q=4:
    # weights: back to 0 -> 1/p = 4, on to 2 -> 1/q = 0.25; P(0) = 16/17
    g = graph_from_edges(3, [(0, 1), (1, 2)])
    dist = biased_step_dist(g, prev=0, cur=1, p=0.25, q=4.0)
    assert dist[0] == pytest.approx(16 / 17)
    assert dist[2] == pytest.approx(1 / 17)


def test_node2vec_p1_q1_equals_uniform_exact():
    g = graph_from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 2)])
    for prev in range(4):
        for cur in g.adjacency[prev]:
            assert biased_step_dist(g, prev, cur, 1.0, 1.0) == uniform_step_dist(g, cur)


def test_node2vec_star_leaf_forced_return():
    g = graph_from_edges(4, [(0, 1), (0, 2), (0, 3)])
    # at a leaf having come from the center, the only move is back
    dist = biased_step_dist(g, prev=0, cur=1, p=3.0, q=0.5)
    assert dist == {0: 1.0}
    cfg = WalkConfig(walks_per_node=2, walk_length=6, p=3.0, q=0.5, seed=4)
    corpus = node2vec_walks(g, cfg)
    for walk in corpus.walks:
        for i in range(2, len(walk)):
            if walk[i - 1] != 0:
                assert walk[i] == 0


def test_exem_walks_start_at_dominating_nodes():
    g = graph_from_edges(7, [(0, 1), (0, 2), (3, 4), (4, 5), (5, 6)])
    dom = greedy_dominating_set(g)
    cfg = WalkConfig(walks_per_node=5, walk_length=8, seed=3)
    corpus = exem_walks(g, dom, cfg)
    assert len(corpus.walks) == len(dom) * cfg.walks_per_node
    assert all(walk[0] in dom for walk in corpus.walks)


def test_exem_beta_one_always_reaches_second_dominator():
    # two joined stars: dominating set {0, 1}, adjacent to each other
    g = graph_from_edges(8, [(0, 1), (0, 2), (0, 3), (0, 4), (1, 5), (1, 6), (1, 7)])
    dom = greedy_dominating_set(g)
    assert dom == {0, 1}
    cfg = WalkConfig(walks_per_node=50, walk_length=10, exem_bias=1.0, seed=21)
    corpus = exem_walks(g, dom, cfg)
    assert corpus.reached_second_dom is not None
    assert all(corpus.reached_second_dom)
    # with beta=1 the second node on every walk is the other dominator
    for walk in corpus.walks:
        assert walk[1] in dom and walk[1] != walk[0]


def test_exem_beta_zero_matches_uniform_law():
    g = graph_from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    dom = {0, 2}
    for cur in range(4):
        assert dominating_step_dist(g, dom, cur, 1, 0.0) == uniform_step_dist(g, cur)


def test_exem_steering_disabled_after_second_dominator():
    g = graph_from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    assert dominating_step_dist(g, {0, 2}, 1, 2, 1.0) == uniform_step_dist(g, 1)


def test_exem_mixture_distribution():
    # node 1 neighbors {0, 2, 3}; dominators {0}; beta=0.6:
    # P(0) = 0.6 + 0.4/3, P(2) = P(3) = 0.4/3
    g = graph_from_edges(4, [(0, 1), (1, 2), (1, 3)])
    dist = dominating_step_dist(g, {0}, 1, 1, 0.6)
    assert dist[0] == pytest.approx(0.6 + 0.4 / 3)
    assert dist[2] == pytest.approx(0.4 / 3)
    assert dist[3] == pytest.approx(0.4 / 3)
    assert sum(dist.values()) == pytest.approx(1.0)


def test_exem_empty_dominating_set_rejected():
    g = graph_from_edges(2, [(0, 1)])
    with pytest.raises(WalkError):
        exem_walks(g, set(), WalkConfig(seed=0))


def test_config_validation():
    with pytest.raises(WalkError):
        WalkConfig(walk_length=1)
    with pytest.raises(WalkError):
        WalkConfig(p=0.0)
    with pytest.raises(WalkError):
        WalkConfig(exem_bias=1.5)


def test_walk_file_round_trip(tmp_path):
    g = graph_from_edges(4, [(0, 1), (1, 2), (2, 3)])
    cfg = WalkConfig(walks_per_node=2, walk_length=6, seed=5)
    corpus = deepwalk_walks(g, cfg)
    path = tmp_path / "walks.txt"
    save_walks(path, corpus)
    loaded = load_walks(path)
    assert loaded.walks == corpus.walks
    assert loaded.strategy == "deepwalk"
    assert loaded.config == cfg


def test_unknown_strategy():
    g = graph_from_edges(2, [(0, 1)])
    with pytest.raises(WalkError):
        generate_walks(g, "teleport", WalkConfig(seed=0))
