import math

import numpy as np
import pytest

from hamexpander.config import PipelineConfig
from hamexpander.connector import (ConnectorError, NoSurvivingCopy, PairBatch, check_connect_result, connect, dummy_pairs, keep_rate,
                                   last_step, one_bite)
from hamexpander.generators import circulant, random_bipartite_regular, random_regular
from hamexpander.graph import Graph

import oracles


def violations(g, pairs, forbidden, ell, paths):
    """Independent restatement of the connector's hard invariants."""
    adj = oracles.adjacency(g.n, g.edges().tolist())
    U = set(forbidden) | {v for p in pairs for v in p}
    side = g.two_colouring() if g.side is not None else None
    bad = 0
    used = set()
    for (a, b), p in zip(pairs, paths):
        if p is None or len(p) != ell + 1 or p[0] != a or p[-1] != b or not oracles.is_path(adj, p):
            bad += 1
            continue
        inner = set(p[1:-1])
        if inner & U or inner & used:
            bad += 1
        used |= inner
        if side is not None and any(side[v] != side[a] ^ (t % 2) for t, v in enumerate(p)):
            bad += 1
    return bad


def test_batch_rounds_length_up_to_odd():
    g = circulant(20, [1, 2])
    b = PairBatch.make(g, [(0, 5)], (), 8)
    assert b.length == 9 and b.adjusted
    assert {0, 5} <= b.forbidden


def test_batch_rejects_same_side_pair():
    g = random_bipartite_regular(40, 4, seed=1)
    a, b = np.flatnonzero(g.side == 0)[:2]
    with pytest.raises(ValueError):
        PairBatch.make(g, [(a, b)], (), 5)


def test_empty_batch():
    g = circulant(20, [1, 2])
    r = connect(g, PairBatch.make(g, [], (), 5))
    assert r.paths == []


def test_unique_geodesic_on_cycle():
    g = circulant(10, [1])
    r = connect(g, PairBatch.make(g, [(0, 3)], (), 3))
    assert r.paths == [[0, 1, 2, 3]]


def test_single_pair_kept_when_clean():
    g = random_regular(200, 8, seed=2)
    kept, left = one_bite(g, PairBatch.make(g, [(0, 1)], (), 5), seed=3)
    p = kept.get(0)
    assert (p is not None and len(set(p)) == len(p)) or left == [0]


def test_far_apart_components_both_kept():
    # two disjoint 4-vertex paths: every exit choice is forced and walks cannot meet
    edges = [(0, 1), (1, 2), (2, 3), (10, 11), (11, 12), (12, 13)]
    g = Graph.from_edges(14, edges)
    for seed in range(5):
        kept, left = one_bite(g, PairBatch.make(g, [(0, 3), (10, 13)], (), 3), seed=seed)
        assert left == [] and kept == {0: [0, 1, 2, 3], 1: [10, 11, 12, 13]}


def test_forced_collision_raises():
    g = Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
    with pytest.raises(ConnectorError):
        last_step(g, PairBatch.make(g, [(0, 1)], (), 3), copies=4)


def test_last_step_reports_the_pairs_it_kept():
    # pair 0 sits on a triangle (no walk of the right length); pair 1 has a private path
    edges = [(0, 1), (1, 2), (0, 2), (10, 11), (11, 12), (12, 13)]
    g = Graph.from_edges(14, edges)
    with pytest.raises(NoSurvivingCopy) as info:
        last_step(g, PairBatch.make(g, [(0, 1), (10, 13)], (), 3), copies=1)
    assert info.value.pair_index == 0 and info.value.kept == {1: [10, 11, 12, 13]}


def test_exact_routing_takes_over_a_stuck_residue():
    # a 5-cycle with pair (0, 2) at length 3: the only route is 0-4-3-2
    g = circulant(5, [1])
    cfg = PipelineConfig(copies_r=4, connector_retries=1)
    batch = PairBatch.make(g, [(0, 2)], (), 3)
    r = connect(g, batch, cfg, seed=0)
    assert r.paths == [[0, 4, 3, 2]]
    assert check_connect_result(g, batch, r) == []


def test_last_step_single_copy():
    g = random_regular(300, 10, seed=5)
    got = last_step(g, PairBatch.make(g, [(0, 1)], (), 5), copies=8, seed=1)
    assert violations(g, [(0, 1)], (), 5, [got[0]]) == 0


def test_dummy_pairs():
    assert dummy_pairs(np.zeros(4), np.zeros(4), 2, 0) == []
    l0, l1 = np.zeros(4), np.zeros(4)
    assert dummy_pairs(l0, l1, 2, 1) == [([0, 1], [0, 1])]
    skew = np.array([5.0, 0, 0, 3])
    before = skew.max() - skew.min()
    dummy_pairs(skew, np.zeros(4), 2, 3)
    assert skew.max() - skew.min() <= before


@pytest.mark.parametrize("bipartite", [False, True])
def test_connect_invariants(bipartite):
    n, d, m, ell = 1024, 32, 20, 9
    g = random_bipartite_regular(n, d, seed=7) if bipartite else random_regular(n, d, seed=7)
    rng = np.random.default_rng(1)
    if bipartite:
        a = rng.choice(np.flatnonzero(g.side == 0), m, replace=False)
        b = rng.choice(np.flatnonzero(g.side == 1), m + 5, replace=False)
        pairs, U = list(zip(a.tolist(), b[:m].tolist())), b[m:].tolist()
    else:
        v = rng.choice(n, 2 * m + 5, replace=False).tolist()
        pairs, U = list(zip(v[:m], v[m:2 * m])), v[2 * m:]
    batch = PairBatch.make(g, pairs, U, ell)
    r = connect(g, batch, seed=3)
    assert check_connect_result(g, batch, r) == []
    assert violations(g, pairs, U, ell, r.paths) == 0
    assert len(r.layer_reports) == ell - 1


def test_checker_flags_a_shared_vertex():
    g = circulant(12, [1, 2])
    batch = PairBatch.make(g, [(0, 3), (6, 9)], (), 3)
    from hamexpander.connector import ConnectResult
    bad = ConnectResult([[0, 1, 2, 3], [6, 2, 8, 9]], [0, 0])
    assert check_connect_result(g, batch, bad)


def test_connect_is_deterministic():
    g = random_regular(512, 16, seed=1)
    batch = PairBatch.make(g, [(i, 100 + i) for i in range(10)], (), 7)
    assert connect(g, batch, seed=9).paths == connect(g, batch, seed=9).paths


def test_keep_rate_prediction_formula():
    g = random_regular(2000, 16, seed=3)
    frac, predicted = keep_rate(g, 10, 5, seed=0)
    assert 0 <= frac <= 1
    # segment of 5 steps plus two hook-up edges: 7 edges, 2m endpoints removed
    assert predicted == pytest.approx(math.exp(-(7 - 1) ** 2 * 10 / (2000 - 20)), rel=1e-12)
