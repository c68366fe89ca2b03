from collections import Counter

import numpy as np
import pytest

from hamexpander.generators import circulant, kneser
from hamexpander.graph import Graph
from hamexpander.walks import (NoWalkError, build_conditioned, conditioned_position_law, degenerate_rows,
                               estimate_degenerate_probability, estimate_hit_probability, random_walk,
                               reversal_ratio_check, sample_conditioned, sample_conditioned_many, walk_law_exhaustive)

import oracles

PATH3 = Graph.from_edges(3, [(0, 1), (1, 2)])
C4 = circulant(4, [1])
K2 = Graph.from_edges(2, [(0, 1)])


def complete(n):
    return Graph.from_edges(n, [(u, v) for u in range(n) for v in range(u + 1, n)])


def test_zero_length_walk():
    w = random_walk(C4, 2, 0)
    assert w.vertices == (2,) and not w.degenerate


def test_forced_degenerate_walk():
    w = random_walk(K2, 0, 2)
    assert w.vertices == (0, 1, 0) and w.degenerate


def test_one_step_law_on_c4():
    hits = Counter(random_walk(C4, 0, 1, seed=s)[1] for s in range(20000))
    assert set(hits) == {1, 3}
    assert abs(hits[1] / 20000 - 0.5) < 0.015


def test_backward_table_support():
    s = build_conditioned(PATH3, 0, 2)
    assert s.mass(2, 0) > 0 and s.mass(2, 2) > 0 and s.mass(2, 1) == 0
    s = build_conditioned(C4, 2, 2)
    assert {v for v in range(4) if s.supports(v)} == {0, 2}


def test_one_step_support_is_neighbourhood():
    g = kneser(5, 2)
    s = build_conditioned(g, 4, 1)
    assert {v for v in range(10) if s.supports(v)} == set(g.adj[4])


def test_c4_conditioned_law():
    s = build_conditioned(C4, 2, 2)
    w = sample_conditioned_many(s, 0, 100000, seed=1)
    frac = float(np.mean(w[:, 1] == 1))
    assert set(w[:, 1].tolist()) == {1, 3}
    assert abs(frac - 0.5) < 0.01


def test_unique_walk():
    s = build_conditioned(PATH3, 0, 2)
    assert sample_conditioned(s, 0).vertices == (0, 1, 0)


def test_unsupported_start_raises():
    s = build_conditioned(PATH3, 0, 2)
    with pytest.raises(NoWalkError):
        sample_conditioned(s, 1)
    with pytest.raises(NoWalkError):
        sample_conditioned_many(s, 1, 5)


def test_single_draws_follow_exact_law():
    g = kneser(5, 2)
    law = oracles.walk_law(10, g.edges().tolist(), 0, 1, 3)
    s = build_conditioned(g, 1, 3)
    counts = Counter(sample_conditioned(s, 0, seed=k).vertices for k in range(20000))
    assert oracles.tv({w: c / 20000 for w, c in counts.items()}, law) < 0.05


def test_exhaustive_law_matches_reference():
    rng = np.random.default_rng(2)
    for _ in range(10):
        n = int(rng.integers(3, 7))
        edges = oracles.random_gnp(n, 0.6, rng)
        if not oracles.is_connected(n, edges) or len(edges) < 2:
            continue
        g = Graph.from_edges(n, edges)
        a, b = (int(x) for x in rng.choice(n, 2, replace=False))
        ell = int(rng.integers(1, 5))
        ref = oracles.walk_law(n, edges, a, b, ell)
        if not ref:
            with pytest.raises(NoWalkError):
                walk_law_exhaustive(g, a, b, ell)
            continue
        got = walk_law_exhaustive(g, a, b, ell)
        assert set(got) == set(ref)
        assert all(abs(got[w] - ref[w]) < 1e-12 for w in ref)


def test_position_law_is_exact():
    g = Graph.from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3), (1, 4)])
    ref = oracles.walk_law(6, g.edges().tolist(), 0, 2, 4)
    s = build_conditioned(g, 2, 4)
    for t in range(1, 4):
        law = conditioned_position_law(s, 0, t)
        for v in range(6):
            assert law[v] == pytest.approx(sum(p for w, p in ref.items() if w[t] == v), abs=1e-12)


def test_hit_probability_complete():
    g = complete(5)
    s = build_conditioned(g, 4, 3)
    law = conditioned_position_law(s, 0, 1)
    est = estimate_hit_probability(s, 0, 1, 2, 40000, seed=3)
    sigma = (law[2] * (1 - law[2]) / 40000) ** 0.5
    assert abs(est - law[2]) < 4 * sigma
    with pytest.raises(ValueError):
        estimate_hit_probability(s, 0, 0, 2, 10)


def test_hit_probability_unreachable_vertex():
    g = Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 0), (3, 4)])
    s = build_conditioned(g, 2, 2)
    assert estimate_hit_probability(s, 0, 1, 4, 2000) == 0.0


def test_degenerate_probability():
    s = build_conditioned(C4, 1, 1)
    assert estimate_degenerate_probability(s, 0, 1000) == 0.0
    s = build_conditioned(K2, 0, 2)
    assert estimate_degenerate_probability(s, 0, 1000) == 1.0


def test_degenerate_rows():
    w = np.array([[0, 1, 2], [0, 1, 0]])
    assert degenerate_rows(w).tolist() == [False, True]


def test_reversal_symmetry_regular():
    assert reversal_ratio_check(C4, 0, 1, 3) == pytest.approx(0, abs=1e-12)
    assert reversal_ratio_check(kneser(7, 2), 0, 5, 5, samples=500) == pytest.approx(0, abs=1e-9)


def test_reversal_ratio_irregular_matches_degrees():
    # reversal changes a walk's weight by exactly d(a)/d(b) before normalising
    g = Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (3, 4), (4, 1)])
    fwd = oracles.walk_law(5, g.edges().tolist(), 0, 4, 4)
    bwd = oracles.walk_law(5, g.edges().tolist(), 4, 0, 4)
    expected = max(abs(np.log(p / bwd[w[::-1]])) for w, p in fwd.items())
    assert reversal_ratio_check(g, 0, 4, 4) == pytest.approx(expected, abs=1e-12)
