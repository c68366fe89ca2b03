from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hamexpander.generators import kneser
from hamexpander.graph import (DuplicateEdgeError, Graph, GraphFormatError, SelfLoopError, VertexRangeError,
                               expansion_certificate, far_from_bipartite, format_edge_list, load_graph,
                               parse_edge_list, remove_set_params, uniformity)

import oracles


def complete(n):
    return Graph.from_edges(n, [(u, v) for u in range(n) for v in range(u + 1, n)])


def cycle(n):
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def test_load_cycle(tmp_path):
    p = tmp_path / "c5.el"
    p.write_text("5 5\n0 1\n1 2\n2 3\n3 4\n4 0\n")
    g = load_graph(p)
    assert g.n == 5 and g.m == 5 and g.is_regular and g.d_max == 2


def test_petersen_roundtrip():
    g = kneser(5, 2)
    h = parse_edge_list(format_edge_list(g))
    assert h.n == 10 and h.is_regular and h.d_min == 3
    assert sorted(map(tuple, h.edges().tolist())) == sorted(map(tuple, g.edges().tolist()))


@pytest.mark.parametrize("text,exc", [
    ("2 1\n0 0\n", SelfLoopError),
    ("3 2\n0 1\n1 0\n", DuplicateEdgeError),
    ("3 1\n0 3\n", VertexRangeError),
    ("3 2\n0 1\n", GraphFormatError),
    ("", GraphFormatError),
    ("3 1\n0 x\n", GraphFormatError),
])
def test_malformed_input(text, exc):
    with pytest.raises(exc):
        parse_edge_list(text)


def test_comments_and_blank_lines():
    g = parse_edge_list("# header next\n3 2\n\n0 1  # first\n1 2\n")
    assert g.m == 2


def test_side_must_separate_edges():
    with pytest.raises(ValueError):
        Graph.from_edges(3, [(0, 1), (1, 2)], side=[0, 0, 1])


def test_two_colouring():
    assert cycle(5).two_colouring() is None
    col = cycle(6).two_colouring()
    assert all(col[i] != col[(i + 1) % 6] for i in range(6))


def test_induced_keeps_labels():
    g = cycle(6)
    sub, old = g.induced([0, 1, 2, 4])
    assert sub.n == 4 and sub.m == 2
    assert sorted(old.tolist()) == [0, 1, 2, 4]


@pytest.mark.parametrize("g,expected", [(complete(4), Fraction(2, 3)), (cycle(4), Fraction(1, 2))])
def test_certificate_small(g, expected):
    c = expansion_certificate(g, exhaustive=True)
    assert c.rho_upper == pytest.approx(float(expected), abs=1e-12)
    assert 0 <= c.rho_lower <= c.rho_upper


def test_certificate_disconnected():
    g = Graph.from_edges(6, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])
    c = expansion_certificate(g)
    assert c.rho_upper == 0 and not c.connected


def test_certificate_matches_brute_force():
    rng = np.random.default_rng(3)
    done = 0
    while done < 15:
        n = int(rng.integers(4, 10))
        edges = oracles.random_gnp(n, 0.5, rng)
        if not edges or not oracles.is_connected(n, edges):
            continue
        c = expansion_certificate(Graph.from_edges(n, edges), exhaustive=True)
        assert c.rho_upper == pytest.approx(float(oracles.min_expansion_ratio(n, edges)), abs=1e-12)
        done += 1


def test_sampled_certificate_is_an_upper_bound():
    g = kneser(7, 2)
    exact = expansion_certificate(g, exhaustive=False, samples=400, seed=1)
    assert exact.mode == "sampled"
    assert exact.rho_upper >= exact.rho_lower


@pytest.mark.parametrize("n,eps", [(4, Fraction(1, 3)), (5, Fraction(2, 5))])
def test_far_from_bipartite_complete(n, eps):
    r = far_from_bipartite(complete(n), mode="exhaustive")
    assert r.exact and r.eps == pytest.approx(float(eps), abs=1e-12)


def test_far_from_bipartite_bipartite_is_zero():
    assert far_from_bipartite(cycle(8), mode="exhaustive").eps == 0


def test_far_from_bipartite_matches_brute_force():
    rng = np.random.default_rng(5)
    for _ in range(15):
        n = int(rng.integers(3, 10))
        edges = oracles.random_gnp(n, 0.6, rng)
        if not edges:
            continue
        r = far_from_bipartite(Graph.from_edges(n, edges), mode="exhaustive", spectral=False)
        assert r.maxcut == oracles.max_cut(n, edges)


def test_local_search_never_beats_exact():
    g = kneser(6, 2)
    exact = far_from_bipartite(g, mode="exhaustive")
    local = far_from_bipartite(g, mode="local-search", seed=2)
    assert local.eps >= exact.eps - 1e-12
    assert exact.eps_lower <= exact.eps + 1e-12


def test_uniformity_c6():
    g = cycle(6).with_side([i % 2 for i in range(6)])
    r = uniformity(g, [0], side="V0V1")
    # N(v) ∩ {0} over v ∈ {1,3,5} is (1, 0, 1); share 2/3; scale by avg degree 2
    expected = max(abs(h - 2 / 3) for h in (1, 0, 1)) / 2
    assert r.alpha_observed == pytest.approx(expected, abs=1e-12)


def test_uniformity_trivial_sets():
    g = kneser(5, 2)
    assert uniformity(g, []).alpha_observed == 0
    assert uniformity(g, range(10)).alpha_observed == pytest.approx(0, abs=1e-12)


def test_uniformity_rejects_wrong_part():
    g = cycle(6).with_side([i % 2 for i in range(6)])
    with pytest.raises(ValueError):
        uniformity(g, [1], side="V0V1")


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 9), st.data())
def test_uniformity_matches_direct_count(n, data):
    edges = [(i, (i + 1) % n) for i in range(n)] + [(0, k) for k in range(2, n - 1)]
    g = Graph.from_edges(n, edges)
    S = data.draw(st.lists(st.integers(0, n - 1), max_size=6))
    adj = oracles.adjacency(n, edges)
    dbar = 2 * len(edges) / n
    hits = [sum(1 for s in S if s in adj[v]) for v in range(n)]
    expected = max(abs(h - len(S) * dbar / n) for h in hits) / dbar if S else 0.0
    assert uniformity(g, S).alpha_observed == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("args,expected", [
    ((100, 0, 1000, 100, 0.01), (90, 1, 0.44)),
    ((64, 4, 512, 64, 0), (56, 4.5, 0.75)),
    ((30, 2, 100, 0, 0), (30, 2, 4 * 2 / 30)),
])
def test_remove_set_params(args, expected):
    assert remove_set_params(*args) == pytest.approx(expected, abs=1e-12)


def test_remove_set_params_rejects_bad_input():
    with pytest.raises(ValueError):
        remove_set_params(0, 0, 10, 1, 0)
    with pytest.raises(ValueError):
        remove_set_params(10, 0, 10, 11, 0)
