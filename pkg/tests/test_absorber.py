import itertools

import numpy as np
import pytest

from hamexpander.absorber import (AbsorberError, XABYGadget, XAYGadget, absorb, build_absorber, build_gadgets,
                                  build_match_template, build_xay, gadget_templates)
from hamexpander.config import PipelineConfig
from hamexpander.generators import random_bipartite_regular, random_regular
from hamexpander.graph import Graph

import oracles
from templates import gadget_instance, hamilton_paths


def perfect_matching_exists(pairs, left, right):
    """Kuhn's augmenting paths on an explicit edge list."""
    adj = {u: [] for u in left}
    for i, j in pairs:
        if i in adj and j in right:
            adj[i].append(j)
    owner = {}

    def augment(u, seen):
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                if w not in owner or augment(owner[w], seen):
                    owner[w] = u
                    return True
        return False

    return len(left) == len(right) and all(augment(u, set()) for u in left)


@pytest.mark.parametrize("ell", [3, 5, 7])
@pytest.mark.parametrize("with_b", [False, True])
def test_templates_are_the_unique_hamilton_paths(ell, with_b):
    n, edges, spec, u, v, cross = gadget_instance(ell, with_b)
    full, skip = gadget_templates(u, v, cross, with_b)
    drop = spec[1:3] if with_b else spec[1:2]
    assert hamilton_paths(n, edges, spec[0], spec[-1]) == [tuple(full)]
    assert hamilton_paths(n, edges, spec[0], spec[-1], drop) == [tuple(skip)]


def test_xay_template_at_three_matches_the_written_lists():
    n, edges, (x, a, y), u, v, cross = gadget_instance(3, False)
    P1, P2 = cross
    full, skip = gadget_templates(u, v, cross, False)
    assert full == P1 + [a, u[1]] + P2[1:] + [u[2], y]
    assert skip == P1 + [v[2]] + P2[::-1][1:] + [u[2], y]


@pytest.mark.parametrize("ell", [3, 5, 7])
def test_builder_recovers_the_single_gadget(ell):
    n, edges, spec, u, v, cross = gadget_instance(ell, False)
    gd = build_xay(Graph.from_edges(n, edges), *spec, ell)
    assert isinstance(gd, XAYGadget)
    assert gd.path(True) == tuple(gadget_templates(u, v, cross, False)[0])


def test_pair_gadget_builder_on_its_own_template():
    n, edges, spec, u, v, cross = gadget_instance(5, True)
    g = Graph.from_edges(n, edges)
    adj = oracles.adjacency(n, edges)
    built = 0
    for seed in range(8):
        try:
            gd = build_gadgets(g, [spec], 5, seed=seed)[0]
        except AbsorberError:
            continue  # Q1 and Q2 are interchangeable; half the draws pick the wrong labelling
        built += 1
        assert isinstance(gd, XABYGadget)
        assert set(gd.path(True)) == set(range(n)) and oracles.is_path(adj, gd.path(True))
        assert set(gd.path(False)) == set(range(n)) - set(spec[1:3])
    assert built > 0


def test_gadgets_on_an_expander():
    g = random_regular(600, 16, seed=1)
    specs = [(0, 1, 2), (10, 11, 12), (20, 21, 22)]
    forbidden = [30, 31]
    gs = build_gadgets(g, specs, 5, forbidden, seed=4)
    adj = oracles.adjacency(g.n, g.edges().tolist())
    inner = set()
    for (x, a, y), gd in zip(specs, gs):
        for keep in (True, False):
            p = gd.path(keep)
            assert p[0] == x and p[-1] == y and oracles.is_path(adj, p)
        assert set(gd.path(True)) - set(gd.path(False)) == {a}
        assert not set(gd.path(True)) & set(forbidden)
        assert not inner & gd.internal
        inner |= gd.internal


def test_gadget_input_checks():
    g = random_regular(100, 8, seed=0)
    with pytest.raises(ValueError):
        build_gadgets(g, [(0, 0, 1)], 3)
    with pytest.raises(ValueError):
        build_gadgets(g, [(0, 1, 2)], 4)
    with pytest.raises(ValueError):
        build_gadgets(g, [(0, 1, 2)], 3, forbidden=[1])


def test_match_template_shape():
    K = build_match_template(1)
    assert K.side_size == 7 and len(K.A1) == 2 and len(K.A2) == 5
    assert len(K.edges) == 721
    left, right = K.degrees()
    assert set(left.tolist()) == {103} and set(right.tolist()) == {103}


def test_match_template_is_robust_exhaustively():
    K = build_match_template(1)
    for k in (1, 2):
        for A in itertools.combinations(K.A1, k):
            for B in itertools.combinations(K.B1, k):
                left = set(A) | set(K.A2)
                right = set(B) | set(K.B2)
                assert perfect_matching_exists(K.edges, left, right)
                I = K.perfect_matching(A, B)
                assert I is not None
                assert {K.edges[e][0] for e in I} == left and {K.edges[e][1] for e in I} == right


def test_match_template_unbalanced_request():
    K = build_match_template(1, degree=3)
    assert K.perfect_matching([0], [0, 1]) is None


def test_general_absorber_counts_and_extremes():
    g = random_regular(1024, 32, seed=2)
    U0 = list(range(40))
    H = build_absorber(g, "general", forbidden=U0, seed=1)
    r = len(H.reservoir)
    assert len(H.gadgets) == r and len(H.chain) == 2 * r + 1
    assert not H.vertices & set(U0)
    assert absorb(H, [])[0] == H.x_H
    assert set(absorb(H, [])) == set(H.vertices)
    assert set(absorb(H, H.reservoir)) == set(H.vertices) - H.reservoir
    with pytest.raises(ValueError):
        absorb(H, [next(iter(set(range(g.n)) - H.reservoir))])


def test_general_absorber_anchor():
    g = random_regular(1024, 32, seed=3)
    H = build_absorber(g, "general", seed=0, anchor=5)
    assert g.has_edge(H.y_H, 5)


def test_bipartite_absorber():
    g = random_bipartite_regular(1024, 32, seed=1)
    H = build_absorber(g, "bipartite", seed=2)
    assert len(H.gadgets) % 2 == 1 and len(H.gadgets) == len(H.template.edges)
    assert sum(int(g.side[v]) for v in H.vertices) * 2 == len(H.vertices)
    adj = oracles.adjacency(g.n, g.edges().tolist())
    R = sorted(H.reservoir)
    left = [v for v in R if g.side[v] == 0]
    right = [v for v in R if g.side[v] == 1]
    for a in left:
        for b in right:
            p = absorb(H, [a, b])
            assert set(p) == set(H.vertices) - {a, b} and oracles.is_path(adj, p)
    with pytest.raises(ValueError):
        absorb(H, left[:1])


def test_bipartite_absorber_needs_sides():
    g = random_regular(200, 8, seed=0)
    with pytest.raises((ValueError, AbsorberError)):
        build_absorber(g, "bipartite")


def test_absorber_to_dict():
    g = random_regular(512, 16, seed=5)
    H = build_absorber(g, "general", PipelineConfig(max_gadgets=4), seed=0)
    d = H.to_dict()
    assert d["kind"] == "general" and d["gadgets"] == 4 and len(d["reservoir"]) == 4
