import itertools
import math

import numpy as np
import pytest

from hamexpander.generators import (GenerationError, GlueError, cayley_abelian, circulant, coset_euler_glue, kneser,
                                    kneser_metadata, percolate, percolation_degree_window, random_bipartite_regular,
                                    random_regular)
from hamexpander.graph import Graph, expansion_certificate
from hamexpander.pipeline import glue_cycle, verify_hamilton_cycle
from hamexpander.spectral import spectral_summary

import oracles


def test_petersen():
    g = kneser(5, 2)
    assert g.n == 10 and g.is_regular and g.d_max == 3 and g.m == 15


@pytest.mark.parametrize("n,k", [(5, 2), (6, 2), (7, 3), (8, 3), (7, 2)])
def test_kneser_against_definition(n, k):
    g = kneser(n, k)
    subsets = sorted(itertools.combinations(range(n), k), key=lambda c: c[::-1])
    expected = {(i, j) for i, j in itertools.combinations(range(len(subsets)), 2)
                if not set(subsets[i]) & set(subsets[j])}
    assert {tuple(e) for e in g.edges().tolist()} == expected
    meta = kneser_metadata(n, k)
    t = n - 2 * k
    assert meta["d"] == g.d_max == math.comb(k + t, t)


def test_kneser_lambda():
    meta = kneser_metadata(5, 2)
    assert meta["lambda"] == 2
    s = spectral_summary(kneser(5, 2))
    assert -s.lambda_n * meta["d"] == pytest.approx(meta["lambda"], abs=1e-9)


def test_kneser_bad_arguments():
    with pytest.raises(ValueError):
        kneser(4, 2)


def test_cycle_from_cayley():
    g = cayley_abelian([9], [1, 8])
    assert sorted(map(tuple, g.edges().tolist())) == sorted(
        (min(i, (i + 1) % 9), max(i, (i + 1) % 9)) for i in range(9))


def test_circulant_degree():
    g = circulant(20, [1, 2])
    assert g.is_regular and g.d_max == 4


def test_hypercube():
    d = 4
    units = [tuple(int(i == j) for i in range(d)) for j in range(d)]
    g = cayley_abelian([2] * d, units)
    assert g.n == 16 and g.d_max == d and g.two_colouring() is not None
    for u, v in g.edges().tolist():
        assert bin(u ^ v).count("1") == 1


def test_cayley_rejects_asymmetric_set():
    with pytest.raises(ValueError):
        cayley_abelian([7], [1])
    with pytest.raises(ValueError):
        cayley_abelian([7], [0])


def test_percolate_extremes():
    g = circulant(50, [1, 2, 3])
    assert np.array_equal(percolate(g, 1.0).edges(), g.edges())
    assert percolate(g, 0.0).m == 0


def test_percolation_degree_window():
    g = circulant(4096, range(1, 129))
    lo, hi = percolation_degree_window(256, 0, 0.5, 4096)
    inside = 0
    for seed in range(20):
        h = percolate(g, 0.5, seed=seed)
        inside += bool(h.d_min >= lo and h.d_max <= hi)
    assert inside >= 19


def test_random_regular_small():
    g = random_regular(4, 3)
    assert g.m == 6


def test_random_regular_certificates():
    g = random_regular(1024, 32, seed=0)
    assert g.is_regular and g.d_max == 32 and g.is_connected()
    assert expansion_certificate(g, samples=50, seed=1).rho_upper > 0


def test_random_regular_rejects_odd_total():
    with pytest.raises((ValueError, GenerationError)):
        random_regular(5, 3)


def test_random_bipartite_regular():
    g = random_bipartite_regular(100, 6, seed=2)
    assert g.is_regular and g.side is not None and int(g.side.sum()) == 50


def test_glue_single_coset():
    g = circulant(10, [1, 2])
    plan = coset_euler_glue(g, [list(range(10))], 1)
    assert plan.matching == [] and len(plan.pairs[0]) == 1


def test_glue_two_cosets():
    g = circulant(12, [1, 3, 6])
    cosets = [list(range(0, 12, 2)), list(range(1, 12, 2))]
    plan = coset_euler_glue(g, cosets, 1, seed=0)
    assert plan.tour == [0, 1, 0]
    assert len(plan.matching) == 2 and len({v for e in plan.matching for v in e}) == 4
    assert all(len(p) == 1 for p in plan.pairs)


def test_glue_disconnected_aux_graph():
    g = Graph.from_edges(6, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])
    with pytest.raises(GlueError):
        coset_euler_glue(g, [[0, 1, 2], [3, 4, 5]], 1)


@pytest.mark.parametrize("seed", range(3))
def test_glue_cycle_on_z12(seed):
    # cosets of the index-3 subgroup of Z_12; each coset induces K_4
    g = cayley_abelian([12], [1, 11, 3, 9, 6])
    cosets = [[v for v in range(12) if v % 3 == r] for r in range(3)]
    res = glue_cycle(g, coset_euler_glue(g, cosets, 1, seed=seed), seed=seed)
    assert res.outcome == "cycle"
    assert oracles.is_hamilton_cycle(12, g.edges().tolist(), list(res.cycle))


def test_glue_cycle_on_z24_four_cosets():
    g = cayley_abelian([24], [1, 23, 4, 20, 8, 16])
    cosets = [[v for v in range(24) if v % 4 == r] for r in range(4)]
    res = glue_cycle(g, coset_euler_glue(g, cosets, 1, seed=1), seed=1)
    assert res.outcome == "cycle" and verify_hamilton_cycle(g, res.cycle)
