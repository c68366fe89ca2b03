"""Instance generators: random regular (plain and bipartite), Kneser,
abelian Cayley graphs, edge percolation, and the coset / Euler-tour glue."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph
from .rng import stream

KNESER_CAP = 10 ** 6


class GenerationError(RuntimeError):
    pass


def _pair_stubs(left: np.ndarray, right: np.ndarray | None, n: int, rng, budget: int = 200):
    """Pair stubs into a simple graph, re-shuffling only the bad stubs.

    With `right` given the pairing is left-to-right (bipartite); otherwise
    `left` is paired with itself.  Returns edge keys or None if stuck.
    """
    keys = np.empty(0, dtype=np.int64)
    a, b = left.copy(), None if right is None else right.copy()
    for _ in range(budget):
        if right is None:
            rng.shuffle(a)
            u, v = a[0::2], a[1::2]
        else:
            rng.shuffle(b)
            u, v = a, b
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        k = lo * n + hi
        good = lo != hi
        good &= ~np.isin(k, keys)
        _, first = np.unique(k, return_index=True)
        once = np.zeros(len(k), dtype=bool)
        once[first] = True
        good &= once
        keys = np.concatenate([keys, k[good]])
        if good.all():
            return keys
        if right is None:
            a = np.concatenate([u[~good], v[~good]])
        else:
            a, b = u[~good], v[~good]
    return None


def _keys_to_graph(keys: np.ndarray, n: int, side=None) -> Graph:
    e = np.stack([keys // n, keys % n], axis=1)
    return Graph.from_edges(n, e, side=side, check=False)


def random_regular(n: int, d: int, seed=0, restarts: int = 50) -> Graph:
    """d-regular simple graph from the pairing model, bad pairs re-drawn."""
    if (n * d) % 2 or not 0 <= d < n:
        raise ValueError("need n*d even and 0 <= d < n")
    rng = stream(seed, "random-regular", n, d)
    stubs = np.repeat(np.arange(n, dtype=np.int64), d)
    for _ in range(restarts):
        keys = _pair_stubs(stubs, None, n, rng)
        if keys is not None:
            return _keys_to_graph(np.sort(keys), n)
    raise GenerationError("rejection budget exceeded")


def random_bipartite_regular(n: int, d: int, seed=0, restarts: int = 50) -> Graph:
    """d-regular bipartite graph with parts {0..n/2-1} and {n/2..n-1}."""
    if n % 2 or not 0 <= d <= n // 2:
        raise ValueError("need n even and d <= n/2")
    h = n // 2
    rng = stream(seed, "random-bipartite-regular", n, d)
    left = np.repeat(np.arange(h, dtype=np.int64), d)
    right = np.repeat(np.arange(h, n, dtype=np.int64), d)
    side = np.r_[np.zeros(h, dtype=np.int8), np.ones(h, dtype=np.int8)]
    for _ in range(restarts):
        keys = _pair_stubs(left, right, n, rng)
        if keys is not None:
            return _keys_to_graph(np.sort(keys), n, side)
    raise GenerationError("rejection budget exceeded")


def kneser(n: int, k: int) -> Graph:
    """K(n, k): k-subsets of [n] in colex order, adjacent when disjoint."""
    if not n > 2 * k >= 2:
        raise ValueError("need n > 2k >= 2")
    if math.comb(n, k) > KNESER_CAP:
        raise ValueError("Kneser graph too large")
    subsets = sorted(itertools.combinations(range(n), k), key=lambda c: c[::-1])
    index = {sum(1 << i for i in c): j for j, c in enumerate(subsets)}
    edges = []
    for j, c in enumerate(subsets):
        rest = [i for i in range(n) if i not in c]
        for other in itertools.combinations(rest, k):
            jj = index[sum(1 << i for i in other)]
            if j < jj:
                edges.append((j, jj))
    g = Graph.from_edges(len(subsets), edges, check=False)
    if g.d_min != math.comb(n - k, k) or not g.is_regular:
        raise AssertionError("Kneser degree formula violated")
    return g


def kneser_metadata(n: int, k: int) -> dict:
    t = n - 2 * k
    return {"n": math.comb(n, k), "d": math.comb(k + t, t), "lambda": math.comb(k + t - 1, t),
            "lambda_over_d": 1 - t / (k + t)}


def cayley_abelian(orders, S) -> Graph:
    """Cayley graph of Z_{o1} × ... × Z_{or} with symmetric generator set S.

    Elements of S are tuples (or ints for a single cyclic factor).
    """
    orders = [int(o) for o in orders]
    size = math.prod(orders)
    if size > KNESER_CAP:
        raise ValueError("group too large")
    gens = [tuple(s) if isinstance(s, (tuple, list)) else (s,) for s in S]
    gens = [tuple(int(x) % o for x, o in zip(s, orders)) for s in gens]
    gens = sorted(set(gens))
    gset = set(gens)
    for s in gens:
        if all(x == 0 for x in s):
            raise ValueError("identity in S")
        if tuple((-x) % o for x, o in zip(s, orders)) not in gset:
            raise ValueError("S is not symmetric")
    coords = np.array(list(itertools.product(*[range(o) for o in orders])), dtype=np.int64).reshape(size, len(orders))
    radix = np.array([math.prod(orders[i + 1:]) for i in range(len(orders))], dtype=np.int64)
    keys = []
    for s in gens:
        nb = (coords + np.array(s)) % np.array(orders)
        v = nb @ radix
        u = np.arange(size)
        keys.append(np.minimum(u, v) * size + np.maximum(u, v))
    keys = np.unique(np.concatenate(keys))
    return _keys_to_graph(keys, size)


def circulant(n: int, steps) -> Graph:
    S = sorted({s % n for s in steps} | {(-s) % n for s in steps})
    return cayley_abelian([n], S)


def percolate(g: Graph, p: float, seed=0) -> Graph:
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    rng = stream(seed, "percolate", g.n, g.m)
    e = g.edges()
    keep = rng.random(len(e)) < p
    return Graph.from_edges(g.n, e[keep], side=g.side, check=False)


def percolation_degree_window(d: float, d_prime: float, p: float, n: int) -> tuple[float, float]:
    """Degree window pd ± 10(pd' + sqrt(pd log n)) for a percolated graph."""
    pd = p * d
    slack = 10 * (p * d_prime + math.sqrt(pd * math.log(n)))
    return pd - slack, pd + slack


# ----------------------------------------------------------------------
# coset / Euler-tour glue

class GlueError(RuntimeError):
    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


@dataclass
class GluePlan:
    cosets: list[list[int]]
    tour: list[int]                        # coset index sequence U_0, U_1, ..., U_L = U_0
    matching: list[tuple[int, int]]        # φ(e_1), ..., φ(e_L) as (u in U_{i-1}, v in U_i)
    pairs: list[list[tuple[int, int]]]     # per coset, endpoint pairs to be joined inside it
    tree_edges: list[tuple[int, int]] = field(default_factory=list)
    case: int = 1


def _coset_matchings(g: Graph, label: np.ndarray, k: int):
    """Greedy maximal matching between every pair of cosets that share edges."""
    e = g.edges()
    cu, cv = label[e[:, 0]], label[e[:, 1]]
    cross = cu != cv
    buckets: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for (u, v), a, b in zip(e[cross].tolist(), cu[cross].tolist(), cv[cross].tolist()):
        if a > b:
            a, b, u, v = b, a, v, u
        buckets.setdefault((a, b), []).append((u, v))
    out = {}
    for key, lst in sorted(buckets.items()):
        used = set()
        mt = []
        for u, v in lst:
            if u not in used and v not in used:
                used.update((u, v))
                mt.append((u, v))
        out[key] = mt
    return out


def _euler_tour_doubled_tree(k: int, tree: list[tuple[int, int]]) -> list[int]:
    """Hierholzer on the doubled tree; returns the closed vertex sequence."""
    adj = {i: [] for i in range(k)}
    for eid, (a, b) in enumerate(tree):
        for copy in (0, 1):
            adj[a].append((b, 2 * eid + copy))
            adj[b].append((a, 2 * eid + copy))
    for i in adj:
        adj[i].sort()
    used = set()
    stack, tour = [0], []
    ptr = {i: 0 for i in range(k)}
    while stack:
        v = stack[-1]
        while ptr[v] < len(adj[v]) and adj[v][ptr[v]][1] in used:
            ptr[v] += 1
        if ptr[v] == len(adj[v]):
            tour.append(stack.pop())
        else:
            u, eid = adj[v][ptr[v]]
            used.add(eid)
            stack.append(u)
    return tour[::-1]


def coset_euler_glue(g: Graph, cosets, s_threshold: int, seed=0, sides=None) -> GluePlan:
    """Plan the stitching of per-coset spanning paths into one cycle.

    cosets: list of vertex lists partitioning V(g).  Auxiliary graph F has a
    node per coset and an edge when the cosets span a matching of size at
    least s_threshold.  A spanning tree of F is doubled and walked by an
    Euler tour U_0 e_1 U_1 ... e_L U_L = U_0; each tour edge gets its own
    inter-coset edge φ(e_i), all of them vertex-disjoint.  For coset V_i
    visited at tour positions p_1 < ... < p_r the pairs are
    (V_i ∩ φ(e_{p_j}), V_i ∩ φ(e_{p_j + 1})), indices taken cyclically.

    With `sides` (a 0/1 array, a bipartition of each coset's own graph)
    the second variant is produced: pairs are routed through fresh
    vertices z_j on the opposite side so that every coset path joins
    opposite sides.
    """
    cosets = [sorted(int(v) for v in c) for c in cosets]
    k = len(cosets)
    label = np.full(g.n, -1, dtype=np.int64)
    for i, c in enumerate(cosets):
        label[c] = i
    if np.any(label < 0):
        raise ValueError("cosets must partition the vertex set")
    if k == 1:
        e = g.edges()
        if not len(e):
            raise GlueError("graph has no edges")
        a, b = (int(x) for x in e[0])
        return GluePlan(cosets, [0], [], [[(a, b)]], [], 1 if sides is None else 2)
    match = _coset_matchings(g, label, k)
    F = {key: mt for key, mt in match.items() if len(mt) >= s_threshold}
    # spanning tree of F by BFS from coset 0
    nbrs = {i: [] for i in range(k)}
    for a, b in F:
        nbrs[a].append(b)
        nbrs[b].append(a)
    seen = {0}
    order = [0]
    tree = []
    for a in order:
        for b in sorted(nbrs[a]):
            if b not in seen:
                seen.add(b)
                order.append(b)
                tree.append((a, b))
    if len(seen) < k:
        raise GlueError("auxiliary coset graph is disconnected", sorted(seen))
    tour = _euler_tour_doubled_tree(k, tree)
    L = len(tour) - 1
    rng = stream(seed, "glue")
    used = set()
    phi = []
    for i in range(1, L + 1):
        a, b = tour[i - 1], tour[i]
        key = (min(a, b), max(a, b))
        cand = F[key][:]
        rng.shuffle(cand)
        for u, v in cand:
            if label[u] != a:
                u, v = v, u
            if u not in used and v not in used:
                used.update((u, v))
                phi.append((u, v))
                break
        else:
            raise GlueError("ran out of disjoint inter-coset edges", key)
    # pairs: coset tour[i] is left through φ(e_{i+1})[0] and entered through φ(e_i)[1]
    pairs: list[list[tuple[int, int]]] = [[] for _ in range(k)]
    for i in range(L):
        c = tour[i]
        enter = phi[i - 1][1] if i > 0 else phi[L - 1][1]
        leave = phi[i][0]
        pairs[c].append((enter, leave))
    plan = GluePlan(cosets, tour, phi, pairs, tree, 1)
    if sides is not None:
        plan = _bipartite_variant(g, plan, np.asarray(sides), used, rng)
    return plan


def _bipartite_variant(g, plan: GluePlan, sides, used, rng) -> GluePlan:
    """Insert z-vertices so every per-coset pair joins opposite sides."""
    new_pairs = []
    label = np.full(g.n, -1, dtype=np.int64)
    for i, c in enumerate(plan.cosets):
        label[c] = i
    taken = set(used)
    for i, lst in enumerate(plan.pairs):
        out = []
        pool = [v for v in plan.cosets[i] if v not in taken]
        for a, b in lst:
            if sides[a] != sides[b]:
                out.append((a, b))
                continue
            want = 1 - sides[a]
            cand = [z for z in pool if sides[z] == want and z not in taken]
            if not cand:
                raise GlueError("no free vertex on the opposite side", i)
            z = cand[int(rng.integers(len(cand)))]
            taken.add(z)
            out.append((a, z))
            out.append((z, b))
        new_pairs.append(out)
    return GluePlan(plan.cosets, plan.tour, plan.matching, new_pairs, plan.tree_edges, 2)
