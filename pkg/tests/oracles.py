"""Brute-force reference computations used as independent oracles.

Nothing here imports hamexpander; every function works from a plain
vertex count and edge list so that a bug in the package cannot leak into
the expected values.
"""

import itertools
import math
from fractions import Fraction

import numpy as np


def adjacency(n, edges):
    adj = [set() for _ in range(n)]
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    return adj


def is_hamilton_cycle(n, edges, cycle):
    adj = adjacency(n, edges)
    if len(cycle) != n or sorted(cycle) != list(range(n)):
        return False
    return all(cycle[(i + 1) % n] in adj[cycle[i]] for i in range(n))


def is_path(adj, seq):
    return len(set(seq)) == len(seq) and all(b in adj[a] for a, b in zip(seq, seq[1:]))


def hamiltonian_dfs(n, edges):
    """Plain backtracking from vertex 0; exponential but fine for n <= 16."""
    if n < 3:
        return False
    adj = adjacency(n, edges)
    if any(len(a) < 2 for a in adj):
        return False
    seen = [False] * n
    seen[0] = True

    def go(v, depth):
        if depth == n:
            return 0 in adj[v]
        for u in adj[v]:
            if not seen[u]:
                seen[u] = True
                if go(u, depth + 1):
                    return True
                seen[u] = False
        return False

    return go(0, 1)


def hamiltonian_permutations(n, edges):
    """Every cyclic order with 0 fixed first; only for n <= 9."""
    if n < 3:
        return False
    adj = adjacency(n, edges)
    for rest in itertools.permutations(range(1, n)):
        if rest[0] > rest[-1]:
            continue
        cyc = (0,) + rest
        if all(cyc[(i + 1) % n] in adj[cyc[i]] for i in range(n)):
            return True
    return False


def walk_law(n, edges, a, b, ell):
    """Law of a simple random walk from a conditioned to sit at b after ell steps."""
    adj = [sorted(s) for s in adjacency(n, edges)]
    weights = {}
    for mid in itertools.product(range(n), repeat=ell - 1):
        w = (a,) + mid + (b,)
        p = 1.0
        for x, y in zip(w, w[1:]):
            if y not in adj[x]:
                p = 0.0
                break
            p /= len(adj[x])
        if p > 0:
            weights[w] = p
    z = sum(weights.values())
    return {w: p / z for w, p in weights.items()} if z else {}


def max_cut(n, edges):
    best = 0
    for mask in range(1 << n):
        best = max(best, sum(1 for u, v in edges if (mask >> u & 1) != (mask >> v & 1)))
    return best


def min_expansion_ratio(n, edges):
    """min e(S, S^c) / (avg_deg |S|) over 1 <= |S| <= 2n/3, as a Fraction."""
    m = len(edges)
    best = None
    for mask in range(1, 1 << n):
        s = bin(mask).count("1")
        if s > (2 * n) // 3:
            continue
        cut = sum(1 for u, v in edges if (mask >> u & 1) != (mask >> v & 1))
        r = Fraction(cut * n, 2 * m * s)
        if best is None or r < best:
            best = r
    return best


def normalized_spectrum(n, edges):
    A = np.zeros((n, n))
    for u, v in edges:
        A[u, v] = A[v, u] = 1.0
    d = A.sum(axis=1)
    s = 1.0 / np.sqrt(d)
    return np.sort(np.linalg.eigvalsh(s[:, None] * A * s[None, :]))


def random_gnp(n, p, rng):
    return [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]


def is_connected(n, edges):
    adj = adjacency(n, edges)
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for u in adj[v]:
            if u not in seen:
                seen.add(u)
                stack.append(u)
    return len(seen) == n


def tv(p, q):
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def binom(n, k):
    return math.comb(n, k)
