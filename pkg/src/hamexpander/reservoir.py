"""Connecting reservoirs: random vertex sets through which endpoint pairs are
joined by short internally disjoint paths, plus the ball / robust-expansion
probes used to sanity-check that such sets can work."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph
from .rng import stream


class ConnectThroughFailure(RuntimeError):
    def __init__(self, message: str, failed_pairs: list[tuple[int, int]]):
        super().__init__(message)
        self.failed_pairs = failed_pairs


class SpreadViolation(ValueError):
    def __init__(self, message: str, load: int):
        super().__init__(message)
        self.load = load


def connecting_params(n: int, d: float, rho: float, p: float) -> tuple[float, float]:
    """(ℓ, D) at the asymptotic rates: ℓ = (5/2)ρ⁻¹(log n)⁴, D = p⁹ρ¹³d/(log n)⁵¹."""
    L = math.log(n)
    return 2.5 / rho * L ** 4, p ** 9 * rho ** 13 * d / L ** 51


def robust_expansion_params(rho: float, d: float) -> tuple[float, float]:
    """Edge expansion ρ gives robust vertex expansion (2ρ/5, s = ρd/4)."""
    return 0.4 * rho, rho * d / 4


@dataclass(frozen=True)
class Reservoir:
    vertices: frozenset[int]
    host: Graph
    D: float | None
    ell: int
    avoid: frozenset[int]
    p: float
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.vertices)

    def to_dict(self) -> dict:
        return {"vertices": sorted(self.vertices), "D": self.D, "ell": self.ell, "p": self.p,
                "avoid_size": len(self.avoid), "metadata": self.metadata}


def desk_ell(g: Graph, tol: float = 1e-3, t_max: int = 200) -> int:
    """4 · (empirical mixing time from vertex 0) + 2."""
    from .spectral import empirical_mixing

    t = empirical_mixing(g, 0, t_max, bipartite=g.side is not None).mixing_time(tol)
    return 4 * (t_max if t is None else t) + 2


def sample_reservoir(g: Graph, p: float, avoid=(), seed=0, ell: int | None = None, D: float | None = None,
                     rho: float | None = None, balanced: bool = False) -> Reservoir:
    """p-random subset of V(g)∖avoid.

    With `balanced`, equal-size random halves are taken from the two parts
    (size ⌊p·min part⌋ each).  The asymptotic (ℓ, D) are kept as metadata
    when ρ is supplied; the working ℓ defaults to the empirical mixing rule.
    """
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    avoid = frozenset(int(v) for v in avoid)
    rng = stream(seed, "reservoir", p)
    free = np.array([v for v in range(g.n) if v not in avoid], dtype=np.int64)
    if balanced:
        if g.side is None:
            raise ValueError("balanced reservoir needs a bipartition")
        halves = [free[g.side[free] == s] for s in (0, 1)]
        k = int(math.floor(p * min(len(h) for h in halves)))
        chosen = np.concatenate([rng.choice(h, k, replace=False) for h in halves])
    else:
        chosen = free[rng.random(len(free)) < p]
    meta = {}
    if rho is not None and g.n > 1:
        asymptotic_ell, asymptotic_D = connecting_params(g.n, g.d_avg, rho, p if p > 0 else 1.0)
        meta = {"asymptotic_ell": asymptotic_ell, "asymptotic_D": asymptotic_D, "rho": rho}
    if ell is None:
        ell = desk_ell(g) if g.m else 1
    return Reservoir(frozenset(int(v) for v in chosen), g, D, int(ell), avoid, float(p), meta)


def endpoint_load(g: Graph, R, pairs) -> int:
    """max over v ∈ R of |N(v) ∩ W|, W the endpoint multiset."""
    if not pairs:
        return 0
    W = np.array([v for pr in pairs for v in pr], dtype=np.int64)
    hits = g.csr() @ np.bincount(W, minlength=g.n).astype(np.float64)
    R = np.fromiter(R, dtype=np.int64)
    return int(hits[R].max()) if len(R) else 0


def _route(adj, x, y, allowed, ell, rng):
    """Shortest x→y path of length ≤ ell whose internal vertices are in `allowed`."""
    start = [u for u in adj[x] if u in allowed]
    rng.shuffle(start)
    parent = {u: x for u in start}
    depth = {u: 1 for u in start}
    queue = deque(start)
    target = set(adj[y])
    while queue:
        v = queue.popleft()
        if v in target:
            out = [y, v]
            while out[-1] != x:
                out.append(parent[out[-1]])
            return out[::-1]
        if depth[v] + 1 >= ell:
            continue
        nxt = [u for u in adj[v] if u in allowed and u not in parent]
        rng.shuffle(nxt)
        for u in nxt:
            parent[u] = v
            depth[u] = depth[v] + 1
            queue.append(u)
    return None


def connect_through(res: Reservoir, pairs, D: float | None = None, ell: int | None = None, seed=0,
                    restarts: int = 5, waive_spread: bool = False) -> list[list[int]]:
    """Internally disjoint x→y paths of length ≤ ℓ with every internal vertex in R.

    Pairs are routed one at a time by BFS inside the unused part of R, in a
    random order; a failed pass restarts with the failing pairs moved first.
    """
    g = res.host
    pairs = [(int(x), int(y)) for x, y in pairs]
    if not pairs:
        return []
    ell = res.ell if ell is None else ell
    D = res.D if D is None else D
    R = res.vertices
    for x, y in pairs:
        if x in R or y in R:
            raise ValueError("endpoints must lie outside the reservoir")
    if D is not None and not waive_spread:
        load = endpoint_load(g, R, pairs)
        if load > D:
            raise SpreadViolation(f"endpoint load {load} exceeds D={D}", load)
    adj = g.adj
    rng = stream(seed, "connect-through")
    order = list(range(len(pairs)))
    rng.shuffle(order)
    failed: list[int] = []
    for _ in range(restarts):
        used: set[int] = set()
        paths: dict[int, list[int]] = {}
        failed = []
        for i in order:
            x, y = pairs[i]
            p = _route(adj, x, y, R - used, ell, rng)
            if p is None:
                failed.append(i)
                continue
            paths[i] = p
            used.update(p[1:-1])
        if not failed:
            out = [paths[i] for i in range(len(pairs))]
            _check_through(g, R, pairs, out, ell)
            return out
        rest = [i for i in order if i not in failed]
        rng.shuffle(rest)
        order = failed + rest
    raise ConnectThroughFailure(f"{len(failed)} pairs unrouted", [pairs[i] for i in failed])


def _check_through(g, R, pairs, paths, ell):
    seen = set()
    for (x, y), p in zip(pairs, paths):
        assert p[0] == x and p[-1] == y, "wrong endpoints"
        assert 1 <= len(p) - 1 <= ell, "path too long"
        assert all(g.has_edge(u, v) for u, v in zip(p, p[1:])), "non-edge"
        for v in p[1:-1]:
            assert v in R, "internal vertex outside R"
            assert v not in seen, "paths share an internal vertex"
            seen.add(v)


# ----------------------------------------------------------------------
# balls and probes

def ball(g: Graph, U, V, i: int, F=()) -> set[int]:
    """Vertices of V reachable from U by a path of length ≤ i with interior in V, avoiding F."""
    if i < 0:
        raise ValueError("radius must be nonnegative")
    V = set(int(v) for v in V)
    banned = {(min(u, v), max(u, v)) for u, v in F}
    U = set(int(u) for u in U)
    out = U & V
    frontier = set(U)
    seen = set(U)
    adj = g.adj
    for _ in range(i):
        nxt = set()
        for v in frontier:
            for u in adj[v]:
                if u in seen or u not in V or (min(u, v), max(u, v)) in banned:
                    continue
                nxt.add(u)
        seen |= nxt
        out |= nxt
        # only vertices of V may serve as interior points
        frontier = nxt
        if not frontier:
            break
    return out


def _sample_sets(g: Graph, trials: int, rng, max_size: int):
    adj = g.adj
    for k in range(trials):
        kind = k % 3
        if kind == 0:
            yield [int(rng.integers(g.n))]
        elif kind == 1:
            root = int(rng.integers(g.n))
            size = int(rng.integers(1, max_size + 1))
            order = [root]
            seen = {root}
            for v in order:
                if len(order) >= size:
                    break
                for u in adj[v]:
                    if u not in seen:
                        seen.add(u)
                        order.append(u)
            yield order[:size]
        else:
            size = int(rng.integers(1, max_size + 1))
            yield rng.choice(g.n, size, replace=False).tolist()


def _adversarial_cut(g: Graph, U: set[int], budget: int) -> list[tuple[int, int]]:
    """Spend the edge budget isolating the outside neighbours cheapest to cut off."""
    count: dict[int, list[int]] = {}
    for v in U:
        for u in g.adj[v]:
            if u not in U:
                count.setdefault(u, []).append(v)
    F = []
    for u, vs in sorted(count.items(), key=lambda kv: (len(kv[1]), kv[0])):
        if len(F) + len(vs) > budget:
            break
        F.extend((min(u, v), max(u, v)) for v in vs)
    return F


def reachable_probe(g: Graph, V, mu: float, ell: int, trials: int = 100, seed=0) -> dict:
    """Search for (U, F) with |F| ≤ μ|U| and |B^ℓ_{G−F}(U, V)| ≤ |V|/2."""
    if trials < 1:
        raise ValueError("trials must be positive")
    V = set(int(v) for v in V)
    rng = stream(seed, "reachable-probe")
    worst = math.inf
    witness = None
    for U in _sample_sets(g, trials, rng, max(1, g.n // 3)):
        F = _adversarial_cut(g, set(U), int(mu * len(U)))
        frac = len(ball(g, U, V, ell, F)) / max(len(V), 1)
        if frac < worst:
            worst = frac
            witness = {"U": sorted(U), "F": [list(e) for e in F]}
    passed = worst > 0.5
    return {"pass": passed, "worst_fraction": worst, "trials": trials,
            "witness": None if passed else witness}


def robust_vertex_expansion_probe(g: Graph, gamma: float, s: float, trials: int = 100, seed=0,
                                  rho: float | None = None) -> dict:
    """Search for (U, F) with |F| ≤ s|U| and |N_{G−F}(U)| < γ|U|.

    Given an edge-expansion ρ the implied (γ, s) = (2ρ/5, ρd/4) is reported.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = stream(seed, "rve-probe")
    worst = math.inf
    witness = None
    for U in _sample_sets(g, trials, rng, max(1, (2 * g.n) // 3)):
        Us = set(U)
        F = _adversarial_cut(g, Us, int(s * len(U)))
        banned = set(F)
        nb = {u for v in Us for u in g.adj[v] if u not in Us and (min(u, v), max(u, v)) not in banned}
        ratio = len(nb) / len(Us)
        if ratio < worst:
            worst = ratio
            witness = {"U": sorted(Us), "F": [list(e) for e in F], "neighbourhood": len(nb)}
    passed = worst >= gamma
    out = {"pass": passed, "worst_ratio": worst, "trials": trials, "witness": None if passed else witness}
    if rho is not None:
        out["implied"] = dict(zip(("gamma", "s"), robust_expansion_params(rho, g.d_avg)))
    return out
