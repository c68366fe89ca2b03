"""Random connecting engine: join many endpoint pairs by internally disjoint
paths of one fixed odd length, avoiding a forbidden set.

A round ("one bite") draws, for every open pair (a, b), uniform first and
last steps a' ∈ N(a)∖U, b' ∈ N(b)∖U and an exact conditioned walk
a' → b' of length ℓ−2 in G∖U.  Pairs whose walk is non-degenerate and
meets no other sampled walk are kept; their interiors join U and the rest
try again.  Once few pairs remain, each gets r independent copies and any
copy that is clean against every other sampled walk is taken.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import PipelineConfig, next_odd
from .graph import Graph, UniformityReport, uniformity
from .rng import stream
from .walks import SamplerCache, sample_conditioned


class ConnectorError(RuntimeError):
    pass


class NoExitError(ConnectorError):
    """An endpoint has no neighbour outside the forbidden set."""


class NoSurvivingCopy(ConnectorError):
    def __init__(self, pair_index: int, kept: dict | None = None):
        super().__init__(f"pair {pair_index} has no surviving copy")
        self.pair_index = pair_index
        self.kept = kept or {}     # pairs that did get a clean copy


class RetryBudgetExhausted(ConnectorError):
    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class PairBatch:
    pairs: tuple[tuple[int, int], ...]
    forbidden: frozenset[int]
    length: int
    alpha: float = 0.0
    adjusted: bool = False

    @classmethod
    def make(cls, g: Graph, pairs, forbidden=(), length: int = 9, alpha: float = 0.0) -> "PairBatch":
        pairs = tuple((int(a), int(b)) for a, b in pairs)
        U = set(int(v) for v in forbidden)
        for a, b in pairs:
            U.add(a)
            U.add(b)
        ell = next_odd(max(length, 3))
        batch = cls(pairs, frozenset(U), ell, alpha, ell != length)
        batch.validate(g)
        return batch

    def validate(self, g: Graph) -> None:
        if self.length % 2 == 0 or self.length < 3:
            raise ValueError("length must be odd and at least 3")
        for a, b in self.pairs:
            if a == b:
                raise ValueError(f"pair ({a},{b}) repeats a vertex")
            if a not in self.forbidden or b not in self.forbidden:
                raise ValueError("endpoints must lie in the forbidden set")
            if g.side is not None and g.side[a] == g.side[b]:
                raise ValueError(f"pair ({a},{b}) does not cross the bipartition")

    def subset(self, idx, forbidden=None) -> "PairBatch":
        return PairBatch(tuple(self.pairs[i] for i in idx),
                         self.forbidden if forbidden is None else frozenset(forbidden),
                         self.length, self.alpha, self.adjusted)


@dataclass
class ConnectResult:
    paths: list[list[int] | None]
    kept_rounds: list[int]
    layer_reports: list[UniformityReport] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def internal_vertices(self) -> set[int]:
        out = set()
        for p in self.paths:
            if p is not None:
                out.update(p[1:-1])
        return out

    def to_dict(self) -> dict:
        return {
            "paths": self.paths,
            "kept_rounds": self.kept_rounds,
            "layer_reports": [r.to_dict() for r in self.layer_reports],
            "diagnostics": self.diagnostics,
        }


# ----------------------------------------------------------------------

def _working_graph(g: Graph, forbidden) -> tuple[Graph, np.ndarray, np.ndarray]:
    alive = np.ones(g.n, dtype=bool)
    alive[list(forbidden)] = False
    sub, old = g.induced(np.flatnonzero(alive))
    new_id = np.full(g.n, -1, dtype=np.int64)
    new_id[old] = np.arange(len(old))
    return sub, old, new_id


def _exits(g: Graph, v: int, alive_id: np.ndarray) -> np.ndarray:
    nb = g.neighbors(v)
    return alive_id[nb][alive_id[nb] >= 0]


def _sample_walks(g, batch, sub, new_id, cache, rng_for, count):
    """`count` candidate walks per pair, in working-graph labels (None if no walk)."""
    ell = batch.length
    draws = []
    for i, (a, b) in enumerate(batch.pairs):
        A = _exits(g, a, new_id)
        B = _exits(g, b, new_id)
        if not len(A) or not len(B):
            raise NoExitError(f"pair {i} endpoint has no neighbour outside U")
        rows = []
        for j in range(count):
            rng = rng_for(i, j)
            rows.append((int(A[rng.integers(len(A))]), int(B[rng.integers(len(B))]), rng))
        draws.append(rows)
    targets = {bp for rows in draws for _, bp, _ in rows}
    samplers = cache.get_many(sorted(targets), ell - 2)
    walks = []
    for rows in draws:
        out = []
        for ap, bp, rng in rows:
            s = samplers[bp]
            out.append(list(sample_conditioned(s, ap, rng).vertices) if s.supports(ap) else None)
        walks.append(out)
    return walks


def _clean_mask(flat: list[list[int] | None]) -> list[bool]:
    """Non-degenerate and vertex-disjoint from every other walk in `flat`."""
    owners: dict[int, int] = {}
    clash = set()
    for k, w in enumerate(flat):
        if w is None:
            continue
        for v in set(w):
            if v in owners:
                clash.add(owners[v])
                clash.add(k)
            else:
                owners[v] = k
    return [w is not None and len(set(w)) == len(w) and k not in clash for k, w in enumerate(flat)]


def one_bite(g: Graph, batch: PairBatch, seed=0, cache: SamplerCache | None = None, round_index: int = 0):
    """One round.  Returns ({pair index: path}, leftover indices)."""
    sub, old, new_id = _working_graph(g, batch.forbidden)
    if cache is None or cache.host is not sub:
        cache = SamplerCache(sub)
    walks = _sample_walks(g, batch, sub, new_id, cache,
                          lambda i, j: stream(seed, "one-bite", round_index, i), 1)
    flat = [w[0] for w in walks]
    ok = _clean_mask(flat)
    kept = {}
    leftover = []
    for i, (a, b) in enumerate(batch.pairs):
        if ok[i]:
            kept[i] = [a] + old[flat[i]].tolist() + [b]
        else:
            leftover.append(i)
    return kept, leftover


def dummy_pairs(load0: np.ndarray, load1: np.ndarray, size: int, target_count: int) -> list[tuple[list[int], list[int]]]:
    """Synthetic (X_i, Y_i) endpoint sets built from the least loaded vertices.

    load0/load1 give the current endpoint-neighbourhood load of each vertex
    of the two working parts (indices are vertex ids); both are updated.
    Ties go to the lowest index.
    """
    out = []
    for _ in range(target_count):
        pick = []
        for load in (load0, load1):
            order = np.lexsort((np.arange(len(load)), load))
            chosen = order[:size]
            load[chosen] += 1
            pick.append(sorted(int(v) for v in chosen))
        out.append((pick[0], pick[1]))
    return out


def last_step(g: Graph, batch: PairBatch, copies: int = 32, seed=0, use_dummies: bool = False) -> dict[int, list[int]]:
    sub, old, new_id = _working_graph(g, batch.forbidden)
    cache = SamplerCache(sub)
    walks = _sample_walks(g, batch, sub, new_id, cache,
                          lambda i, j: stream(seed, "last-step", i, j), copies)
    flat = [w for rows in walks for w in rows]
    if use_dummies and len(batch.pairs):
        flat.extend(_dummy_walks(g, batch, sub, new_id, cache, copies, seed))
    ok = _clean_mask(flat)
    out = {}
    failed = []
    for i, (a, b) in enumerate(batch.pairs):
        for j in range(copies):
            k = i * copies + j
            if ok[k]:
                out[i] = [a] + old[flat[k]].tolist() + [b]
                break
        else:
            failed.append(i)
    if failed:
        raise NoSurvivingCopy(failed[0], out)
    return out


def _dummy_walks(g, batch, sub, new_id, cache, copies, seed):
    ell = batch.length
    d1 = max(1, int(round(sub.d_avg)))
    if sub.side is not None:
        parts = [np.flatnonzero(sub.side == 0), np.flatnonzero(sub.side == 1)]
    else:
        parts = [np.arange(sub.n), np.arange(sub.n)]
    loads = [np.zeros(len(p)) for p in parts]
    pos = [np.full(sub.n, -1) for _ in parts]
    for k, p in enumerate(parts):
        pos[k][p] = np.arange(len(p))
    for a, b in batch.pairs:
        for v in _exits(g, a, new_id):
            if pos[1][v] >= 0:
                loads[1][pos[1][v]] += copies
        for v in _exits(g, b, new_id):
            if pos[0][v] >= 0:
                loads[0][pos[0][v]] += copies
    target = int(max(loads[0].max(), loads[1].max()) * max(len(parts[0]), 1) / max(d1, 1))
    z = max(0, min(target - copies * len(batch.pairs), 4 * copies * len(batch.pairs)))
    rng = stream(seed, "dummy")
    out = []
    for X, Y in dummy_pairs(loads[0], loads[1], min(d1, len(parts[0]), len(parts[1])), z):
        xs = parts[0][X]
        ys = parts[1][Y]
        ap = int(xs[rng.integers(len(xs))])
        bp = int(ys[rng.integers(len(ys))])
        s = cache.get(bp, ell - 2)
        out.append(list(sample_conditioned(s, ap, rng).vertices) if s.supports(ap) else None)
    return out


def _exact_path(adj, a, b, ell, banned, rng, budget=20000):
    """Some a→b path with exactly ell edges whose interior avoids `banned`."""
    target = set(adj[b]) - banned
    # distances to b through free vertices, capped at ell
    dist = {b: 0}
    frontier = [b]
    for k in range(1, ell):
        nxt = []
        for v in frontier:
            for u in adj[v]:
                if u not in dist and u not in banned:
                    dist[u] = k
                    nxt.append(u)
        frontier = nxt
    path = [a]
    on = {a}
    steps = 0

    def grow():
        nonlocal steps
        steps += 1
        if steps > budget:
            return False
        v = path[-1]
        left = ell - (len(path) - 1)
        if left == 1:
            return False
        cand = [u for u in adj[v] if u not in on and dist.get(u, ell) < left and u != b]
        if left == 2:
            cand = [u for u in cand if u in target]
        rng.shuffle(cand)
        for u in cand:
            path.append(u)
            on.add(u)
            if left == 2 or grow():
                return True
            path.pop()
            on.discard(u)
        return False

    return path + [b] if grow() else None


def _route_exact(g: Graph, batch: PairBatch, seed=0, restarts: int = 5) -> dict[int, list[int]] | None:
    """Sequential exact-length routing of a small residue; None if some pair is stuck."""
    rng = stream(seed, "exact-route")
    order = list(range(len(batch.pairs)))
    for _ in range(restarts):
        rng.shuffle(order)
        used = set(batch.forbidden)
        out = {}
        for i in order:
            a, b = batch.pairs[i]
            p = _exact_path(g.adj, a, b, batch.length, used, rng)
            if p is None:
                break
            out[i] = p
            used.update(p[1:-1])
        else:
            return out
    return None


def layer_reports(g: Graph, paths) -> list[UniformityReport]:
    paths = [p for p in paths if p is not None]
    if not paths:
        return []
    ell = len(paths[0]) - 1
    out = []
    for t in range(1, ell):
        W = [p[t] for p in paths]
        if g.side is not None:
            side = "V0V1" if g.side[W[0]] == 0 else "V1V0"
            if any(g.side[w] != g.side[W[0]] for w in W):
                side = "whole"
        else:
            side = "whole"
        out.append(uniformity(g, W, side))
    return out


def check_connect_result(g: Graph, batch: PairBatch, result: ConnectResult) -> list[str]:
    """Every violated hard invariant, as text (empty when all hold)."""
    bad = []
    seen: dict[int, int] = {}
    for i, ((a, b), p) in enumerate(zip(batch.pairs, result.paths)):
        if p is None:
            bad.append(f"pair {i}: missing path")
            continue
        if len(p) != batch.length + 1:
            bad.append(f"pair {i}: length {len(p) - 1}")
        if p[0] != a or p[-1] != b:
            bad.append(f"pair {i}: wrong endpoints")
        for u, v in zip(p, p[1:]):
            if not g.has_edge(u, v):
                bad.append(f"pair {i}: non-edge {u}-{v}")
                break
        if len(set(p)) != len(p):
            bad.append(f"pair {i}: repeated vertex")
        for v in p[1:-1]:
            if v in batch.forbidden:
                bad.append(f"pair {i}: internal vertex {v} in U")
            if v in seen and seen[v] != i:
                bad.append(f"pairs {seen[v]},{i}: share internal vertex {v}")
            seen[v] = i
        if g.side is not None:
            s0 = g.side[a]
            if any(g.side[v] != (s0 + t) % 2 for t, v in enumerate(p)):
                bad.append(f"pair {i}: parity broken")
    return bad


def connect(g: Graph, batch: PairBatch, config: PipelineConfig | None = None, seed=0) -> ConnectResult:
    config = config or PipelineConfig()
    m = len(batch.pairs)
    if m == 0:
        return ConnectResult([], [], [], {"rounds": 0})
    # orient pairs so that a ∈ V0 in bipartite hosts
    flip = [g.side is not None and g.side[a] == 1 for a, _ in batch.pairs]
    work = PairBatch(tuple((b, a) if f else (a, b) for f, (a, b) in zip(flip, batch.pairs)),
                     batch.forbidden, batch.length, batch.alpha, batch.adjusted)
    work.validate(g)
    threshold = config.threshold(m)
    paths: list[list[int] | None] = [None] * m
    rounds = [-1] * m
    U = set(work.forbidden)
    open_idx = list(range(m))
    keep_log = []
    r = 0
    retries = 0
    exact_routed = 0
    while open_idx:
        if r >= config.max_rounds:
            raise RetryBudgetExhausted("round cap reached", {"round": r, "leftover": len(open_idx), "keep": keep_log})
        sub_batch = work.subset(open_idx, U)
        if len(open_idx) <= threshold:
            try:
                got = last_step(g, sub_batch, config.copies_r, stream(seed, "connect-last", r, retries).integers(2**63),
                                config.use_dummies)
            except NoSurvivingCopy as exc:
                retries += 1
                got = exc.kept
                if retries >= config.connector_retries:
                    # walks keep colliding on a tiny residue: route it by exact search
                    rest = [k for k in range(len(open_idx)) if k not in got]
                    routed = _route_exact(g, sub_batch.subset(rest, U | {v for p in got.values() for v in p[1:-1]}),
                                          stream(seed, "connect-exact", r).integers(2**63))
                    if routed is None:
                        raise RetryBudgetExhausted("last step failed repeatedly",
                                                   {"round": r, "leftover": len(open_idx), "keep": keep_log})
                    got = dict(got)
                    got.update({rest[k]: p for k, p in routed.items()})
                    exact_routed += len(routed)
                elif not got:
                    # a fresh one-bite round reshuffles the residue before retrying
                    got, _ = one_bite(g, sub_batch, stream(seed, "connect-bite", r).integers(2**63), round_index=r)
        else:
            got, _ = one_bite(g, sub_batch, stream(seed, "connect-bite", r).integers(2**63), round_index=r)
        keep_log.append(len(got) / len(open_idx))
        for k, p in got.items():
            i = open_idx[k]
            paths[i] = p
            rounds[i] = r
            U.update(p[1:-1])
        open_idx = [open_idx[k] for k in range(len(open_idx)) if k not in got]
        r += 1
    for i, f in enumerate(flip):
        if f:
            paths[i] = paths[i][::-1]
    result = ConnectResult(paths, rounds, layer_reports(g, [p[::-1] if f else p for p, f in zip(paths, flip)]),
                           {"rounds": r, "keep_fractions": keep_log, "ell": batch.length,
                            "ell_adjusted": batch.adjusted, "last_step_retries": retries, "exact_routed": exact_routed})
    bad = check_connect_result(g, batch, result)
    if bad:
        raise AssertionError("connector invariant violated: " + "; ".join(bad[:5]))
    return result


def keep_rate(g: Graph, m: int, walk_length: int, seed=0) -> tuple[float, float]:
    """Round-one keep fraction for m random pairs, with its predicted value.

    The conditioned middle segment has `walk_length` steps, so each path
    has walk_length + 2.  Endpoints are 2m distinct uniform vertices (one per
    part in bipartite hosts).  The prediction is exp(-(ℓ+1)² m / n') with
    n' the size of the working graph.
    """
    rng = stream(seed, "keep-rate", m, walk_length)
    if g.side is not None:
        a = rng.choice(np.flatnonzero(g.side == 0), m, replace=False)
        b = rng.choice(np.flatnonzero(g.side == 1), m, replace=False)
    else:
        vs = rng.choice(g.n, 2 * m, replace=False)
        a, b = vs[:m], vs[m:]
    batch = PairBatch.make(g, list(zip(a.tolist(), b.tolist())), (), walk_length + 2)
    kept, _ = one_bite(g, batch, rng.integers(2**63))
    predicted = math.exp(-(batch.length - 1) ** 2 * m / (g.n - len(batch.forbidden)))
    return len(kept) / m, predicted
