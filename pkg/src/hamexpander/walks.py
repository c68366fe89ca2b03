"""Simple random walks and exact endpoint-conditioned walk sampling.

The conditioned law P^ℓ(a, b) gives a walk W = W(0..ℓ) with W(0)=a, W(ℓ)=b
probability proportional to Π_{i<ℓ} 1/d(W(i)).  It is sampled exactly from
backward mass tables

    f_0 = δ_b,    f_{t+1}(v) = Σ_{u ∈ N(v)} f_t(u) / d(u),

so f_t(v) is the total weight of v→b walks of length t, counting 1/d at
every vertex after the first.  From v with k steps left the next vertex u is
drawn with probability ∝ f_{k-1}(u)/d(u): that is exactly the mass of the
continuations through u, the common 1/d(v) factor dropped.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .rng import stream


class NoWalkError(ValueError):
    """No walk of the requested length joins the two vertices."""


def _rng(seed, *key) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return stream(0 if seed is None else seed, *key)


@dataclass(frozen=True)
class Walk:
    vertices: tuple[int, ...]
    degenerate: bool

    @classmethod
    def of(cls, vertices) -> "Walk":
        vs = tuple(int(v) for v in vertices)
        return cls(vs, len(set(vs)) != len(vs))

    @property
    def start(self) -> int:
        return self.vertices[0]

    @property
    def end(self) -> int:
        return self.vertices[-1]

    @property
    def length(self) -> int:
        return len(self.vertices) - 1

    def __len__(self) -> int:
        return len(self.vertices)

    def __getitem__(self, i):
        return self.vertices[i]

    def reversed(self) -> "Walk":
        return Walk(self.vertices[::-1], self.degenerate)


def random_walk(g: Graph, v: int, ell: int, seed=0) -> Walk:
    if ell < 0:
        raise ValueError("ell must be nonnegative")
    rng = _rng(seed, "random-walk", v, ell)
    out = [int(v)]
    adj = g.adj
    for _ in range(ell):
        nb = adj[out[-1]]
        if not nb:
            raise ValueError(f"vertex {out[-1]} is isolated")
        out.append(nb[int(rng.integers(len(nb)))])
    return Walk.of(out)


# ----------------------------------------------------------------------
# conditioned sampler

@dataclass(frozen=True, eq=False)
class ConditionedSampler:
    host: Graph
    target: int
    length: int
    f_tables: np.ndarray       # (length+1, n), each row scaled to max 1
    log_norm: np.ndarray       # log of the scale removed from each row

    def mass(self, t: int, v: int) -> float:
        """Unscaled f_t(v)."""
        x = float(self.f_tables[t, v])
        return 0.0 if x == 0.0 else math.exp(math.log(x) + float(self.log_norm[t]))

    def supports(self, a: int) -> bool:
        return self.f_tables[self.length, a] > 0.0


def _backward_tables(g: Graph, targets: np.ndarray, ell: int) -> tuple[np.ndarray, np.ndarray]:
    n = g.n
    k = len(targets)
    deg = g.degrees.astype(np.float64)
    inv = np.zeros(n)
    inv[deg > 0] = 1.0 / deg[deg > 0]
    A = g.csr()
    tables = np.zeros((ell + 1, n, k))
    logs = np.zeros((ell + 1, k))
    f = np.zeros((n, k))
    f[targets, np.arange(k)] = 1.0
    tables[0] = f
    for t in range(1, ell + 1):
        f = A @ (f * inv[:, None])
        scale = f.max(axis=0)
        scale[scale == 0] = 1.0
        f /= scale
        tables[t] = f
        logs[t] = logs[t - 1] + np.log(scale)
    return tables, logs


def build_conditioned(g: Graph, b: int, ell: int) -> ConditionedSampler:
    if ell < 1:
        raise ValueError("ell must be at least 1")
    tables, logs = _backward_tables(g, np.array([b]), ell)
    return ConditionedSampler(g, int(b), int(ell), tables[:, :, 0], logs[:, 0])


def build_conditioned_many(g: Graph, targets, ell: int) -> dict[int, ConditionedSampler]:
    """One batched backward pass for several targets."""
    uniq = np.unique(np.asarray(list(targets), dtype=np.int64))
    if ell < 1:
        raise ValueError("ell must be at least 1")
    if not len(uniq):
        return {}
    tables, logs = _backward_tables(g, uniq, ell)
    return {
        int(b): ConditionedSampler(g, int(b), int(ell), np.ascontiguousarray(tables[:, :, j]), logs[:, j].copy())
        for j, b in enumerate(uniq.tolist())
    }


class SamplerCache:
    """LRU of conditioned samplers keyed by (target, length) on one host."""

    def __init__(self, host: Graph, capacity: int = 64):
        self.host = host
        self.capacity = capacity
        self._store: OrderedDict[tuple[int, int], ConditionedSampler] = OrderedDict()

    def get_many(self, targets, ell: int) -> dict[int, ConditionedSampler]:
        out = {}
        missing = []
        for b in dict.fromkeys(int(x) for x in targets):
            key = (b, ell)
            if key in self._store:
                self._store.move_to_end(key)
                out[b] = self._store[key]
            else:
                missing.append(b)
        for start in range(0, len(missing), self.capacity):
            chunk = missing[start:start + self.capacity]
            for b, s in build_conditioned_many(self.host, chunk, ell).items():
                out[b] = s
                self._store[(b, ell)] = s
                while len(self._store) > self.capacity:
                    self._store.popitem(last=False)
        return out

    def get(self, b: int, ell: int) -> ConditionedSampler:
        return self.get_many([b], ell)[int(b)]


def sample_conditioned(s: ConditionedSampler, a: int, seed=0) -> Walk:
    """One exact draw from P^ℓ(a, b)."""
    if not s.supports(a):
        raise NoWalkError(f"no walk of length {s.length} from {a} to {s.target}")
    rng = _rng(seed, "conditioned", a, s.target, s.length)
    g = s.host
    deg = g.degrees
    ptr, ind = g.indptr, g.indices
    v = int(a)
    out = [v]
    for k in range(s.length, 0, -1):
        nb = ind[ptr[v]:ptr[v + 1]]
        w = s.f_tables[k - 1, nb] / deg[nb]
        c = np.cumsum(w)
        j = int(np.searchsorted(c, rng.random() * c[-1], side="right"))
        v = int(nb[min(j, len(nb) - 1)])
        out.append(v)
    if v != s.target:
        raise AssertionError("conditioned walk missed its target")
    return Walk.of(out)


def sample_conditioned_many(s: ConditionedSampler, a: int, count: int, seed=0) -> np.ndarray:
    """`count` independent draws from P^ℓ(a, b) as a (count, ℓ+1) array."""
    if not s.supports(a):
        raise NoWalkError(f"no walk of length {s.length} from {a} to {s.target}")
    rng = _rng(seed, "conditioned-many", a, s.target, s.length)
    g = s.host
    ptr, ind = g.indptr, g.indices
    deg = g.degrees.astype(np.float64)
    walks = np.empty((count, s.length + 1), dtype=np.int64)
    walks[:, 0] = a
    cur = np.full(count, a, dtype=np.int64)
    for k in range(s.length, 0, -1):
        w = s.f_tables[k - 1, ind] / deg[ind]
        cum = np.concatenate([[0.0], np.cumsum(w)])
        lo = cum[ptr[cur]]
        hi = cum[ptr[cur + 1]]
        x = lo + rng.random(count) * (hi - lo)
        j = np.searchsorted(cum, x, side="right") - 1
        j = np.clip(j, ptr[cur], ptr[cur + 1] - 1)
        cur = ind[j]
        walks[:, s.length - k + 1] = cur
    if np.any(cur != s.target):
        raise AssertionError("conditioned walk missed its target")
    return walks


def degenerate_rows(walks: np.ndarray) -> np.ndarray:
    srt = np.sort(walks, axis=1)
    return np.any(srt[:, 1:] == srt[:, :-1], axis=1)


def estimate_hit_probability(s: ConditionedSampler, a: int, t: int, v: int, samples: int, seed=0) -> float:
    if not 1 <= t <= s.length - 1:
        raise ValueError("t must lie in [1, ell-1]")
    walks = sample_conditioned_many(s, a, samples, _rng(seed, "hit", a, t, v))
    return float(np.mean(walks[:, t] == v))


def estimate_degenerate_probability(s: ConditionedSampler, a: int, samples: int, seed=0) -> float:
    walks = sample_conditioned_many(s, a, samples, _rng(seed, "degenerate", a))
    return float(np.mean(degenerate_rows(walks)))


def conditioned_position_law(s: ConditionedSampler, a: int, t: int) -> np.ndarray:
    """Exact law of P(t) for P ~ P^ℓ(a, b)."""
    if not s.supports(a):
        raise NoWalkError("start outside support")
    g = s.host
    deg = g.degrees.astype(np.float64)
    A = g.csr()
    p = np.zeros(g.n)
    p[a] = 1.0
    for _ in range(t):
        p = A @ (p / deg)
    # Pr_v[W(ℓ-t) = b] ∝ f_{ℓ-t}(v)/d(v)
    back = s.f_tables[s.length - t] / np.where(deg > 0, deg, 1.0)
    law = p * back
    return law / law.sum()


def walk_law_exhaustive(g: Graph, a: int, b: int, ell: int) -> dict[tuple[int, ...], float]:
    """All a→b walks of length ℓ with their P^ℓ(a,b) probabilities (tiny graphs)."""
    adj = g.adj
    weights: dict[tuple[int, ...], float] = {}

    def rec(path, w):
        if len(path) == ell + 1:
            if path[-1] == b:
                weights[tuple(path)] = w
            return
        v = path[-1]
        for u in adj[v]:
            path.append(u)
            rec(path, w / len(adj[v]))
            path.pop()

    rec([a], 1.0)
    z = sum(weights.values())
    if z == 0:
        raise NoWalkError("no walk")
    return {k: w / z for k, w in weights.items()}


def reversal_ratio_check(g: Graph, a: int, b: int, ell: int, samples: int = 1000, seed=0) -> float:
    """max |log( P^ℓ(a,b)[W] / P^ℓ(b,a)[reverse W] )| over walks W.

    Exhaustive for n ≤ 8; otherwise over sampled W with exact
    probabilities read off the two mass tables.
    """
    if g.n <= 8:
        fwd = walk_law_exhaustive(g, a, b, ell)
        bwd = walk_law_exhaustive(g, b, a, ell)
        return max(abs(math.log(p / bwd[w[::-1]])) for w, p in fwd.items())
    s_ab = build_conditioned(g, b, ell)
    s_ba = build_conditioned(g, a, ell)
    deg = g.degrees.astype(np.float64)
    # log P^ℓ(a,b)[W] = Σ_{i<ℓ} -log d(W_i) - log Z_ab with Z_ab = d(b) f_ℓ(a) / d(a) ... up to normalisers
    log_zab = math.log(s_ab.f_tables[ell, a]) + s_ab.log_norm[ell] + math.log(deg[b]) - math.log(deg[a])
    log_zba = math.log(s_ba.f_tables[ell, b]) + s_ba.log_norm[ell] + math.log(deg[a]) - math.log(deg[b])
    walks = sample_conditioned_many(s_ab, a, samples, _rng(seed, "reversal", a, b))
    ld = np.log(deg[walks])
    lp = -ld[:, :-1].sum(axis=1) - log_zab
    lq = -ld[:, 1:].sum(axis=1) - log_zba
    return float(np.max(np.abs(lp - lq)))
