"""Absorbers: single-vertex (x,a,y) and pair (x,a,b,y) gadgets, the robustly
matchable template, and reservoir absorbers that can drop any admissible
subset R' of their reservoir while still yielding one x_H→y_H path."""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .config import PipelineConfig
from .connector import ConnectorError, PairBatch, _exact_path, connect
from .graph import Graph, UniformityReport, uniformity
from .rng import child_seed, stream


class AbsorberError(RuntimeError):
    pass


class TemplateDefect(AbsorberError):
    """The template lacks a perfect matching it was verified to have."""


class TemplateVerificationError(AbsorberError):
    pass


# ----------------------------------------------------------------------
# gadget templates

def _glue(out: list[int], seg) -> None:
    seg = list(seg)
    if out and seg and out[-1] == seg[0]:
        seg = seg[1:]
    out.extend(seg)


def gadget_templates(u, v, cross, b_present: bool) -> tuple[list[int], list[int]]:
    """The two x→y template walks of a gadget.

    u = Q1 (a→y, or a→b), v = Q2 (a→u[ℓ-1], or a→b); cross[0] runs x→v1,
    cross[i-1] runs u[i-1]→v[i] for 2 ≤ i ≤ ℓ-1 and, with b, cross[ℓ-1]
    runs u[ℓ-1]→y.  Returns (with, without): the first covers the whole
    gadget, the second skips a (and b).
    """
    ell = len(u) - 1
    P = [list(p) for p in cross]
    full = list(P[0])
    _glue(full, [v[1], u[0], u[1]])
    for i in range(2, ell):
        seg = P[i - 1] if i % 2 == 0 else P[i - 1][::-1]
        _glue(full, seg)
        _glue(full, [v[i], v[i + 1]] if i % 2 == 0 else [u[i - 1], u[i]])
    if ell == 1:
        raise ValueError("gadget length must be at least 3")
    if b_present:
        _glue(full, [v[ell], u[ell - 1]])
        _glue(full, P[ell - 1])
    else:
        _glue(full, [u[ell - 1], u[ell]])

    skip = list(P[0])
    _glue(skip, [v[1], v[2]])
    for i in range(2, ell):
        seg = P[i - 1][::-1] if i % 2 == 0 else P[i - 1]
        _glue(skip, seg)
        _glue(skip, [u[i - 1], u[i]] if i % 2 == 0 else [v[i], v[i + 1]])
    if b_present:
        _glue(skip, P[ell - 1])
    else:
        _glue(skip, [u[ell - 1], u[ell]])
    return full, skip


def _is_path(g: Graph, seq) -> bool:
    return len(set(seq)) == len(seq) and all(g.has_edge(a, b) for a, b in zip(seq, seq[1:]))


@dataclass(frozen=True)
class XAYGadget:
    x: int
    a: int
    y: int
    Q1: tuple[int, ...]
    Q2: tuple[int, ...]
    cross_paths: tuple[tuple[int, ...], ...]
    with_a: tuple[int, ...]
    without_a: tuple[int, ...]

    @property
    def vertices(self) -> frozenset[int]:
        return frozenset(self.with_a)

    @property
    def internal(self) -> frozenset[int]:
        return self.vertices - {self.x, self.a, self.y}

    @property
    def droppable(self) -> frozenset[int]:
        return frozenset({self.a})

    def path(self, keep: bool) -> tuple[int, ...]:
        return self.with_a if keep else self.without_a


@dataclass(frozen=True)
class XABYGadget:
    x: int
    a: int
    b: int
    y: int
    Q1: tuple[int, ...]
    Q2: tuple[int, ...]
    cross_paths: tuple[tuple[int, ...], ...]
    with_ab: tuple[int, ...]
    without_ab: tuple[int, ...]

    @property
    def vertices(self) -> frozenset[int]:
        return frozenset(self.with_ab)

    @property
    def internal(self) -> frozenset[int]:
        return self.vertices - {self.x, self.a, self.b, self.y}

    @property
    def droppable(self) -> frozenset[int]:
        return frozenset({self.a, self.b})

    def path(self, keep: bool) -> tuple[int, ...]:
        return self.with_ab if keep else self.without_ab


def _finish_gadget(g: Graph, spec, Q1, Q2, cross):
    b_present = len(spec) == 4
    full, skip = gadget_templates(Q1, Q2, cross, b_present)
    x, y = spec[0], spec[-1]
    drop = set(spec[1:3]) if b_present else {spec[1]}
    declared = set(v for p in cross for v in p) | drop
    declared |= {y} if b_present else {Q1[-2], y}
    problems = []
    for name, seq in (("with", full), ("without", skip)):
        if seq[0] != x or seq[-1] != y:
            problems.append(f"{name} template has wrong endpoints")
        if not _is_path(g, seq):
            problems.append(f"{name} template is not a path")
    if set(full) != declared:
        problems.append("with-template vertex set differs from V(H)")
    if set(full) - set(skip) != drop or set(skip) - set(full):
        problems.append("templates do not differ by exactly the droppable vertices")
    if problems:
        raise AbsorberError(f"gadget {spec}: " + "; ".join(problems))
    args = (tuple(Q1), tuple(Q2), tuple(tuple(p) for p in cross), tuple(full), tuple(skip))
    if b_present:
        return XABYGadget(*spec, *args)
    return XAYGadget(*spec, *args)


def _route_round(g, pairs, forbidden, ell, seed, restarts=5):
    adj = g.adj
    rng = stream(seed, "gadget-route")
    order = list(range(len(pairs)))
    for _ in range(restarts):
        rng.shuffle(order)
        used = set(forbidden)
        out = {}
        for i in order:
            a, b = pairs[i]
            p = _exact_path(adj, a, b, ell, used, rng)
            if p is None:
                break
            out[i] = p
            used.update(p[1:-1])
        else:
            return [out[i] for i in range(len(pairs))]
    raise AbsorberError("gadget paths could not be routed")


def _connect(g, pairs, forbidden, ell, config, seed, copies):
    cfg = config.replace(copies_r=copies, ell=ell) if copies != config.copies_r or ell != config.ell else config
    batch = PairBatch.make(g, pairs, forbidden, ell)
    try:
        return connect(g, batch, cfg, seed).paths
    except ConnectorError:
        # walks pooled from a small neighbourhood collide; route sequentially instead
        return _route_round(g, batch.pairs, batch.forbidden, batch.length, seed)


def build_gadgets(g: Graph, specs, ell: int, forbidden=(), seed=0, config: PipelineConfig | None = None):
    """Build many gadgets at once in three connector rounds.

    specs are (x, a, y) or (x, a, b, y) tuples (all of one kind).  Round 1
    joins a to y (or b), round 2 draws the second a-path avoiding round 1,
    round 3 draws every cross path avoiding both.
    """
    config = config or PipelineConfig()
    specs = [tuple(int(v) for v in s) for s in specs]
    if not specs:
        return []
    kinds = {len(s) for s in specs}
    if kinds - {3, 4} or len(kinds) != 1:
        raise ValueError("specs must all be (x,a,y) or all (x,a,b,y)")
    pair_kind = kinds.pop() == 4
    if ell < 3 or ell % 2 == 0:
        raise ValueError("gadget length must be odd and at least 3")
    for s in specs:
        if len(set(s)) != len(s):
            raise ValueError(f"gadget vertices {s} not distinct")
    U = set(int(v) for v in forbidden)
    for s in specs:
        if U & set(s):
            raise ValueError("gadget vertices must avoid the forbidden set")
    copies = config.gadget_copies_r
    U1 = U | {v for s in specs for v in s}
    r1 = [(s[1], s[2]) if pair_kind else (s[1], s[2]) for s in specs]
    Q1 = _connect(g, r1, U1, ell, config, child_seed(seed, "round", 1), copies)
    U2 = U1 | {v for q in Q1 for v in q[1:-1]}
    r2 = [(s[1], s[2]) if pair_kind else (s[1], q[ell - 1]) for s, q in zip(specs, Q1)]
    Q2 = _connect(g, r2, U2, ell, config, child_seed(seed, "round", 2), copies)
    U3 = U2 | {v for q in Q2 for v in q[1:-1]}
    r3 = []
    for s, u, v in zip(specs, Q1, Q2):
        r3.append((s[0], v[1]))
        r3.extend((u[i - 1], v[i]) for i in range(2, ell))
        if pair_kind:
            r3.append((u[ell - 1], s[3]))
    P = _connect(g, r3, U3, ell, config, child_seed(seed, "round", 3), copies)
    per = ell if pair_kind else ell - 1
    out = []
    for k, (s, u, v) in enumerate(zip(specs, Q1, Q2)):
        out.append(_finish_gadget(g, s, u, v, P[k * per:(k + 1) * per]))
    internals = [gd.internal for gd in out]
    seen = set()
    for I in internals:
        if seen & I:
            raise AbsorberError("gadget interiors overlap")
        seen |= I
    return out


def build_xay(g: Graph, x: int, a: int, y: int, ell: int, forbidden=(), seed=0,
              config: PipelineConfig | None = None) -> XAYGadget:
    return build_gadgets(g, [(x, a, y)], ell, forbidden, seed, config)[0]


def build_xaby(g: Graph, x: int, a: int, b: int, y: int, ell: int, forbidden=(), seed=0,
               config: PipelineConfig | None = None) -> XABYGadget:
    return build_gadgets(g, [(x, a, b, y)], ell, forbidden, seed, config)[0]


# ----------------------------------------------------------------------
# robustly matchable template

@dataclass(frozen=True)
class MatchTemplate:
    m: int
    degree: int
    edges: tuple[tuple[int, int], ...]    # (left index, right index), with multiplicity
    verification: str = ""

    # left indices: A1 = 0..2m-1, A2 = 2m..7m-1; right indices likewise for B1, B2
    @property
    def side_size(self) -> int:
        return 7 * self.m

    @property
    def A1(self) -> range:
        return range(0, 2 * self.m)

    @property
    def A2(self) -> range:
        return range(2 * self.m, 7 * self.m)

    B1 = A1
    B2 = A2

    def degrees(self) -> tuple[np.ndarray, np.ndarray]:
        e = np.array(self.edges, dtype=np.int64).reshape(-1, 2)
        return (np.bincount(e[:, 0], minlength=self.side_size),
                np.bincount(e[:, 1], minlength=self.side_size))

    def perfect_matching(self, A1_keep, B1_keep) -> list[int] | None:
        """Edge indices of a perfect matching on A1_keep ∪ A2 vs B1_keep ∪ B2."""
        left = sorted(set(A1_keep)) + list(self.A2)
        right = sorted(set(B1_keep)) + list(self.B2)
        if len(left) != len(right):
            return None
        lpos = {v: i for i, v in enumerate(left)}
        rpos = {v: i for i, v in enumerate(right)}
        first: dict[tuple[int, int], int] = {}
        for k, (i, j) in enumerate(self.edges):
            if i in lpos and j in rpos:
                first.setdefault((lpos[i], rpos[j]), k)
        if not first:
            return None if left else []
        keys = list(first)
        M = csr_matrix((np.ones(len(keys)), ([k[0] for k in keys], [k[1] for k in keys])),
                       shape=(len(left), len(right)))
        match = maximum_bipartite_matching(M, perm_type="column")
        if np.any(match < 0):
            return None
        return sorted(first[(i, int(j))] for i, j in enumerate(match))


def _template_cases(m: int, rng, samples: int):
    A1 = list(range(2 * m))
    if m <= 3:
        for k in range(m, 2 * m + 1):
            for a in itertools.combinations(A1, k):
                for b in itertools.combinations(A1, k):
                    yield a, b
        return
    for _ in range(samples):
        k = int(rng.integers(m, 2 * m + 1))
        yield (tuple(rng.choice(2 * m, k, replace=False).tolist()),
               tuple(rng.choice(2 * m, k, replace=False).tolist()))


def build_match_template(m: int, seed=0, degree: int = 103, retries: int = 20, samples: int = 1000) -> MatchTemplate:
    """Union of `degree` random perfect matchings on 7m + 7m vertices, verified.

    The robust-matching property is checked over every admissible (A1', B1')
    when m ≤ 3 and over `samples` random ones otherwise; a failing draw is
    rebuilt.
    """
    if m < 1:
        raise ValueError("m must be positive")
    if degree < 1:
        raise ValueError("degree must be positive")
    size = 7 * m
    for attempt in range(retries):
        rng = stream(seed, "template", m, degree, attempt)
        edges = []
        for _ in range(degree):
            perm = rng.permutation(size)
            edges.extend((i, int(perm[i])) for i in range(size))
        K = MatchTemplate(m, degree, tuple(edges))
        mode = "exhaustive" if m <= 3 else f"sampled-{samples}"
        if all(K.perfect_matching(a, b) is not None for a, b in _template_cases(m, rng, samples)):
            return MatchTemplate(m, degree, tuple(edges), mode)
    raise TemplateVerificationError(f"no verified template after {retries} draws")


# ----------------------------------------------------------------------
# reservoir absorbers

@dataclass(frozen=True)
class Absorber:
    kind: str                          # "general" | "bipartite"
    host: Graph
    reservoir: frozenset[int]
    x_H: int
    y_H: int
    gadgets: tuple
    vertices: frozenset[int]
    report: UniformityReport
    template: MatchTemplate | None = None
    # bipartite bookkeeping: template index -> host vertex
    left_map: tuple[int, ...] = ()
    right_map: tuple[int, ...] = ()
    chain: tuple[int, ...] = ()
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "x_H": self.x_H,
            "y_H": self.y_H,
            "reservoir": sorted(self.reservoir),
            "vertices": sorted(self.vertices),
            "gadgets": len(self.gadgets),
            "uniformity": self.report.to_dict(),
            "diagnostics": self.diagnostics,
        }


def _spaced_walk(g: Graph, root: int, avoid: set[int], count: int, rng, tries: int = 200) -> list[int] | None:
    """root = t_0, t_1, ... with each t_{k+1} at distance exactly 2 from t_k.

    New points stay off `avoid`, are not adjacent to any earlier point, and
    leave each previous point at least one free common neighbour, so short
    gadget paths between consecutive points remain available.
    """
    adj = g.adj
    tour = [root]
    near = set(adj[root]) | {root}
    while len(tour) < count:
        cur = tour[-1]
        mids = [w for w in adj[cur] if w not in avoid and w not in tour]
        step = None
        for _ in range(tries):
            if not mids:
                break
            w = mids[rng.integers(len(mids))]
            nb = adj[w]
            c = nb[rng.integers(len(nb))]
            if c in avoid or c in near:
                continue
            step = c
            break
        if step is None:
            return None
        tour.append(step)
        near |= set(adj[step]) | {step}
    return tour


def _general_chain(g, U0, r, anchor, rng, attempts: int = 20):
    """x_0, a_0, x_1, ..., a_{r-1}, x_r with x_r next to the anchor."""
    free = [v for v in range(g.n) if v not in U0]
    if len(free) < 2 * r + 1:
        raise AbsorberError("not enough free vertices for the absorber")
    if anchor is not None:
        roots = [u for u in g.adj[anchor] if u not in U0]
        if not roots:
            raise AbsorberError("anchor has no free neighbour")
    else:
        roots = free
    for _ in range(attempts):
        root = int(roots[rng.integers(len(roots))])
        tour = _spaced_walk(g, root, U0, 2 * r + 1, rng)
        if tour is not None:
            return [int(v) for v in tour[::-1]]
    raise AbsorberError("could not lay out the absorber chain")


def _balanced_sample(g, U0, sizes, rng):
    parts = []
    for s in (0, 1):
        pool = [v for v in range(g.n) if g.side[v] == s and v not in U0]
        parts.append(pool)
    out = []
    for s, ks in enumerate(sizes):
        pool = parts[s]
        total = sum(ks)
        if len(pool) < total:
            raise AbsorberError("not enough free vertices on one side")
        chosen = rng.choice(len(pool), total, replace=False).tolist()
        chunks, start = [], 0
        for k in ks:
            chunks.append([pool[i] for i in chosen[start:start + k]])
            start += k
        out.append(chunks)
    return out


def build_absorber(g: Graph, kind: str, config: PipelineConfig | None = None, forbidden=(), seed=0,
                   anchor: int | None = None) -> Absorber:
    """Reservoir R plus gadget chain; `anchor` (if given) becomes a neighbour of y_H."""
    config = config or PipelineConfig()
    if kind not in ("general", "bipartite"):
        raise ValueError("kind must be 'general' or 'bipartite'")
    U0 = set(int(v) for v in forbidden)
    last = None
    for attempt in range(config.absorber_retries):
        s = child_seed(seed, "absorber", attempt)
        try:
            if kind == "general":
                return _build_general(g, config, U0, s, anchor)
            return _build_bipartite(g, config, U0, s, anchor)
        except AbsorberError as exc:
            last = exc
        except RuntimeError as exc:      # connector failures
            last = exc
    raise AbsorberError(f"absorber construction failed after {config.absorber_retries} attempts: {last}")


def _build_general(g, config, U0, seed, anchor):
    rng = stream(seed, "general-absorber")
    r = min(config.max_gadgets, max(1, round(config.p_reservoir * g.n)))
    chain = _general_chain(g, U0, r, anchor, rng)
    X = chain[0::2]
    R = chain[1::2]
    specs = [(X[i], R[i], X[i + 1]) for i in range(r)]
    gadgets = build_gadgets(g, specs, config.gadget_ell, U0, child_seed(seed, "gadgets"), config)
    V = set(chain)
    for gd in gadgets:
        V |= gd.vertices
    if V & U0:
        raise AbsorberError("absorber meets the forbidden set")
    rep = uniformity(g, sorted(V))
    diag = {"gadgets": r, "size": len(V), "alpha_target": config.alpha_target,
            "alpha_exceeded": rep.alpha_observed > config.alpha_target}
    return Absorber("general", g, frozenset(R), X[0], X[-1], tuple(gadgets), frozenset(V), rep,
                    chain=tuple(chain), diagnostics=diag)


def _build_bipartite(g, config, U0, seed, anchor):
    if g.side is None:
        raise ValueError("bipartite absorber needs a bipartition")
    rng = stream(seed, "bipartite-absorber")
    m0 = config.template_m0
    K = build_match_template(m0, child_seed(seed, "template"), config.template_degree)
    m1 = len(K.edges)
    if m1 % 2 == 0:
        raise AbsorberError("template edge count must be odd")
    mX = (m1 + 1) // 2
    avoid = set(U0)
    y_last = None
    if anchor is not None:
        cand = [u for u in g.adj[anchor] if u not in U0]
        if not cand:
            raise AbsorberError("anchor has no free neighbour")
        y_last = int(cand[rng.integers(len(cand))])
        avoid.add(y_last)
    (A1, A2, X), (B1, B2, Y) = _balanced_sample(
        g, avoid, [(2 * m0, 5 * m0, mX), (2 * m0, 5 * m0, mX - (y_last is not None))], rng)
    if y_last is not None:
        Y = Y + [y_last]
    side_ok = all(g.side[v] == 0 for v in A1 + A2 + X) and all(g.side[v] == 1 for v in B1 + B2 + Y)
    if not side_ok:
        raise AbsorberError("template sets on the wrong side")
    left = A1 + A2
    right = B1 + B2
    specs = []
    for i, (ti, tj) in enumerate(K.edges, start=1):
        specs.append((X[i // 2], left[ti], right[tj], Y[(i + 1) // 2 - 1]))
    # x, a from V0 and b, y from V1: gadget endpoints repeat across gadgets by design
    gadgets = _build_pair_gadgets(g, specs, config, U0, child_seed(seed, "gadgets"))
    V = set(left) | set(right) | set(X) | set(Y)
    for gd in gadgets:
        V |= gd.vertices
    if V & U0:
        raise AbsorberError("absorber meets the forbidden set")
    R = frozenset(A1) | frozenset(B1)
    rep = uniformity(g, sorted(V))
    ones = sum(int(g.side[v]) for v in V)
    if 2 * ones != len(V):
        raise AbsorberError("absorber vertex set is not balanced")
    diag = {"gadgets": m1, "template_m0": m0, "template_degree": K.degree, "size": len(V),
            "alpha_target": config.alpha_target, "alpha_exceeded": rep.alpha_observed > config.alpha_target}
    return Absorber("bipartite", g, R, X[0], Y[-1], tuple(gadgets), frozenset(V), rep, K,
                    tuple(left), tuple(right), diagnostics=diag)


def _build_pair_gadgets(g, specs, config, U0, seed):
    """Like build_gadgets, but endpoint vertices may recur across gadgets."""
    ell = config.gadget_ell
    copies = config.gadget_copies_r
    U1 = set(U0) | {v for s in specs for v in s}
    r1 = [(s[1], s[2]) for s in specs]
    Q1 = _connect(g, r1, U1, ell, config, child_seed(seed, "round", 1), copies)
    U2 = U1 | {v for q in Q1 for v in q[1:-1]}
    Q2 = _connect(g, r1, U2, ell, config, child_seed(seed, "round", 2), copies)
    U3 = U2 | {v for q in Q2 for v in q[1:-1]}
    r3 = []
    for s, u, v in zip(specs, Q1, Q2):
        r3.append((s[0], v[1]))
        r3.extend((u[i - 1], v[i]) for i in range(2, ell))
        r3.append((u[ell - 1], s[3]))
    P = _connect(g, r3, U3, ell, config, child_seed(seed, "round", 3), copies)
    out = []
    seen = set()
    for k, (s, u, v) in enumerate(zip(specs, Q1, Q2)):
        gd = _finish_gadget(g, s, u, v, P[k * ell:(k + 1) * ell])
        if seen & gd.internal:
            raise AbsorberError("gadget interiors overlap")
        seen |= gd.internal
        out.append(gd)
    return out


# ----------------------------------------------------------------------
# queries

def verify_absorb_path(g: Graph, path, expected: set[int], x: int, y: int) -> list[str]:
    bad = []
    if not path or path[0] != x or path[-1] != y:
        bad.append("wrong endpoints")
    if len(set(path)) != len(path):
        bad.append("repeated vertex")
    if set(path) != expected:
        bad.append("vertex set differs from V(H) minus R'")
    for a, b in zip(path, path[1:]):
        if not g.has_edge(a, b):
            bad.append(f"non-edge {a}-{b}")
            break
    return bad


def absorb(H: Absorber, R_prime) -> list[int]:
    """x_H → y_H path on exactly V(H) ∖ R'."""
    Rp = set(int(v) for v in R_prime)
    if not Rp <= H.reservoir:
        raise ValueError("R' must be a subset of the reservoir")
    g = H.host
    if H.kind == "general":
        path: list[int] = []
        for gd in H.gadgets:
            _glue(path, gd.path(gd.a not in Rp))
    else:
        if 2 * len(Rp) > len(H.reservoir):
            raise ValueError("R' larger than half the reservoir")
        if 2 * sum(int(g.side[v]) for v in Rp) != len(Rp):
            raise ValueError("R' is not balanced")
        K = H.template
        A1_keep = [i for i in K.A1 if H.left_map[i] not in Rp]
        B1_keep = [j for j in K.B1 if H.right_map[j] not in Rp]
        I = K.perfect_matching(A1_keep, B1_keep)
        if I is None:
            raise TemplateDefect("no perfect matching for the remaining template vertices")
        keep = set(I)
        path = []
        for k, gd in enumerate(H.gadgets):
            seg = gd.path(k in keep)
            _glue(path, seg if k % 2 == 0 else seg[::-1])
    bad = verify_absorb_path(g, path, set(H.vertices) - Rp, H.x_H, H.y_H)
    if bad:
        raise AssertionError("absorber path invalid: " + "; ".join(bad))
    return path
