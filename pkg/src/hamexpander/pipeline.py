"""End-to-end assembly: spanning path systems for prescribed endpoint pairs,
the Hamilton cycle dispatcher, cycle verification and exact small-n solvers."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .absorber import AbsorberError, absorb, build_absorber
from .config import PipelineConfig
from .connector import ConnectorError, PairBatch, connect
from .cover import CoverError, clean_up_forest, linear_forest, max_cut_local_search, merge_paths
from .graph import Graph, far_from_bipartite, spectral_eps_lower, uniformity
from .reservoir import ConnectThroughFailure, Reservoir, connect_through
from .rng import child_seed, stream
from .spectral import normalized_adjacency


class StageFailure(RuntimeError):
    def __init__(self, stage: str, message: str, diagnostics: dict | None = None):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.diagnostics = diagnostics or {}


class TimeLimitExceeded(StageFailure):
    pass


class OracleSizeError(ValueError):
    pass


@dataclass(frozen=True)
class HamiltonResult:
    outcome: str                              # "cycle" | "paths" | "failure"
    cycle: tuple[int, ...] | None = None
    paths: tuple[tuple[int, ...], ...] | None = None
    diagnostics: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict, compare=False)

    def to_dict(self, timings: bool = False) -> dict:
        out = {"outcome": self.outcome,
               "cycle": None if self.cycle is None else list(self.cycle),
               "paths": None if self.paths is None else [list(p) for p in self.paths],
               "diagnostics": self.diagnostics}
        if timings:
            out["timings"] = self.timings
        return out

    def canonical_json(self) -> str:
        """Seed-determined serialisation (wall-clock timings left out)."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


# ----------------------------------------------------------------------
# verification

def verify_hamilton_cycle(g: Graph, cycle) -> bool:
    cycle = [int(v) for v in cycle]
    if g.n < 3 or len(cycle) != g.n or len(set(cycle)) != g.n:
        return False
    if any(not 0 <= v < g.n for v in cycle):
        return False
    return all(g.has_edge(cycle[i], cycle[(i + 1) % g.n]) for i in range(g.n))


def verify_path_system(g: Graph, pairs, paths) -> list[str]:
    """Violations of: a_i→b_i paths, internally disjoint, interiors = V ∖ endpoints."""
    bad = []
    if len(pairs) != len(paths):
        return ["path count differs from pair count"]
    ends = {int(v) for pr in pairs for v in pr}
    interior: set[int] = set()
    for i, ((a, b), p) in enumerate(zip(pairs, paths)):
        p = [int(v) for v in p]
        if len(p) < 2 or p[0] != a or p[-1] != b:
            bad.append(f"path {i}: wrong endpoints")
            continue
        if len(set(p)) != len(p):
            bad.append(f"path {i}: repeated vertex")
        for u, v in zip(p, p[1:]):
            if not g.has_edge(u, v):
                bad.append(f"path {i}: non-edge {u}-{v}")
                break
        for v in p[1:-1]:
            if v in ends:
                bad.append(f"path {i}: passes through endpoint {v}")
            if v in interior:
                bad.append(f"path {i}: shares internal vertex {v}")
            interior.add(v)
    missing = set(range(g.n)) - ends - interior
    if missing:
        bad.append(f"{len(missing)} vertices uncovered")
    return bad


# ----------------------------------------------------------------------
# exact solvers

def exact_oracle(g: Graph, max_n: int = 22) -> tuple[bool, list[int] | None]:
    """Held–Karp over subsets containing vertex 0.

    reach[S] is a bitmask of the v ∈ S such that some path starts at 0, visits
    exactly S and ends at v.  Layers of equal popcount are filled in bulk.
    """
    n = g.n
    if n > max_n:
        raise OracleSizeError(f"exact oracle limited to n <= {max_n}")
    if n < 3:
        return False, None
    nb = np.zeros(n, dtype=np.int64)
    for v in range(n):
        for u in g.adj[v]:
            nb[v] |= 1 << u
    size = 1 << n
    reach = np.zeros(size, dtype=np.int64)
    reach[1] = 1
    masks = np.arange(1, size, 2, dtype=np.int64)         # those containing vertex 0
    pop = np.zeros(len(masks), dtype=np.int64)
    for v in range(n):
        pop += (masks >> v) & 1
    for k in range(2, n + 1):
        layer = masks[pop == k]
        for v in range(1, n):
            bit = np.int64(1 << v)
            sel = layer[(layer & bit) != 0]
            if not len(sel):
                continue
            hit = (reach[sel ^ bit] & nb[v]) != 0
            reach[sel[hit]] |= bit
    full = size - 1
    ends = [v for v in range(1, n) if (reach[full] >> v) & 1 and (nb[v] & 1)]
    if not ends:
        return False, None
    # walk back from a closing end
    path = [ends[0]]
    S = full
    while len(path) < n:
        v = path[-1]
        S_prev = S ^ (1 << v)
        cand = [u for u in range(n) if (reach[S_prev] >> u) & 1 and (nb[v] >> u) & 1]
        path.append(cand[0])
        S = S_prev
    cycle = path[::-1]
    if not verify_hamilton_cycle(g, cycle):
        raise AssertionError("oracle witness failed verification")
    return True, cycle


def exact_search(g: Graph, node_budget: int = 2_000_000) -> tuple[bool | None, list[int] | None]:
    """Backtracking with forced-move pruning; (None, None) when the budget runs out."""
    n = g.n
    if n < 3:
        return False, None
    adj = [set(a) for a in g.adj]
    if any(len(a) < 2 for a in adj) or not g.is_connected():
        return False, None
    on = [False] * n
    path = [0]
    on[0] = True
    nodes = 0

    def free_deg(u):
        return sum(1 for w in adj[u] if not on[w] or w == 0)

    def dead(end):
        # an unvisited vertex with fewer than two usable neighbours is fatal
        for u in range(n):
            if on[u]:
                continue
            usable = sum(1 for w in adj[u] if not on[w] or w == end or w == 0)
            if usable < 2:
                return True
        return False

    def go():
        nonlocal nodes
        nodes += 1
        if nodes > node_budget:
            raise TimeoutError
        v = path[-1]
        if len(path) == n:
            return 0 in adj[v]
        cand = [u for u in adj[v] if not on[u]]
        cand.sort(key=free_deg)
        for u in cand:
            path.append(u)
            on[u] = True
            if not dead(u) and go():
                return True
            on[u] = False
            path.pop()
        return False

    try:
        found = go()
    except TimeoutError:
        return None, None
    if not found:
        return False, None
    if not verify_hamilton_cycle(g, path):
        raise AssertionError("search witness failed verification")
    return True, list(path)


# ----------------------------------------------------------------------
# spanning path systems

class _Clock:
    def __init__(self, limit: float):
        self.t0 = time.perf_counter()
        self.limit = limit
        self.marks: dict[str, float] = {}
        self._last = self.t0

    def check(self, stage: str):
        now = time.perf_counter()
        self.marks[stage] = self.marks.get(stage, 0.0) + now - self._last
        self._last = now
        if now - self.t0 > self.limit:
            raise TimeLimitExceeded(stage, f"time limit {self.limit}s exceeded")


def _orient(g: Graph, pairs):
    if g.side is None:
        return [tuple(p) for p in pairs], [False] * len(pairs)
    out, flip = [], []
    for a, b in pairs:
        if g.side[a] == g.side[b]:
            raise ValueError(f"pair ({a},{b}) does not cross the bipartition")
        f = bool(g.side[a] == 1)
        out.append((b, a) if f else (a, b))
        flip.append(f)
    return out, flip


def _attempt(g, pairs, regime, config, seed, clock, bypass_absorber):
    diag: dict = {}
    U = {v for pr in pairs for v in pr}
    a1, b1 = pairs[0]
    kind = "bipartite" if regime == "bipartite" else "general"
    if bypass_absorber:
        H = None
        VH: set[int] = set()
        R: set[int] = set()
    else:
        H = build_absorber(g, kind, config, U, child_seed(seed, "absorber"), anchor=a1)
        VH = set(H.vertices)
        R = set(H.reservoir)
        diag["absorber"] = H.to_dict()
        diag["absorber"].pop("vertices")
        diag["absorber"].pop("reservoir")
    clock.check("absorber")

    paths: dict[int, list[int]] = {}
    used_R: set[int] = set()
    rest = list(range(1, len(pairs)))
    if rest and kind == "general" and R:
        res = Reservoir(frozenset(R), g, None, config.reservoir_ell, frozenset(U), config.p_reservoir)
        try:
            got = connect_through(res, [pairs[i] for i in rest], seed=child_seed(seed, "through"),
                                  restarts=config.reservoir_retries)
            for i, p in zip(rest, got):
                paths[i] = p
                used_R.update(p[1:-1])
            rest = []
            diag["hookups"] = "reservoir"
        except ConnectThroughFailure as exc:
            diag["reservoir_failure"] = len(exc.failed_pairs)
    if rest:
        forbidden = U | VH
        batch = PairBatch.make(g, [pairs[i] for i in rest], forbidden, config.ell)
        res = connect(g, batch, config, child_seed(seed, "hookups"))
        for i, p in zip(rest, res.paths):
            paths[i] = p
        diag["hookups"] = "connector"
    clock.check("hookups")

    interiors = {v for p in paths.values() for v in p[1:-1]}
    V = set(range(g.n)) - U - VH - interiors
    starts = sorted(u for u in g.adj[b1] if u in V)
    if not starts:
        raise StageFailure("cover", "b1 has no neighbour among the leftover vertices")
    rng = stream(seed, "start")
    u1 = starts[int(rng.integers(len(starts)))]
    forest = linear_forest(g, V, config.forest_parts, child_seed(seed, "forest"))
    diag["forest"] = forest.report
    clock.check("forest")
    x_H = H.x_H if H is not None else a1
    optional = (R - used_R) if kind == "general" else set()
    try:
        merged, used_opt = merge_paths(g, forest.paths, u1, x_H if H is not None else None,
                                       optional, config.rotation_budget, child_seed(seed, "merge"))
    except CoverError as exc:
        raise StageFailure("merge", str(exc), getattr(exc, "diagnostics", {}))
    if H is None and not g.has_edge(merged[-1], a1):
        raise StageFailure("merge", "merged path does not close at a1")
    clock.check("merge")
    R_prime = used_R | used_opt
    diag["absorbed"] = len(R_prime)
    if H is not None:
        core = absorb(H, R_prime)                     # x_H → y_H
        P1 = [a1] + core[::-1] + merged[::-1] + [b1]
    else:
        P1 = [a1] + merged[::-1] + [b1]
    paths[0] = P1
    clock.check("absorb")
    return [paths[i] for i in range(len(pairs))], diag


def robust_spanning_paths(g: Graph, pairs, regime: str = "far-from-bipartite", config: PipelineConfig | None = None,
                          seed=0, bypass_absorber: bool = False, _clock: _Clock | None = None) -> HamiltonResult:
    """Internally disjoint a_i→b_i paths whose interiors cover V(g) ∖ endpoints.

    Pair 1 carries the absorber: a1 → y_H … x_H → (merged forest) → b1.
    The remaining pairs are joined through the reservoir (general regime) or
    by the connector, and reservoir vertices consumed along the way are
    absorbed at the end.
    """
    config = config or PipelineConfig()
    if regime not in ("bipartite", "far-from-bipartite"):
        raise ValueError("regime must be 'bipartite' or 'far-from-bipartite'")
    if regime == "bipartite" and g.side is None:
        raise ValueError("bipartite regime needs a bipartition")
    if not pairs:
        raise ValueError("need at least one pair")
    pairs_in = [(int(a), int(b)) for a, b in pairs]
    ends = [v for pr in pairs_in for v in pr]
    if len(set(ends)) != len(ends):
        raise ValueError("pair endpoints must be distinct")
    work, flip = _orient(g, pairs_in)
    clock = _clock or _Clock(config.time_limit)
    rep = uniformity(g, ends)
    base = {"regime": regime, "pairs": len(work), "endpoint_uniformity": rep.to_dict(),
            "alpha_exceeded": rep.alpha_observed > config.alpha_target}
    failures = []
    for attempt in range(config.pipeline_retries):
        s = child_seed(seed, "spanning", attempt)
        try:
            paths, diag = _attempt(g, work, regime, config, s, clock, bypass_absorber)
        except TimeLimitExceeded as exc:
            failures.append(str(exc))
            break
        except (StageFailure, AbsorberError, ConnectorError, CoverError, ValueError) as exc:
            failures.append(f"{type(exc).__name__}: {exc}")
            continue
        paths = [p[::-1] if f else p for p, f in zip(paths, flip)]
        bad = verify_path_system(g, pairs_in, paths)
        if bad:
            raise AssertionError("path system invalid: " + "; ".join(bad[:5]))
        return HamiltonResult("paths", None, tuple(tuple(int(v) for v in p) for p in paths),
                              {**base, **diag, "attempts": attempt + 1, "failures": failures}, dict(clock.marks))
    return HamiltonResult("failure", None, None, {**base, "attempts": len(failures), "failures": failures},
                          dict(clock.marks))


# ----------------------------------------------------------------------
# dispatcher

def _lambda_min(g: Graph) -> float:
    N = normalized_adjacency(g)
    if g.n <= 2048:
        return float(np.linalg.eigvalsh(N.toarray())[0])
    v0 = np.ones(g.n) / np.sqrt(g.n)
    try:
        val = eigsh(N, k=1, which="SA", tol=1e-8, v0=v0, return_eigenvectors=False)
    except ArpackNoConvergence as exc:
        val = exc.eigenvalues
    # ARPACK keeps state between calls; the last digits drift, so report a rounded value
    return round(float(np.min(val)), 9)


def regime_check(g: Graph, config: PipelineConfig, seed=0) -> dict:
    """far | close with the evidence used; the spectral bound decides first."""
    if g.side is not None or g.two_colouring() is not None:
        return {"regime": "close", "source": "bipartite", "eps": 0.0, "eps_lower": 0.0}
    lower = spectral_eps_lower(g, _lambda_min(g)) if g.is_connected() else 0.0
    if lower >= config.regime_epsilon:
        return {"regime": "far", "source": "spectral", "eps_lower": lower}
    rep = far_from_bipartite(g, mode="local-search", seed=seed, spectral=False)
    if rep.eps < config.regime_epsilon:
        return {"regime": "close", "source": "local-search", "eps": rep.eps, "eps_lower": lower}
    return {"regime": "far", "source": "inconclusive", "eps": rep.eps, "eps_lower": lower}


def _is_cycle_graph(g: Graph) -> bool:
    return g.n >= 3 and g.d_min == 2 and g.d_max == 2 and g.is_connected()


def _walk_cycle(g: Graph) -> list[int]:
    out = [0, g.adj[0][0]]
    while len(out) < g.n:
        a, b = g.adj[out[-1]]
        out.append(a if a != out[-2] else b)
    return out


def _close_case(g: Graph, config: PipelineConfig, seed, clock, diag):
    if g.side is not None:
        A = np.flatnonzero(g.side == 0)
        B = np.flatnonzero(g.side == 1)
    else:
        col = g.two_colouring()
        if col is not None:
            A, B = np.flatnonzero(col == 0), np.flatnonzero(col == 1)
        else:
            A, B = max_cut_local_search(g, child_seed(seed, "maxcut"))
    if len(A) > len(B):
        A, B = B, A
    side = np.zeros(g.n, dtype=np.int8)
    side[B] = 1
    d = g.d_max
    threshold = 0.5 * d ** (1.0 - config.inside_degree_exponent)
    own = np.array([sum(1 for u in g.adj[v] if side[u] == side[v]) for v in range(g.n)])
    X = np.flatnonzero(own >= threshold).tolist() if np.any(own) else []
    diag.update({"cut_sizes": [int(len(A)), int(len(B))], "X": len(X)})
    forest = clean_up_forest(g, A, B, X, child_seed(seed, "clean-up"), d)
    F = [list(p) for p in forest.paths]
    if not F:
        cross = [(int(a), int(b)) for a in A.tolist() for b in g.adj[a] if side[b] == 1]
        if not cross:
            raise StageFailure("clean-up", "no edge between the sides")
        e = cross[int(stream(seed, "edge").integers(len(cross)))]
        F = [list(e)]
        diag["single_edge_forest"] = True
    # orient each forest path x_i ∈ A → y_i ∈ B
    F = [p if side[p[0]] == 0 else p[::-1] for p in F]
    internal = {v for p in F for v in p[1:-1]}
    keep = np.array([v for v in range(g.n) if v not in internal], dtype=np.int64)
    e = g.edges()
    cross_e = e[side[e[:, 0]] != side[e[:, 1]]]
    mask = np.isin(cross_e[:, 0], keep) & np.isin(cross_e[:, 1], keep)
    new_id = np.full(g.n, -1, dtype=np.int64)
    new_id[keep] = np.arange(len(keep))
    Gp = Graph.from_edges(len(keep), new_id[cross_e[mask]], side=side[keep], check=False)
    k = len(F)
    pairs = [(int(new_id[F[i][0]]), int(new_id[F[(i + 1) % k][-1]])) for i in range(k)]
    diag["forest_paths"] = k
    res = robust_spanning_paths(Gp, pairs, "bipartite", config, child_seed(seed, "bipartite"), _clock=clock)
    diag["spanning"] = res.diagnostics
    if res.outcome != "paths":
        return None
    cycle: list[int] = []
    for i in range(k):
        Q = [int(keep[v]) for v in res.paths[i]]            # x_i → y_{i+1}
        cycle.extend(Q[:-1])
        cycle.extend(F[(i + 1) % k][::-1][:-1])              # y_{i+1} → x_{i+1}
    return cycle


def hamilton_cycle(g: Graph, config: PipelineConfig | None = None, seed=0) -> HamiltonResult:
    """Verified Hamilton cycle, or an abstention with diagnostics."""
    config = config or PipelineConfig()
    clock = _Clock(config.time_limit)
    diag: dict = {"n": g.n}

    def done(cycle, route):
        diag["route"] = route
        if cycle is None:
            return HamiltonResult("failure", None, None, diag, dict(clock.marks))
        cycle = [int(v) for v in cycle]
        if not verify_hamilton_cycle(g, cycle):
            raise AssertionError("pipeline produced an invalid Hamilton cycle")
        return HamiltonResult("cycle", tuple(cycle), None, diag, dict(clock.marks))

    if g.n < 3 or g.m == 0 or not g.is_connected():
        diag["reason"] = "too small or disconnected"
        return done(None, "trivial")
    if _is_cycle_graph(g):
        return done(_walk_cycle(g), "two-regular")
    if g.n <= config.exact_max_n:
        ok, cyc = exact_oracle(g, config.exact_max_n)
        diag["oracle"] = ok
        return done(cyc, "exact-oracle")
    if g.n <= config.search_max_n:
        ok, cyc = exact_search(g, config.search_node_budget)
        diag["search"] = "budget" if ok is None else ok
        if ok is not None:
            return done(cyc, "exact-search")
    try:
        reg = regime_check(g, config, child_seed(seed, "regime"))
        diag["regime"] = reg
        clock.check("regime")
        if reg["regime"] == "far":
            e = g.edges()
            a1, b1 = (int(v) for v in e[int(stream(seed, "edge").integers(len(e)))])
            res = robust_spanning_paths(g, [(a1, b1)], "far-from-bipartite", config,
                                        child_seed(seed, "far"), _clock=clock)
            diag["spanning"] = res.diagnostics
            return done(list(res.paths[0]) if res.outcome == "paths" else None, "far")
        return done(_close_case(g, config, seed, clock, diag), "close")
    except TimeLimitExceeded as exc:
        diag["failure"] = str(exc)
        return done(None, "timeout")
    except (StageFailure, AbsorberError, ConnectorError, CoverError) as exc:
        diag["failure"] = f"{type(exc).__name__}: {exc}"
        return done(None, "failure")


# ----------------------------------------------------------------------
# small path systems and coset gluing

def exact_path_system(g: Graph, pairs, node_budget: int = 2_000_000) -> list[list[int]] | None:
    """Backtracking search for a spanning path system on a small graph.

    Returns None when none exists; raises TimeoutError past the node budget.
    """
    pairs = [(int(a), int(b)) for a, b in pairs]
    ends = {v for pr in pairs for v in pr}
    adj = g.adj
    on = [False] * g.n
    for v in ends:
        on[v] = True
    left = g.n - len(ends)
    out: list[list[int]] = []
    nodes = 0

    def extend(i, path):
        nonlocal nodes, left
        nodes += 1
        if nodes > node_budget:
            raise TimeoutError
        v = path[-1]
        b = pairs[i][1]
        if b in adj[v]:
            out.append(path + [b])
            if i + 1 == len(pairs):
                if left == 0:
                    return True
            elif extend(i + 1, [pairs[i + 1][0]]):
                return True
            out.pop()
        for u in adj[v]:
            if on[u]:
                continue
            on[u] = True
            left -= 1
            path.append(u)
            if extend(i, path):
                return True
            path.pop()
            on[u] = False
            left += 1
        return False

    return [list(p) for p in out] if pairs and extend(0, [pairs[0][0]]) else None


def glue_cycle(g: Graph, plan, config: PipelineConfig | None = None, seed=0) -> HamiltonResult:
    """Join per-coset spanning paths along the coset tour into one cycle."""
    config = config or PipelineConfig()
    per_coset = []
    for i, (coset, pairs) in enumerate(zip(plan.cosets, plan.pairs)):
        sub, old = g.induced(coset)
        new_id = {int(v): j for j, v in enumerate(old.tolist())}
        local = [(new_id[a], new_id[b]) for a, b in pairs]
        if sub.n <= config.exact_max_n:
            try:
                found = exact_path_system(sub, local, config.search_node_budget)
            except TimeoutError:
                found = None
        else:
            regime = "bipartite" if plan.case == 2 and sub.two_colouring() is not None else "far-from-bipartite"
            if regime == "bipartite" and sub.side is None:
                sub = sub.with_side(sub.two_colouring())
            res = robust_spanning_paths(sub, local, regime, config, child_seed(seed, "coset", i))
            found = [list(p) for p in res.paths] if res.outcome == "paths" else None
        if found is None:
            return HamiltonResult("failure", None, None, {"route": "coset-glue", "failed_coset": i})
        per_coset.append([[int(old[v]) for v in p] for p in found])
    if len(plan.cosets) == 1:
        cycle = per_coset[0][0]
    else:
        cursor = [0] * len(plan.cosets)
        cycle = []
        for c in plan.tour[:-1]:
            lst = per_coset[c]
            j = cursor[c]
            seg = list(lst[j])
            j += 1
            # bipartite variant: a pair split at z continues with the next path
            while plan.case == 2 and j < len(lst) and lst[j][0] == seg[-1]:
                seg.extend(lst[j][1:])
                j += 1
            cursor[c] = j
            cycle.extend(seg)
    diag = {"route": "coset-glue", "cosets": len(plan.cosets), "tour": list(plan.tour)}
    if not verify_hamilton_cycle(g, cycle):
        raise AssertionError("glued cycle failed verification")
    return HamiltonResult("cycle", tuple(int(v) for v in cycle), None, diag)
