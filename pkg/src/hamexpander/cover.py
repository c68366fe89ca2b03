"""Linear forests: layered-matching covers, the greedy maximal-path forest,
local-search max cut, the balancing clean-up forest, and a rotation-extension
merge that strings forest paths into one long path."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .graph import Graph
from .rng import stream


class CoverError(RuntimeError):
    pass


class CleanUpPreconditionError(ValueError):
    pass


@dataclass
class LinearForest:
    paths: list[list[int]]
    report: dict = field(default_factory=dict)

    @property
    def covered(self) -> set[int]:
        return {v for p in self.paths for v in p}

    @property
    def endpoints(self) -> list[int]:
        """Endpoint multiset: a singleton path contributes its vertex twice."""
        out = []
        for p in self.paths:
            out.extend((p[0], p[-1]))
        return out

    @property
    def edge_count(self) -> int:
        return sum(len(p) - 1 for p in self.paths)

    @property
    def internal(self) -> set[int]:
        return {v for p in self.paths for v in p[1:-1]}

    def verify(self, g: Graph) -> list[str]:
        bad = []
        seen = set()
        for i, p in enumerate(self.paths):
            if not p:
                bad.append(f"path {i} is empty")
            for v in p:
                if v in seen:
                    bad.append(f"vertex {v} repeated")
                seen.add(v)
            for u, v in zip(p, p[1:]):
                if not g.has_edge(u, v):
                    bad.append(f"path {i}: non-edge {u}-{v}")
        return bad

    def to_list(self) -> list[list[int]]:
        return [list(map(int, p)) for p in self.paths]


def _paths_from_degree2(n_vertices: list[int], nbrs: dict[int, list[int]]) -> list[list[int]]:
    """Components of a max-degree-2 acyclic graph, as vertex sequences."""
    seen = set()
    out = []
    for v in n_vertices:
        if v in seen or len(nbrs.get(v, ())) == 2:
            continue
        path = [v]
        seen.add(v)
        prev, cur = None, v
        while True:
            nxt = [u for u in nbrs.get(cur, ()) if u != prev]
            if not nxt:
                break
            prev, cur = cur, nxt[0]
            path.append(cur)
            seen.add(cur)
        out.append(path)
    if len(seen) != len(n_vertices):
        raise CoverError("forest union contains a cycle")
    return out


# ----------------------------------------------------------------------
# layered matchings

def _layer_matching(g: Graph, left: np.ndarray, right: np.ndarray) -> list[tuple[int, int]]:
    pos = np.full(g.n, -1, dtype=np.int64)
    pos[right] = np.arange(len(right))
    rows, cols = [], []
    for i, v in enumerate(left.tolist()):
        nb = g.neighbors(v)
        j = pos[nb]
        j = j[j >= 0]
        rows.extend([i] * len(j))
        cols.extend(j.tolist())
    if not rows:
        return []
    B = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(left), len(right)))
    match = maximum_bipartite_matching(B, perm_type="column")
    return [(int(left[i]), int(right[j])) for i, j in enumerate(match) if j >= 0]


def linear_forest(g: Graph, V, t: int, seed=0) -> LinearForest:
    """Random t-part partition of V, maximum matchings between consecutive parts.

    The union of the matchings is a linear forest (each vertex meets at most
    one matching edge on either side and parts are layered).  Vertices of V
    left untouched become singleton paths.  The report records |Y| (vertices
    of forest degree below 2) and the worst count of such vertices in any
    neighbourhood.
    """
    if t < 2:
        raise ValueError("need at least two parts")
    V = np.asarray(sorted(int(v) for v in V), dtype=np.int64)
    rng = stream(seed, "linear-forest", t)
    perm = rng.permutation(V)
    parts = np.array_split(perm, t)
    nbrs: dict[int, list[int]] = {}
    for j in range(t - 1):
        # shuffle so ties in the matching are broken at random
        left = rng.permutation(parts[j])
        right = rng.permutation(parts[j + 1])
        for u, v in _layer_matching(g, left, right):
            nbrs.setdefault(u, []).append(v)
            nbrs.setdefault(v, []).append(u)
    paths = _paths_from_degree2(V.tolist(), nbrs)
    low = np.zeros(g.n, dtype=np.float64)
    for v in V.tolist():
        if len(nbrs.get(v, ())) < 2:
            low[v] = 1.0
    per_nbhd = g.csr() @ low if len(V) else np.zeros(g.n)
    report = {
        "parts": t,
        "size": int(len(V)),
        "paths": len(paths),
        "low_degree": int(low.sum()),
        "max_low_in_neighbourhood": int(per_nbhd.max()) if g.n else 0,
    }
    return LinearForest(paths, report)


# ----------------------------------------------------------------------
# greedy maximal-path forest

def large_linear_forest(g: Graph, Delta: int) -> LinearForest:
    """Repeatedly take a maximal path and delete every edge touching it.

    A path grown forward from v0 until its end has no fresh neighbour loses at
    most kΔ edges for its k edges, so the forest keeps at least e(g)/Δ edges.
    """
    if g.m and Delta < g.d_max:
        raise ValueError("Delta is below the maximum degree")
    alive = [set(nb) for nb in g.adj]
    deg = [len(s) for s in alive]
    paths = []
    order = sorted(range(g.n), key=lambda v: (deg[v], v))
    for v0 in order:
        if not alive[v0]:
            continue
        path = [v0]
        on = {v0}
        cur = v0
        while True:
            fresh = [u for u in alive[cur] if u not in on]
            if not fresh:
                break
            cur = min(fresh, key=lambda u: (len(alive[u]), u))
            path.append(cur)
            on.add(cur)
        for v in path:
            for u in alive[v]:
                alive[u].discard(v)
            alive[v] = set()
        paths.append(path)
    forest = LinearForest(paths, {"delta": Delta})
    if forest.edge_count * max(Delta, 1) < g.m:
        raise AssertionError("maximal-path forest below e/Delta")
    return forest


# ----------------------------------------------------------------------
# max cut by local search

def _bfs_colouring(g: Graph) -> np.ndarray:
    colour = np.full(g.n, -1, dtype=np.int8)
    adj = g.adj
    for root in range(g.n):
        if colour[root] >= 0:
            continue
        colour[root] = 0
        queue = [root]
        for v in queue:
            for u in adj[v]:
                if colour[u] < 0:
                    colour[u] = 1 - colour[v]
                    queue.append(u)
    return colour


def max_cut_local_search(g: Graph, seed=0, max_flips: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Best-improvement flips from a BFS 2-colouring; ties broken at random.

    Stops when no flip helps, so every vertex has at least as many
    neighbours across as on its own side (the flip cap is 50n).
    """
    side = _bfs_colouring(g).astype(np.int64)
    if g.n == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    rng = stream(seed, "max-cut")
    A = g.csr()
    own = np.asarray(A @ side, dtype=np.int64)       # neighbours on side 1
    own = np.where(side == 1, own, g.degrees - own)  # neighbours on own side
    cap = 50 * g.n if max_flips is None else max_flips
    for _ in range(cap):
        gain = 2 * own - g.degrees
        best = int(gain.max())
        if best <= 0:
            break
        ties = np.flatnonzero(gain == best)
        v = int(ties[rng.integers(len(ties))]) if len(ties) > 1 else int(ties[0])
        nb = g.neighbors(v)
        same = side[nb] == side[v]
        own[nb[same]] -= 1
        own[nb[~same]] += 1
        own[v] = g.degrees[v] - own[v]
        side[v] ^= 1
    return np.flatnonzero(side == 0), np.flatnonzero(side == 1)


# ----------------------------------------------------------------------
# clean-up forest

def clean_up_forest(g: Graph, A, B, X, seed=0, d: int | None = None) -> LinearForest:
    """Forest whose removal balances the two sides and swallows X.

    Takes |B|-|A| edges of a maximal-path forest in G[B], extends each path
    by one A-vertex, then makes every x in X internal: endpoints are
    extended by two cross edges, fresh vertices get a cross path of length 3.
    """
    A = sorted(int(v) for v in A)
    B = sorted(int(v) for v in B)
    X = [int(v) for v in X]
    if d is None:
        d = g.d_max
    side = np.full(g.n, -1, dtype=np.int8)
    side[A] = 0
    side[B] = 1
    if np.any(side < 0) or len(A) + len(B) != g.n:
        raise CleanUpPreconditionError("A and B must partition the vertex set")
    if len(A) > len(B):
        raise CleanUpPreconditionError("need |A| <= |B|")
    adj = g.adj
    own_max = max((sum(1 for u in adj[v] if side[u] == side[v]) for v in range(g.n)), default=0)
    if 2 * own_max > d:
        raise CleanUpPreconditionError("a vertex has more than d/2 neighbours on its own side")
    k = len(B) - len(A)
    if 10 * (len(set(X)) + k) > d:
        raise CleanUpPreconditionError("|X| + |B| - |A| exceeds d/10")
    rng = stream(seed, "clean-up")

    paths: list[list[int]] = []
    if k:
        gB, old = g.induced(B)
        forest = large_linear_forest(gB, max(gB.d_max, d // 2, 1))
        need = k
        for p in sorted(forest.paths, key=len, reverse=True):
            if need == 0:
                break
            if len(p) < 2:
                continue
            take = p[: min(len(p), need + 1)]
            need -= len(take) - 1
            paths.append([int(old[v]) for v in take])
        if need:
            raise CoverError("G[B] forest too small")
    used = {v for p in paths for v in p}

    def fresh_cross(v):
        cand = [u for u in adj[v] if side[u] != side[v] and u not in used]
        return cand[rng.integers(len(cand))] if cand else None

    for p in paths:
        a = fresh_cross(p[-1])
        if a is None:
            raise CoverError("no fresh A-neighbour to extend a B-path")
        p.append(a)
        used.add(a)

    for v in X:
        where = next((p for p in paths if v in p), None)
        if where is not None:
            if where[0] != v and where[-1] != v:
                continue
            if where[0] == v:
                where.reverse()
            u = fresh_cross(v)
            if u is None:
                raise CoverError(f"cannot extend at {v}")
            used.add(u)
            w = fresh_cross(u)
            if w is None:
                raise CoverError(f"cannot extend at {v}")
            used.add(w)
            where.extend([u, w])
            continue
        used.add(v)
        v1 = fresh_cross(v)
        if v1 is None:
            raise CoverError(f"no cross path through {v}")
        used.add(v1)
        v3 = fresh_cross(v)
        if v3 is None:
            raise CoverError(f"no cross path through {v}")
        used.add(v3)
        v4 = fresh_cross(v3)
        if v4 is None:
            raise CoverError(f"no cross path through {v}")
        used.add(v4)
        paths.append([v1, v, v3, v4])

    forest = LinearForest(paths, {"imbalance": k, "X": len(set(X))})
    U = forest.internal
    # the three forest properties, checked exactly
    for p in paths:
        if side[p[0]] == side[p[-1]]:
            raise AssertionError("forest path does not join the two sides")
    if len(forest.covered) > 4 * (len(set(X)) + k):
        raise AssertionError("forest too large")
    if not set(X) <= U:
        raise AssertionError("X not internal")
    if len(set(A) - U) != len(set(B) - U):
        raise AssertionError("complement not balanced")
    bad = forest.verify(g)
    if bad:
        raise AssertionError("; ".join(bad[:3]))
    return forest


# ----------------------------------------------------------------------
# rotation-extension merge

class MergeFailure(CoverError):
    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


def merge_paths(g: Graph, units, start: int, end_target: int | None = None, optional=(),
                budget: int = 4000, seed=0) -> tuple[list[int], set[int]]:
    """One path through every vertex of `units`, beginning at `start`.

    Units (vertex-disjoint paths) are appended whole when reached at an end
    and split when entered in the middle.  When the end is stuck the path is
    rotated about an earlier neighbour of its end (start stays fixed).
    Vertices in `optional` may be used as stepping stones; the ones used are
    returned.  If `end_target` is given the final end must be adjacent to it.
    """
    rng = stream(seed, "merge")
    adj = g.adj
    optional = set(int(v) for v in optional)
    units = [list(map(int, u)) for u in units if len(u)]
    unit_of: dict[int, int] = {}
    for k, u in enumerate(units):
        for v in u:
            unit_of[v] = k
    if start not in unit_of:
        raise ValueError("start must lie in some unit")
    free = set(unit_of)
    free_deg = {v: 0 for v in range(g.n)}
    for v in free:
        for u in adj[v]:
            free_deg[u] += 1

    path: list[int] = []
    pos: dict[int, int] = {}
    used_optional: set[int] = set()

    def take(v):
        path.append(v)
        pos[v] = len(path) - 1
        if v in free:
            free.discard(v)
            for u in adj[v]:
                free_deg[u] -= 1

    def enter(w):
        """Append w's unit starting from w (splitting it if needed)."""
        k = unit_of[w]
        u = units[k]
        i = u.index(w)
        before, after = u[:i], u[i + 1:]
        if len(after) >= len(before):
            seq, rest = [w] + after, before
        else:
            seq, rest = [w] + before[::-1], after
        if rest:
            units.append(rest)
            for v in rest:
                unit_of[v] = len(units) - 1
        units[k] = []
        for v in seq:
            take(v)

    def rotate(i):
        # path[i] ~ path[-1]; new end is path[i+1]
        tail = path[i + 1:][::-1]
        path[i + 1:] = tail
        for j in range(i + 1, len(path)):
            pos[path[j]] = j

    enter(start)
    rotations = 0
    steps_stuck = 0
    while True:
        e = path[-1]
        if not free:
            if end_target is None or g.has_edge(e, end_target):
                break
            pivots = [pos[u] for u in adj[e] if u in pos and pos[u] < len(path) - 2]
            good = [i for i in pivots if g.has_edge(path[i + 1], end_target)]
            if good:
                rotate(good[rng.integers(len(good))])
                rotations += 1
                continue
        else:
            cand = [w for w in adj[e] if w in free]
            if cand:
                # intact unit ends first, then fewest free neighbours
                def score(w):
                    u = units[unit_of[w]]
                    return (0 if (u[0] == w or u[-1] == w) else 1, free_deg[w])
                best = min(score(w) for w in cand)
                top = [w for w in cand if score(w) == best]
                enter(top[rng.integers(len(top))])
                steps_stuck = 0
                continue
            pivots = [pos[u] for u in adj[e] if u in pos and pos[u] < len(path) - 2]
            good = [i for i in pivots if any(w in free for w in adj[path[i + 1]])]
            if good:
                rotate(good[rng.integers(len(good))])
                rotations += 1
                continue
            opt = [w for w in adj[e] if w in optional and w not in pos]
            if opt and steps_stuck > 4:
                w = opt[rng.integers(len(opt))]
                take(w)
                used_optional.add(w)
                steps_stuck = 0
                continue
        if rotations >= budget:
            raise MergeFailure("rotation budget exhausted",
                               {"covered": len(path), "left": len(free), "rotations": rotations})
        pivots = [pos[u] for u in adj[e] if u in pos and pos[u] < len(path) - 2]
        if not pivots:
            raise MergeFailure("path end has no rotation pivot",
                               {"covered": len(path), "left": len(free), "rotations": rotations})
        rotate(pivots[rng.integers(len(pivots))])
        rotations += 1
        steps_stuck += 1
    return path, used_optional
