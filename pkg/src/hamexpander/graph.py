"""Graph container, edge-list IO, and the expansion / bipartiteness /
uniformity certificates every other module leans on."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .rng import stream

EXHAUSTIVE_MAX_N = 20


class GraphFormatError(ValueError):
    """Malformed edge-list input."""


class SelfLoopError(GraphFormatError):
    pass


class DuplicateEdgeError(GraphFormatError):
    pass


class VertexRangeError(GraphFormatError):
    pass


class Graph:
    """Immutable simple undirected graph on vertices 0..n-1 (CSR storage).

    `side` is an optional 0/1 array; when present every edge crosses it.
    """

    __slots__ = ("n", "indptr", "indices", "degrees", "side", "_adj", "_csr", "_edge_keys")

    def __init__(self, n: int, indptr: np.ndarray, indices: np.ndarray, side: np.ndarray | None = None):
        self.n = int(n)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.degrees = np.diff(self.indptr)
        self.side = None if side is None else np.asarray(side, dtype=np.int8)
        for arr in (self.indptr, self.indices, self.degrees):
            arr.setflags(write=False)
        if self.side is not None:
            self.side.setflags(write=False)
            src = np.repeat(np.arange(self.n), self.degrees)
            if np.any(self.side[src] == self.side[self.indices]):
                raise ValueError("bipartition does not separate every edge")
        self._adj = None
        self._csr = None
        self._edge_keys = None

    # construction -----------------------------------------------------
    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]], side=None, check: bool = True) -> "Graph":
        e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
        e = e.reshape(-1, 2)
        if check and len(e):
            if e.min() < 0 or e.max() >= n:
                raise VertexRangeError("vertex index out of range")
            if np.any(e[:, 0] == e[:, 1]):
                raise SelfLoopError("self-loop")
        lo = np.minimum(e[:, 0], e[:, 1])
        hi = np.maximum(e[:, 0], e[:, 1])
        keys = lo * n + hi
        if check and len(np.unique(keys)) != len(keys):
            raise DuplicateEdgeError("duplicate edge")
        src = np.concatenate([lo, hi])
        dst = np.concatenate([hi, lo])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        np.cumsum(indptr, out=indptr)
        return cls(n, indptr, dst, side)

    def with_side(self, side) -> "Graph":
        return Graph(self.n, self.indptr, self.indices, side)

    # accessors --------------------------------------------------------
    @property
    def m(self) -> int:
        return int(self.indptr[-1] // 2)

    @property
    def d_min(self) -> int:
        return int(self.degrees.min()) if self.n else 0

    @property
    def d_max(self) -> int:
        return int(self.degrees.max()) if self.n else 0

    @property
    def d_avg(self) -> float:
        return 2.0 * self.m / self.n if self.n else 0.0

    @property
    def is_regular(self) -> bool:
        return self.d_min == self.d_max

    @property
    def bipartition(self):
        """(V0, V1) as sorted arrays, or None."""
        if self.side is None:
            return None
        return np.flatnonzero(self.side == 0), np.flatnonzero(self.side == 1)

    @property
    def balanced(self) -> bool:
        return self.side is not None and int(self.side.sum()) * 2 == self.n

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    @property
    def adj(self) -> list[list[int]]:
        """Python neighbour lists (cached); used by the pure-Python searches."""
        if self._adj is None:
            ind = self.indices.tolist()
            ptr = self.indptr.tolist()
            self._adj = [ind[ptr[v]:ptr[v + 1]] for v in range(self.n)]
        return self._adj

    def csr(self) -> sp.csr_matrix:
        if self._csr is None:
            data = np.ones(len(self.indices), dtype=np.float64)
            self._csr = sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))
        return self._csr

    def edges(self) -> np.ndarray:
        src = np.repeat(np.arange(self.n), self.degrees)
        mask = src < self.indices
        return np.stack([src[mask], self.indices[mask]], axis=1)

    def has_edge(self, u: int, v: int) -> bool:
        if self._edge_keys is None:
            e = self.edges()
            self._edge_keys = set((e[:, 0] * self.n + e[:, 1]).tolist())
        if u > v:
            u, v = v, u
        return u * self.n + v in self._edge_keys

    def induced(self, vertices) -> tuple["Graph", np.ndarray]:
        """Induced subgraph relabelled to 0..k-1, plus the old labels."""
        keep = np.zeros(self.n, dtype=bool)
        keep[np.asarray(vertices, dtype=np.int64)] = True
        old = np.flatnonzero(keep)
        new_id = np.full(self.n, -1, dtype=np.int64)
        new_id[old] = np.arange(len(old))
        e = self.edges()
        e = e[keep[e[:, 0]] & keep[e[:, 1]]]
        side = None if self.side is None else self.side[old]
        return Graph.from_edges(len(old), new_id[e], side=side, check=False), old

    def two_colouring(self) -> np.ndarray | None:
        """BFS 2-colouring, or None if an odd cycle exists."""
        colour = np.full(self.n, -1, dtype=np.int8)
        adj = self.adj
        for root in range(self.n):
            if colour[root] >= 0:
                continue
            colour[root] = 0
            queue = [root]
            for v in queue:
                c = 1 - colour[v]
                for u in adj[v]:
                    if colour[u] < 0:
                        colour[u] = c
                        queue.append(u)
                    elif colour[u] != c:
                        return None
        return colour

    def components(self) -> np.ndarray:
        from scipy.sparse.csgraph import connected_components

        return connected_components(self.csr(), directed=False)[1]

    def is_connected(self) -> bool:
        return self.n > 0 and int(self.components().max()) == 0

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m}, d=[{self.d_min},{self.d_max}])"


# ----------------------------------------------------------------------
# edge-list IO

def parse_edge_list(text: str) -> Graph:
    header = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphFormatError(f"line {lineno}: expected two integers")
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"line {lineno}: not an integer") from None
        if header is None:
            if a < 0 or b < 0:
                raise GraphFormatError("negative header")
            header = (a, b)
            continue
        if a == b:
            raise SelfLoopError(f"line {lineno}: self-loop at {a}")
        if not (0 <= a < header[0] and 0 <= b < header[0]):
            raise VertexRangeError(f"line {lineno}: vertex index >= n")
        edges.append((a, b))
    if header is None:
        raise GraphFormatError("empty edge list")
    n, m = header
    if len(edges) != m:
        raise GraphFormatError(f"header announces {m} edges, found {len(edges)}")
    seen = set()
    for a, b in edges:
        key = (min(a, b), max(a, b))
        if key in seen:
            raise DuplicateEdgeError(f"duplicate edge {key}")
        seen.add(key)
    return Graph.from_edges(n, edges, check=False)


def load_graph(path) -> Graph:
    return parse_edge_list(Path(path).read_text())


def format_edge_list(g: Graph) -> str:
    lines = [f"{g.n} {g.m}"]
    lines.extend(f"{u} {v}" for u, v in g.edges().tolist())
    return "\n".join(lines) + "\n"


def write_edge_list(g: Graph, path) -> None:
    Path(path).write_text(format_edge_list(g))


# ----------------------------------------------------------------------
# expansion certificate

@dataclass(frozen=True)
class ExpansionCertificate:
    rho_lower: float
    rho_upper: float
    cuts_tested: int
    worst_cut: list[int]
    mode: str = "exhaustive"
    connected: bool = True

    def to_dict(self) -> dict:
        return {
            "rho_lower": self.rho_lower,
            "rho_upper": self.rho_upper,
            "cuts_tested": self.cuts_tested,
            "worst_cut": list(self.worst_cut),
            "mode": self.mode,
            "connected": self.connected,
        }


def _neighbour_masks(g: Graph) -> np.ndarray:
    masks = np.zeros(g.n, dtype=np.uint32)
    for v in range(g.n):
        nb = g.neighbors(v)
        masks[v] = int(np.bitwise_or.reduce(np.left_shift(np.uint32(1), nb.astype(np.uint32)))) if len(nb) else 0
    return masks


def _cut_sizes(g: Graph, masks: np.ndarray) -> np.ndarray:
    """e(S, S^c) for each bitmask S (n <= 32)."""
    nb = _neighbour_masks(g)
    cut = np.zeros(len(masks), dtype=np.int64)
    for v in range(g.n):
        inside = (masks >> np.uint32(v)) & np.uint32(1)
        own = np.bitwise_count(masks & nb[v]).astype(np.int64)
        cut += inside.astype(np.int64) * (int(g.degrees[v]) - own)
    return cut


def _mask_vertices(mask: int) -> list[int]:
    return [i for i in range(mask.bit_length()) if mask >> i & 1]


def spectral_rho_lower(g: Graph, lambda2: float | None = None) -> float:
    """Cheeger-type lower bound on the expansion ratio from λ₂(N)."""
    if g.m == 0:
        return 0.0
    if lambda2 is None:
        from .spectral import spectral_summary

        lambda2 = spectral_summary(g).lambda2
    return max(0.0, (1.0 - lambda2) * g.d_min ** 2 / (3.0 * g.d_max * g.d_avg))


def expansion_certificate(g: Graph, samples: int = 200, seed: int = 0, exhaustive: bool | None = None) -> ExpansionCertificate:
    n = g.n
    if n < 2 or g.m == 0:
        return ExpansionCertificate(0.0, 0.0, 0, [0], "trivial", False)
    connected = g.is_connected()
    if not connected:
        comp = g.components()
        sizes = np.bincount(comp)
        small = int(np.argmin(sizes))
        cut = np.flatnonzero(comp == small).tolist()
        return ExpansionCertificate(0.0, 0.0, 1, cut, "disconnected", False)
    if exhaustive is None:
        exhaustive = n <= EXHAUSTIVE_MAX_N
    limit = (2 * n) // 3
    if exhaustive:
        if n > EXHAUSTIVE_MAX_N:
            raise ValueError("exhaustive certificate limited to n <= 20")
        masks = np.arange(1, 1 << n, dtype=np.uint32)
        sizes = np.bitwise_count(masks).astype(np.int64)
        keep = sizes <= limit
        masks, sizes = masks[keep], sizes[keep]
        cuts = _cut_sizes(g, masks)
        best = None
        best_mask = 0
        for s in range(1, limit + 1):
            sel = np.flatnonzero(sizes == s)
            if not len(sel):
                continue
            i = sel[int(np.argmin(cuts[sel]))]
            ratio = Fraction(int(cuts[i]), s)
            if best is None or ratio < best:
                best, best_mask = ratio, int(masks[i])
        rho_upper = float(best * n / (2 * g.m))
        tested = len(masks)
        worst = _mask_vertices(best_mask)
        mode = "exhaustive"
    else:
        rng = stream(seed, "expansion-certificate")
        A = g.csr()
        subsets: list[np.ndarray] = [np.array([v]) for v in range(n)]
        adj = g.adj
        roots = rng.choice(n, size=min(n, max(1, samples // 4)), replace=False)
        for r in roots.tolist():
            seen = {r}
            frontier = [r]
            while frontier:
                nxt = []
                for v in frontier:
                    for u in adj[v]:
                        if u not in seen:
                            seen.add(u)
                            nxt.append(u)
                if not nxt or len(seen) > limit:
                    break
                frontier = nxt
                subsets.append(np.fromiter(seen, dtype=np.int64))
        for _ in range(samples):
            k = int(rng.integers(1, limit + 1))
            subsets.append(rng.choice(n, size=k, replace=False))
        best = math.inf
        worst = [0]
        deg = g.degrees
        for s in subsets:
            x = np.zeros(n)
            x[s] = 1.0
            inner = float(x @ (A @ x))
            cut = float(deg[s].sum()) - inner
            ratio = cut / (g.d_avg * len(s))
            if ratio < best:
                best, worst = ratio, sorted(int(v) for v in s)
        rho_upper = best
        tested = len(subsets)
        mode = "sampled"
    rho_lower = min(spectral_rho_lower(g), rho_upper)
    return ExpansionCertificate(rho_lower, rho_upper, tested, worst, mode, True)


# ----------------------------------------------------------------------
# distance from bipartite

@dataclass(frozen=True)
class BipartitenessReport:
    eps: float          # 1 - best cut found / e(G); exact in exhaustive mode
    eps_lower: float    # spectral lower bound
    maxcut: int
    exact: bool
    mode: str
    cut_side: list[int] = field(default_factory=list)

    @property
    def interval(self) -> tuple[float, float]:
        return (self.eps if self.exact else self.eps_lower, self.eps)

    def to_dict(self) -> dict:
        return {"eps": self.eps, "eps_lower": self.eps_lower, "maxcut": self.maxcut,
                "exact": self.exact, "mode": self.mode}


def spectral_eps_lower(g: Graph, lambda_n: float | None = None) -> float:
    """Every bipartition leaves at least this fraction of edges inside."""
    if lambda_n is None:
        from .spectral import spectral_summary

        lambda_n = spectral_summary(g).lambda_n
    return max(0.0, (1.0 + lambda_n) / 2.0)


def far_from_bipartite(g: Graph, mode: str | None = None, seed: int = 0, spectral: bool = True) -> BipartitenessReport:
    if g.m < 1:
        raise ValueError("graph has no edges")
    if mode is None:
        mode = "exhaustive" if g.n <= EXHAUSTIVE_MAX_N else "local-search"
    eps_lower = spectral_eps_lower(g) if spectral and g.is_connected() else 0.0
    if mode == "exhaustive":
        if g.n > EXHAUSTIVE_MAX_N:
            raise ValueError("exhaustive bipartiteness limited to n <= 20")
        # vertex n-1 pinned to side 0; masks enumerate the other side
        masks = np.arange(0, 1 << max(g.n - 1, 0), dtype=np.uint32)
        cuts = _cut_sizes(g, masks)
        i = int(np.argmax(cuts))
        maxcut = int(cuts[i])
        eps = float(Fraction(g.m - maxcut, g.m))
        return BipartitenessReport(eps, min(eps_lower, eps), maxcut, True, mode, _mask_vertices(int(masks[i])))
    from .cover import max_cut_local_search

    A, B = max_cut_local_search(g, seed)
    side = np.zeros(g.n, dtype=np.int8)
    side[B] = 1
    e = g.edges()
    maxcut = int(np.count_nonzero(side[e[:, 0]] != side[e[:, 1]]))
    eps = (g.m - maxcut) / g.m
    return BipartitenessReport(eps, min(eps_lower, eps), maxcut, False, mode, sorted(int(v) for v in B))


# ----------------------------------------------------------------------
# uniformity

@dataclass(frozen=True)
class UniformityReport:
    alpha_observed: float
    size: int
    balanced: bool

    def to_dict(self) -> dict:
        return {"alpha_observed": self.alpha_observed, "size": self.size, "balanced": self.balanced}


def uniformity(g: Graph, S, side: str = "whole") -> UniformityReport:
    """Worst normalised deviation of |N(v) ∩ S| from its density share.

    side: "whole" (S anywhere, all v probed), "V0V1" (S ⊆ V0, v ∈ V1) or
    "V1V0".  S is a multiset; repeats count.
    """
    S = np.asarray(list(S) if not isinstance(S, np.ndarray) else S, dtype=np.int64)
    if len(S) and (S.min() < 0 or S.max() >= g.n):
        raise ValueError("vertex out of range")
    if side == "whole":
        src_size = g.n
        targets = np.arange(g.n)
    elif side in ("V0V1", "V1V0"):
        if g.side is None:
            raise ValueError("graph carries no bipartition")
        s, t = (0, 1) if side == "V0V1" else (1, 0)
        if len(S) and np.any(g.side[S] != s):
            raise ValueError("S contains a vertex outside the declared source part")
        src_size = int(np.count_nonzero(g.side == s))
        targets = np.flatnonzero(g.side == t)
    else:
        raise ValueError(f"unknown side {side!r}")
    balanced = True
    if g.side is not None:
        ones = int(g.side[S].sum()) if len(S) else 0
        balanced = 2 * ones == len(S)
    if len(S) == 0 or g.m == 0:
        return UniformityReport(0.0, int(len(S)), balanced)
    mult = np.bincount(S, minlength=g.n).astype(np.float64)
    hits = g.csr() @ mult
    dbar = g.d_avg
    expected = len(S) * dbar / src_size
    alpha = float(np.max(np.abs(hits[targets] - expected))) / dbar
    return UniformityReport(alpha, int(len(S)), balanced)


# ----------------------------------------------------------------------
# remove-set arithmetic

def remove_set_params(d: float, d_prime: float, n: float, size_S: float, alpha: float) -> tuple[float, float, float]:
    """Degree window and expansion loss after deleting an α-uniform set S."""
    if d == 0:
        raise ValueError("d must be positive")
    if min(d, d_prime, n, size_S, alpha) < 0 or size_S > n:
        raise ValueError("inputs must be nonnegative with size_S <= n")
    frac = size_S / n
    d2 = d * (1 - frac)
    d2_prime = d_prime * (1 + frac) + alpha * (d + d_prime)
    rho2_delta = 4 * (frac + alpha + d_prime / d)
    return d2, d2_prime, rho2_delta
