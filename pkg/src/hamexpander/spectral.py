"""Spectrum of the normalised adjacency matrix N(G) = D^{-1/2} A D^{-1/2},
closed-form spectral/expansion/mixing bounds, and exact mixing curves."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .graph import Graph

DENSE_MAX_N = 2000
POWER_BUDGET = 10_000


class SpectralConvergenceError(RuntimeError):
    def __init__(self, message: str, summary=None):
        super().__init__(message)
        self.summary = summary


@dataclass(frozen=True)
class SpectralSummary:
    lambda2: float
    lambda_n: float
    method: str
    residual: float

    @property
    def gap(self) -> float:
        """max(λ₂, −λₙ): the two-sided spectral radius off the top."""
        return max(self.lambda2, -self.lambda_n)

    def to_dict(self) -> dict:
        return {"lambda2": self.lambda2, "lambda_n": self.lambda_n, "method": self.method, "residual": self.residual}


def normalized_adjacency(g: Graph):
    """Sparse N(G); isolated vertices get a zero row."""
    deg = g.degrees.astype(np.float64)
    inv = np.zeros_like(deg)
    nz = deg > 0
    inv[nz] = 1.0 / np.sqrt(deg[nz])
    A = g.csr()
    return A.multiply(inv[:, None]).multiply(inv[None, :]).tocsr()


def _power(apply, n, deflate, rng, tol, budget):
    """Largest eigenpair of a PSD operator on the complement of `deflate`."""
    x = rng.standard_normal(n)
    if deflate is not None:
        x -= (x @ deflate) * deflate
    x /= np.linalg.norm(x)
    theta = 0.0
    res = math.inf
    for _ in range(budget):
        y = apply(x)
        if deflate is not None:
            y -= (y @ deflate) * deflate
        theta = float(x @ y)
        res = float(np.linalg.norm(y - theta * x))
        if res <= tol:
            break
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0, 0.0
        x = y / norm
    return theta, res


def spectral_summary(g: Graph, tol: float = 1e-9, method: str | None = None, budget: int = POWER_BUDGET) -> SpectralSummary:
    if g.n < 2:
        raise ValueError("need at least two vertices")
    if method is None:
        method = "dense" if g.n <= DENSE_MAX_N else "iterative"
    N = normalized_adjacency(g)
    if method == "dense":
        vals, vecs = np.linalg.eigh(N.toarray())
        res = 0.0
        for k in (g.n - 2, 0):
            r = N @ vecs[:, k] - vals[k] * vecs[:, k]
            res = max(res, float(np.linalg.norm(r)))
        return SpectralSummary(float(vals[-2]), float(vals[0]), "dense", res)
    rng = np.random.default_rng(12345)
    top = np.sqrt(g.degrees.astype(np.float64))
    top /= np.linalg.norm(top)
    t2, r2 = _power(lambda x: N @ x + x, g.n, top, rng, tol, budget)
    tn, rn = _power(lambda x: x - N @ x, g.n, None, rng, tol, budget)
    res = max(r2, rn)
    summary = SpectralSummary(t2 - 1.0, 1.0 - tn, "iterative", res)
    if res > tol:
        raise SpectralConvergenceError(f"power iteration residual {res:.3g} > {tol:.3g}", summary)
    return summary


# ----------------------------------------------------------------------
# closed forms

class Bound(NamedTuple):
    value: float
    hypothesis: bool | None


def cheeger_rho(d: float, lambda2_adj: float) -> float:
    if d == 0:
        raise ValueError("d must be positive")
    if not 0 <= lambda2_adj <= d:
        raise ValueError("need 0 <= lambda2 <= d")
    return (d - lambda2_adj) / (3 * d)


def lambda2_bound(rho: float) -> float:
    if not 0 <= rho <= 1:
        raise ValueError("rho must lie in [0, 1]")
    return 1 - rho ** 2 / 32


def lambda_n_bound(rho: float, eps: float, d: float | None = None, d_prime: float | None = None) -> Bound:
    """Lower bound on λₙ(N) for an ε-far-from-bipartite ρ-expander.

    The hypothesis flag records whether d'/d ≤ ε²ρ²/4000 holds (None when
    the degree window is not supplied).
    """
    if not (0 <= rho <= 1 and 0 <= eps <= 1):
        raise ValueError("rho and eps must lie in [0, 1]")
    value = eps ** 2 * rho ** 2 / 800 - 1
    hyp = None
    if d is not None and d_prime is not None:
        hyp = d_prime / d <= eps ** 2 * rho ** 2 / 4000
    return Bound(value, hyp)


def mixing_time_bound(g_kind: str, n: float, rho: float | None = None, eps: float | None = None, c_gap: float | None = None) -> float:
    if n <= 1:
        raise ValueError("n must exceed 1")
    log_n = math.log(n)
    if g_kind == "bipartite":
        return 1000 * log_n / rho ** 2
    if g_kind == "far-from-bipartite":
        return 1e5 * log_n / (eps ** 2 * rho ** 2)
    if g_kind == "generic":
        return 100 * log_n / c_gap
    raise ValueError(f"unknown graph kind {g_kind!r}")


# ----------------------------------------------------------------------
# empirical mixing

@dataclass(frozen=True)
class MixingCurve:
    tv: list[float]
    envelope: list[float]
    bipartite: bool

    def mixing_time(self, tol: float = 1e-3) -> int | None:
        for t, value in enumerate(self.envelope):
            if value <= tol:
                return t
        return None


def empirical_mixing(g: Graph, start: int, t_max: int, bipartite: bool | None = None) -> MixingCurve:
    """Exact law of W(t) from `start`, compared with the degree-stationary law.

    TV here is the plain l1 distance Σ|p − π|.  In bipartite mode the
    reference at step t lives on the part the walk must occupy.
    """
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    if bipartite is None:
        bipartite = g.side is not None
    deg = g.degrees.astype(np.float64)
    if np.any(deg == 0):
        raise ValueError("graph has isolated vertices")
    A = g.csr()
    if bipartite:
        side = g.side if g.side is not None else g.two_colouring()
        if side is None:
            raise ValueError("graph is not bipartite")
        refs = []
        for j in (0, 1):
            pi = np.where(side == j, deg, 0.0)
            refs.append(pi / pi.sum())
        s0 = int(side[start])
    else:
        pi = deg / deg.sum()
    p = np.zeros(g.n)
    p[start] = 1.0
    tv = []
    for t in range(t_max + 1):
        ref = refs[(s0 + t) % 2] if bipartite else pi
        tv.append(float(np.abs(p - ref).sum()))
        if t < t_max:
            p = A @ (p / deg)
            p /= p.sum()
    env = np.minimum.accumulate(np.array(tv)).tolist()
    return MixingCurve(tv, env, bool(bipartite))
