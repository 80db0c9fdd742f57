"""Instrumented QuickVal, QuickQuant and random-pivot QuickSelect on seed arrays.

Keys are represented by their seeds: comparing two keys is comparing seeds,
and the comparison is charged ``beta(u, t)`` under the chosen cost model.
QuickVal and QuickQuant always take the first eligible seed as pivot, so
runs on a common seed stream are coupled with each other and with the
limiting pivot chain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cost import CostModel, RunContext
from .source import Source


class SeedCollisionError(ValueError):
    pass


def seed_stream(master: int, rep: int, n: int) -> np.ndarray:
    """First ``n`` seeds of replication ``rep``; longer streams extend shorter ones."""
    rng = np.random.default_rng(np.random.SeedSequence([master, rep]))
    return rng.random(n)


@dataclass
class SeedArray:
    """Distinct seeds in (0, 1) with the label of the stream they came from."""

    seeds: np.ndarray
    master: int | None = None
    rep: int | None = None

    def __post_init__(self):
        self.seeds = np.asarray(self.seeds, dtype=float)
        if self.seeds.ndim != 1:
            raise ValueError("seeds must be one-dimensional")
        if np.any((self.seeds <= 0) | (self.seeds >= 1)):
            raise ValueError("seeds must lie in (0, 1)")
        if len(np.unique(self.seeds)) != len(self.seeds):
            raise SeedCollisionError("seed array contains repeated values")

    def __len__(self):
        return len(self.seeds)

    @classmethod
    def generate(cls, n: int, master: int, rep: int = 0) -> "SeedArray":
        """Draw ``n`` seeds; zeros and repeats are replaced from a side stream."""
        u = seed_stream(master, rep, n)
        bad = _bad_positions(u)
        if len(bad):
            side = np.random.default_rng(np.random.SeedSequence([master, rep, 3]))
            while len(bad):
                u[bad] = side.random(len(bad))
                bad = _bad_positions(u)
        return cls(u, master, rep)

    def prefix(self, n: int) -> "SeedArray":
        return SeedArray(self.seeds[:n], self.master, self.rep)

    def context(self) -> RunContext:
        """Per-run context whose deep-symbol streams are derived from the stream label."""
        if self.master is None:
            return RunContext(np.random.default_rng(0))
        return RunContext(np.random.default_rng(np.random.SeedSequence([self.master, self.rep, 1])))


def _bad_positions(u):
    order = np.argsort(u, kind="stable")
    su = u[order]
    dup = np.zeros(len(u), dtype=bool)
    dup[order[1:][su[1:] == su[:-1]]] = True
    return np.flatnonzero(dup | (u <= 0))


@dataclass
class RunRecord:
    algo: str
    n: int
    target: float
    total: float
    per_pivot: np.ndarray
    pivot_seeds: np.ndarray
    comparisons: int
    truncated: bool = False
    intervals: list = field(default_factory=list)

    @property
    def pivots(self) -> int:
        return len(self.per_pivot)


def _as_seed_array(seeds) -> SeedArray:
    return seeds if isinstance(seeds, SeedArray) else SeedArray(seeds)


def _charge(source, cost, pivot, others, ctx):
    if not len(others):
        return 0.0
    return math.fsum(cost.many(source, pivot, others, ctx))


def run_quickval(source: Source, cost: CostModel, seeds, alpha: float,
                 ctx: RunContext | None = None) -> RunRecord:
    """QuickVal(n, alpha): find where the alpha-word falls among the keys.

    Each round takes the first seed strictly inside (L, R) as pivot, charges
    its comparisons with every later seed inside (L, R), and moves the
    endpoint on the pivot's side of ``alpha``.  Comparisons with the
    alpha-word itself are free.
    """
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    sa = _as_seed_array(seeds)
    u = sa.seeds
    ctx = ctx or sa.context()
    L, R = 0.0, 1.0
    costs, piv, ivs = [], [], []
    comps = 0
    live = u  # seeds inside (L, R), in stream order
    while len(live):
        v, rest = live[0], live[1:]
        costs.append(_charge(source, cost, v, rest, ctx))
        comps += len(rest)
        piv.append(v)
        L, R = (v, R) if v < alpha else (L, v)
        ivs.append((L, R))
        live = rest[(rest > L) & (rest < R)]
    per = np.array(costs)
    return RunRecord("quickval", len(u), alpha, math.fsum(costs), per, np.array(piv),
                     comps, ctx.truncations > 0, ivs)


def run_quickquant(source: Source, cost: CostModel, seeds, m: int,
                   ctx: RunContext | None = None) -> RunRecord:
    """QuickQuant(n, m): QuickSelect for rank ``m`` with first-eligible pivots.

    Pivot ranks are global ranks within all ``n`` seeds.  A pivot of rank
    exactly ``m`` collapses the interval and ends the run.
    """
    sa = _as_seed_array(seeds)
    u = sa.seeds
    n = len(u)
    if not 1 <= m <= n:
        raise ValueError(f"target rank must lie in 1..{n}")
    ctx = ctx or sa.context()
    rank = np.empty(n, dtype=np.int64)
    rank[np.argsort(u)] = np.arange(1, n + 1)
    L, R = 0.0, 1.0
    costs, piv, ivs = [], [], []
    comps = 0
    live = np.arange(n)
    while len(live):
        i, rest = live[0], live[1:]
        v = u[i]
        costs.append(_charge(source, cost, v, u[rest], ctx))
        comps += len(rest)
        piv.append(v)
        if rank[i] <= m:
            L = v
        if rank[i] >= m:
            R = v
        ivs.append((L, R))
        if L == R:
            break
        live = rest[(u[rest] > L) & (u[rest] < R)]
    return RunRecord("quickquant", n, m, math.fsum(costs), np.array(costs), np.array(piv),
                     comps, ctx.truncations > 0, ivs)


def run_quickselect_random_pivot(source: Source, cost: CostModel, seeds, m: int,
                                 rng: np.random.Generator,
                                 ctx: RunContext | None = None) -> RunRecord:
    """Hoare's QuickSelect for rank ``m`` with a uniformly random pivot per sublist."""
    sa = _as_seed_array(seeds)
    u = sa.seeds
    n = len(u)
    if not 1 <= m <= n:
        raise ValueError(f"target rank must lie in 1..{n}")
    ctx = ctx or sa.context()
    live = u
    costs, piv = [], []
    comps = 0
    while len(live) > 1:
        j = int(rng.integers(len(live)))
        v = live[j]
        rest = np.delete(live, j)
        costs.append(_charge(source, cost, v, rest, ctx))
        comps += len(rest)
        piv.append(v)
        lower = rest[rest < v]
        if m == len(lower) + 1:
            break
        if m <= len(lower):
            live = lower
        else:
            m -= len(lower) + 1
            live = rest[rest > v]
    return RunRecord("qs-random", n, m, math.fsum(costs), np.array(costs), np.array(piv),
                     comps, ctx.truncations > 0)


def target_rank(alpha: float, n: int) -> int:
    """m_n = floor(alpha n) + 1, clamped to 1..n."""
    return int(min(max(math.floor(alpha * n) + 1, 1), n))
