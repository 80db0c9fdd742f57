"""Comparison costs between words, expressed on seed pairs.

Every model here has the positional form: comparing two distinct words with
longest common prefix of length ``k`` costs
``sum_{i <= k} c_i(w_i, w_i) + c_{k+1}(w_{k+1}, w'_{k+1})``.
Key counting is ``c_i = [i == 1]``, symbol counting is ``c_i = 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .source import DEFAULT_DEPTH_CAP, MIN_WIDTH, Source, TameParams, child_cuts


class IdenticalSeedsError(ValueError):
    """Comparison cost is undefined for a word compared with itself."""


class DepthCapError(RuntimeError):
    """Two seeds agree beyond the resolvable depth and no extension stream was given."""


# -- deep-symbol extension -------------------------------------------------------

class RunContext:
    """Per-run mutable state: memoized symbol streams beyond the depth cap.

    Seeds closer than the float resolution of the prefix tree cannot be told
    apart by descent.  Their further symbols are drawn fresh from the source's
    conditional law, keyed by seed so a key keeps its symbols for the whole run.
    """

    def __init__(self, rng: np.random.Generator | None = None,
                 depth_cap: int = DEFAULT_DEPTH_CAP):
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.depth_cap = depth_cap
        self._streams: dict[float, tuple[list[int], int]] = {}
        self.truncations = 0

    def extension(self, source: Source, key: float, state: int, n: int) -> list[int]:
        syms, st = self._streams.get(key, ([], state))
        while len(syms) < n:
            pr = source.probs(np.array([st]))[0]
            s = int(self.rng.choice(source.r, p=pr))
            syms.append(s)
            st = int(source.next_state(np.array([st]), np.array([s]))[0])
        self._streams[key] = (syms, st)
        return syms


@dataclass
class Comparison:
    """Outcome of comparing seeds ``us`` against a single seed ``t``."""

    lcp: np.ndarray  # common prefix length
    sym_u: np.ndarray  # first differing symbol of each u
    sym_t: np.ndarray  # ... and of t at the same position
    t_path: np.ndarray  # t's symbols, long enough to cover max(lcp) + 1
    capped: np.ndarray  # resolved via extension streams


def compare_many(source: Source, t: float, us, ctx: RunContext | None = None) -> Comparison:
    """Joint descent of ``t`` and every seed in ``us`` until they split."""
    us = np.asarray(us, dtype=float)
    if np.any(us == t):
        raise IdenticalSeedsError("identical seeds")
    n = len(us)
    cap = ctx.depth_cap if ctx is not None else DEFAULT_DEPTH_CAP
    lcp = np.zeros(n, dtype=np.int64)
    su = np.zeros(n, dtype=np.int64)
    st = np.zeros(n, dtype=np.int64)
    capped = np.zeros(n, dtype=bool)
    active = np.arange(n)
    a, b = 0.0, 1.0
    state = np.array([source.initial_state()])
    path = []
    j = 0
    while len(active):
        if j >= cap or b - a < MIN_WIDTH:
            break
        cuts = child_cuts(source, np.array([a]), np.array([b]), state)[0]
        inner = cuts[1:-1]
        s_t = int((inner < t).sum())
        s_u = (inner[None, :] < us[active, None]).sum(axis=1)
        path.append(s_t)
        split = s_u != s_t
        done = active[split]
        lcp[done] = j
        su[done] = s_u[split]
        st[done] = s_t
        active = active[~split]
        a, b = cuts[s_t], cuts[s_t + 1]
        state = source.next_state(state, np.array([s_t]))
        j += 1
    if len(active):
        if ctx is None:
            raise DepthCapError(
                f"{len(active)} seed(s) agree with t={t!r} beyond depth {j}")
        st0 = int(state[0])
        for i in active:
            k = 0
            while True:
                k += 1
                et = ctx.extension(source, float(t), st0, k)
                eu = ctx.extension(source, float(us[i]), st0, k)
                if et[k - 1] != eu[k - 1]:
                    break
            lcp[i] = j + k - 1
            su[i], st[i] = eu[k - 1], et[k - 1]
            capped[i] = True
            ctx.truncations += 1
        longest = int(lcp[active].max()) + 1 - j
        path.extend(ctx.extension(source, float(t), st0, longest))
    return Comparison(lcp, su, st, np.array(path, dtype=np.int64), capped)


def lcp_depth(source: Source, u: float, t: float, ctx: RunContext | None = None) -> int:
    """Length of the longest common prefix of ``M(u)`` and ``M(t)``."""
    if u == t:
        raise IdenticalSeedsError("identical seeds")
    return int(compare_many(source, t, [u], ctx).lcp[0])


# -- cost models ----------------------------------------------------------------

class CostModel:
    """Symmetric nonnegative positional comparison cost."""

    name: str

    def position_cost(self, i: int, s, s2):
        """``c_i(s, s2)``, vectorized over symbol arrays (``i`` is 1-based)."""
        raise NotImplementedError

    def max_cost_from(self, i: int) -> float:
        """Upper bound on ``c_m`` over all symbols and all ``m >= i``."""
        raise NotImplementedError

    @property
    def needs_symbols(self) -> bool:
        return True

    def from_comparison(self, cmp: Comparison) -> np.ndarray:
        """Costs for the pairs in ``cmp``; generic positional sum."""
        out = np.zeros(len(cmp.lcp))
        path = cmp.t_path
        diag = np.zeros(len(path) + 1)
        for i in range(1, len(path) + 1):
            diag[i] = diag[i - 1] + float(self.position_cost(i, path[i - 1], path[i - 1]))
        out += diag[cmp.lcp]
        for k in np.unique(cmp.lcp):
            sel = cmp.lcp == k
            out[sel] += self.position_cost(int(k) + 1, cmp.sym_u[sel], cmp.sym_t[sel])
        return out

    def tame_params(self, source: Source, eps: float | None = None) -> TameParams:
        raise NotImplementedError

    def many(self, source: Source, t: float, us, ctx: RunContext | None = None) -> np.ndarray:
        """``beta(u, t)`` for every ``u`` in ``us``."""
        us = np.asarray(us, dtype=float)
        if not self.needs_symbols:
            if np.any(us == t):
                raise IdenticalSeedsError("identical seeds")
            return np.ones(len(us))
        return self.from_comparison(compare_many(source, t, us, ctx))

    def __call__(self, source: Source, u: float, t: float, ctx: RunContext | None = None) -> float:
        return float(self.many(source, t, [u], ctx)[0])

    def __repr__(self):
        return self.name


class KeyCost(CostModel):
    name = "key"

    @property
    def needs_symbols(self):
        return False

    def position_cost(self, i, s, s2):
        return np.where(i == 1, 1.0, 0.0) * np.ones(np.shape(s))

    def max_cost_from(self, i):
        return 1.0 if i <= 1 else 0.0

    def from_comparison(self, cmp):
        return np.ones(len(cmp.lcp))

    def tame_params(self, source, eps=None):
        return TameParams(0.1 if eps is None else eps, 1.0)


class SymbolCost(CostModel):
    name = "symbol"

    def position_cost(self, i, s, s2):
        return np.ones(np.shape(s))

    def max_cost_from(self, i):
        return 1.0

    def from_comparison(self, cmp):
        return cmp.lcp + 1.0

    def tame_params(self, source, eps=None):
        from .source import symb_tame_params

        return symb_tame_params(source, eps)


class PositionIndicator(CostModel):
    """Counts comparisons of the symbols in position ``i0``."""

    def __init__(self, i0: int):
        if int(i0) != i0 or i0 < 1:
            raise ValueError("position must be a positive integer")
        self.i0 = int(i0)
        self.name = f"pos:{self.i0}"

    def position_cost(self, i, s, s2):
        return np.where(i == self.i0, 1.0, 0.0) * np.ones(np.shape(s))

    def max_cost_from(self, i):
        return 1.0 if i <= self.i0 else 0.0

    def from_comparison(self, cmp):
        return (cmp.lcp + 1 >= self.i0).astype(float)

    @property
    def needs_symbols(self):
        return self.i0 > 1

    def tame_params(self, source, eps=None):
        return TameParams(0.1 if eps is None else eps, 1.0)


@dataclass
class PositionalCost(CostModel):
    """Table-driven ``c_i(s, s')`` up to a finite depth, constant beyond it.

    ``table[i - 1]`` is an ``r x r`` symmetric array for position ``i``.
    """

    table: np.ndarray
    tail_default: float = 1.0
    name: str = field(default="table")

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=float)
        if self.table.ndim != 3 or self.table.shape[1] != self.table.shape[2]:
            raise ValueError("table must have shape (depth, r, r)")
        if np.any(self.table < 0) or self.tail_default < 0:
            raise ValueError("costs must be nonnegative")
        if not np.array_equal(self.table, self.table.transpose(0, 2, 1)):
            raise ValueError("position costs must be symmetric")

    @property
    def depth(self):
        return self.table.shape[0]

    def position_cost(self, i, s, s2):
        if i <= self.depth:
            return self.table[i - 1][s, s2]
        return np.full(np.shape(s), self.tail_default)

    def max_cost_from(self, i):
        rest = self.table[i - 1:] if i <= self.depth else self.table[:0]
        return float(max(rest.max(initial=0.0), self.tail_default))

    def tame_params(self, source, eps=None):
        from .source import symb_tame_params

        base = symb_tame_params(source, eps)
        return TameParams(base.eps, base.c * self.max_cost_from(1), base.warning)


def load_cost_table(path, r: int) -> PositionalCost:
    """Read ``i, sigma, sigma', value`` rows plus a ``tail_default`` row.

    Missing entries are 0; each entry fills both ``(s, s')`` and ``(s', s)``.
    """
    rows = {}
    tail = 1.0
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.replace("=", ",").split(",") if p.strip()]
        if parts[0] == "tail_default":
            tail = float(parts[1])
            continue
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected 'i, sigma, sigma', value'")
        i, s, s2, v = int(parts[0]), int(parts[1]), int(parts[2]), float(parts[3])
        for key in ((i, s, s2), (i, s2, s)):
            if key in rows and rows[key] != v:
                raise ValueError(f"{path}:{lineno}: asymmetric entry for position {i}")
            rows[key] = v
    depth = max((k[0] for k in rows), default=0)
    table = np.zeros((depth, r, r))
    for (i, s, s2), v in rows.items():
        if i < 1 or not (0 <= s < r and 0 <= s2 < r):
            raise ValueError(f"entry {(i, s, s2)} out of range")
        table[i - 1, s, s2] = v
    return PositionalCost(table, tail, name=f"table:{path}")


def parse_cost(spec: str, r: int = 2) -> CostModel:
    """``key``, ``symbol``, ``pos:<i0>`` or ``table:<file>``."""
    if spec == "key":
        return KeyCost()
    if spec == "symbol":
        return SymbolCost()
    if spec.startswith("pos:"):
        return PositionIndicator(int(spec[4:]))
    if spec.startswith("table:"):
        return load_cost_table(spec[6:], r)
    raise ValueError(f"unknown cost spec {spec!r}")


def beta_pairs(cost: CostModel, source: Source, us, ts,
               ctx: RunContext | None = None) -> np.ndarray:
    """``beta(us[i], ts[i])`` for many unrelated pairs at once."""
    us = np.asarray(us, dtype=float)
    ts = np.asarray(ts, dtype=float)
    if np.any(us == ts):
        raise IdenticalSeedsError("identical seeds")
    n = len(us)
    if not cost.needs_symbols:
        return np.ones(n)
    cap = ctx.depth_cap if ctx is not None else DEFAULT_DEPTH_CAP
    out = np.zeros(n)
    active = np.arange(n)
    a = np.zeros(n)
    b = np.ones(n)
    state = np.full(n, source.initial_state(), dtype=np.int64)
    j = 0
    while len(active) and j < cap:
        cuts = child_cuts(source, a, b, state)
        inner = cuts[:, 1:-1]
        s_t = (inner < ts[active, None]).sum(axis=1)
        s_u = (inner < us[active, None]).sum(axis=1)
        split = s_u != s_t
        out[active] += np.where(split, cost.position_cost(j + 1, s_u, s_t),
                                cost.position_cost(j + 1, s_t, s_t))
        keep = ~split
        idx = np.arange(len(active))[keep]
        a = cuts[idx, s_t[keep]]
        b = cuts[idx, s_t[keep] + 1]
        state = source.next_state(state[keep], s_t[keep])
        active = active[keep]
        j += 1
        narrow = (b - a) < MIN_WIDTH
        if narrow.any():
            break
    for i in active:
        # unresolved by descent: redo this pair on the single-pivot path
        out[i] = cost.many(source, ts[i], [us[i]], ctx)[0]
    return out


def beta(cost: CostModel, source: Source, u: float, t: float,
         ctx: RunContext | None = None) -> float:
    return cost(source, u, t, ctx)


# -- tameness diagnostics --------------------------------------------------------

@dataclass
class TameReport:
    checked: int
    violations: list  # (u, t, beta, bound)
    max_ratio: float  # max beta / (c (t-u)^-eps)

    @property
    def ok(self) -> bool:
        return not self.violations


def near_diagonal_pairs(levels: int = 40, per_level: int = 16):
    us, ts = [], []
    for h in 2.0 ** -np.arange(1, levels + 1) * 0.999:
        base = np.linspace(0.01, 0.99 - h, per_level)
        us.append(base)
        ts.append(base + h)
    return np.concatenate(us), np.concatenate(ts)


def tame_check(cost: CostModel, source: Source, params: TameParams, n: int,
               rng: np.random.Generator | None = None, max_report: int = 20) -> TameReport:
    """Test ``beta(u, t) <= c (t-u)^-eps`` on random and near-diagonal pairs."""
    if n < 1:
        raise ValueError("need at least one random pair")
    rng = rng if rng is not None else np.random.default_rng(0)
    x = rng.random((n, 2))
    u = x.min(axis=1)
    t = x.max(axis=1)
    keep = u < t
    du, dt = near_diagonal_pairs()
    u = np.concatenate([u[keep], du])
    t = np.concatenate([t[keep], dt])
    vals = beta_pairs(cost, source, u, t, RunContext(rng))
    bound = params.c * (t - u) ** (-params.eps)
    ratio = vals / bound
    bad = np.flatnonzero(ratio > 1 + 1e-12)
    viol = [(float(u[i]), float(t[i]), float(vals[i]), float(bound[i])) for i in bad[:max_report]]
    return TameReport(len(u), viol if len(bad) else [], float(ratio.max()))

