"""The limit cost S = sum_k I_k and the pivot chain that drives it.

The pivot chain is a sequence of nested intervals (L_k, R_k) that always
contain the target seed ``alpha``: a pivot seed V_k is drawn uniformly on the
current interval and replaces whichever endpoint lies on its side of
``alpha``.  I_k integrates the comparison cost against V_k over the interval
the pivot was drawn from.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc

from .cost import CostModel, KeyCost, RunContext
from .source import MIN_WIDTH, Source, TameParams, child_cuts, descend


# -- pivot chain -----------------------------------------------------------------

@dataclass
class PivotChain:
    """Entries k = 1..K: pivot V_k and the interval (L_k, R_k) it leaves behind."""

    alpha: float
    L: np.ndarray
    R: np.ndarray
    V: np.ndarray

    def __len__(self):
        return len(self.V)

    @property
    def intervals(self):
        """(L_k, R_k) for k = 0..K, starting from (0, 1)."""
        return list(zip(np.r_[0.0, self.L], np.r_[1.0, self.R]))


def step(L, R, V, alpha):
    below = V < alpha
    return np.where(below, V, L), np.where(below, R, V)


def sample_pivot_chain(rng: np.random.Generator | None, alpha: float,
                       depth: int | None = None, min_width: float | None = None,
                       pivots=None, max_depth: int = 10_000) -> PivotChain:
    """Draw a pivot chain.

    Stops after ``depth`` steps, or once ``R - L < min_width``, or when the
    injected ``pivots`` run out.  Injected pivots must lie in the current interval.
    """
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    if depth is None and min_width is None and pivots is None:
        raise ValueError("need a stop rule: depth, min_width or explicit pivots")
    L, R = 0.0, 1.0
    Ls, Rs, Vs = [], [], []
    k = 0
    while k < max_depth:
        if depth is not None and k >= depth:
            break
        if min_width is not None and R - L < min_width:
            break
        if pivots is not None:
            if k >= len(pivots):
                break
            v = float(pivots[k])
            if not L < v < R:
                raise ValueError(f"pivot {v} outside current interval ({L}, {R})")
        else:
            v = L + (R - L) * rng.random()
        L, R = (v, R) if v < alpha else (L, v)
        Ls.append(L)
        Rs.append(R)
        Vs.append(v)
        k += 1
    return PivotChain(alpha, np.array(Ls), np.array(Rs), np.array(Vs))


def width_moment_bound(p: float, k: int) -> float:
    """Bound on E (R_k - L_k)^p."""
    return ((2.0 - 2.0 ** -p) / (p + 1.0)) ** k


def integral_moment_bound(tame: TameParams, q: float, k: int) -> float:
    """Bound on E I_k^q for a cost that is tame with (eps, c), eps < 1."""
    e, c = tame.eps, tame.c
    s = q * (1.0 - e)
    return (2.0 ** e * c / (1.0 - e)) ** q * ((2.0 - 2.0 ** -s) / (s + 1.0)) ** (k - 1)


# -- I_p(t, x, y) -------------------------------------------------------------------

def _tail_weights(source: Source, D, cmax, p, pw, level, tame=None, terms=400):
    """Bound on the integral of beta^p over the still unresolved interval.

    A seed whose common prefix with t ends ``i`` levels below the current node
    costs at most ``D + (i + 1) * cmax``, and that ring of seeds has mass at most
    ``pw * q**i`` (geometric sources) or ``pi_{level + i}`` otherwise.
    """
    i = np.arange(terms, dtype=float)
    q = source.q_max
    if q is not None and q < 1:
        if float(p).is_integer():
            # binomial expansion in D; moments sum_i (i+1)^m q^i precomputed
            p = int(p)
            mom = ((i + 1.0)[None, :] ** np.arange(p + 1)[:, None] * q ** i).sum(axis=1)
            out = np.zeros(len(D))
            for m in range(p + 1):
                out += math.comb(p, m) * D ** (p - m) * cmax ** m * mom[m]
            return out * pw
        w = (D[:, None] + (i[None, :] + 1.0) * cmax) ** p
        return (w * pw[:, None] * q ** i[None, :]).sum(axis=1)
    w = (D[:, None] + (i[None, :] + 1.0) * cmax) ** p
    tame = tame or source_tame(source)
    m = level + i  # absolute depth of the ring
    ring = np.minimum(pw[:, None], tame.A * (m[None, :] + 1.0) ** -tame.gamma)
    head = (w * ring).sum(axis=1)
    g = tame.gamma - p
    if g <= 1:
        return np.full(len(D), np.inf)
    M = level + terms
    # integral tail of (D + x cmax)^p A x^-gamma, crude but monotone in M
    rest = tame.A * (D + (terms + 1.0) * max(cmax, 1e-300)) ** p * M ** (1 - tame.gamma) / (g - 1)
    return head + rest


def source_tame(source):
    from .source import symb_tame_params

    return symb_tame_params(source)


def integral_I_many(source: Source, cost: CostModel, t, x, y, p: float = 1.0,
                    tol: float = 1e-12, max_depth: int = 200):
    """Vectorized I_p(t, x, y) = int_x^y beta(u, t)^p du, by prefix sums.

    Seeds sharing exactly ``j`` symbols with ``t`` sit in one ring of the
    prefix chain of ``t``; within it the cost is constant per child, so the
    integral is a weighted sum of child-interval overlaps with (x, y).

    Returns ``(values, error_bounds)``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.broadcast_to(np.asarray(x, dtype=float), t.shape).copy()
    y = np.broadcast_to(np.asarray(y, dtype=float), t.shape).copy()
    if np.any(~((x <= t) & (t <= y))) or np.any(x >= y):
        raise ValueError("need x < y and x <= t <= y")
    n = len(t)
    if isinstance(cost, KeyCost):
        return y - x, np.zeros(n)
    val = np.zeros(n)
    err = np.zeros(n)
    a = np.zeros(n)
    b = np.ones(n)
    D = np.zeros(n)
    state = np.full(n, source.initial_state(), dtype=np.int64)
    active = np.arange(n)
    tame = None if (source.q_max is not None and source.q_max < 1) else source_tame(source)
    for j in range(max_depth):
        if not len(active):
            break
        ta, xa, ya = t[active], x[active], y[active]
        cuts = child_cuts(source, a, b, state)
        s_t = (cuts[:, 1:-1] < ta[:, None]).sum(axis=1)
        ov = np.clip(np.minimum(cuts[:, 1:], ya[:, None]) - np.maximum(cuts[:, :-1], xa[:, None]), 0, None)
        rows = np.arange(len(active))
        for s in range(source.r):
            c = np.asarray(cost.position_cost(j + 1, np.full(len(active), s), s_t), dtype=float)
            c = np.where(s_t == s, 0.0, c)
            val[active] += np.where(s_t == s, 0.0, ov[:, s] * (D + c) ** p)
        D = D + np.asarray(cost.position_cost(j + 1, s_t, s_t), dtype=float)
        a, b = cuts[rows, s_t], cuts[rows, s_t + 1]
        state = source.next_state(state, s_t)
        own = ov[rows, s_t]
        cmax = cost.max_cost_from(j + 2)
        if cmax == 0.0:
            val[active] += own * D ** p
            done = np.ones(len(active), dtype=bool)
        else:
            tail = np.minimum(_tail_weights(source, D, cmax, p, b - a, j + 1, tame),
                              np.inf)
            done = (tail <= tol) | (own == 0)
            narrow = (b - a) < MIN_WIDTH
            last = j == max_depth - 1
            give_up = (narrow | last) & ~done
            err[active[give_up]] += tail[give_up]
            done |= give_up
        keep = ~done
        active = active[keep]
        a, b, D, state = a[keep], b[keep], D[keep], state[keep]
    return val, err


def integral_I(source: Source, cost: CostModel, t: float, x: float, y: float,
               p: float = 1.0, tol: float = 1e-13) -> float:
    """I_p(t, x, y) for a single pivot seed ``t`` strictly inside (x, y)."""
    if not (0 <= x < y <= 1):
        raise ValueError("need 0 <= x < y <= 1")
    if not x < t < y:
        raise ValueError(f"pivot seed {t} outside ({x}, {y})")
    return float(integral_I_many(source, cost, [t], [x], [y], p, tol)[0][0])


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


def adaptive_quad(f, a: float, b: float, tol: float = 1e-10, breaks=(),
                  max_rounds: int = 60):
    """Adaptive Gauss-Legendre on [a, b] for a vectorized integrand ``f``.

    Panels are bisected until a panel's estimate agrees with the sum over its
    halves to within its share of ``tol``.  Returns ``(value, error_estimate)``.
    """
    pts = np.unique(np.r_[a, [z for z in breaks if a < z < b], b])
    panels = list(zip(pts[:-1], pts[1:]))
    total = 0.0
    err = 0.0
    span = b - a
    for _ in range(max_rounds):
        if not panels:
            break
        lo = np.array([p[0] for p in panels])
        hi = np.array([p[1] for p in panels])
        mid = 0.5 * (lo + hi)
        segs = np.stack([np.c_[lo, hi], np.c_[lo, mid], np.c_[mid, hi]], axis=1)  # (m, 3, 2)
        half = 0.5 * (segs[..., 1] - segs[..., 0])
        centre = 0.5 * (segs[..., 1] + segs[..., 0])
        nodes = centre[..., None] + half[..., None] * _GL_NODES
        vals = np.asarray(f(nodes.ravel()), dtype=float).reshape(nodes.shape)
        est = (vals * _GL_WEIGHTS).sum(axis=-1) * half
        whole, halves = est[:, 0], est[:, 1] + est[:, 2]
        e = np.abs(whole - halves)
        ok = (e <= tol * (hi - lo) / span) | ((hi - lo) < 1e-15 * max(1.0, span))
        total += halves[ok].sum()
        err += e[ok].sum()
        panels = [(l, m) for l, m, k in zip(lo, mid, ok) if not k] + \
                 [(m, h) for m, h, k in zip(mid, hi, ok) if not k]
    for lo_, hi_ in panels:  # rounds exhausted: keep last estimate
        v = f(np.array([0.5 * (lo_ + hi_)]))[0] * (hi_ - lo_)
        total += v
        err += abs(v)
    return total, err


def integral_I_quad(source: Source, cost: CostModel, t: float, x: float, y: float,
                    p: float = 1.0, tol: float = 1e-10, tame: TameParams | None = None):
    """I_p(t, x, y) by adaptive quadrature of pointwise ``beta``.

    Independent of :func:`integral_I_many`: it only evaluates ``beta`` at
    points.  ``beta(., t)`` can only jump where t's prefix intervals end, so
    those endpoints are panel breaks (Gauss nodes never see a jump sitting
    in the outer edge of a panel).  Panels are also graded geometrically
    toward the singular point ``t``; the innermost sliver of width ``h`` on
    each side is bounded by tameness, ``c^p h^(1 - p eps) / (1 - p eps)``.
    Returns ``(value, error_estimate)``.
    """
    if not x < t < y:
        raise ValueError(f"pivot seed {t} outside ({x}, {y})")
    tame = tame or cost.tame_params(source)
    if p * tame.eps >= 1:
        raise ValueError("cost^p not integrable under the given tameness")
    ctx = RunContext(np.random.default_rng(0), depth_cap=4000)
    path = descend(source, np.array([t]), 200)
    jumps = np.r_[path.a[0], path.b[0]]

    def f(u):
        return cost.many(source, t, u, ctx) ** p

    total, err = 0.0, 0.0
    for lo, hi, side in ((x, t, -1), (t, y, 1)):
        width = hi - lo
        h = width
        grid = []
        while h > 1e-13 * max(width, 1e-300) and h > 1e-300:
            grid.append(t + side * h)
            h *= 0.5
        sliver = h
        grid.append(t + side * sliver)
        ends = sorted(grid)
        a0, b0 = (ends[0], ends[-1])
        v, e = adaptive_quad(f, a0, b0, tol / 2, breaks=np.r_[ends, jumps])
        total += v
        err += e + tame.c ** p * sliver ** (1 - p * tame.eps) / (1 - p * tame.eps)
    return total, err


# -- limit sampler ------------------------------------------------------------------

@dataclass
class TruncationPolicy:
    """How far to follow the pivot chain when sampling S.

    ``kappa`` inflates the bound on the conditional mean of the unsummed
    remainder; by Markov's inequality the remainder exceeds the reported
    bound with probability at most ``1 / kappa``.
    """

    tame: TameParams
    delta: float = 1e-6
    max_depth: int = 2000
    kappa: float = 4.0

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if not self.tame.eps < 1:
            raise ValueError("tameness exponent must be < 1")

    @classmethod
    def for_cost(cls, cost: CostModel, source: Source, delta: float = 1e-6, **kw):
        return cls(cost.tame_params(source), delta, **kw)

    def remainder(self, width):
        """Bound on the unsummed part of S once the interval has this width."""
        e, c = self.tame.eps, self.tame.c
        ratio = (2.0 - 2.0 ** -(1.0 - e)) / (2.0 - e)
        return self.kappa * 2.0 ** e * c / (1.0 - e) * np.asarray(width) ** (1.0 - e) / (1.0 - ratio)


@dataclass
class LimitSample:
    value: float
    tail_bound: float
    depth: int
    flagged: bool


def continue_chain(rng, source, cost, alpha, policy: TruncationPolicy,
                   pivots=(), L=0.0, R=1.0):
    """Accumulate I_k along given ``pivots``, then extend with fresh uniforms.

    Returns a :class:`LimitSample` plus the list of pivots used.
    """
    value = 0.0
    err = 0.0
    used = []
    inner = policy.delta * 1e-3
    k = 0
    it = iter(pivots)
    while True:
        bound = float(policy.remainder(R - L)) + err
        if (k >= len(pivots) and bound <= policy.delta) or k >= policy.max_depth or R <= L:
            break
        v = next(it, None)
        if v is None:
            v = L + (R - L) * rng.random()
            if not L < v < R:  # interval below float resolution
                break
        Ik, ek = integral_I_many(source, cost, [v], [L], [R], 1.0, inner)
        value += Ik[0]
        err += ek[0]
        used.append(v)
        L, R = (v, R) if v < alpha else (L, v)
        k += 1
    bound = float(policy.remainder(R - L)) + err
    return LimitSample(value, bound, k, bound > policy.delta), used


def sample_S(rng: np.random.Generator, source: Source, cost: CostModel, alpha: float,
             policy: TruncationPolicy, pivots=()) -> LimitSample:
    """One draw of S, truncated once the remainder bound drops below delta."""
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    return continue_chain(rng, source, cost, alpha, policy, pivots)[0]


def sample_S_many(rng: np.random.Generator, source: Source, cost: CostModel,
                  alpha: float, policy: TruncationPolicy, reps: int):
    """``reps`` independent draws of S, advancing all chains in lockstep.

    Returns arrays ``(values, tail_bounds, depths)``.
    """
    L = np.zeros(reps)
    R = np.ones(reps)
    val = np.zeros(reps)
    err = np.zeros(reps)
    depth = np.zeros(reps, dtype=np.int64)
    active = np.arange(reps)
    inner = policy.delta * 1e-3
    for _ in range(policy.max_depth):
        if not len(active):
            break
        w = R[active] - L[active]
        V = L[active] + w * rng.random(len(active))
        Ik, ek = integral_I_many(source, cost, V, L[active], R[active], 1.0, inner)
        val[active] += Ik
        err[active] += ek
        depth[active] += 1
        L[active], R[active] = step(L[active], R[active], V, alpha)
        bound = policy.remainder(R[active] - L[active]) + err[active]
        active = active[bound > policy.delta]
    bounds = policy.remainder(R - L) + err
    return val, bounds, depth


def sample_dickman(rng: np.random.Generator | None, delta: float = 1e-12,
                   uniforms=None, max_terms: int = 100_000) -> float:
    """1 + U_1 + U_1 U_2 + ..., stopping once the running product is below delta."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    total, prod = 1.0, 1.0
    it = iter(uniforms) if uniforms is not None else None
    for _ in range(max_terms):
        u = next(it, None) if it is not None else rng.random()
        if u is None:
            break
        prod *= u
        total += prod
        if prod < delta:
            break
    return total


def sample_dickman_many(rng: np.random.Generator, reps: int, delta: float = 1e-12):
    total = np.ones(reps)
    prod = np.ones(reps)
    active = np.arange(reps)
    while len(active):
        prod[active] *= rng.random(len(active))
        total[active] += prod[active]
        active = active[prod[active] >= delta]
    return total


# -- occupation measure of the chain -----------------------------------------------

def _check_rect(alpha, rect):
    x1, x2, y1, y2 = map(float, rect)
    if not (0 <= x1 < x2 <= alpha <= y1 < y2 <= 1):
        raise ValueError("rectangle must satisfy 0 <= x1 < x2 <= alpha <= y1 < y2 <= 1")
    return x1, x2, y1, y2


def nu_closed(alpha: float, rect) -> float:
    """nu([x1, x2] x [y1, y2]) from the atom, edge densities and interior density."""
    x1, x2, y1, y2 = _check_rect(alpha, rect)
    if x2 == y1:  # touches the diagonal: infinitely many small intervals
        return math.inf
    total = 2.0 * math.log((y1 - x1) * (y2 - x2) / ((y1 - x2) * (y2 - x1)))
    at0, at1 = x1 == 0.0, y2 == 1.0
    if at1:
        total += math.log((1 - x1) / (1 - x2))
    if at0:
        total += math.log(y2 / y1)
    if at0 and at1:
        total += 1.0
    return total


def nu_mc(rng: np.random.Generator, alpha: float, rect, reps: int):
    """Monte Carlo mean and standard error of #{k >= 0 : (L_k, R_k) in rect}."""
    x1, x2, y1, y2 = _check_rect(alpha, rect)
    L = np.zeros(reps)
    R = np.ones(reps)
    count = np.zeros(reps)
    gap = y1 - x2
    active = np.arange(reps)
    while len(active):
        l, r = L[active], R[active]
        count[active] += (x1 <= l) & (l <= x2) & (y1 <= r) & (r <= y2)
        V = l + (r - l) * rng.random(len(active))
        L[active], R[active] = step(l, r, V, alpha)
        active = active[(R[active] - L[active]) >= gap]
    return count.mean(), count.std(ddof=1) / math.sqrt(reps)


def nu_measure(alpha: float, rect, method: str = "closed", reps: int = 100_000,
               rng: np.random.Generator | None = None):
    """nu of a rectangle; ``method="mc"`` returns ``(estimate, stderr)``."""
    if method == "closed":
        return nu_closed(alpha, rect)
    if method == "mc":
        return nu_mc(rng if rng is not None else np.random.default_rng(0), alpha, rect, reps)
    raise ValueError(f"unknown method {method!r}")


def f_density(k: int, x, alpha: float = 1.0):
    """Density of L_k on {R_k = 1}: [-ln(1-x)]^(k-1) / (k-1)!, for x < alpha."""
    x = np.asarray(x, dtype=float)
    if k < 1 or np.any((x < 0) | (x >= alpha)):
        raise ValueError("need k >= 1 and 0 <= x < alpha")
    return (-np.log1p(-x)) ** (k - 1) / math.factorial(k - 1)


def g_density(k: int, y, alpha: float = 0.0):
    """Density of R_k on {L_k = 0}: (-ln y)^(k-1) / (k-1)!, for y > alpha."""
    y = np.asarray(y, dtype=float)
    if k < 1 or np.any((y <= alpha) | (y > 1)):
        raise ValueError("need k >= 1 and alpha < y <= 1")
    return (-np.log(y)) ** (k - 1) / math.factorial(k - 1)


def chain_marginals(k: int, alpha: float, x=None, y=None):
    """Evaluate ``f_k(x)`` or ``g_k(y)``; with a pair, integrate over the interval.

    Passing ``y=(y1, y2)`` returns P(L_k = 0, y1 <= R_k <= y2); likewise
    ``x=(x1, x2)`` returns P(R_k = 1, x1 <= L_k <= x2).
    """
    if (x is None) == (y is None):
        raise ValueError("give exactly one of x, y")
    if y is not None:
        if np.ndim(y) == 1 and len(y) == 2:
            y1, y2 = map(float, y)
            g_density(k, [y1, y2], alpha)
            return float(gammainc(k, -math.log(y1)) - gammainc(k, -math.log(y2)))
        return g_density(k, y, alpha)
    if np.ndim(x) == 1 and len(x) == 2:
        x1, x2 = map(float, x)
        f_density(k, [x1], alpha)
        if x2 > alpha:
            raise ValueError("need x2 <= alpha")
        return float(gammainc(k, -math.log1p(-x2)) - gammainc(k, -math.log1p(-x1)))
    return f_density(k, x, alpha)


def marginal_mc(rng: np.random.Generator, alpha: float, k: int, lo: float, hi: float,
                reps: int, side: str = "upper"):
    """MC estimate (mean, stderr) of P(L_k = 0, R_k in [lo, hi]) (side="upper")
    or P(R_k = 1, L_k in [lo, hi]) (side="lower")."""
    L = np.zeros(reps)
    R = np.ones(reps)
    for _ in range(k):
        L, R = step(L, R, L + (R - L) * rng.random(reps), alpha)
    if side == "upper":
        hit = (L == 0) & (lo <= R) & (R <= hi)
    elif side == "lower":
        hit = (R == 1) & (lo <= L) & (L <= hi)
    else:
        raise ValueError("side must be 'upper' or 'lower'")
    m = hit.mean()
    return m, math.sqrt(m * (1 - m) / reps)


__all__ = [
    "PivotChain", "sample_pivot_chain", "width_moment_bound", "integral_moment_bound",
    "integral_I", "integral_I_many", "integral_I_quad", "adaptive_quad",
    "TruncationPolicy", "LimitSample", "sample_S", "sample_S_many", "continue_chain",
    "sample_dickman", "sample_dickman_many", "nu_measure", "nu_closed", "nu_mc",
    "f_density", "g_density", "chain_marginals", "marginal_mc",
]
