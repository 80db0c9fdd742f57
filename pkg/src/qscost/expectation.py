"""Expected limit cost E S: closed form, prefix-tree series and double integral.

For any symmetric cost

    E S = 2 * int_{0<u<t<1} beta(u, t) / ((alpha v t) - (alpha ^ u)) du dt,

and for the symbol cost this splits over prefixes w into a sum of
``p_w * L(|alpha - mu_w| / p_w)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .cost import CostModel, KeyCost, SymbolCost
from .source import FundamentalInterval, Source, child_cuts, log_power_constant, pi_tail, symb_tame_params


@dataclass
class ExpectationResult:
    value: float
    method: str
    error: float
    terms: int
    flagged: bool = False
    meta: dict = field(default_factory=dict)

    def as_dict(self):
        return {"value": self.value, "method": self.method,
                "error_estimate": self.error, "terms": self.terms,
                "flagged": self.flagged, **self.meta}


def _xlogx(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


def H_fn(y):
    """Entropy-like helper with the convention 0 ln 0 = 0; branch split at 1/2."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("H is defined for y >= 0")
    yp = 0.5 + y
    ym = 0.5 - y
    low = -(_xlogx(yp) + _xlogx(np.clip(ym, 0, None)))
    with np.errstate(divide="ignore", invalid="ignore"):
        high = np.where(ym == 0, 0.0, ym * (np.log(yp) - np.log(np.abs(np.where(ym == 0, 1.0, ym)))))
    out = np.where(y <= 0.5, low, high)
    return out if out.ndim else float(out)


def L_fn(y):
    """L(y) = 2 (1 + H(y))."""
    out = 2.0 * (1.0 + np.asarray(H_fn(y)))
    return out if out.ndim else float(out)


def expected_key_closed(alpha: float) -> float:
    """E S for key comparisons: 2 [1 - a ln a - (1 - a) ln(1 - a)]."""
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    return float(2.0 * (1.0 - _xlogx(alpha) - _xlogx(1.0 - alpha)))


# -- per-prefix terms ---------------------------------------------------------------

def prefix_term(a, b, alpha):
    """p L(|alpha - mu| / p) for fundamental intervals (a, b)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    p = b - a
    return p * L_fn(np.abs(alpha - 0.5 * (a + b)) / p)


def prefix_term_direct(a, b, alpha):
    """Twice the integral of 1/((alpha v t) - (alpha ^ u)) over a < u < t < b.

    Integrated piecewise by hand: with alpha left of the interval the kernel is
    1/(t - alpha), right of it 1/(alpha - u); inside it splits into two
    triangles worth (alpha - a) and (b - alpha) and the rectangle
    u < alpha < t worth p ln p - A ln A - B ln B.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    p = b - a
    with np.errstate(divide="ignore", invalid="ignore"):
        left = p - np.where(alpha < a, (a - alpha) * np.log((b - alpha) / np.where(alpha < a, a - alpha, 1.0)), 0.0)
        right = p - np.where(alpha > b, (alpha - b) * np.log((alpha - a) / np.where(alpha > b, alpha - b, 1.0)), 0.0)
    A = np.clip(alpha - a, 0, None)
    B = np.clip(b - alpha, 0, None)
    inside = p + _xlogx(p) - _xlogx(A) - _xlogx(B)
    out = np.where(alpha <= a, left, np.where(alpha >= b, right, inside))
    return 2.0 * out


def J_of_prefix(interval: FundamentalInterval, alpha: float, debug: bool = False):
    """Contribution of one prefix to E S.

    With ``debug=True`` also returns the same quantity by 2-D quadrature of
    the kernel over the prefix's triangle, as ``(closed, quadrature)``.
    """
    val = float(prefix_term(interval.a, interval.b, alpha))
    if not debug:
        return val
    a, b = interval.a, interval.b

    def kern(u, t):
        return 1.0 / (max(t, alpha) - min(u, alpha))

    pts = [alpha] if a < alpha < b else None
    inner_opts = {"epsabs": 1e-11, "epsrel": 1e-9, "limit": 200}

    def outer(t):
        return integrate.quad(lambda u: kern(u, t), a, t, **inner_opts)[0]

    q = integrate.quad(outer, a, b, points=pts, epsabs=1e-9, epsrel=1e-8, limit=200)[0]
    return val, 2.0 * q


# -- prefix-tree traversal -----------------------------------------------------------

def envelope(c: float, eps: float, rel_alpha):
    """Bound on E S over the unit triangle for costs with beta <= c (t-u)^-eps.

    ``rel_alpha`` is clipped to [0, 1]; outside the interval the kernel only
    gets smaller.
    """
    x = np.clip(np.asarray(rel_alpha, dtype=float), 0.0, 1.0)
    s = x ** (1 - eps) + (1 - x) ** (1 - eps)
    return 2.0 * c * ((s - 1.0) / (eps * (1 - eps)) + s / (1 - eps) ** 2)


@dataclass
class _Envelope:
    """Subtree bounds for the symbol-cost prefix sum of one source."""

    source: Source
    eps: float
    c: float
    relative: bool  # bound scales with p (geometric) or with p^(1-eps)

    @classmethod
    def for_source(cls, source: Source):
        q = source.q_max
        if q is not None and q < 1:
            b = 1.0 / q
            grid = np.linspace(0.02, 0.9, 45)
            best = min(grid, key=lambda e: float(envelope(log_power_constant(b, e), e, 0.5)))
            return cls(source, float(best), log_power_constant(b, float(best)), True)
        tame = symb_tame_params(source)
        return cls(source, tame.eps, tame.c, False)

    def subtree(self, a, b, alpha):
        """Bound on the sum over a node and all its descendants."""
        p = b - a
        rel = (alpha - a) / p
        scale = p if self.relative else self.c * p ** (1 - self.eps)
        c = self.c if self.relative else 1.0
        return scale * envelope(c, self.eps, rel)

    def descendants_away(self, a, b, depth, alpha):
        """Bound on strict descendants of nodes that do not contain alpha."""
        p = b - a
        d = np.maximum(a - alpha, alpha - b)
        q = self.source.q_max
        with np.errstate(divide="ignore"):
            if q is not None and q < 1:
                return 2.0 * p * p * q / (d * (1 - q))
            tails = np.array([pi_tail(self.source, int(k)) for k in np.atleast_1d(depth)])
            return 2.0 * p * np.minimum(p, tails) / d


def _traverse(source: Source, alpha: float, tol: float, term, max_depth: int = 200,
              max_nodes: int = 50_000_000, weight=None):
    """Sum ``term`` over the prefix tree, pruning subtrees with certified bounds.

    ``term(a, b, cuts, depth)`` is the contribution of the nodes (a, b) at
    ``depth`` whose children have boundaries ``cuts``.  ``weight(i)`` bounds
    the positional cost from position ``i`` on (1 for symbol counting) and
    scales the symbol-cost subtree bounds.  A subtree away from alpha is
    dropped once its bound is below ``tol/2 * p_w``; a subtree containing
    alpha once its bound is below ``tol/4`` (at most two such subtrees are
    ever dropped).
    """
    env = _Envelope.for_source(source)
    weight = weight or (lambda i: 1.0)
    a = np.array([0.0])
    b = np.array([1.0])
    state = np.array([source.initial_state()], dtype=np.int64)
    partial = []
    err = 0.0
    nodes = 0
    flagged = False
    r = source.r
    for depth in range(max_depth + 1):
        if not len(a):
            break
        nodes += len(a)
        cuts = child_cuts(source, a, b, state)
        partial.append(math.fsum(term(a, b, cuts, depth)))
        w = weight(depth + 2)
        contains = (a <= alpha) & (alpha <= b)
        if w == 0:
            bound = np.zeros(len(a))
        else:
            rest = np.clip(env.subtree(a, b, alpha) - prefix_term(a, b, alpha), 0.0, None)
            away = np.where(contains, np.inf,
                            np.minimum(rest, env.descendants_away(a, b, depth, alpha)))
            bound = w * np.where(contains, rest, away)
        drop = np.where(contains, bound <= tol / 4, bound <= 0.5 * tol * (b - a))
        if depth == max_depth or nodes > max_nodes:
            flagged = bool(np.any(~drop))
            drop[:] = True
        err += math.fsum(bound[drop])
        keep = ~drop
        if not keep.any():
            break
        cuts, state = cuts[keep], state[keep]
        a = cuts[:, :-1].ravel()
        b = cuts[:, 1:].ravel()
        state = source.next_state(np.repeat(state, r), np.tile(np.arange(r), len(state)))
        good = b > a
        a, b, state = a[good], b[good], state[good]
    return math.fsum(partial), err, nodes, flagged, env


def _positional_term(cost: CostModel, alpha: float):
    """Node contribution of a positional cost, integrated exactly.

    A pair (u, t) splitting into children s <= s' of a node at depth j pays
    c_{j+1}(s, s').  The kernel integral over each pair of children comes
    from triangles over contiguous runs of children by inclusion-exclusion.
    """
    def term(a, b, cuts, depth):
        r = cuts.shape[1] - 1

        def span(i, j):  # triangle over children i..j
            if i > j:
                return 0.0
            return prefix_term_direct(cuts[:, i], cuts[:, j + 1], alpha)

        out = np.zeros(len(a))
        for s in range(r):
            for s2 in range(s, r):
                c = float(cost.position_cost(depth + 1, np.array([s]), np.array([s2]))[0])
                if c == 0:
                    continue
                if s == s2:
                    out += c * span(s, s)
                else:
                    out += c * (span(s, s2) - span(s, s2 - 1) - span(s + 1, s2) + span(s + 1, s2 - 1))
        return out

    return term


def expected_S_series(source: Source, alpha: float, tol: float = 1e-4,
                      max_depth: int = 200) -> ExpectationResult:
    """E S for symbol comparisons as sum_w p_w L(|alpha - mu_w| / p_w)."""
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    val, err, nodes, flagged, env = _traverse(
        source, alpha, tol, lambda a, b, cuts, depth: prefix_term(a, b, alpha), max_depth)
    return ExpectationResult(val, "series", err, nodes, flagged,
                             {"bound": "tame-envelope", "envelope_eps": env.eps})


# -- double integral ---------------------------------------------------------------

def _duffy_integral(source, cost, alpha, tol):
    """2 * int beta * kernel over the triangle, singularity removed by substitution.

    Three pieces: u < t < alpha (u = alpha - a, t = alpha - a v), alpha < u < t
    (t = alpha + b, u = alpha + b v) and u < alpha < t with
    (alpha - u, t - alpha) = (r s, r (1 - s)).  Each Jacobian cancels the kernel.
    """
    level = float(cost.many(source, 0.75, [0.25])[0])  # constant off the diagonal

    def beta(u, t):
        return level

    opts = {"epsabs": tol / 8, "epsrel": 1e-12, "limit": 400}
    total, err = 0.0, 0.0

    def add(res):
        nonlocal total, err
        v, e = res
        if not (math.isfinite(v) and math.isfinite(e)):
            raise ArithmeticError("non-integrable configuration: quadrature diverged")
        total += v
        err += e

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            if alpha > 0:
                add(integrate.quad(
                    lambda a: integrate.quad(lambda v: beta(alpha - a, alpha - a * v), 0, 1, **opts)[0],
                    0, alpha, **opts))
            if alpha < 1:
                add(integrate.quad(
                    lambda b: integrate.quad(lambda v: beta(alpha + b * v, alpha + b), 0, 1, **opts)[0],
                    0, 1 - alpha, **opts))

            def rect(r):
                lo = max(0.0, 1.0 - (1.0 - alpha) / r)
                hi = min(1.0, alpha / r)
                if hi <= lo:
                    return 0.0
                return integrate.quad(lambda s: beta(alpha - r * s, alpha + r * (1 - s)), lo, hi, **opts)[0]

            if 0 < alpha < 1:
                pts = sorted({alpha, 1 - alpha})
                add(integrate.quad(rect, 0, 1, points=pts, **opts))
        except integrate.IntegrationWarning as exc:
            raise ArithmeticError(f"non-integrable configuration or quadrature failure: {exc}") from exc
    return 2.0 * total, 2.0 * err


def expected_S_integral(source: Source, cost: CostModel, alpha: float,
                        tol: float = 1e-8, max_depth: int = 200,
                        quadrature: str = "auto") -> ExpectationResult:
    """E S from the double integral of cost times kernel.

    Costs that look at symbols are split over the prefix tree: the kernel is
    integrated in closed form over each node's child triangles and child-pair
    rectangles (:func:`prefix_term_direct`), with the same certified pruning
    as the series.  Costs that are constant off the diagonal use adaptive
    quadrature after substitutions that cancel the kernel's singularity at
    (alpha, alpha).
    """
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if quadrature not in ("auto", "duffy"):
        raise ValueError(f"unknown quadrature {quadrature!r}")
    if cost.needs_symbols and quadrature == "auto":
        if isinstance(cost, SymbolCost):
            def term(a, b, cuts, depth):
                return prefix_term_direct(a, b, alpha)
        else:
            term = _positional_term(cost, alpha)
        val, err, nodes, flagged, env = _traverse(source, alpha, tol, term, max_depth,
                                                  weight=cost.max_cost_from)
        return ExpectationResult(val, "integral", err, nodes, flagged,
                                 {"bound": "tame-envelope", "envelope_eps": env.eps})
    if cost.needs_symbols:
        raise ValueError("quadrature needs a cost that is constant off the diagonal; "
                         "symbol-dependent costs jump along prefix boundaries")
    val, err = _duffy_integral(source, cost, alpha, tol)
    return ExpectationResult(val, "integral", err, 3, meta={"quadrature": "duffy"})


def expected_S(source: Source, cost: CostModel, alpha: float, method: str = "auto",
               tol: float = 1e-6) -> ExpectationResult:
    """Dispatch to one of the evaluators (``closed``, ``series``, ``integral``)."""
    if method == "auto":
        method = "closed" if isinstance(cost, KeyCost) else (
            "series" if isinstance(cost, SymbolCost) else "integral")
    if method == "closed":
        if not isinstance(cost, KeyCost):
            raise ValueError("closed form exists only for the key cost")
        return ExpectationResult(expected_key_closed(alpha), "closed", 0.0, 1)
    if method == "series":
        if not isinstance(cost, SymbolCost):
            raise ValueError("series form exists only for the symbol cost")
        return expected_S_series(source, alpha, tol)
    if method == "integral":
        return expected_S_integral(source, cost, alpha, tol)
    raise ValueError(f"unknown method {method!r}")


def expected_quickrand(source: Source, cost: CostModel, panels: int = 64, order: int = 4,
                       method: str = "auto", tol: float = 1e-3) -> ExpectationResult:
    """Average of E S over a uniform target quantile, by composite Gauss-Legendre.

    ``panels=1, order=1`` is the midpoint rule at alpha = 1/2.
    """
    if panels < 1 or order < 1:
        raise ValueError("need at least one panel and one node")
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    total, err, terms = 0.0, 0.0, 0
    h = 1.0 / panels
    for lo in edges[:-1]:
        for x, w in zip(nodes, weights):
            res = expected_S(source, cost, float(lo + h * (x + 1) / 2), method, tol)
            total += w * h / 2 * res.value
            err += w * h / 2 * res.error
            terms += 1
    return ExpectationResult(total, f"quickrand/{res.method}", err, terms,
                             meta={"panels": panels, "order": order})
