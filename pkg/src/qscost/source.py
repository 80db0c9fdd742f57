"""Finite-alphabet probabilistic sources.

A source is realized as a strictly monotone map ``M`` from seeds ``u`` in
(0, 1) to infinite symbol strings.  The map is never materialized; instead
the prefix tree of fundamental intervals is descended on demand.  Every
source carries a small integer *state* summarizing whatever the next-symbol
law depends on (nothing for memoryless sources, the previous symbol for
Markov sources, the trailing run length of the distinguished symbol for
intermittent sources), which lets the tree be walked level by level on whole
numpy arrays of nodes at once.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

PROB_ATOL = 1e-12
DEFAULT_DEPTH_CAP = 64
MIN_WIDTH = 1e-15


class InvalidPrefixError(ValueError):
    """A prefix uses a symbol outside the alphabet."""


@dataclass(frozen=True)
class FundamentalInterval:
    """Seeds whose words start with a given prefix: the interval (a, b)."""

    a: float
    b: float

    def __post_init__(self):
        if not 0.0 <= self.a < self.b <= 1.0:
            raise ValueError(f"need 0 <= a < b <= 1, got ({self.a}, {self.b})")

    @property
    def p(self) -> float:
        return self.b - self.a

    @property
    def mid(self) -> float:
        return 0.5 * (self.a + self.b)

    def __contains__(self, u: float) -> bool:
        return self.a < u < self.b


@dataclass(frozen=True)
class TameParams:
    """Constants (eps, c) with ``beta(u, t) <= c * (t - u) ** -eps``.

    ``warning`` is set when the parameters are formally valid but some
    downstream quantity (series for E S, a.s. convergence) is not covered.
    """

    eps: float
    c: float
    warning: str | None = None

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError(f"tameness exponent must lie in (0, 1), got {self.eps}")
        if self.c <= 0:
            raise ValueError(f"tameness constant must be positive, got {self.c}")

    @property
    def gamma(self) -> float:
        return 1.0 / self.eps

    @property
    def A(self) -> float:
        return self.c ** self.gamma


def _check_prob_vector(p, name):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or len(p) < 2:
        raise ValueError(f"{name} must be a vector over at least 2 symbols")
    if np.any(p <= 0):
        raise ValueError(f"{name} must be strictly positive")
    if abs(p.sum() - 1.0) > PROB_ATOL:
        raise ValueError(f"{name} must sum to 1 (got {p.sum()!r})")
    return p


class Source:
    """Base class.  Subclasses define the state machine of the next-symbol law.

    Attributes
    ----------
    r : int
        Alphabet size; symbols are ``0 .. r-1`` in natural order.
    """

    r: int
    kind: str

    # -- state machine (vectorized) -------------------------------------------
    def initial_state(self) -> int:
        return 0

    def probs(self, states: np.ndarray) -> np.ndarray:
        """Conditional next-symbol probabilities, shape ``(len(states), r)``."""
        raise NotImplementedError

    def next_state(self, states: np.ndarray, symbols: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # -- geometry ------------------------------------------------------------
    @property
    def q_max(self) -> float | None:
        """Uniform bound on every conditional probability, or None if none < 1 exists.

        When available, ``p_v <= p_w * q_max ** (|v| - |w|)`` for every
        extension ``v`` of ``w``.
        """
        return None

    def describe(self) -> dict:
        raise NotImplementedError

    def _validate_prefix(self, prefix) -> tuple[int, ...]:
        prefix = tuple(int(s) for s in prefix)
        for s in prefix:
            if not 0 <= s < self.r:
                raise InvalidPrefixError(f"symbol {s} outside alphabet 0..{self.r - 1}")
        return prefix

    def conditional_distribution(self, prefix: Sequence[int] = ()) -> np.ndarray:
        """Law of the next symbol given that the word starts with ``prefix``."""
        prefix = self._validate_prefix(prefix)
        state = np.array([self.initial_state()])
        for s in prefix:
            state = self.next_state(state, np.array([s]))
        return self.probs(state)[0].copy()

    def refine_interval(self, prefix: Sequence[int] = ()) -> FundamentalInterval:
        """Fundamental interval of ``prefix``, by descent from (0, 1)."""
        prefix = self._validate_prefix(prefix)
        a, b = 0.0, 1.0
        state = np.array([self.initial_state()])
        for s in prefix:
            cuts = _child_cuts(a, b, self.probs(state)[0])
            a, b = cuts[s], cuts[s + 1]
            state = self.next_state(state, np.array([s]))
        return FundamentalInterval(float(a), float(b))

    def symbols_from_seed(self, u: float, k: int) -> tuple[int, ...]:
        """First ``k`` symbols of ``M(u)``.

        A seed sitting exactly on a child boundary goes to the lower child.
        """
        if not 0.0 < u < 1.0:
            raise ValueError(f"seed must lie in (0, 1), got {u}")
        syms = descend(self, np.array([u], dtype=float), k).symbols
        return tuple(int(s) for s in syms[0])

    def pi_k(self, k: int) -> float:
        """Largest fundamental probability among prefixes of length ``k``."""
        if k < 0:
            raise ValueError("k must be nonnegative")
        return float(self._pi_seq(k)[k])

    def _pi_seq(self, kmax: int) -> np.ndarray:
        raise NotImplementedError


def _child_cuts(a, b, probs):
    # cuts[0] = a and cuts[-1] = b exactly, so children tile the parent.
    cum = np.concatenate(([0.0], np.cumsum(probs)))
    cuts = a + (b - a) * cum
    cuts[0] = a
    cuts[-1] = b
    return cuts


class Memoryless(Source):
    kind = "memoryless"

    def __init__(self, probs):
        self.p = _check_prob_vector(probs, "probs")
        self.r = len(self.p)

    def probs(self, states):
        return np.broadcast_to(self.p, (len(states), self.r))

    def next_state(self, states, symbols):
        return np.zeros_like(states)

    @property
    def q_max(self):
        return float(self.p.max())

    def _pi_seq(self, kmax):
        return self.p.max() ** np.arange(kmax + 1, dtype=float)

    def describe(self):
        return {"kind": self.kind, "probs": self.p.tolist()}

    def __repr__(self):
        return f"Memoryless({self.p.tolist()})"


class Markov(Source):
    """Markov chain source.  State ``r`` means "no symbol yet"."""

    kind = "markov"

    def __init__(self, initial, transition):
        self.initial = _check_prob_vector(initial, "initial")
        self.r = len(self.initial)
        P = np.asarray(transition, dtype=float)
        if P.shape != (self.r, self.r):
            raise ValueError(f"transition must be {self.r}x{self.r}")
        for i, row in enumerate(P):
            _check_prob_vector(row, f"transition row {i}")
        self.P = P
        self._table = np.vstack([P, self.initial])

    def initial_state(self):
        return self.r

    def probs(self, states):
        return self._table[states]

    def next_state(self, states, symbols):
        return np.asarray(symbols, dtype=np.int64)

    @property
    def q_max(self):
        return float(max(self.P.max(), self.initial.max()))

    def _pi_seq(self, kmax):
        # max-product recursion over the last symbol; exact
        out = np.empty(kmax + 1)
        out[0] = 1.0
        best = self.initial.copy()
        for k in range(1, kmax + 1):
            out[k] = best.max()
            best = (best[:, None] * self.P).max(axis=0)
        return out

    def describe(self):
        return {"kind": self.kind, "initial": self.initial.tolist(),
                "transition": self.P.tolist()}

    def __repr__(self):
        return f"Markov(initial={self.initial.tolist()}, transition={self.P.tolist()})"


class Intermittent(Source):
    """Intermittent source of exponent ``gamma`` w.r.t. symbol ``sigma``.

    After a trailing run of ``k >= 1`` copies of ``sigma`` the next symbol is
    ``sigma`` with probability ``(k / (k + 1)) ** gamma``, the rest of the mass
    being spread evenly; with no trailing run the next symbol is uniform.
    State = trailing run length.
    """

    kind = "intermittent"

    def __init__(self, r: int, gamma: float, sigma: int = 0):
        if int(r) != r or r < 2:
            raise ValueError("alphabet size must be an integer >= 2")
        if not gamma > 0:
            raise ValueError("gamma must be positive")
        if not 0 <= sigma < r:
            raise ValueError("sigma outside alphabet")
        self.r, self.gamma, self.sigma = int(r), float(gamma), int(sigma)

    def probs(self, states):
        states = np.asarray(states)
        k = states.astype(float)
        stay = np.where(states > 0, (k / (k + 1.0)) ** self.gamma, 1.0 / self.r)
        out = np.empty((len(states), self.r))
        out[:] = ((1.0 - stay) / (self.r - 1))[:, None]
        out[:, self.sigma] = stay
        return out

    def next_state(self, states, symbols):
        return np.where(np.asarray(symbols) == self.sigma, np.asarray(states) + 1, 0)

    def _pi_seq(self, kmax):
        # best[j] = max probability of a word of current length whose trailing run is j
        out = np.empty(kmax + 1)
        out[0] = 1.0
        best = np.full(kmax + 2, -np.inf)
        best[0] = 0.0  # log-probabilities
        for k in range(1, kmax + 1):
            runs = np.arange(k)  # reachable run lengths before this step
            pr = self.probs(runs)
            other = np.log(pr[:, (self.sigma + 1) % self.r])
            stay = np.log(pr[:, self.sigma])
            new = np.full_like(best, -np.inf)
            new[1:k + 1] = best[:k] + stay
            new[0] = np.max(best[:k] + other)
            best = new
            out[k] = math.exp(best.max())
        return out

    def describe(self):
        return {"kind": self.kind, "r": self.r, "gamma": self.gamma, "sigma": self.sigma}

    def __repr__(self):
        return f"Intermittent(r={self.r}, gamma={self.gamma}, sigma={self.sigma})"


def uniform_binary() -> Memoryless:
    return Memoryless([0.5, 0.5])


def bernoulli(p: float) -> Memoryless:
    """Binary memoryless source emitting symbol 0 with probability ``p``."""
    return Memoryless([p, 1.0 - p])


# -- vectorized descent --------------------------------------------------------

@dataclass
class Descent:
    """Result of walking seeds down the prefix tree."""

    symbols: np.ndarray  # (n, depth) int
    a: np.ndarray  # (n, depth + 1): interval left ends per level, level 0 = root
    b: np.ndarray
    truncated: np.ndarray = field(default=None)  # (n,) bool: width underflow hit


def descend(source: Source, u: np.ndarray, depth: int) -> Descent:
    """Walk every seed in ``u`` down ``depth`` levels of the prefix tree."""
    u = np.asarray(u, dtype=float)
    n = len(u)
    syms = np.zeros((n, depth), dtype=np.int64)
    A = np.empty((n, depth + 1))
    B = np.empty((n, depth + 1))
    a = np.zeros(n)
    b = np.ones(n)
    state = np.full(n, source.initial_state(), dtype=np.int64)
    A[:, 0], B[:, 0] = a, b
    trunc = np.zeros(n, dtype=bool)
    for j in range(depth):
        s, a, b = child_of(source, a, b, state, u)
        trunc |= (b - a) < MIN_WIDTH
        syms[:, j] = s
        state = source.next_state(state, s)
        A[:, j + 1], B[:, j + 1] = a, b
    return Descent(syms, A, B, trunc)


def child_cuts(source: Source, a, b, state):
    """Child boundaries of many nodes at once, shape ``(n, r + 1)``."""
    pr = source.probs(state)
    cum = np.concatenate([np.zeros((len(a), 1)), np.cumsum(pr, axis=1)], axis=1)
    cuts = a[:, None] + (b - a)[:, None] * cum
    cuts[:, 0] = a
    cuts[:, -1] = b
    return cuts


def child_of(source: Source, a, b, state, u):
    """Which child of each node (a, b) holds seed u; ties go to the lower child."""
    cuts = child_cuts(source, a, b, state)
    inner = cuts[:, 1:-1]
    s = (inner < u[:, None]).sum(axis=1)
    idx = np.arange(len(a))
    return s, cuts[idx, s], cuts[idx, s + 1]


# -- tameness ----------------------------------------------------------------

def log_power_constant(b: float, eps: float) -> float:
    """Smallest c with ``1 + log_b(1/x) <= c * x**-eps`` for all x in (0, 1]."""
    lb = math.log(b)
    s = 1.0 / eps - lb
    if s <= 0:
        return 1.0
    return math.exp(eps * lb - 1.0) / (eps * lb)


def symb_tame_params(source: Source, eps: float | None = None,
                     kmax: int = 2000) -> TameParams:
    """Tameness parameters of the symbol-comparison cost for ``source``.

    For sources with a geometric bound ``pi_k <= q**k`` any ``eps`` in (0, 1)
    may be requested (default 0.1) and ``c`` comes from bounding
    ``1 + log_{1/q}(1/(t-u))`` by a power.  For intermittent sources
    ``eps = 1/gamma`` is forced and ``c = A**(1/gamma)`` with ``A`` the least
    constant such that ``pi_k <= A (k+1)**-gamma``.
    """
    if eps is not None and not 0 < eps < 1:
        raise ValueError(f"requested eps must lie in (0, 1), got {eps}")
    if isinstance(source, Intermittent):
        g = source.gamma
        if eps is not None and abs(eps - 1.0 / g) > 1e-12:
            raise ValueError("intermittent sources fix eps = 1/gamma")
        if g <= 1:
            raise ValueError(f"gamma = {g} <= 1: symbol cost is not eps-tame with eps < 1")
        pis = source._pi_seq(kmax)
        A = float(np.max(pis * (np.arange(kmax + 1) + 1.0) ** g))
        # beyond kmax pi_k (k+1)^g decreases towards 1/r
        A = max(A, 1.0 / source.r * ((kmax + 2.0) / (kmax + 1.0)) ** g)
        warning = None
        if g <= 4:
            warning = "gamma <= 4: almost-sure convergence (eps < 1/4) not covered"
        return TameParams(1.0 / g, A ** (1.0 / g), warning)
    q = source.q_max
    if q is None or q >= 1:
        raise ValueError("source has no geometric bound on pi_k")
    eps = 0.1 if eps is None else eps
    return TameParams(eps, log_power_constant(1.0 / q, eps))


def pi_tail(source: Source, k: int, tame: TameParams | None = None) -> float:
    """Upper bound on ``sum_{m > k} pi_m``."""
    q = source.q_max
    if q is not None and q < 1:
        return q ** (k + 1) / (1 - q)
    from scipy.special import zeta

    tame = tame or symb_tame_params(source)
    g = tame.gamma
    if g <= 1:
        return math.inf
    return float(tame.A * zeta(g, k + 2))


# -- configuration ------------------------------------------------------------

def read_key_values(text: str) -> dict:
    """Parse ``key = value`` lines; values are JSON where possible, else bare strings."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val
    return out


def source_from_dict(d: dict) -> Source:
    kind = d.get("kind")
    if kind == "memoryless":
        return Memoryless(d["probs"])
    if kind == "markov":
        return Markov(d["initial"], d["transition"])
    if kind == "intermittent":
        return Intermittent(int(d.get("r", 2)), float(d["gamma"]), int(d.get("sigma", 0)))
    raise ValueError(f"unknown source kind {kind!r}")


def parse_source(spec: str) -> Source:
    """``uniform-binary``, ``bernoulli-<p>`` or the path of a source definition file."""
    if spec == "uniform-binary":
        return uniform_binary()
    if spec.startswith("bernoulli-"):
        return bernoulli(float(spec[len("bernoulli-"):]))
    path = Path(spec[5:] if spec.startswith("file:") else spec)
    if not path.is_file():
        raise ValueError(f"unknown source spec {spec!r}")
    return source_from_dict(read_key_values(path.read_text()))
