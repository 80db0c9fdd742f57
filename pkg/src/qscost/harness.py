"""Coupled convergence experiments, distribution comparisons and moment tables.

One replication draws a single seed stream.  QuickVal and QuickQuant run on
its first ``n`` seeds for every ``n`` of the grid, and the limit S is
computed along the pivot chain of the same stream, so all three quantities
share their randomness.
"""
from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .algo import SeedArray, run_quickquant, run_quickval, target_rank
from .cost import CostModel, parse_cost
from .limit import TruncationPolicy, continue_chain
from .source import Source, parse_source, read_key_values

DEFAULT_SEED = 20120210
KS_LEVEL = 0.01
KS_MIN_SIZE = 1000


@dataclass
class ExperimentConfig:
    source: str = "uniform-binary"
    cost: str = "key"
    alpha: float = 0.5
    n_grid: list = field(default_factory=lambda: [64, 256, 1024, 4096, 16384])
    reps: int = 200
    p_values: list = field(default_factory=lambda: [1.0, 2.0])
    delta: float = 1e-6
    seed: int = DEFAULT_SEED
    out: str = "."
    threads: int = 1
    n_paths: int = 10

    def __post_init__(self):
        self.n_grid = [int(n) for n in self.n_grid]
        self.p_values = [float(p) for p in self.p_values]
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])) or not self.n_grid or self.n_grid[0] < 1:
            raise ValueError("n grid must be positive and strictly increasing")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if any(p < 1 for p in self.p_values):
            raise ValueError("p values must be >= 1")
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must lie in [0, 1]")
        if self.delta <= 0:
            raise ValueError("delta must be positive")

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        d = read_key_values(text)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text())

    def models(self) -> tuple[Source, CostModel]:
        src = parse_source(self.source)
        return src, parse_cost(self.cost, src.r)


@dataclass
class CoupledResult:
    n: list
    quickval: np.ndarray  # S_n^V / n per n
    quickquant: np.ndarray  # S_n^Q / n per n
    limit: float
    tail_bound: float
    flagged: bool
    first_pivots: tuple  # (QuickVal's first pivot, chain's first pivot)


def coupled_runs(master: int, rep: int, source: Source, cost: CostModel, alpha: float,
                 n_grid, delta: float = 1e-6) -> CoupledResult:
    """QuickVal, QuickQuant and S on one seed stream, for every n of the grid.

    The limit chain follows the stream's own pivots as far as the longest
    prefix reaches; beyond that each next pivot would be the first later seed
    inside (L, R), which is uniform on (L, R), so it is drawn that way from a
    separate substream.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    n_grid = sorted(int(n) for n in n_grid)
    full = SeedArray.generate(max(n_grid), master, rep)
    qv = np.empty(len(n_grid))
    qq = np.empty(len(n_grid))
    trunc = False
    for j, n in enumerate(n_grid):
        sa = full.prefix(n)
        rv = run_quickval(source, cost, sa, alpha)
        rq = run_quickquant(source, cost, sa, target_rank(alpha, n))
        qv[j] = rv.total / n
        qq[j] = rq.total / n
        trunc |= rv.truncated or rq.truncated
    chain = rv  # the last grid point uses the whole stream
    policy = TruncationPolicy.for_cost(cost, source, delta)
    ext = np.random.default_rng(np.random.SeedSequence([master, rep, 2]))
    lim, used = continue_chain(ext, source, cost, alpha, policy, chain.pivot_seeds)
    return CoupledResult(n_grid, qv, qq, lim.value, lim.tail_bound, lim.flagged or trunc,
                         (float(full.seeds[0]), float(used[0])))


def coupled_run(master: int, rep: int, source: Source, cost: CostModel, alpha: float,
                n: int, delta: float = 1e-6) -> tuple[float, float, float]:
    """``(S_n^V / n, S_n^Q / n, S)`` for one replication."""
    r = coupled_runs(master, rep, source, cost, alpha, [n], delta)
    return float(r.quickval[0]), float(r.quickquant[0]), r.limit


@dataclass
class ConvergenceReport:
    config: ExperimentConfig
    rows: list  # (n, algo, p, estimate, stderr)
    paths: list  # (path_id, n, value)
    ks: dict  # algo -> (statistic, pvalue) at the largest n
    flagged: int

    def estimates(self, algo: str, p: float) -> np.ndarray:
        return np.array([r[3] for r in self.rows if r[1] == algo and r[2] == p])

    def write(self, out_dir=None):
        out = Path(out_dir or self.config.out)
        out.mkdir(parents=True, exist_ok=True)
        meta = _meta(self.config)
        (out / "report.csv").write_text(
            _csv(meta, ["n", "algo", "p", "estimate", "stderr"], self.rows))
        (out / "paths.csv").write_text(
            _csv(meta, ["path_id", "n", "value"], self.paths))
        return out / "report.csv", out / "paths.csv"


# execution settings that cannot change any number in a report
_EXEC_ONLY = ("threads", "out")


def _meta(cfg) -> dict:
    d = asdict(cfg) if hasattr(cfg, "__dataclass_fields__") else dict(cfg)
    return {k: v for k, v in d.items() if k not in _EXEC_ONLY}


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (list, tuple)):
        return "[" + ",".join(_fmt(v) for v in x) + "]"
    return str(x)


def _csv(meta: dict, header, rows) -> str:
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}={_fmt(v)}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))  # results come back in input order


def convergence_experiment(config: ExperimentConfig) -> ConvergenceReport:
    """Estimate E|S_n/n - S|^p along the n grid for QuickVal and QuickQuant."""
    source, cost = config.models()

    def one(rep):
        return coupled_runs(config.seed, rep, source, cost, config.alpha, config.n_grid,
                            config.delta)

    results = _map(one, range(config.reps), config.threads)
    S = np.array([r.limit for r in results])
    rows = []
    ks = {}
    for algo in ("quickval", "quickquant"):
        vals = np.array([getattr(r, algo) for r in results])  # (reps, len(grid))
        dev = np.abs(vals - S[:, None])
        for p in config.p_values:
            x = dev ** p
            se = x.std(axis=0, ddof=1) / math.sqrt(len(x)) if len(x) > 1 else np.zeros(x.shape[1])
            for j, n in enumerate(config.n_grid):
                rows.append((n, algo, p, float(x[:, j].mean()), float(se[j])))
        res = stats.ks_2samp(vals[:, -1], S, method="asymp")
        ks[algo] = (float(res.statistic), float(res.pvalue))
    paths = []
    for i, r in enumerate(results[: config.n_paths]):
        for n, v in zip(config.n_grid, np.abs(r.quickval - r.limit)):
            paths.append((i, n, float(v)))
    return ConvergenceReport(config, rows, paths, ks, sum(r.flagged for r in results))


def decreasing_with_inversions(values) -> int:
    """Number of adjacent increases in a sequence."""
    v = np.asarray(values)
    return int(np.sum(np.diff(v) >= 0))


@dataclass
class KSResult:
    statistic: float
    pvalue: float
    accept: bool
    level: float


def distribution_compare(a, b, level: float = KS_LEVEL, min_size: int = KS_MIN_SIZE) -> KSResult:
    """Two-sample Kolmogorov-Smirnov test with asymptotic p-values."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not len(a) or not len(b):
        raise ValueError("both samples must be nonempty")
    if min(len(a), len(b)) < min_size:
        raise ValueError(f"samples of size >= {min_size} required")
    res = stats.ks_2samp(a, b, method="asymp")
    return KSResult(float(res.statistic), float(res.pvalue), bool(res.pvalue > level), level)


def moment_report(samples, orders=(1, 2), z: float = 1.96) -> list[dict]:
    """Raw empirical moments E X^k with standard errors and normal-approximation CIs."""
    orders = list(orders)
    if not set(orders) <= {1, 2, 3, 4}:
        raise ValueError("orders must be among 1, 2, 3, 4")
    x = np.asarray(samples, dtype=float)
    if not len(x):
        raise ValueError("empty sample")
    out = []
    for k in orders:
        xk = x ** k
        m = float(xk.mean())
        se = float(xk.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
        out.append({"order": k, "moment": m, "stderr": se,
                    "lo": m - z * se, "hi": m + z * se,
                    "variance": float(x.var()) if k == 1 else None})
    return out
