"""Seeded Monte Carlo harness over a binary symmetric channel.

Trial ``t`` at grid point ``g`` draws from ``SeedSequence([master_seed, g, t])``,
so outcomes do not depend on scheduling.  Trials run in fixed-size batches; the
stop rule scans outcomes in trial order, which makes the report identical for
any worker count.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from . import analysis
from .bch import BchCode, bch_for_message, bch_generate, erasure_probability
from .block_recovery import BlockGeometry
from .bwpc import BwPcLayout, PageCodeword, erasure_symbols, inner_decode
from .errors import ConfigError
from .galois import gf_build
from .raptor import LTMode, RaptorCode, RaptorParams

__all__ = [
    "SCHEMES",
    "CSV_COLUMNS",
    "ExperimentConfig",
    "PointResult",
    "SimReport",
    "bsc_corrupt",
    "trial_rng",
    "load_config",
    "run_experiment",
]

SCHEMES = ("BlockRecovery", "BwPcRaptor", "LongBchBaseline", "RaptorOnly")
CSV_COLUMNS = (
    "scheme", "p_e", "trials", "inner_fail_freq", "e2e_fail_freq", "miss_corr_freq",
    "wilson_lo", "wilson_hi", "analytic_P11", "analytic_PF_inner", "analytic_PRaptor", "seconds",
)
STOP_METRICS = ("e2e", "inner", "miss")


def bsc_corrupt(bits, p_e: float, trial_seed) -> np.ndarray:
    """Flip each bit independently with probability ``p_e``."""
    if not 0.0 <= p_e <= 1.0:
        raise ValueError("p_e must lie in [0, 1]")
    bits = np.asarray(bits, dtype=np.uint8)
    rng = trial_seed if isinstance(trial_seed, np.random.Generator) else np.random.default_rng(trial_seed)
    flips = rng.random(bits.shape) < p_e
    return bits ^ flips.astype(np.uint8)


def trial_rng(master_seed: int, point: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, point, trial]))


def _error_positions(rng: np.random.Generator, n: int, p: float) -> np.ndarray:
    """Flip positions of an ``n``-bit BSC draw (binomial count, uniform positions)."""
    k = rng.binomial(n, p)
    if k == 0:
        return np.zeros(0, np.int64)
    return rng.choice(n, k, replace=False)


# --------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    scheme: str
    grid: list
    code: dict = field(default_factory=dict)
    trials: int = 10**6
    min_failures: int = 100
    stop_metric: str = "e2e"
    master_seed: int = 0
    workers: int = 1
    batch_size: int = 256
    output: str | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError("scheme", f"unknown scheme {self.scheme!r}, expected one of {SCHEMES}")
        if not isinstance(self.grid, (list, tuple)) or not self.grid:
            raise ConfigError("grid", "grid must be a nonempty list")
        for i, v in enumerate(self.grid):
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ConfigError(f"grid[{i}]", f"{v!r} is not a number")
            if self.scheme != "RaptorOnly" and not 0.0 <= v <= 1.0:
                raise ConfigError(f"grid[{i}]", f"raw BER {v} outside [0, 1]")
            if self.scheme == "RaptorOnly" and (int(v) != v or v < 0):
                raise ConfigError(f"grid[{i}]", f"surplus {v} must be a non-negative integer")
        for name in ("trials", "min_failures", "workers", "batch_size"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(name, f"{name} must be a positive integer, got {v!r}")
        if not isinstance(self.master_seed, int) or self.master_seed < 0:
            raise ConfigError("master_seed", "master_seed must be a non-negative integer")
        if self.stop_metric not in STOP_METRICS:
            raise ConfigError("stop_metric", f"expected one of {STOP_METRICS}")
        if not isinstance(self.code, dict):
            raise ConfigError("code", "code must be an object")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("", "config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown field")
        for key in ("scheme", "grid"):
            if key not in data:
                raise ConfigError(key, "missing required field")
        cfg = cls(**data)
        build_scheme(cfg)  # surfaces code-parameter errors early
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def key(self) -> str:
        d = self.to_dict()
        for name in ("workers", "output"):
            d.pop(name)
        return json.dumps(d, sort_keys=True)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("", f"invalid JSON: {exc}") from None
    return ExperimentConfig.from_dict(data)


def _get(code: dict, path: str, key: str, kind=int, default=None, required=True):
    if key not in code:
        if default is not None or not required:
            return default
        raise ConfigError(f"{path}.{key}", "missing required field")
    v = code[key]
    if kind is int and (not isinstance(v, int) or isinstance(v, bool)):
        raise ConfigError(f"{path}.{key}", f"expected an integer, got {v!r}")
    if kind is bool and not isinstance(v, bool):
        raise ConfigError(f"{path}.{key}", f"expected true/false, got {v!r}")
    if kind is str and not isinstance(v, str):
        raise ConfigError(f"{path}.{key}", f"expected a string, got {v!r}")
    return v


def _bch_from(spec, path: str) -> BchCode:
    if not isinstance(spec, dict):
        raise ConfigError(path, "expected an object with t and n or k")
    t = _get(spec, path, "t")
    m = _get(spec, path, "m", required=False)
    if "n" in spec:
        n = _get(spec, path, "n")
        if m is None:
            m = max(3, n.bit_length())
        return bch_generate(gf_build(m), n, t)
    return bch_for_message(_get(spec, path, "k"), t, m)


def _raptor_kw(code: dict) -> dict:
    mode = _get(code, "code", "lt_mode", str, "dense")
    try:
        mode = LTMode(mode)
    except ValueError:
        raise ConfigError("code.lt_mode", f"unknown LT mode {mode!r}") from None
    return dict(lt_mode=mode, seed=_get(code, "code", "raptor_seed", int, 0))


# --------------------------------------------------------------------------
# schemes: each trial returns (inner_fail, e2e_fail, miss_correction)


class _Scheme:
    def point_key(self, value):
        return value

    def analytic(self, value) -> tuple:
        return (math.nan, math.nan, math.nan)


class _BwPcScheme(_Scheme):
    def __init__(self, code: dict):
        row = _bch_from(code.get("row"), "code.row")
        col = _bch_from(code.get("col", code.get("row")), "code.col")
        self.layout = BwPcLayout(_get(code, "code", "n_B"), _get(code, "code", "N_i", int, 1), row, col)
        self.N_r = _get(code, "code", "N_r")
        self.max_rounds = _get(code, "code", "max_rounds", int, 8)
        self.retry = _get(code, "code", "retry", bool, False)
        self.params = self.layout.raptor_params(self.N_r, **_raptor_kw(code))
        self._code = None

    @property
    def code(self) -> RaptorCode:
        if self._code is None:
            self._code = RaptorCode.from_params(self.params)
        return self._code

    def trial(self, rng, p):
        lay = self.layout
        bits = np.zeros(lay.n, np.uint8)
        bits[_error_positions(rng, lay.n, p)] = 1
        received = PageCodeword.from_bits(lay, bits)
        out, st = inner_decode(lay, received, self.max_rounds)
        if self.retry and st.half_detected:
            out, st = inner_decode(lay, received, self.max_rounds, reduce_by=1)
        region = bool(st.failed_rows) and bool(st.failed_cols)
        outside = out.grid.copy()
        rows = np.array(sorted(st.failed_rows), dtype=np.int64)
        cols = np.array(sorted(st.failed_cols), dtype=np.int64)
        if region:
            outside[np.ix_(rows, cols)] = 0
        miss = bool(outside.any())
        # the all-zero page was sent: any surviving one is a page error after inner decoding
        inner = bool(out.grid.any())
        e2e = region and not self.code.is_recoverable(erasure_symbols(lay, st))
        return inner, e2e, miss

    def analytic(self, p):
        lay = self.layout
        return (
            analysis.p_ij(lay, p, 1, 1),
            analysis.inner_failure(lay, p),
            analysis.p_raptor(lay, self.N_r, p),
        )


class _BlockScheme(_Scheme):
    def __init__(self, code: dict):
        p_ = _get(code, "code", "p")
        w = _get(code, "code", "w")
        N_s = _get(code, "code", "N_s", int, 1)
        T = _get(code, "code", "T")
        inner = bch_for_message(N_s * T * 8, _get(code, "code", "t"), _get(code, "code", "m", required=False))
        parity_words = _get(code, "code", "parity_words")
        self.geom = BlockGeometry(p_, w, N_s, inner, p_ * w * N_s + parity_words * N_s, T)
        self.params = self.geom.raptor_params(**_raptor_kw(code))
        self._code = None

    @property
    def code(self) -> RaptorCode:
        if self._code is None:
            self._code = RaptorCode.from_params(self.params)
        return self._code

    def trial(self, rng, p):
        g = self.geom
        n = g.inner.n
        counts = rng.binomial(n, p, size=g.n_words)
        heavy = np.flatnonzero(counts > g.inner.t)
        failed = []
        miss = False
        for w in heavy:
            word = np.zeros((1, n), np.uint8)
            word[0, rng.choice(n, counts[w], replace=False)] = 1
            if g.inner.decode_many(word)[0] < 0:
                failed.append(int(w))
            elif word.any():
                miss = True
        inner = bool(failed)
        e2e = inner and not self.code.is_recoverable(
            np.concatenate([g.symbols_of(w) for w in failed])
        )
        return inner, e2e, miss

    def analytic(self, p):
        P_E = erasure_probability(self.geom.inner, p)
        words = self.geom.n_words
        pf = -math.expm1(words * math.log1p(-P_E)) if P_E < 1 else 1.0
        return (math.nan, pf, analysis.block_failure_bound(self.geom, p))


class _LongBchScheme(_Scheme):
    def __init__(self, code: dict):
        self.bch = _bch_from(code.get("bch"), "code.bch")
        self.words = _get(code, "code", "words_per_page", int, 1)
        if self.words < 1:
            raise ConfigError("code.words_per_page", "must be at least 1")

    def trial(self, rng, p):
        n, t = self.bch.n, self.bch.t
        counts = rng.binomial(n, p, size=self.words)
        fail = miss = False
        for c in counts[counts > t]:
            word = np.zeros((1, n), np.uint8)
            word[0, rng.choice(n, c, replace=False)] = 1
            if self.bch.decode_many(word)[0] < 0:
                fail = True
            elif word.any():
                miss = True
        return fail, fail, miss

    def analytic(self, p):
        return (math.nan, analysis.long_bch_page_error(self.bch, p, self.words), math.nan)


class _RaptorOnlyScheme(_Scheme):
    """Grid values are the surplus ``R``; ``N - K = erased + R``."""

    def __init__(self, code: dict):
        self.K = _get(code, "code", "K")
        self.erased = _get(code, "code", "erased", int, 0)
        self.T = _get(code, "code", "T", int, 1)
        self.kw = _raptor_kw(code)
        if self.K < 1 or self.erased < 0:
            raise ConfigError("code.K", "K must be positive and erased non-negative")

    @lru_cache(maxsize=None)
    def _code(self, R: int) -> RaptorCode:
        N = self.K + self.erased + R
        return RaptorCode.from_params(RaptorParams(K=self.K, N=N, T=self.T, **self.kw))

    def trial(self, rng, R):
        R = int(R)
        code = self._code(R)
        erased = np.sort(rng.choice(code.N, self.erased, replace=False))
        # a random fountain code fails when the received rows are rank deficient
        fail = not code.is_recoverable(erased)
        return fail, fail, False

    def analytic(self, R):
        return (math.nan, math.nan, 1.0 if R <= 0 else math.ldexp(1.0, -int(R)))


_SCHEME_TYPES = {
    "BwPcRaptor": _BwPcScheme,
    "BlockRecovery": _BlockScheme,
    "LongBchBaseline": _LongBchScheme,
    "RaptorOnly": _RaptorOnlyScheme,
}


def build_scheme(cfg: ExperimentConfig) -> _Scheme:
    try:
        return _SCHEME_TYPES[cfg.scheme](cfg.code)
    except (KeyError, TypeError) as exc:
        raise ConfigError("code", f"bad code parameters: {exc}") from None


@lru_cache(maxsize=4)
def _scheme_for(key: str) -> _Scheme:
    d = json.loads(key)
    return build_scheme(ExperimentConfig(**d))


def _run_batch(key: str, point: int, value, start: int, stop: int) -> np.ndarray:
    scheme = _scheme_for(key)
    master = json.loads(key)["master_seed"]
    out = np.zeros((stop - start, 3), np.bool_)
    for t in range(start, stop):
        out[t - start] = scheme.trial(trial_rng(master, point, t), value)
    return out


# --------------------------------------------------------------------------
# report


@dataclass(frozen=True)
class PointResult:
    scheme: str
    p_e: float
    trials: int
    inner_failures: int
    failures: int
    miss_corrections: int
    wilson_lo: float
    wilson_hi: float
    analytic_P11: float
    analytic_PF_inner: float
    analytic_PRaptor: float
    seconds: float

    def freq(self, count: int) -> float:
        return count / self.trials if self.trials else math.nan

    def row(self) -> list:
        return [
            self.scheme, self.p_e, self.trials,
            self.freq(self.inner_failures), self.freq(self.failures), self.freq(self.miss_corrections),
            self.wilson_lo, self.wilson_hi,
            self.analytic_P11, self.analytic_PF_inner, self.analytic_PRaptor, self.seconds,
        ]


@dataclass
class SimReport:
    config: ExperimentConfig
    points: list = field(default_factory=list)

    def csv_lines(self) -> list[str]:
        return [",".join(CSV_COLUMNS)] + [_csv_row(p) for p in self.points]


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    return "" if math.isnan(v) else "%.17g" % v


def _csv_row(p: PointResult) -> str:
    return ",".join(_fmt(v) for v in p.row())


def _batches(cfg: ExperimentConfig):
    return [(s, min(cfg.trials, s + cfg.batch_size)) for s in range(0, cfg.trials, cfg.batch_size)]


def _scan(outcomes: np.ndarray, col: int, seen: int, need: int):
    """Trial count at which the stop column reaches ``need`` failures, or None."""
    hits = np.flatnonzero(outcomes[:, col])
    if seen + hits.size >= need:
        return int(hits[need - seen - 1]) + 1
    return None


def _run_point(cfg, key, point, value, pool) -> np.ndarray:
    col = {"e2e": 1, "inner": 0, "miss": 2}[cfg.stop_metric]
    batches = _batches(cfg)
    collected = []
    seen = 0
    if pool is None:
        for start, stop in batches:
            out = _run_batch(key, point, value, start, stop)
            cut = _scan(out, col, seen, cfg.min_failures)
            if cut is not None:
                collected.append(out[:cut])
                break
            collected.append(out)
            seen += int(out[:, col].sum())
    else:
        ahead = max(2, 2 * cfg.workers)
        futures = []
        idx = 0
        done = False
        while not done and (idx < len(batches) or futures):
            while idx < len(batches) and len(futures) < ahead:
                start, stop = batches[idx]
                futures.append(pool.submit(_run_batch, key, point, value, start, stop))
                idx += 1
            out = futures.pop(0).result()
            cut = _scan(out, col, seen, cfg.min_failures)
            if cut is not None:
                collected.append(out[:cut])
                done = True
            else:
                collected.append(out)
                seen += int(out[:, col].sum())
        for f in futures:
            f.cancel()
    return np.concatenate(collected) if collected else np.zeros((0, 3), np.bool_)


def run_experiment(cfg: ExperimentConfig, workers: int | None = None, output=None, progress=None) -> SimReport:
    """Run every grid point to its stop rule; writes the CSV incrementally when asked."""
    if not isinstance(cfg, ExperimentConfig):
        cfg = ExperimentConfig.from_dict(cfg)
    workers = cfg.workers if workers is None else workers
    if workers < 1:
        raise ConfigError("workers", "workers must be at least 1")
    output = cfg.output if output is None else output
    key = cfg.key()
    scheme = _scheme_for(key)
    report = SimReport(cfg)
    fh = open(output, "w") if output else None
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        if fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            fh.flush()
        for point, value in enumerate(cfg.grid):
            t0 = time.perf_counter()
            outcomes = _run_point(cfg, key, point, value, pool)
            n = len(outcomes)
            inner, e2e, miss = (int(x) for x in outcomes.sum(axis=0))
            col = {"e2e": e2e, "inner": inner, "miss": miss}[cfg.stop_metric]
            lo, hi = proportion_confint(col, n, alpha=0.05, method="wilson")
            a11, apf, apr = scheme.analytic(value)
            res = PointResult(
                cfg.scheme, float(value), n, inner, e2e, miss, float(lo), float(hi),
                a11, apf, apr, time.perf_counter() - t0,
            )
            report.points.append(res)
            if fh:
                fh.write(_csv_row(res) + "\n")
                fh.flush()
            if progress:
                progress(res)
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
        if fh:
            fh.close()
    return report
