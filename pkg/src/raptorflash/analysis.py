"""Closed-form error-rate evaluation for block recovery and BW-PC + Raptor."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp
from scipy.stats import binom

from .bch import BchCode, erasure_probability
from .block_recovery import BlockGeometry
from .bwpc import BwPcLayout
from .errors import TooLarge
from .raptor import RaptorParams

__all__ = [
    "DEFAULT_PAIRS",
    "ErrorCountProfile",
    "AnalysisPoint",
    "PijResult",
    "conditional_raptor_failure",
    "block_failure_bound",
    "p_ij",
    "p_ij_detail",
    "p_raptor",
    "inner_failure",
    "long_bch_page_error",
    "analysis_point",
]

DEFAULT_PAIRS = ((1, 1), (1, 2), (2, 1), (2, 2), (3, 1), (1, 3))


def _clamp(x: float) -> float:
    return min(1.0, max(0.0, float(x)))


def _log_comb(n: int, k: int) -> float:
    return float(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))


def conditional_raptor_failure(N_s: int, N: int, K: int, i: int) -> float:
    """Outer failure probability given ``i`` failed inner words, ``min(1, 2^-surplus)``."""
    if not 0 <= i <= K:
        raise ValueError(f"failed word count {i} outside 0..{K}")
    surplus = N_s * (N - K) - N_s * i
    return 1.0 if surplus <= 0 else math.ldexp(1.0, -surplus)


def block_failure_bound(
    geom: BlockGeometry, p_e: float, P_ue: float = 0.0, effective_t: int | None = None
) -> float:
    """Union bound on block failure: outer decode failure plus any inner miss-correction.

    Inner failures are binomial over every stored word (parity words erase
    symbols too); the miss-correction term is ``n_words * P_ue``.
    """
    if not 0.0 <= P_ue <= 1.0:
        raise ValueError("P_ue must lie in [0, 1]")
    P_E = erasure_probability(geom.inner, p_e, effective_t)
    words = geom.n_words
    redundancy = geom.n_parity_words
    i = np.arange(1, words + 1)
    with np.errstate(divide="ignore"):
        log_pmf = binom.logpmf(i, words, P_E)
    surplus = geom.N_s * (redundancy - i)
    log_cond = np.where(surplus <= 0, 0.0, -surplus * math.log(2.0))
    first = float(np.exp(logsumexp(log_pmf + log_cond))) if P_E > 0 else 0.0
    return _clamp(first + words * P_ue)


@dataclass(frozen=True)
class ErrorCountProfile:
    """Error counts inside ``i x j`` selected intersections and their parity blocks."""

    intersection_errors: tuple
    row_parity_errors: tuple
    col_parity_errors: tuple

    @property
    def n_e(self) -> int:
        return sum(self.intersection_errors) + sum(self.row_parity_errors) + sum(self.col_parity_errors)

    def failing(self, lay: BwPcLayout) -> bool:
        """Every selected row and column code sees more errors than its radius."""
        i, j = len(self.row_parity_errors), len(self.col_parity_errors)
        grid = np.asarray(self.intersection_errors).reshape(i, j)
        rows = grid.sum(axis=1) + np.asarray(self.row_parity_errors)
        cols = grid.sum(axis=0) + np.asarray(self.col_parity_errors)
        return bool(np.all(rows > lay.row.t) and np.all(cols > lay.col.t))

    def log_probability(self, lay: BwPcLayout, p_e: float) -> float:
        """Log-probability of exactly this profile on the selected bits."""
        total = len(self.intersection_errors) * lay.n_B
        total += len(self.row_parity_errors) * lay.m_r + len(self.col_parity_errors) * lay.m_c
        lc = sum(_log_comb(lay.n_B, n) for n in self.intersection_errors)
        lc += sum(_log_comb(lay.m_r, n) for n in self.row_parity_errors)
        lc += sum(_log_comb(lay.m_c, n) for n in self.col_parity_errors)
        ne = self.n_e
        with np.errstate(divide="ignore"):
            return float(lc + ne * np.log(p_e) + (total - ne) * np.log1p(-p_e))


@dataclass(frozen=True)
class PijResult:
    value: float
    stderr: float
    method: str  # "exact" or "mc"
    terms: int


def _sf_log(t: int, counts: np.ndarray, m: int, p: float) -> np.ndarray:
    """log P(parity errors > t - counts) for a Binomial(m, p) parity block."""
    with np.errstate(divide="ignore"):
        return binom.logsf(t - counts, m, p)


def _check_pair(lay: BwPcLayout, i: int, j: int) -> None:
    if not (1 <= i <= lay.n_rows and 1 <= j <= lay.n_cols):
        raise ValueError(f"pair ({i},{j}) outside the {lay.n_rows}x{lay.n_cols} grid")


def _log_prefactor(lay: BwPcLayout, i: int, j: int) -> float:
    return _log_comb(lay.n_rows, i) + _log_comb(lay.n_cols, j)


def _exact(lay: BwPcLayout, p: float, i: int, j: int, cap: int, chunk: int = 1 << 18) -> float:
    ij = i * j
    # per-intersection count distribution, saturated at ``cap`` (any count >= cap
    # already breaks both crossing codes)
    with np.errstate(divide="ignore"):
        log_w = binom.logpmf(np.arange(cap + 1), lay.n_B, p)
        log_w[cap] = binom.logsf(cap - 1, lay.n_B, p)
    total = (cap + 1) ** ij
    parts = []
    for start in range(0, total, chunk):
        flat = np.arange(start, min(total, start + chunk))
        counts = np.stack(np.unravel_index(flat, (cap + 1,) * ij), axis=1).reshape(-1, i, j)
        lp = log_w[counts].sum(axis=(1, 2))
        lp = lp + _sf_log(lay.row.t, counts.sum(axis=2), lay.m_r, p).sum(axis=1)
        lp = lp + _sf_log(lay.col.t, counts.sum(axis=1), lay.m_c, p).sum(axis=1)
        parts.append(logsumexp(lp))
    return float(logsumexp(parts))


def _monte_carlo(lay: BwPcLayout, p: float, i: int, j: int, samples: int, seed) -> tuple[float, float]:
    """Importance sampling over intersection counts with antithetic pairs."""
    cap = max(lay.row.t, lay.col.t) + 1
    q = min(0.5, max(p, cap / (lay.n_B * max(1, min(i, j)))))
    rng = np.random.default_rng(seed)
    half = max(1, samples // 2)
    u = rng.random((half, i * j))
    est = []
    for uu in (u, 1.0 - u):
        counts = binom.ppf(uu, lay.n_B, q).astype(np.int64).reshape(-1, i, j)
        lr = (counts * (math.log(p) - math.log(q))
              + (lay.n_B - counts) * (math.log1p(-p) - math.log1p(-q))).sum(axis=(1, 2))
        lp = lr + _sf_log(lay.row.t, counts.sum(axis=2), lay.m_r, p).sum(axis=1)
        lp = lp + _sf_log(lay.col.t, counts.sum(axis=1), lay.m_c, p).sum(axis=1)
        est.append(np.exp(lp))
    pair = 0.5 * (est[0] + est[1])
    return float(pair.mean()), float(pair.std(ddof=1) / math.sqrt(half)) if half > 1 else 0.0


def p_ij_detail(
    lay: BwPcLayout,
    p_e: float,
    i: int,
    j: int,
    max_terms: int = 10**7,
    mc_samples: int = 10**6,
    seed=0,
    method: str | None = None,
) -> PijResult:
    """Probability of the ``i``-rows-by-``j``-columns failure event.

    Only the ``i*j`` selected intersections and their ``i + j`` parity blocks
    carry errors in this model.  Exact enumeration runs when the profile space
    (intersection counts saturated at ``max(t) + 1``) fits ``max_terms``;
    otherwise importance-sampled Monte Carlo reports a standard error.
    """
    _check_pair(lay, i, j)
    if not 0.0 <= p_e <= 1.0:
        raise ValueError("p_e must lie in [0, 1]")
    cap = max(lay.row.t, lay.col.t) + 1
    terms = (cap + 1) ** (i * j)
    if p_e == 0.0:
        return PijResult(0.0, 0.0, "exact", 0)
    pref = _log_prefactor(lay, i, j)
    if p_e == 1.0:
        full = ErrorCountProfile(
            (lay.n_B,) * (i * j), (lay.m_r,) * i, (lay.m_c,) * j
        ).failing(lay)
        return PijResult(_clamp(math.exp(pref)) if full else 0.0, 0.0, "exact", 1)
    if method is None:
        method = "exact" if terms <= max_terms else "mc"
    if method == "exact":
        if terms > max_terms:
            raise TooLarge(f"P_({i},{j}) needs {terms} terms, budget {max_terms}")
        return PijResult(_clamp(math.exp(pref + _exact(lay, p_e, i, j, cap))), 0.0, "exact", terms)
    if method != "mc":
        raise ValueError(f"unknown method {method!r}")
    if mc_samples < 2 or mc_samples * i * j > 10 * max_terms * 8:
        raise TooLarge(f"P_({i},{j}) exceeds both enumeration and sampling budgets")
    mean, se = _monte_carlo(lay, p_e, i, j, mc_samples, seed)
    scale = math.exp(pref)
    return PijResult(_clamp(mean * scale), se * scale, "mc", mc_samples)


def p_ij(lay: BwPcLayout, p_e: float, i: int, j: int, **kw) -> float:
    return p_ij_detail(lay, p_e, i, j, **kw).value


def _outer_redundancy(lay: BwPcLayout, params) -> int:
    """Outer parity blocks ``N_r`` from a RaptorParams, a code, or an int."""
    if isinstance(params, int):
        return params
    red = params.N - params.K
    if red % lay.N_i:
        raise ValueError("outer parity symbols must fill whole intersections")
    return red // lay.N_i


def inner_failure(lay: BwPcLayout, p_e: float, pairs=DEFAULT_PAIRS, **kw) -> float:
    """``P_F`` of the inner BW-PC as the sum of the evaluated ``P_ij`` (a union-type bound)."""
    return _clamp(sum(p_ij(lay, p_e, i, j, **kw) for i, j in pairs))


def p_raptor(lay: BwPcLayout, params, p_e: float, pairs=DEFAULT_PAIRS, **kw) -> float:
    """Outer failure rate: each ``P_ij`` weighted by ``min(1, 2^-N_i(N_r - i*j))``."""
    N_r = _outer_redundancy(lay, params)
    total = 0.0
    for i, j in pairs:
        surplus = lay.N_i * (N_r - i * j)
        weight = 1.0 if surplus <= 0 else math.ldexp(1.0, -surplus)
        total += weight * p_ij(lay, p_e, i, j, **kw)
    return _clamp(total)


def long_bch_page_error(code: BchCode, p_e: float, words_per_page: int = 1) -> float:
    """Page error rate of ``words_per_page`` independent long BCH words."""
    if words_per_page < 1:
        raise ValueError("words_per_page must be at least 1")
    P = erasure_probability(code, p_e)
    if P >= 1.0:
        return 1.0
    return _clamp(-math.expm1(words_per_page * math.log1p(-P)))


@dataclass(frozen=True)
class AnalysisPoint:
    p_e: float
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, v in self.values.items():
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")


def analysis_point(lay: BwPcLayout, params: RaptorParams, p_e: float, pairs=DEFAULT_PAIRS, **kw) -> AnalysisPoint:
    """Every BW-PC quantity at one raw BER."""
    values = {}
    for i, j in pairs:
        values[f"P_{i},{j}"] = p_ij(lay, p_e, i, j, **kw)
    values["P_F_inner"] = _clamp(sum(values[f"P_{i},{j}"] for i, j in pairs))
    values["P_Raptor"] = p_raptor(lay, params, p_e, pairs, **kw)
    values["P_E_row"] = erasure_probability(lay.row, p_e)
    values["P_E_col"] = erasure_probability(lay.col, p_e)
    return AnalysisPoint(p_e, values)
