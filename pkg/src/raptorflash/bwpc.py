"""Block-wise product code (BW-PC) with an outer Raptor erasure code.

The page is a grid of ``n_B``-bit intersection blocks.  Row code ``i`` takes
the blocks of grid row ``i`` as its message, so a row spans ``k_r / n_B``
blocks and there are ``k_c / n_B`` rows; columns are the transpose.  Row and
column parities protect message blocks only (no checks on checks).

Each block holds ``N_i`` consecutive Raptor symbols of ``n_B / N_i`` bits;
symbol ``q * N_i + s`` is sub-block ``s`` of block ``q`` in row-major order,
with the outer parity symbols filling the tail.

Page image (``to_bytes``): grid row-major, then row parities, then column
parities, packed MSB-first.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numba import njit

from .bch import BchCode, _decode_inplace
from .errors import DecodeFailure, InvalidLayout, PageFailure, SizeMismatch
from .raptor import RaptorCode, RaptorParams

__all__ = [
    "BwPcLayout",
    "PageCodeword",
    "HaltReason",
    "InnerDecodeState",
    "RetryOutcome",
    "layout",
    "encode_page",
    "inner_decode",
    "decode_page",
    "detect_and_retry",
    "erasure_symbols",
]


@dataclass(frozen=True)
class BwPcLayout:
    n_B: int
    N_i: int
    row: BchCode
    col: BchCode

    def __post_init__(self):
        if self.n_B < 1 or self.N_i < 1:
            raise InvalidLayout("n_B and N_i must be positive")
        if self.row.k % self.n_B:
            raise InvalidLayout(f"n_B={self.n_B} does not divide k_r={self.row.k}")
        if self.col.k % self.n_B:
            raise InvalidLayout(f"n_B={self.n_B} does not divide k_c={self.col.k}")
        if self.n_B % self.N_i:
            raise InvalidLayout(f"N_i={self.N_i} does not divide n_B={self.n_B}")

    @property
    def kB_r(self) -> int:
        """Blocks per row word (grid columns)."""
        return self.row.k // self.n_B

    @property
    def kB_c(self) -> int:
        """Blocks per column word (grid rows)."""
        return self.col.k // self.n_B

    @property
    def n_rows(self) -> int:
        return self.kB_c

    @property
    def n_cols(self) -> int:
        return self.kB_r

    @property
    def m_r(self) -> int:
        return self.row.n - self.row.k

    @property
    def m_c(self) -> int:
        return self.col.n - self.col.k

    @property
    def n_blocks(self) -> int:
        return self.n_rows * self.n_cols

    @property
    def n_symbols(self) -> int:
        return self.n_blocks * self.N_i

    @property
    def symbol_bits(self) -> int:
        return self.n_B // self.N_i

    @property
    def symbol_bytes(self) -> int:
        return -(-self.symbol_bits // 8)

    @property
    def k(self) -> int:
        return self.n_blocks * self.n_B

    @property
    def n(self) -> int:
        return self.k + self.n_rows * self.m_r + self.n_cols * self.m_c

    @property
    def rate(self) -> float:
        return self.k / self.n

    def raptor_params(self, N_r: int, **kw) -> RaptorParams:
        """Outer code with ``N_r`` parity blocks (``N_i * N_r`` parity symbols)."""
        if not 1 <= N_r < self.n_blocks:
            raise InvalidLayout(f"N_r={N_r} outside 1..{self.n_blocks - 1}")
        return RaptorParams(
            K=self.N_i * (self.n_blocks - N_r), N=self.n_symbols, T=self.symbol_bytes, **kw
        )

    def user_bits(self, code: RaptorCode) -> int:
        return code.K * self.symbol_bits


def layout(n_B: int, N_i: int, row: BchCode, col: BchCode) -> BwPcLayout:
    return BwPcLayout(n_B, N_i, row, col)


@dataclass
class PageCodeword:
    grid: np.ndarray  # (n_rows, n_cols, n_B)
    row_parity: np.ndarray  # (n_rows, m_r)
    col_parity: np.ndarray  # (n_cols, m_c)

    def copy(self) -> "PageCodeword":
        return PageCodeword(self.grid.copy(), self.row_parity.copy(), self.col_parity.copy())

    def to_bits(self) -> np.ndarray:
        return np.concatenate([self.grid.ravel(), self.row_parity.ravel(), self.col_parity.ravel()])

    def to_bytes(self) -> bytes:
        return np.packbits(self.to_bits()).tobytes()

    @classmethod
    def from_bits(cls, lay: BwPcLayout, bits) -> "PageCodeword":
        bits = np.asarray(bits, dtype=np.uint8).ravel()
        if bits.size != lay.n:
            raise SizeMismatch(f"page has {bits.size} bits, layout needs {lay.n}")
        a = lay.k
        b = a + lay.n_rows * lay.m_r
        return cls(
            bits[:a].reshape(lay.n_rows, lay.n_cols, lay.n_B).copy(),
            bits[a:b].reshape(lay.n_rows, lay.m_r).copy(),
            bits[b:].reshape(lay.n_cols, lay.m_c).copy(),
        )

    @classmethod
    def from_bytes(cls, lay: BwPcLayout, data: bytes) -> "PageCodeword":
        bits = np.unpackbits(np.frombuffer(data, np.uint8))[: lay.n]
        return cls.from_bits(lay, bits)

    @classmethod
    def zeros(cls, lay: BwPcLayout) -> "PageCodeword":
        return cls.from_bits(lay, np.zeros(lay.n, np.uint8))

    def row_word(self, lay: BwPcLayout, i: int) -> np.ndarray:
        return np.concatenate([self.grid[i].ravel(), self.row_parity[i]])

    def col_word(self, lay: BwPcLayout, j: int) -> np.ndarray:
        return np.concatenate([self.grid[:, j].ravel(), self.col_parity[j]])


# --------------------------------------------------------------------------
# symbols <-> grid


def _symbols_to_grid(lay: BwPcLayout, symbols: np.ndarray) -> np.ndarray:
    bits = np.unpackbits(symbols, axis=1)[:, : lay.symbol_bits]
    return bits.reshape(lay.n_rows, lay.n_cols, lay.n_B)


def _grid_to_symbols(lay: BwPcLayout, grid: np.ndarray) -> np.ndarray:
    bits = grid.reshape(lay.n_symbols, lay.symbol_bits)
    return np.packbits(bits, axis=1)


def _user_bits_to_symbols(lay: BwPcLayout, code: RaptorCode, user_bits) -> np.ndarray:
    bits = np.asarray(user_bits, dtype=np.uint8).ravel()
    if bits.size != lay.user_bits(code):
        raise SizeMismatch(f"{bits.size} user bits, page carries {lay.user_bits(code)}")
    return np.packbits(bits.reshape(code.K, lay.symbol_bits), axis=1)


def _check_code(lay: BwPcLayout, code: RaptorCode) -> None:
    if code.N != lay.n_symbols or code.T != lay.symbol_bytes or (code.N - code.K) % lay.N_i:
        raise InvalidLayout(f"outer code {code.params} does not fit the page layout")


def encode_page(lay: BwPcLayout, code: RaptorCode, user_bits) -> PageCodeword:
    """Outer-encode the user bits, place the symbols, then add row and column parities."""
    _check_code(lay, code)
    src = _user_bits_to_symbols(lay, code, user_bits)
    grid = _symbols_to_grid(lay, code.encode(src).symbols)
    grid = np.ascontiguousarray(grid)
    rows = lay.row.encode_many(grid.reshape(lay.n_rows, -1))[:, lay.row.k :]
    cols_msg = np.ascontiguousarray(grid.transpose(1, 0, 2).reshape(lay.n_cols, -1))
    cols = lay.col.encode_many(cols_msg)[:, lay.col.k :]
    return PageCodeword(grid, np.ascontiguousarray(rows), np.ascontiguousarray(cols))


# --------------------------------------------------------------------------
# iterative inner decoding


class HaltReason(enum.Enum):
    ALL_CLEAN = "AllClean"
    NO_PROGRESS = "NoProgress"


@dataclass(frozen=True)
class InnerDecodeState:
    failed_rows: frozenset
    failed_cols: frozenset
    iterations: int
    halted: HaltReason
    corrections: int = 0
    effective_t: tuple = ()
    failures_per_round: tuple = ()

    @property
    def half_detected(self) -> bool:
        return bool(self.failed_rows) != bool(self.failed_cols)

    @property
    def clean(self) -> bool:
        return not self.failed_rows and not self.failed_cols

    def __str__(self) -> str:
        return (
            f"{self.halted.value}: rows {sorted(self.failed_rows)} cols {sorted(self.failed_cols)}"
            f" after {self.iterations} round(s)"
        )


@njit(cache=True)
def _iterate(
    grid, rowpar, colpar, n_B,
    t_r, eff_r, exp_r, log_r, ord_r,
    t_c, eff_c, exp_c, log_c, ord_c,
    max_rounds, row_failed, col_failed, per_round,
):
    n_rows = grid.shape[0]
    n_cols = colpar.shape[0]
    k_r = grid.shape[1]
    m_r = rowpar.shape[1]
    m_c = colpar.shape[1]
    k_c = n_rows * n_B
    rbuf = np.empty(k_r + m_r, np.uint8)
    cbuf = np.empty(k_c + m_c, np.uint8)
    S_r = np.zeros(2 * t_r + 1, np.int64)
    C_r = np.zeros(2 * t_r + 2, np.int64)
    P_r = np.zeros(t_r + 1, np.int64)
    T_r = np.zeros(2 * t_r + 2, np.int64)
    S_c = np.zeros(2 * t_c + 1, np.int64)
    C_c = np.zeros(2 * t_c + 2, np.int64)
    P_c = np.zeros(t_c + 1, np.int64)
    T_c = np.zeros(2 * t_c + 2, np.int64)
    rounds = 0
    clean = False
    total = 0
    prev_fail = n_rows + n_cols + 1
    snap_grid = np.empty_like(grid)
    snap_row = np.empty_like(rowpar)
    snap_col = np.empty_like(colpar)
    snap_rf = np.empty_like(row_failed)
    snap_cf = np.empty_like(col_failed)
    while rounds < max_rounds:
        rounds += 1
        if rounds > 1:
            snap_grid[:] = grid
            snap_row[:] = rowpar
            snap_col[:] = colpar
            snap_rf[:] = row_failed
            snap_cf[:] = col_failed
        corr_r = 0
        corr_c = 0
        nfail = 0
        for a in range(n_rows):
            for x in range(k_r):
                rbuf[x] = grid[a, x]
            for x in range(m_r):
                rbuf[k_r + x] = rowpar[a, x]
            res = _decode_inplace(rbuf, k_r + m_r, t_r, eff_r, exp_r, log_r, ord_r, S_r, C_r, P_r, T_r)
            if res < 0:
                row_failed[a] = True
                nfail += 1
            else:
                row_failed[a] = False
                if res > 0:
                    corr_r += res
                    for x in range(k_r):
                        grid[a, x] = rbuf[x]
                    for x in range(m_r):
                        rowpar[a, x] = rbuf[k_r + x]
        for b in range(n_cols):
            off = b * n_B
            for a in range(n_rows):
                for x in range(n_B):
                    cbuf[a * n_B + x] = grid[a, off + x]
            for x in range(m_c):
                cbuf[k_c + x] = colpar[b, x]
            res = _decode_inplace(cbuf, k_c + m_c, t_c, eff_c, exp_c, log_c, ord_c, S_c, C_c, P_c, T_c)
            if res < 0:
                col_failed[b] = True
                nfail += 1
            else:
                col_failed[b] = False
                if res > 0:
                    corr_c += res
                    for a in range(n_rows):
                        for x in range(n_B):
                            grid[a, off + x] = cbuf[a * n_B + x]
                    for x in range(m_c):
                        colpar[b, x] = cbuf[k_c + x]
        if nfail > prev_fail:
            # miss-corrections made things worse: keep the previous round
            grid[:] = snap_grid
            rowpar[:] = snap_row
            colpar[:] = snap_col
            row_failed[:] = snap_rf
            col_failed[:] = snap_cf
            per_round[rounds - 1] = prev_fail
            break
        per_round[rounds - 1] = nfail
        total += corr_r + corr_c
        if nfail == 0 and corr_c == 0:
            clean = True
            break
        if corr_r + corr_c == 0 or nfail == prev_fail:
            break
        prev_fail = nfail
    if not clean:
        # column corrections in the last round may have broken rows that passed
        for a in range(n_rows):
            if row_failed[a]:
                continue
            for x in range(k_r):
                rbuf[x] = grid[a, x]
            for x in range(m_r):
                rbuf[k_r + x] = rowpar[a, x]
            if _decode_inplace(rbuf, k_r + m_r, t_r, 0, exp_r, log_r, ord_r, S_r, C_r, P_r, T_r) < 0:
                row_failed[a] = True
    return rounds, clean, total


def _radius(code: BchCode, effective_t, reduce_by: int) -> int:
    eff = code.t if effective_t is None else int(effective_t)
    eff -= reduce_by
    if not 0 <= eff <= code.t:
        raise ValueError(f"effective radius {eff} outside 0..{code.t}")
    return eff


def inner_decode(
    lay: BwPcLayout,
    received: PageCodeword,
    max_rounds: int = 8,
    effective_t=None,
    reduce_by: int = 0,
) -> tuple[PageCodeword, InnerDecodeState]:
    """Iterative hard-decision decoding: all rows, then all columns, per round.

    ``effective_t`` (int or ``(t_r, t_c)`` pair) sets the decoding radii,
    ``reduce_by`` shrinks both by that amount.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be at least 1")
    if isinstance(effective_t, (tuple, list)):
        er, ec = effective_t
    else:
        er = ec = effective_t
    eff_r = _radius(lay.row, er, reduce_by)
    eff_c = _radius(lay.col, ec, reduce_by)
    work = received.copy()
    grid2 = np.ascontiguousarray(work.grid.reshape(lay.n_rows, lay.n_cols * lay.n_B))
    rowpar = np.ascontiguousarray(work.row_parity)
    colpar = np.ascontiguousarray(work.col_parity)
    row_failed = np.zeros(lay.n_rows, np.bool_)
    col_failed = np.zeros(lay.n_cols, np.bool_)
    per_round = np.zeros(max_rounds, np.int64)
    fr, fc = lay.row.field, lay.col.field
    rounds, clean, total = _iterate(
        grid2, rowpar, colpar, lay.n_B,
        lay.row.t, eff_r, fr.exp, fr.log, fr.order,
        lay.col.t, eff_c, fc.exp, fc.log, fc.order,
        max_rounds, row_failed, col_failed, per_round,
    )
    out = PageCodeword(grid2.reshape(lay.n_rows, lay.n_cols, lay.n_B), rowpar, colpar)
    state = InnerDecodeState(
        frozenset(np.flatnonzero(row_failed).tolist()),
        frozenset(np.flatnonzero(col_failed).tolist()),
        int(rounds),
        HaltReason.ALL_CLEAN if clean else HaltReason.NO_PROGRESS,
        int(total),
        (eff_r, eff_c),
        tuple(int(x) for x in per_round[:rounds]),
    )
    return out, state


def erasure_symbols(lay: BwPcLayout, state: InnerDecodeState) -> np.ndarray:
    """Symbol ids inside every (failed row, failed column) intersection."""
    rows = sorted(state.failed_rows)
    cols = sorted(state.failed_cols)
    if not rows or not cols:
        return np.zeros(0, np.int64)
    blocks = (np.array(rows)[:, None] * lay.n_cols + np.array(cols)[None, :]).ravel()
    return np.sort((blocks[:, None] * lay.N_i + np.arange(lay.N_i)[None, :]).ravel())


@dataclass(frozen=True)
class RetryOutcome:
    codeword: PageCodeword
    state: InnerDecodeState
    retried: bool
    sphere: str  # "full" or "reduced"


def detect_and_retry(
    lay: BwPcLayout,
    state: InnerDecodeState,
    received: PageCodeword,
    decoded: PageCodeword | None = None,
    max_rounds: int = 8,
) -> RetryOutcome:
    """On a half-detected error, decode the raw page again with radius t - 1."""
    if not state.half_detected:
        if decoded is None:
            decoded, state = inner_decode(lay, received, max_rounds)
        return RetryOutcome(decoded, state, False, "full")
    out, st = inner_decode(lay, received, max_rounds, reduce_by=1)
    return RetryOutcome(out, st, True, "reduced")


def decode_page(
    lay: BwPcLayout,
    code: RaptorCode,
    received,
    max_rounds: int = 8,
    retry: bool = False,
    raptor_method: str = "lut",
) -> np.ndarray:
    """Inner iterative decoding, erasure tagging, then outer Raptor decoding.

    Returns the user bits; raises ``PageFailure`` when the outer decode fails.
    """
    _check_code(lay, code)
    if not isinstance(received, PageCodeword):
        received = PageCodeword.from_bits(lay, received)
    decoded, state = inner_decode(lay, received, max_rounds)
    if retry and state.half_detected:
        r = detect_and_retry(lay, state, received, decoded, max_rounds)
        decoded, state = r.codeword, r.state
    symbols = _grid_to_symbols(lay, decoded.grid)
    erased = erasure_symbols(lay, state)
    try:
        src = code.decode(symbols, erased, method=raptor_method)
    except DecodeFailure as exc:
        raise PageFailure(state, True, f"outer decode failed ({state}): {exc}") from None
    return np.unpackbits(src, axis=1)[:, : lay.symbol_bits].ravel()
