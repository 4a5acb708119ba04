"""Systematic fixed-rate Raptor code over GF(2).

The constraint matrix ``A`` stacks, in order:

* ``S`` sparse LDPC rows (three ones per source-intermediate column) plus ``I_S``,
* ``H`` dense pseudo-random rows plus ``I_H``,
* one LT row per encoding symbol id (ESI) ``0 .. N-1``; ids below ``K`` are
  the systematic source rows, the rest produce parity symbols.

The first ``L = K + S + H`` rows form ``A_pre``.  Encoding solves
``A_pre m = [0; s]`` and emits ``[s; G_LT m]``; decoding solves the system
made of the constraint rows and the rows of every received symbol.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    DecodeFailure,
    InconsistentError,
    InvalidParams,
    LengthMismatch,
    SingularError,
    SingularPrecode,
)
from .gf2 import BitMatrix, as_symbols, gaussian_eliminate, inactivation_solve, inverse, solve

__all__ = [
    "LTMode",
    "R10_DEGREE_TABLE",
    "RaptorParams",
    "RaptorCode",
    "Codeword",
    "ErasurePattern",
    "ErasureLuts",
    "default_S",
    "default_H",
    "build_constraint_matrix",
    "encode",
    "decode",
    "build_parity_luts",
    "build_erasure_luts",
    "is_recoverable",
]

MAX_RESEEDS = 16

# cumulative degree table over 2^20, as in the R10 code
R10_DEGREE_TABLE = (
    (1, 10241),
    (2, 491582),
    (3, 712794),
    (4, 831695),
    (10, 948446),
    (11, 1032189),
    (40, 1048576),
)

_TAG_HDPC = 1
_TAG_LT = 2


class LTMode(enum.Enum):
    DENSE = "dense"
    R10 = "r10"


def _is_prime(x: int) -> bool:
    if x < 2:
        return False
    return all(x % d for d in range(2, math.isqrt(x) + 1))


def default_S(K: int) -> int:
    x = math.ceil(0.01 * K + math.sqrt(2 * K))
    while not _is_prime(x):
        x += 1
    return x


def default_H(K: int, S: int) -> int:
    h = 1
    while math.comb(h, math.ceil(h / 2)) < K + S:
        h += 1
    return h


@dataclass(frozen=True)
class RaptorParams:
    """Description of a systematic Raptor code.

    ``S`` and ``H`` default to the R10-style sizing rules when left as None.
    """

    K: int
    N: int
    T: int = 1
    S: int | None = None
    H: int | None = None
    lt_mode: LTMode = LTMode.DENSE
    seed: int = 0
    degree_table: tuple = R10_DEGREE_TABLE

    def __post_init__(self):
        if isinstance(self.lt_mode, str):
            object.__setattr__(self, "lt_mode", LTMode(self.lt_mode))
        if self.K < 1:
            raise InvalidParams("K must be positive")
        if self.N < self.K:
            raise InvalidParams(f"N={self.N} < K={self.K}")
        if self.T < 1:
            raise InvalidParams("symbol size T must be at least one byte")
        S = default_S(self.K) if self.S is None else int(self.S)
        H = default_H(self.K, S) if self.H is None else int(self.H)
        if S < 0 or H < 0:
            raise InvalidParams("S and H must be non-negative")
        if 0 < S < 3:
            raise InvalidParams("S must be 0 or at least 3")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "H", H)
        table = tuple((int(d), int(c)) for d, c in self.degree_table)
        if not table or any(d < 1 for d, _ in table):
            raise InvalidParams("degree table must list positive degrees")
        if any(b[1] <= a[1] for a, b in zip(table, table[1:])):
            raise InvalidParams("degree table must be strictly cumulative")
        object.__setattr__(self, "degree_table", table)
        object.__setattr__(self, "seed", int(self.seed) & ((1 << 64) - 1))

    @property
    def L(self) -> int:
        return self.K + self.S + self.H

    @property
    def n_constraints(self) -> int:
        return self.S + self.H

    @property
    def n_parity(self) -> int:
        return self.N - self.K

    def with_seed(self, seed: int) -> "RaptorParams":
        return replace(self, seed=seed)


# --------------------------------------------------------------------------
# matrix construction


def _ldpc_rows(K: int, S: int, L: int) -> np.ndarray:
    rows = np.zeros((S, L), np.uint8)
    if S == 0:
        return rows
    for i in range(K):
        a = 1 + (i // S) % (S - 1)
        b = i % S
        rows[b, i] ^= 1
        rows[(b + a) % S, i] ^= 1
        rows[(b + 2 * a) % S, i] ^= 1
    rows[np.arange(S), K + np.arange(S)] = 1
    return rows


def _hdpc_rows(p: RaptorParams) -> np.ndarray:
    K, S, H, L = p.K, p.S, p.H, p.L
    rows = np.zeros((H, L), np.uint8)
    for h in range(H):
        rng = np.random.default_rng([p.seed, h, _TAG_HDPC])
        rows[h, : K + S] = rng.integers(0, 2, K + S, dtype=np.uint8)
        rows[h, K + S + h] = 1
    return rows


def _sample_degree(rng: np.random.Generator, table: tuple, L: int) -> int:
    v = int(rng.integers(0, table[-1][1]))
    for d, c in table:
        if v < c:
            return min(d, L)
    return min(table[-1][0], L)


def lt_row(p: RaptorParams, esi: int) -> np.ndarray:
    """LT connection row of encoding symbol ``esi`` over the L intermediates."""
    L = p.L
    rng = np.random.default_rng([p.seed, esi, _TAG_LT])
    if p.lt_mode is LTMode.DENSE:
        row = rng.integers(0, 2, L, dtype=np.uint8)
        if not row.any():
            row[int(rng.integers(0, L))] = 1
        return row
    row = np.zeros(L, np.uint8)
    d = _sample_degree(rng, p.degree_table, L)
    row[rng.choice(L, size=d, replace=False)] = 1
    return row


def _constraint_dense(p: RaptorParams) -> np.ndarray:
    parts = [_ldpc_rows(p.K, p.S, p.L), _hdpc_rows(p)]
    parts.append(np.array([lt_row(p, esi) for esi in range(p.N)], dtype=np.uint8).reshape(p.N, p.L))
    return np.vstack(parts)


def build_constraint_matrix(params: RaptorParams) -> BitMatrix:
    """The full ``(L + N - K) x L`` matrix ``A``.

    Raises ``SingularPrecode`` when the leading ``L x L`` block is singular.
    """
    A = BitMatrix.from_dense(_constraint_dense(params))
    if A.take(np.arange(params.L)).rank() < params.L:
        raise SingularPrecode(f"A_pre singular for seed {params.seed}")
    return A


# --------------------------------------------------------------------------
# code object


@dataclass(frozen=True)
class Codeword:
    """The N transmitted symbols; the first K are the source."""

    symbols: np.ndarray
    K: int

    @property
    def N(self) -> int:
        return self.symbols.shape[0]

    @property
    def source(self) -> np.ndarray:
        return self.symbols[: self.K]

    @property
    def parity(self) -> np.ndarray:
        return self.symbols[self.K :]


class ErasurePattern:
    """Distinct erased positions of an N-symbol codeword."""

    __slots__ = ("erased", "N")

    def __init__(self, erased, N: int):
        items = [int(i) for i in erased]
        idx = sorted(set(items))
        if len(idx) != len(items):
            raise ValueError("erased indices must be distinct")
        if idx and (idx[0] < 0 or idx[-1] >= N):
            raise ValueError(f"erased index outside 0..{N - 1}")
        self.erased = tuple(idx)
        self.N = int(N)

    def __len__(self) -> int:
        return len(self.erased)

    def __repr__(self) -> str:
        return f"ErasurePattern({list(self.erased)}, N={self.N})"

    def mask(self) -> np.ndarray:
        m = np.zeros(self.N, bool)
        m[list(self.erased)] = True
        return m


@dataclass(frozen=True)
class ErasureLuts:
    """Recovery tables for the erased source symbols.

    ``luts[e]`` is a 0/1 vector over the N codeword positions; XOR-folding the
    received symbols it selects reproduces source symbol ``erased[e]``.
    """

    erased: tuple
    luts: np.ndarray = field(repr=False)

    def lut(self, esi: int) -> np.ndarray:
        return self.luts[self.erased.index(esi)]

    @property
    def size_bits(self) -> int:
        return int(self.luts.size)

    def positions(self) -> np.ndarray:
        """Codeword positions touched by at least one table."""
        if not self.erased:
            return np.zeros(0, np.int64)
        return np.flatnonzero(self.luts.any(axis=0))

    def apply(self, received) -> np.ndarray:
        sym = as_symbols(received)
        return xor_fold(self.luts, sym)


def xor_fold(selectors: np.ndarray, symbols: np.ndarray) -> np.ndarray:
    """Row i of the result XORs the symbols flagged in ``selectors[i]``."""
    sel = np.asarray(selectors, dtype=np.uint8)
    out = np.zeros((sel.shape[0], symbols.shape[1]), np.uint8)
    for i in range(sel.shape[0]):
        idx = np.flatnonzero(sel[i])
        if idx.size:
            out[i] = np.bitwise_xor.reduce(symbols[idx], axis=0)
    return out


def _as_pattern(erased, N: int) -> ErasurePattern:
    if isinstance(erased, ErasurePattern):
        if erased.N != N:
            raise ValueError("erasure pattern length does not match the code")
        return erased
    return ErasurePattern(erased, N)


class RaptorCode:
    """A constructed code: params, constraint matrix and parity tables."""

    def __init__(self, params: RaptorParams, A: BitMatrix):
        if A.shape != (params.L + params.N - params.K, params.L):
            raise InvalidParams(f"matrix shape {A.shape} does not fit {params}")
        self.params = params
        self.A = A
        L, c = params.L, params.n_constraints
        try:
            ainv = inverse(A.take(np.arange(L)))
        except SingularError as exc:
            raise SingularPrecode(str(exc)) from None
        g_lt = A.take(np.arange(L, A.nrows))
        self._gp = (g_lt @ ainv).columns(np.arange(c, L)) if params.N > params.K else BitMatrix.zeros(0, params.K)
        self._gp_dense = self._gp.to_dense()
        self._ainv = ainv

    @classmethod
    def from_params(cls, params: RaptorParams, reseed: int = MAX_RESEEDS) -> "RaptorCode":
        """Build (cached) from params, stepping the seed on a singular ``A_pre``.

        The returned code's ``params.seed`` is the seed actually used.
        """
        return _build_cached(params, reseed)

    @classmethod
    def from_matrix(cls, matrix, K: int, n_constraints: int = 0, T: int = 1) -> "RaptorCode":
        """Wrap an explicit constraint matrix (constraint rows, K source rows, parity rows)."""
        A = matrix if isinstance(matrix, BitMatrix) else BitMatrix.from_dense(matrix)
        L = A.ncols
        N = A.nrows - n_constraints
        if L != K + n_constraints:
            raise InvalidParams(f"{L} columns but K + constraints = {K + n_constraints}")
        params = RaptorParams(K=K, N=N, T=T, S=0, H=n_constraints)
        return cls(params, A)

    # -- shape helpers
    @property
    def K(self) -> int:
        return self.params.K

    @property
    def N(self) -> int:
        return self.params.N

    @property
    def L(self) -> int:
        return self.params.L

    @property
    def T(self) -> int:
        return self.params.T

    @property
    def n_constraints(self) -> int:
        return self.params.n_constraints

    def row_of(self, esi) -> np.ndarray:
        return self.n_constraints + np.asarray(esi, dtype=np.int64)

    @property
    def A_pre(self) -> BitMatrix:
        return self.A.take(np.arange(self.L))

    @property
    def G_LT(self) -> BitMatrix:
        return self.A.take(np.arange(self.L, self.A.nrows))

    def parity_luts(self) -> BitMatrix:
        """``(N-K) x K`` matrix; row k flags the source symbols XORed into parity k."""
        return self._gp

    def _check_symbols(self, symbols, count: int, what: str) -> np.ndarray:
        sym = as_symbols(symbols)
        if sym.shape[0] != count:
            raise LengthMismatch(f"{what}: expected {count} symbols, got {sym.shape[0]}")
        if sym.shape[1] != self.T:
            raise LengthMismatch(f"{what}: symbols must be {self.T} bytes, got {sym.shape[1]}")
        return sym

    # -- encoding
    def intermediate(self, source) -> np.ndarray:
        src = self._check_symbols(source, self.K, "source")
        t = np.vstack([np.zeros((self.n_constraints, self.T), np.uint8), src])
        return solve(self.A_pre, t)

    def encode(self, source, method: str = "lut") -> Codeword:
        """Systematic codeword ``[source; parity]``.

        ``method="matrix"`` solves for the intermediate symbols and applies the
        LT rows; ``method="lut"`` XOR-folds source symbols per the parity tables.
        """
        src = self._check_symbols(source, self.K, "source")
        if method == "matrix":
            parity = self.G_LT.mul_symbols(self.intermediate(src))
        elif method == "lut":
            parity = self._gp.mul_symbols(src) if self.N > self.K else np.zeros((0, self.T), np.uint8)
        else:
            raise ValueError(f"unknown encode method {method!r}")
        return Codeword(np.vstack([src, parity]), self.K)

    # -- decoding
    def _reduced_system(self, pat: ErasurePattern):
        keep = np.flatnonzero(~pat.mask())
        rows = np.concatenate([self.row_of(keep), np.arange(self.n_constraints)])
        return keep, self.A.take(rows)

    def decode(self, received, erased, method: str = "inactivation", stats: dict | None = None) -> np.ndarray:
        """Recover the K source symbols from ``received`` (N symbols, erased slots ignored).

        Raises ``DecodeFailure`` when the received rows do not determine the
        intermediate symbols.
        """
        sym = self._check_symbols(received, self.N, "received")
        pat = _as_pattern(erased, self.N)
        lost = [e for e in pat.erased if e < self.K]
        out = sym[: self.K].copy()
        if not lost:
            return out
        if method == "lut":
            out[lost] = self.erasure_luts(pat, method="precode").apply(sym)
            return out
        keep, Ar = self._reduced_system(pat)
        rhs = np.vstack([sym[keep], np.zeros((self.n_constraints, self.T), np.uint8)])
        try:
            if method == "inactivation":
                m = inactivation_solve(Ar, rhs, stats)
            elif method == "gauss":
                m = solve(Ar, rhs)
            else:
                raise ValueError(f"unknown decode method {method!r}")
        except SingularError as exc:
            raise DecodeFailure(f"{len(pat)} erasures: {exc}") from None
        except InconsistentError as exc:
            raise DecodeFailure(f"received symbols inconsistent: {exc}") from None
        out[lost] = self.A.take(self.row_of(lost)).mul_symbols(m)
        return out

    def is_recoverable(self, erased) -> bool:
        """Whether the source survives the erasure pattern (rank test only)."""
        pat = _as_pattern(erased, self.N)
        lost = [e for e in pat.erased if e < self.K]
        if not lost:
            return True
        sub = self._precode_subsystem(pat, lost)[0]
        return sub.shape[0] >= len(lost) and BitMatrix.from_dense(sub).rank() == len(lost)

    def _precode_subsystem(self, pat: ErasurePattern, lost):
        mask = pat.mask()
        recv_par = np.flatnonzero(~mask[self.K :])
        return self._gp_dense[recv_par][:, lost], recv_par

    def erasure_luts(self, erased, method: str = "trace") -> ErasureLuts:
        """Recovery tables for every erased source symbol.

        ``method="trace"`` runs a traced elimination of the reduced constraint
        system and composes the rows of its transform along the A-row of each
        erased symbol.  ``method="precode"`` eliminates only the parity-table
        columns of the erased symbols; both give the same tables whenever the
        pattern is decodable.
        """
        pat = _as_pattern(erased, self.N)
        lost = [e for e in pat.erased if e < self.K]
        if not lost:
            return ErasureLuts((), np.zeros((0, self.N), np.uint8))
        if method == "trace":
            luts = self._luts_trace(pat, lost)
        elif method == "precode":
            luts = self._luts_precode(pat, lost)
        else:
            raise ValueError(f"unknown LUT method {method!r}")
        return ErasureLuts(tuple(lost), luts)

    def _luts_trace(self, pat: ErasurePattern, lost) -> np.ndarray:
        keep, Ar = self._reduced_system(pat)
        tr = gaussian_eliminate(Ar)
        if tr.rank < self.L:
            raise DecodeFailure(f"reduced matrix rank {tr.rank} < {self.L}")
        n_rows = Ar.nrows
        P = np.zeros((self.L, n_rows), np.int64)
        P[:, tr.row_perm] = tr.transform.to_dense()[: self.L]
        rows = self.A.take(self.row_of(lost)).to_dense()[:, tr.col_perm[: self.L]].astype(np.int64)
        combo = (rows @ P) & 1
        luts = np.zeros((len(lost), self.N), np.uint8)
        luts[:, keep] = combo[:, : len(keep)]
        return luts

    def _luts_precode(self, pat: ErasurePattern, lost) -> np.ndarray:
        sub, recv_par = self._precode_subsystem(pat, lost)
        E = len(lost)
        if sub.shape[0] < E:
            raise DecodeFailure(f"{E} erased sources but only {sub.shape[0]} parities received")
        tr = gaussian_eliminate(BitMatrix.from_dense(sub))
        if tr.rank < E:
            raise DecodeFailure(f"erased-column rank {tr.rank} < {E}")
        Y = np.zeros((E, sub.shape[0]), np.int64)
        for k in range(E):
            Y[tr.col_perm[k]] = tr.pivot_combination(k)
        known = np.flatnonzero(~pat.mask()[: self.K])
        Z = (Y @ self._gp_dense[recv_par][:, known].astype(np.int64)) & 1
        luts = np.zeros((E, self.N), np.uint8)
        luts[:, self.K + recv_par] = Y
        luts[:, known] = Z
        return luts


@functools.lru_cache(maxsize=16)
def _build_cached(params: RaptorParams, reseed: int) -> RaptorCode:
    last = None
    for step in range(reseed + 1):
        p = params.with_seed(params.seed + step)
        try:
            return RaptorCode(p, BitMatrix.from_dense(_constraint_dense(p)))
        except SingularPrecode as exc:
            last = exc
    raise SingularPrecode(f"A_pre singular for seeds {params.seed}..{params.seed + reseed}: {last}")


def _code(code_or_params) -> RaptorCode:
    if isinstance(code_or_params, RaptorCode):
        return code_or_params
    return RaptorCode.from_params(code_or_params)


# --------------------------------------------------------------------------
# functional surface


def encode(code_or_params, source, method: str = "matrix") -> Codeword:
    return _code(code_or_params).encode(source, method)


def decode(code_or_params, received, erased, method: str = "inactivation") -> np.ndarray:
    return _code(code_or_params).decode(received, erased, method)


def build_parity_luts(code_or_params) -> np.ndarray:
    """``(N-K, K)`` 0/1 array of parity lookup tables."""
    return _code(code_or_params)._gp_dense.copy()


def build_erasure_luts(code_or_params, pattern, method: str = "trace") -> ErasureLuts:
    return _code(code_or_params).erasure_luts(pattern, method)


def is_recoverable(code_or_params, erased) -> bool:
    return _code(code_or_params).is_recoverable(erased)
