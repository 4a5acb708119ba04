"""Dense GF(2) linear algebra on word-packed bit matrices.

Symbols handed to the solvers are opaque equal-length byte blocks, given as a
``(count, T)`` uint8 array or a sequence of ``bytes``; the solvers only XOR
and permute them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _gf2kernels as K
from .errors import InconsistentError, SingularError

__all__ = [
    "BitMatrix",
    "GeTrace",
    "gaussian_eliminate",
    "solve",
    "inactivation_solve",
    "inverse",
    "as_symbols",
]


def _nwords(nbits: int) -> int:
    return (nbits + 63) // 64


def pack_bits(dense: np.ndarray) -> np.ndarray:
    """Pack a 2-D 0/1 array into uint64 words, LSB-first."""
    dense = np.asarray(dense, dtype=np.uint8) & 1
    rows, cols = dense.shape
    width = _nwords(cols) * 64
    padded = np.zeros((rows, width), dtype=np.uint8)
    padded[:, :cols] = dense
    packed = np.packbits(padded, axis=1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8").astype(np.uint64, copy=False)


def unpack_bits(words: np.ndarray, ncols: int) -> np.ndarray:
    words = np.ascontiguousarray(words, dtype=np.uint64)
    as_bytes = words.astype("<u8", copy=False).view(np.uint8)
    bits = np.unpackbits(as_bytes.reshape(words.shape[0], -1), axis=1, bitorder="little")
    return bits[:, :ncols]


class BitMatrix:
    """Binary matrix stored row-major as packed uint64 words."""

    __slots__ = ("words", "ncols")

    def __init__(self, words: np.ndarray, ncols: int):
        words = np.ascontiguousarray(words, dtype=np.uint64)
        if words.ndim != 2 or words.shape[1] != _nwords(ncols):
            raise ValueError(f"word array {words.shape} does not hold {ncols} columns")
        self.words = words
        self.ncols = int(ncols)

    @classmethod
    def from_dense(cls, dense) -> "BitMatrix":
        dense = np.atleast_2d(np.asarray(dense, dtype=np.uint8))
        return cls(pack_bits(dense), dense.shape[1])

    @classmethod
    def zeros(cls, nrows: int, ncols: int) -> "BitMatrix":
        return cls(np.zeros((nrows, _nwords(ncols)), np.uint64), ncols)

    @classmethod
    def identity(cls, n: int) -> "BitMatrix":
        return cls.from_dense(np.eye(n, dtype=np.uint8))

    @classmethod
    def random(cls, nrows: int, ncols: int, rng: np.random.Generator) -> "BitMatrix":
        return cls.from_dense(rng.integers(0, 2, size=(nrows, ncols), dtype=np.uint8))

    @property
    def nrows(self) -> int:
        return self.words.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.nrows, self.ncols

    def to_dense(self) -> np.ndarray:
        return unpack_bits(self.words, self.ncols)

    def row(self, i: int) -> np.ndarray:
        return unpack_bits(self.words[i : i + 1], self.ncols)[0]

    def take(self, rows) -> "BitMatrix":
        return BitMatrix(self.words[np.asarray(rows, dtype=np.intp)], self.ncols)

    def vstack(self, other: "BitMatrix") -> "BitMatrix":
        if other.ncols != self.ncols:
            raise ValueError("column count mismatch")
        return BitMatrix(np.vstack([self.words, other.words]), self.ncols)

    def columns(self, cols) -> "BitMatrix":
        cols = np.asarray(cols, dtype=np.intp)
        return BitMatrix.from_dense(self.to_dense()[:, cols].reshape(self.nrows, len(cols)))

    def copy(self) -> "BitMatrix":
        return BitMatrix(self.words.copy(), self.ncols)

    def rank(self) -> int:
        if self.nrows == 0:
            return 0
        return int(K.rank(self.words.copy(), self.ncols))

    def __matmul__(self, other: "BitMatrix") -> "BitMatrix":
        if self.ncols != other.nrows:
            raise ValueError(f"shape mismatch {self.shape} @ {other.shape}")
        out = K.matmul(self.words, other.words, other.words.shape[1])
        return BitMatrix(out, other.ncols)

    def mul_symbols(self, symbols) -> np.ndarray:
        """Multiply by a column of symbols: row i XORs the symbols its bits select."""
        sym = as_symbols(symbols)
        if sym.shape[0] != self.ncols:
            raise ValueError("symbol count does not match column count")
        words, T = _symbols_to_words(sym)
        out = K.matmul(self.words, words, words.shape[1])
        return _words_to_symbols(out, T)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitMatrix):
            return NotImplemented
        return self.ncols == other.ncols and np.array_equal(self.words, other.words)

    def __repr__(self) -> str:
        return f"BitMatrix({self.nrows}x{self.ncols})"


def as_symbols(symbols) -> np.ndarray:
    """Coerce a sequence of equal-length byte blocks to a ``(count, T)`` uint8 array."""
    if isinstance(symbols, np.ndarray):
        arr = symbols
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        return np.ascontiguousarray(arr, dtype=np.uint8)
    blocks = [bytes(s) for s in symbols]
    if not blocks:
        return np.zeros((0, 0), np.uint8)
    size = len(blocks[0])
    if any(len(b) != size for b in blocks):
        raise ValueError("symbols must all have the same byte size")
    return np.frombuffer(b"".join(blocks), dtype=np.uint8).reshape(len(blocks), size).copy()


def _symbols_to_words(sym: np.ndarray) -> tuple[np.ndarray, int]:
    count, T = sym.shape
    T8 = max(8, -(-T // 8) * 8)
    padded = np.zeros((count, T8), np.uint8)
    padded[:, :T] = sym
    return padded.view("<u8").astype(np.uint64, copy=False), T


def _words_to_symbols(words: np.ndarray, T: int) -> np.ndarray:
    raw = np.ascontiguousarray(words).astype("<u8", copy=False).view(np.uint8)
    return raw.reshape(words.shape[0], -1)[:, :T].copy()


@dataclass(frozen=True)
class GeTrace:
    """Outcome of a traced elimination.

    ``transform @ A[row_perm][:, col_perm]`` equals ``[[I_rank, X], [0, 0]]``.
    """

    rank: int
    row_perm: np.ndarray
    col_perm: np.ndarray
    transform: BitMatrix

    def pivot_combination(self, k: int) -> np.ndarray:
        """0/1 vector over the *original* rows whose XOR yields unknown ``col_perm[k]``."""
        v = np.zeros(len(self.row_perm), np.uint8)
        v[self.row_perm] = self.transform.row(k)
        return v


def gaussian_eliminate(a: BitMatrix) -> GeTrace:
    """Traced Gauss-Jordan elimination.

    Pivot rule: rows in index order, each pivoting on its lowest nonzero
    column.  Rank deficiency shows up in ``rank``; nothing is raised.
    """
    if a.nrows == 0 or a.ncols == 0:
        raise ValueError("matrix must be nonempty")
    n = a.nrows
    cw = a.words.shape[1]
    ident = pack_bits(np.eye(n, dtype=np.uint8))
    aug = np.ascontiguousarray(np.hstack([a.words, ident]))
    pivcol = K.gauss_jordan(aug, a.ncols)

    pivot_rows = np.flatnonzero(pivcol >= 0)
    free_rows = np.flatnonzero(pivcol < 0)
    row_perm = np.concatenate([pivot_rows, free_rows])
    pcols = pivcol[pivot_rows]
    rest = np.setdiff1d(np.arange(a.ncols), pcols)
    col_perm = np.concatenate([pcols, rest]).astype(np.int64)

    trace_rows = unpack_bits(aug[row_perm, cw:], n)
    transform = BitMatrix.from_dense(trace_rows[:, row_perm])
    return GeTrace(len(pivot_rows), row_perm, col_perm, transform)


def _prepare(a: BitMatrix, rhs) -> tuple[np.ndarray, int]:
    sym = as_symbols(rhs)
    if sym.shape[0] != a.nrows:
        raise ValueError(f"{a.nrows} rows but {sym.shape[0]} right-hand symbols")
    words, T = _symbols_to_words(sym)
    return np.ascontiguousarray(np.hstack([a.words, words])), T


def _finish(aug, pivcol, a: BitMatrix, T: int) -> np.ndarray:
    cw = a.words.shape[1]
    rank = int(np.count_nonzero(pivcol >= 0))
    if rank < a.ncols:
        raise SingularError(f"rank {rank} < {a.ncols} unknowns")
    payload = aug[:, cw:]
    if np.any(payload[pivcol < 0]):
        raise InconsistentError("right-hand side is not in the column space")
    order = np.empty(a.ncols, np.intp)
    order[pivcol[pivcol >= 0]] = np.flatnonzero(pivcol >= 0)
    return _words_to_symbols(payload[order], T)


def solve(a: BitMatrix, rhs) -> np.ndarray:
    """Solve ``a @ m == rhs`` for the symbol vector ``m``.

    Raises ``SingularError`` when rank(a) < a.ncols and ``InconsistentError``
    when ``a`` has full column rank but the system has no solution.
    """
    aug, T = _prepare(a, rhs)
    pivcol = K.forward_solve(aug, a.ncols)
    return _finish(aug, pivcol, a, T)


def inactivation_solve(a: BitMatrix, rhs, stats: dict | None = None) -> np.ndarray:
    """Same contract as :func:`solve`, computed by peeling with inactivation.

    Degree-1 rows are consumed first; a column is inactivated only when no
    degree-1 row remains.  When ``stats`` is given, the number of inactivated
    columns is stored under ``"inactivated"``.
    """
    aug, T = _prepare(a, rhs)
    pivcol, n_inact = K.inactivation(aug, a.ncols)
    if stats is not None:
        stats["inactivated"] = int(n_inact)
    return _finish(aug, pivcol, a, T)


def inverse(a: BitMatrix) -> BitMatrix:
    """Inverse of a square matrix; raises ``SingularError`` when it has none."""
    n = a.nrows
    if n != a.ncols:
        raise ValueError("inverse needs a square matrix")
    cw = a.words.shape[1]
    aug = np.ascontiguousarray(np.hstack([a.words, pack_bits(np.eye(n, dtype=np.uint8))]))
    pivcol = K.gauss_jordan(aug, n)
    if np.any(pivcol < 0):
        raise SingularError(f"rank {int(np.count_nonzero(pivcol >= 0))} < {n}")
    out = np.empty((n, aug.shape[1] - cw), np.uint64)
    out[pivcol] = aug[:, cw:]
    return BitMatrix(out, n)
