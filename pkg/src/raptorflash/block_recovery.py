"""Off-line recovery of a logical NAND block protected by an outer Raptor code.

Every inner (BCH) codeword carries ``N_s`` Raptor symbols of ``T`` bytes.  A
block holds ``w * p`` data words followed by ``(N - K) / N_s`` parity words.
Parities are maintained in a single streaming pass from the parity lookup
tables; when some inner words fail to decode, the erasure lookup tables name
the handful of words that must be read back to rebuild them.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .bch import BchCode, bch_generate
from .errors import (
    DecodeFailure,
    IndexOutOfRange,
    InvalidParams,
    RecoveryFailure,
    WordSizeMismatch,
)
from .galois import gf_build
from .raptor import ErasureLuts, RaptorCode, RaptorParams, xor_fold

__all__ = [
    "BlockGeometry",
    "WriteState",
    "WordStore",
    "RecoveryResult",
    "stream_write",
    "update_word",
    "encode_block",
    "recover_block",
    "write_block_file",
    "read_block_file",
    "inner_code_id",
]

MAGIC = b"FBLK"
VERSION = 1
_HEADER = struct.Struct("<4sHHHHII")


@dataclass(frozen=True)
class BlockGeometry:
    p: int
    w: int
    N_s: int
    inner: BchCode
    N: int
    T: int

    def __post_init__(self):
        if min(self.p, self.w, self.N_s, self.T) < 1:
            raise InvalidParams("p, w, N_s and T must be positive")
        if self.inner.k != self.N_s * self.T * 8:
            raise InvalidParams(
                f"inner code carries {self.inner.k} bits, words need {self.N_s * self.T * 8}"
            )
        if self.N <= self.K:
            raise InvalidParams("block needs at least one parity symbol")
        if (self.N - self.K) % self.N_s:
            raise InvalidParams("parity symbol count must fill whole words")

    @property
    def K(self) -> int:
        return self.w * self.p * self.N_s

    @property
    def n_data_words(self) -> int:
        return self.w * self.p

    @property
    def n_parity_words(self) -> int:
        return (self.N - self.K) // self.N_s

    @property
    def n_words(self) -> int:
        return self.n_data_words + self.n_parity_words

    @property
    def word_bytes(self) -> int:
        return self.N_s * self.T

    def raptor_params(self, **kw) -> RaptorParams:
        return RaptorParams(K=self.K, N=self.N, T=self.T, **kw)

    def symbols_of(self, word: int) -> np.ndarray:
        """Raptor symbol ids carried by stored word ``word`` (data or parity)."""
        if word < self.n_data_words:
            start = word * self.N_s
        else:
            start = self.K + (word - self.n_data_words) * self.N_s
        return np.arange(start, start + self.N_s)

    def word_of(self, symbol) -> np.ndarray:
        symbol = np.asarray(symbol, dtype=np.int64)
        return np.where(
            symbol < self.K,
            symbol // self.N_s,
            self.n_data_words + (symbol - self.K) // self.N_s,
        )


def _as_word(word, geom_or_state) -> np.ndarray:
    N_s, T = geom_or_state.N_s, geom_or_state.T
    arr = np.frombuffer(bytes(word), np.uint8) if not isinstance(word, np.ndarray) else word
    arr = np.asarray(arr, dtype=np.uint8)
    if arr.size != N_s * T:
        raise WordSizeMismatch(f"word has {arr.size} bytes, expected {N_s * T}")
    return arr.reshape(N_s, T)


@dataclass
class WriteState:
    """Running parity symbols of a block being written."""

    N_s: int
    T: int
    luts: np.ndarray = field(repr=False)
    parities: np.ndarray = field(repr=False)
    words_seen: int = 0

    def copy(self) -> "WriteState":
        return WriteState(self.N_s, self.T, self.luts, self.parities.copy(), self.words_seen)

    def _fold(self, index: int, word: np.ndarray) -> None:
        base = index * self.N_s
        for j in range(self.N_s):
            hit = self.luts[:, base + j]
            self.parities[hit] ^= word[j]

    def write(self, word) -> None:
        if self.words_seen * self.N_s >= self.luts.shape[1]:
            raise IndexOutOfRange("block is already full")
        self._fold(self.words_seen, _as_word(word, self))
        self.words_seen += 1


def stream_write(geom: BlockGeometry, code: RaptorCode, words, state: WriteState | None = None) -> WriteState:
    """Fold a stream of data words into the parity symbols, one word at a time."""
    if state is None:
        luts = code.parity_luts().to_dense().astype(bool)
        state = WriteState(geom.N_s, geom.T, luts, np.zeros((geom.N - geom.K, geom.T), np.uint8))
    for word in words:
        state.write(word)
    return state


def update_word(state: WriteState, index: int, old_word, new_word) -> WriteState:
    """Parities after rewriting word ``index``; XORs in ``old ^ new``."""
    if not 0 <= index < state.words_seen:
        raise IndexOutOfRange(f"word {index} has not been written")
    delta = _as_word(old_word, state) ^ _as_word(new_word, state)
    out = state.copy()
    out._fold(index, delta)
    return out


def _payload_to_bits(payload: np.ndarray) -> np.ndarray:
    return np.unpackbits(payload.reshape(payload.shape[0], -1), axis=1)


def _bits_to_payload(bits: np.ndarray) -> np.ndarray:
    return np.packbits(bits, axis=1)


def encode_block(geom: BlockGeometry, code: RaptorCode, data_words) -> np.ndarray:
    """Inner codewords (bits) of every stored word, parity words last.

    A partially written block is padded with zero words.
    """
    data = np.asarray(data_words, dtype=np.uint8).reshape(-1, geom.word_bytes)
    if data.shape[0] > geom.n_data_words:
        raise IndexOutOfRange(f"{data.shape[0]} words exceed the block's {geom.n_data_words}")
    if data.shape[0] < geom.n_data_words:
        pad = np.zeros((geom.n_data_words - data.shape[0], geom.word_bytes), np.uint8)
        data = np.vstack([data, pad])
    state = stream_write(geom, code, data)
    payload = np.vstack([data, state.parities.reshape(geom.n_parity_words, geom.word_bytes)])
    return geom.inner.encode_many(_payload_to_bits(payload))


class WordStore:
    """Stored inner codewords of one block with an instrumented read path.

    ``scan`` models the normal read traffic that tags inner-decode failures
    (or ``failed`` presets the tags); ``read`` counts every word fetched
    during recovery.
    """

    def __init__(self, geom: BlockGeometry, codewords: np.ndarray, failed=None):
        codewords = np.ascontiguousarray(codewords, dtype=np.uint8)
        if codewords.shape != (geom.n_words, geom.inner.n):
            raise WordSizeMismatch(f"store expects shape {(geom.n_words, geom.inner.n)}")
        self.geom = geom
        self.codewords = codewords
        self.reads = 0
        self.read_log: list[int] = []
        self._failed: np.ndarray | None = None
        if failed is not None:
            mask = np.zeros(geom.n_words, bool)
            mask[np.asarray(failed, dtype=np.int64)] = True
            self._failed = mask

    def scan(self) -> np.ndarray:
        """Inner-decode every word once; returns the failure mask."""
        if self._failed is None:
            work = self.codewords.copy()
            counts = self.geom.inner.decode_many(work)
            self._failed = counts < 0
        return self._failed

    @property
    def failed_words(self) -> np.ndarray:
        return np.flatnonzero(self.scan())

    def read(self, index: int) -> np.ndarray:
        """Inner-decoded payload of word ``index`` as ``(N_s, T)`` bytes."""
        if not 0 <= index < self.geom.n_words:
            raise IndexOutOfRange(f"word {index} outside the block")
        self.reads += 1
        self.read_log.append(int(index))
        word = self.codewords[index : index + 1].copy()
        self.geom.inner.decode_many(word)
        payload = _bits_to_payload(word[:, : self.geom.inner.k])
        return payload.reshape(self.geom.N_s, self.geom.T)


@dataclass(frozen=True)
class RecoveryResult:
    words: dict
    luts: ErasureLuts
    reads: int


def recover_block(
    geom: BlockGeometry, code: RaptorCode, store: WordStore, method: str = "precode"
) -> RecoveryResult:
    """Rebuild the data words whose inner decoding failed.

    Only words flagged by the erasure lookup tables are read.  Raises
    ``RecoveryFailure`` when the outer code cannot resolve the erasures.
    """
    failed = store.failed_words
    lost_data = [int(w) for w in failed if w < geom.n_data_words]
    if not lost_data:
        return RecoveryResult({}, ErasureLuts((), np.zeros((0, geom.N), np.uint8)), 0)
    erased = np.concatenate([geom.symbols_of(int(w)) for w in failed])
    try:
        luts = code.erasure_luts(erased, method=method)
    except DecodeFailure as exc:
        raise RecoveryFailure(f"{len(failed)} failed words: {exc}") from None
    symbols = np.zeros((geom.N, geom.T), np.uint8)
    before = store.reads
    for word in np.unique(geom.word_of(luts.positions())):
        symbols[geom.symbols_of(int(word))] = store.read(int(word))
    rebuilt = xor_fold(luts.luts, symbols)
    by_symbol = dict(zip(luts.erased, rebuilt))
    words = {
        w: b"".join(by_symbol[int(s)].tobytes() for s in geom.symbols_of(w)) for w in lost_data
    }
    return RecoveryResult(words, luts, store.reads - before)


# --------------------------------------------------------------------------
# block file


def inner_code_id(code: BchCode) -> int:
    return (code.m << 24) | (code.t << 16) | code.n


def _code_from_id(ident: int) -> BchCode:
    m, t, n = ident >> 24, (ident >> 16) & 0xFF, ident & 0xFFFF
    return bch_generate(gf_build(m), n, t)


def write_block_file(path, geom: BlockGeometry, codewords: np.ndarray) -> None:
    """Header, then every stored word packed MSB-first, data words before parity."""
    header = _HEADER.pack(MAGIC, VERSION, geom.p, geom.w, geom.N_s, geom.T, inner_code_id(geom.inner))
    body = np.packbits(np.asarray(codewords, dtype=np.uint8), axis=1)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body.tobytes())


def read_block_file(path) -> tuple[BlockGeometry, np.ndarray]:
    size = os.path.getsize(path)
    with open(path, "rb") as fh:
        raw = fh.read()
    if size < _HEADER.size:
        raise ValueError("file too short for a block header")
    magic, version, p, w, N_s, T, ident = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"unsupported block file version {version}")
    inner = _code_from_id(ident)
    nbytes = (inner.n + 7) // 8
    body = np.frombuffer(raw, np.uint8, offset=_HEADER.size)
    if body.size % nbytes:
        raise ValueError("block body is not a whole number of words")
    n_words = body.size // nbytes
    parity_words = n_words - p * w
    if parity_words < 1:
        raise ValueError("block file holds no parity words")
    geom = BlockGeometry(p, w, N_s, inner, p * w * N_s + parity_words * N_s, T)
    bits = np.unpackbits(body.reshape(n_words, nbytes), axis=1)[:, : inner.n]
    return geom, np.ascontiguousarray(bits)
