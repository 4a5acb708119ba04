"""Binary BCH codes: generator construction, systematic encoding and
bounded-distance decoding (Berlekamp-Massey plus Chien search).

Word layout: ``word[j]`` is the coefficient of ``x^(n-1-j)``.  The message
occupies the first ``k`` positions and the parity the last ``n - k``, so a
shortened code simply drops high-degree positions that would be zero.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field as dc_field

import numpy as np
from numba import njit
from scipy.stats import binom

from .errors import InvalidParams, LengthMismatch
from .galois import GaloisField, gf_build

__all__ = [
    "BchCode",
    "DecodeStatus",
    "DecodeOutcome",
    "bch_generate",
    "bch_for_message",
    "bch_encode",
    "bch_decode",
    "erasure_probability",
]


# --------------------------------------------------------------------------
# kernels


@njit(cache=True, inline="always")
def _gmul(a, b, exp, log):
    if a == 0 or b == 0:
        return 0
    return exp[log[a] + log[b]]


@njit(cache=True)
def _syndromes(word, n, t2, exp, log, order, out):
    """Fill ``out[1..t2]``; returns True if all are zero."""
    for i in range(t2 + 1):
        out[i] = 0
    for j in range(n):
        if word[j]:
            d = n - 1 - j
            for i in range(1, t2 + 1, 2):
                out[i] ^= exp[(i * d) % order]
    for i in range(2, t2 + 1, 2):
        s = out[i // 2]
        out[i] = 0 if s == 0 else exp[(2 * log[s]) % order]
    for i in range(1, t2 + 1):
        if out[i]:
            return False
    return True


@njit(cache=True)
def _berlekamp_massey(S, t2, exp, log, order, C):
    """Error locator into ``C`` (lowest degree first); returns its length L."""
    size = C.shape[0]
    B = np.zeros(size, np.int64)
    T = np.zeros(size, np.int64)
    for i in range(size):
        C[i] = 0
    C[0] = 1
    B[0] = 1
    L = 0
    shift = 1
    b = 1
    for r in range(t2):
        d = S[r + 1]
        for i in range(1, L + 1):
            d ^= _gmul(C[i], S[r + 1 - i], exp, log)
        if d == 0:
            shift += 1
            continue
        coef = exp[(log[d] - log[b]) % order]
        if 2 * L <= r:
            for i in range(size):
                T[i] = C[i]
            for i in range(size - shift):
                C[i + shift] ^= _gmul(coef, B[i], exp, log)
            L = r + 1 - L
            for i in range(size):
                B[i] = T[i]
            b = d
            shift = 1
        else:
            for i in range(size - shift):
                C[i + shift] ^= _gmul(coef, B[i], exp, log)
            shift += 1
    return L


@njit(cache=True)
def _decode_inplace(word, n, t, eff_t, exp, log, order, S, C, pos, T_):
    """Decode ``word`` in place.  Returns the number of corrected bits or -1."""
    t2 = 2 * t
    if _syndromes(word, n, t2, exp, log, order, S):
        return 0
    L = _berlekamp_massey(S, t2, exp, log, order, C)
    if L > eff_t or L == 0:
        return -1
    for i in range(L + 1, C.shape[0]):
        if C[i]:
            return -1
    # Chien search at alpha^(-d), d = n-1-j, stepping log-terms incrementally
    for i in range(1, L + 1):
        if C[i]:
            T_[i] = (log[C[i]] - ((n - 1) * i) % order) % order
        else:
            T_[i] = -1
    found = 0
    for j in range(n):
        acc = 1
        for i in range(1, L + 1):
            li = T_[i]
            if li >= 0:
                acc ^= exp[li]
                li += i
                if li >= order:
                    li -= order
                T_[i] = li
        if acc == 0:
            pos[found] = j
            found += 1
            if found == L:
                break
    if found != L:
        return -1
    # the correction must account for every syndrome, not just the locator
    for i in range(1, t2 + 1):
        s = 0
        for f in range(L):
            s ^= exp[(i * (n - 1 - pos[f])) % order]
        if s != S[i]:
            return -1
    for f in range(L):
        word[pos[f]] ^= 1
    return L


@njit(cache=True)
def decode_batch_kernel(words, t, eff_t, exp, log, order):
    count, n = words.shape
    S = np.zeros(2 * t + 1, np.int64)
    C = np.zeros(2 * t + 2, np.int64)
    pos = np.zeros(t + 1, np.int64)
    T_ = np.zeros(2 * t + 2, np.int64)
    out = np.empty(count, np.int64)
    for w in range(count):
        out[w] = _decode_inplace(words[w], n, t, eff_t, exp, log, order, S, C, pos, T_)
    return out


@njit(cache=True)
def _encode_kernel(msgs, gen, n):
    count, k = msgs.shape
    r = n - k
    out = np.zeros((count, n), np.uint8)
    rem = np.zeros(r, np.uint8)
    for w in range(count):
        rem[:] = 0
        for j in range(k):
            out[w, j] = msgs[w, j]
            fb = msgs[w, j] ^ rem[r - 1]
            for i in range(r - 1, 0, -1):
                rem[i] = rem[i - 1] ^ (fb & gen[i])
            rem[0] = fb & gen[0]
        for i in range(r):
            out[w, k + i] = rem[r - 1 - i]
    return out


@njit(cache=True)
def _syndrome_batch(words, t, exp, log, order):
    count, n = words.shape
    S = np.zeros(2 * t + 1, np.int64)
    out = np.zeros((count, 2 * t), np.int64)
    for w in range(count):
        _syndromes(words[w], n, 2 * t, exp, log, order, S)
        out[w] = S[1:]
    return out


# --------------------------------------------------------------------------
# code objects


class DecodeStatus(enum.Enum):
    CORRECTED = "corrected"
    FAILED = "failed"


@dataclass(frozen=True)
class DecodeOutcome:
    status: DecodeStatus
    count: int = 0
    codeword: np.ndarray | None = None

    @property
    def corrected(self) -> bool:
        return self.status is DecodeStatus.CORRECTED

    def __repr__(self) -> str:
        if self.corrected:
            return f"Corrected({self.count})"
        return "Failed"


def _poly_mul_gf2(a: int, b: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


@dataclass(frozen=True, eq=False)
class BchCode:
    """Binary (n, k, t) BCH code, possibly shortened from length 2^m - 1."""

    n: int
    k: int
    t: int
    field: GaloisField
    generator_poly: int
    shortened_by: int
    _gen_bits: np.ndarray = dc_field(repr=False)

    @property
    def m(self) -> int:
        return self.field.m

    @property
    def parity_bits(self) -> int:
        return self.n - self.k

    @property
    def ident(self) -> tuple[int, int, int]:
        return self.n, self.k, self.t

    def __repr__(self) -> str:
        return f"BchCode({self.n},{self.k},{self.t}; m={self.m})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BchCode)
            and (self.n, self.k, self.t, self.generator_poly) == (other.n, other.k, other.t, other.generator_poly)
            and self.field == other.field
        )

    def __hash__(self) -> int:
        return hash((self.n, self.k, self.t, self.generator_poly, self.field))

    def _tables(self):
        return self.field.exp, self.field.log, self.field.order

    def encode(self, message) -> np.ndarray:
        return bch_encode(self, message)

    def encode_many(self, messages: np.ndarray) -> np.ndarray:
        messages = np.ascontiguousarray(messages, dtype=np.uint8)
        if messages.ndim != 2 or messages.shape[1] != self.k:
            raise LengthMismatch(f"messages must have shape (count, {self.k})")
        return _encode_kernel(messages & 1, self._gen_bits, self.n)

    def syndromes(self, words) -> np.ndarray:
        """Syndromes S_1..S_2t of each word (rows of a 2-D array)."""
        words = np.atleast_2d(np.ascontiguousarray(words, dtype=np.uint8))
        if words.shape[1] != self.n:
            raise LengthMismatch(f"words must have {self.n} bits")
        exp, log, order = self._tables()
        return _syndrome_batch(words, self.t, exp, log, order)

    def is_codeword(self, word) -> bool:
        return not np.any(self.syndromes(word))

    def decode(self, received, effective_t: int | None = None) -> DecodeOutcome:
        return bch_decode(self, received, effective_t)

    def decode_many(self, words: np.ndarray, effective_t: int | None = None) -> np.ndarray:
        """Decode rows of ``words`` in place; returns corrected counts, -1 for failures."""
        if words.dtype != np.uint8 or words.ndim != 2 or not words.flags.c_contiguous:
            raise TypeError("words must be a C-contiguous 2-D uint8 array")
        if words.shape[1] != self.n:
            raise LengthMismatch(f"words must have {self.n} bits")
        eff = self._check_radius(effective_t)
        exp, log, order = self._tables()
        return decode_batch_kernel(words, self.t, eff, exp, log, order)

    def _check_radius(self, effective_t):
        eff = self.t if effective_t is None else int(effective_t)
        if not 0 <= eff <= self.t:
            raise ValueError(f"effective_t={eff} outside 0..{self.t}")
        return eff


def bch_generate(field: GaloisField, n: int, t: int) -> BchCode:
    """Narrow-sense BCH code of length ``n`` correcting ``t`` errors.

    The generator is the LCM of the minimal polynomials of alpha, alpha^3, ...,
    alpha^(2t-1); lengths below 2^m - 1 give a shortened code.
    """
    if t < 1:
        raise InvalidParams("t must be at least 1")
    if not 1 <= n <= field.order:
        raise InvalidParams(f"n={n} outside 1..{field.order} for m={field.m}")
    gen = 1
    seen = set()
    for i in range(1, 2 * t, 2):
        rep = min(field.cyclotomic_coset(i))
        if rep in seen:
            continue
        seen.add(rep)
        gen = _poly_mul_gf2(gen, field.minimal_polynomial(i))
    r = gen.bit_length() - 1
    k = n - r
    if k <= 0:
        raise InvalidParams(f"n={n}, t={t} leaves no message bits (parity {r})")
    bits = np.array([(gen >> i) & 1 for i in range(r + 1)], dtype=np.uint8)
    bits.flags.writeable = False
    return BchCode(n, k, t, field, gen, field.order - n, bits)


def bch_for_message(k: int, t: int, m: int | None = None) -> BchCode:
    """Shortest shortened BCH code carrying ``k`` message bits with capability ``t``.

    With ``m`` omitted, the smallest field that fits is used.
    """
    degrees = [m] if m is not None else range(3, 17)
    for deg in degrees:
        field = gf_build(deg)
        parent = bch_generate(field, field.order, t) if t * deg < field.order else None
        if parent is None:
            continue
        r = parent.n - parent.k
        if k + r <= field.order:
            return bch_generate(field, k + r, t)
    raise InvalidParams(f"no BCH code with k={k}, t={t} for m in {list(degrees)}")


def bch_encode(code: BchCode, message) -> np.ndarray:
    """Systematic encoding: message bits followed by ``n - k`` parity bits."""
    msg = np.asarray(message, dtype=np.uint8)
    if msg.ndim != 1 or msg.shape[0] != code.k:
        raise LengthMismatch(f"message has {msg.size} bits, code expects {code.k}")
    return _encode_kernel(msg.reshape(1, -1) & 1, code._gen_bits, code.n)[0]


def bch_decode(code: BchCode, received, effective_t: int | None = None) -> DecodeOutcome:
    """Bounded-distance decode within radius ``effective_t`` (default ``t``)."""
    word = np.array(received, dtype=np.uint8).reshape(-1)
    if word.shape[0] != code.n:
        raise LengthMismatch(f"received word has {word.size} bits, code expects {code.n}")
    eff = code._check_radius(effective_t)
    exp, log, order = code._tables()
    word &= 1
    out = decode_batch_kernel(word.reshape(1, -1), code.t, eff, exp, log, order)[0]
    if out < 0:
        return DecodeOutcome(DecodeStatus.FAILED)
    return DecodeOutcome(DecodeStatus.CORRECTED, int(out), word)


def erasure_probability(code: BchCode, p_e: float, effective_t: int | None = None) -> float:
    """Probability that more than ``effective_t`` of the ``n`` bits flip on a BSC."""
    if not 0.0 <= p_e <= 1.0:
        raise ValueError("p_e must lie in [0, 1]")
    eff = code._check_radius(effective_t)
    return float(binom.sf(eff, code.n, p_e))
