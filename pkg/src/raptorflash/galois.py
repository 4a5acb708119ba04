"""GF(2^m) arithmetic with log/antilog tables."""

from __future__ import annotations

import numpy as np

from .errors import NotPrimitive

__all__ = ["GaloisField", "gf_build", "DEFAULT_PRIMITIVE_POLYS"]

# minimal-weight primitive polynomials, bit i = coefficient of x^i
DEFAULT_PRIMITIVE_POLYS = {
    3: 0xB,
    4: 0x13,
    5: 0x25,
    6: 0x43,
    7: 0x89,
    8: 0x11D,
    9: 0x211,
    10: 0x409,
    11: 0x805,
    12: 0x1053,
    13: 0x201B,
    14: 0x4443,
    15: 0x8003,
    16: 0x1100B,
}


class GaloisField:
    """The field GF(2^m) generated by a primitive polynomial.

    ``exp`` has length ``2 * order`` so a product can index ``exp[log a + log b]``
    without a modulo.  ``log[0]`` is -1.
    """

    def __init__(self, m: int, primitive_poly: int | None = None):
        if not 3 <= m <= 16:
            raise ValueError(f"extension degree {m} outside 3..16")
        poly = DEFAULT_PRIMITIVE_POLYS[m] if primitive_poly is None else int(primitive_poly)
        if poly >> m != 1:
            raise NotPrimitive(f"polynomial {poly:#x} does not have degree {m}")
        self.m = m
        self.primitive_poly = poly
        self.size = 1 << m
        self.order = self.size - 1

        exp = np.zeros(2 * self.order, dtype=np.int64)
        log = np.full(self.size, -1, dtype=np.int64)
        x = 1
        for i in range(self.order):
            if log[x] != -1:
                raise NotPrimitive(
                    f"x has order {i} < {self.order} modulo {poly:#x}"
                )
            exp[i] = x
            log[x] = i
            x <<= 1
            if x & self.size:
                x ^= poly
        if x != 1:
            raise NotPrimitive(f"polynomial {poly:#x} is not primitive")
        exp[self.order :] = exp[: self.order]
        exp.flags.writeable = False
        log.flags.writeable = False
        self.exp = exp
        self.log = log

    def __repr__(self) -> str:
        return f"GaloisField(m={self.m}, poly={self.primitive_poly:#x})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, GaloisField)
            and self.m == other.m
            and self.primitive_poly == other.primitive_poly
        )

    def __hash__(self) -> int:
        return hash((self.m, self.primitive_poly))

    def alpha(self, i: int) -> int:
        return int(self.exp[i % self.order])

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return int(self.exp[self.log[a] + self.log[b]])

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("zero has no inverse")
        return int(self.exp[(self.order - self.log[a]) % self.order])

    def pow(self, a: int, e: int) -> int:
        if a == 0:
            return 0 if e else 1
        return int(self.exp[(self.log[a] * e) % self.order])

    def cyclotomic_coset(self, i: int) -> list[int]:
        coset = []
        j = i % self.order
        while j not in coset:
            coset.append(j)
            j = (2 * j) % self.order
        return coset

    def minimal_polynomial(self, i: int) -> int:
        """Minimal polynomial of alpha^i over GF(2), as a bitmask."""
        poly = [1]  # coefficients in GF(2^m), lowest degree first
        for j in self.cyclotomic_coset(i):
            root = self.alpha(j)
            nxt = [0] * (len(poly) + 1)
            for d, c in enumerate(poly):
                nxt[d + 1] ^= c
                nxt[d] ^= self.mul(c, root)
            poly = nxt
        mask = 0
        for d, c in enumerate(poly):
            if c not in (0, 1):
                raise ArithmeticError("minimal polynomial left GF(2)")
            mask |= c << d
        return mask


def gf_build(m: int, primitive_poly: int | None = None) -> GaloisField:
    """Build GF(2^m); raises ``NotPrimitive`` when the polynomial does not generate the group."""
    return GaloisField(m, primitive_poly)
