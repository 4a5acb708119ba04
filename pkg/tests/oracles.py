"""Slow reference implementations used only as test oracles."""

import itertools


def rows_as_ints(dense):
    return [int("".join(str(int(b)) for b in reversed(row)) or "0", 2) for row in dense]


def rank_naive(dense):
    rows = rows_as_ints(dense)
    rank = 0
    for bit in range(max((r.bit_length() for r in rows), default=0)):
        pivot = next((i for i in range(rank, len(rows)) if rows[i] >> bit & 1), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        for i in range(len(rows)):
            if i != rank and rows[i] >> bit & 1:
                rows[i] ^= rows[rank]
        rank += 1
    return rank


def solve_naive(dense, rhs):
    """Solve A x = b over GF(2) for integer-coded symbols; None when not unique."""
    n = len(dense[0])
    aug = [(r, int(b)) for r, b in zip(rows_as_ints(dense), rhs)]
    where = [None] * n
    row = 0
    for col in range(n):
        pivot = next((i for i in range(row, len(aug)) if aug[i][0] >> col & 1), None)
        if pivot is None:
            return None
        aug[row], aug[pivot] = aug[pivot], aug[row]
        for i in range(len(aug)):
            if i != row and aug[i][0] >> col & 1:
                aug[i] = (aug[i][0] ^ aug[row][0], aug[i][1] ^ aug[row][1])
        where[col] = row
        row += 1
    if any(r == 0 and b != 0 for r, b in aug[row:]):
        return "inconsistent"
    return [aug[where[c]][1] for c in range(n)]


def poly_mul(a, b):
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def poly_mod(a, m):
    dm = m.bit_length()
    while a.bit_length() >= dm:
        a ^= m << (a.bit_length() - dm)
    return a


def poly_irreducible(p):
    d = p.bit_length() - 1
    for q in range(2, 1 << (d // 2 + 1)):
        if q.bit_length() - 1 >= 1 and q.bit_length() - 1 <= d // 2 and poly_mod(p, q) == 0:
            return False
    return True


def min_poly_by_search(alpha_pow, m, prim):
    """Lowest-degree monic binary polynomial vanishing at alpha^alpha_pow, by brute force."""
    def gf_pow(e):
        x = 1
        for _ in range(e):
            x <<= 1
            if x >> m:
                x ^= prim
        return x

    beta = gf_pow(alpha_pow)
    powers = [1]
    for _ in range(m):
        x = 0
        a, b = powers[-1], beta
        # multiply in GF(2^m)
        while b:
            if b & 1:
                x ^= a
            b >>= 1
            a <<= 1
            if a >> m:
                a ^= prim
        powers.append(x)
    for deg in range(1, m + 1):
        for low in range(1 << deg):
            poly = (1 << deg) | low
            acc = 0
            for i in range(deg + 1):
                if poly >> i & 1:
                    acc ^= powers[i]
            if acc == 0:
                return poly
    raise AssertionError("no minimal polynomial found")


def all_codewords(code):
    words = []
    for bits in itertools.product([0, 1], repeat=code.k):
        words.append(tuple(int(x) for x in code.encode(list(bits))))
    return words
