"""Numba kernels for packed GF(2) row operations.

Rows are arrays of uint64 words, bit ``j`` of a row lives in word ``j >> 6`` at
position ``j & 63``.  The first ``ncols`` bits of each row are matrix columns;
any words after them are payload (right-hand sides, traces) that ride along
with every row operation.
"""

import numpy as np
from numba import njit

ONE = np.uint64(1)


_DEBRUIJN = np.uint64(0x03F79D71B4CB0A89)
_DB_TABLE = np.array(
    [0, 1, 48, 2, 57, 49, 28, 3, 61, 58, 50, 42, 38, 29, 17, 4,
     62, 55, 59, 36, 53, 51, 43, 22, 45, 39, 33, 30, 24, 18, 12, 5,
     63, 47, 56, 27, 60, 41, 37, 16, 54, 35, 52, 21, 44, 32, 23, 11,
     46, 26, 40, 15, 34, 20, 31, 10, 25, 14, 19, 9, 13, 8, 7, 6],
    dtype=np.int64,
)


@njit(cache=True, inline="always")
def _ctz(x):
    # x must be nonzero
    return _DB_TABLE[((x & (np.uint64(0) - x)) * _DEBRUIJN) >> np.uint64(58)]


@njit(cache=True, inline="always")
def _popcount(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return int((x * np.uint64(0x0101010101010101)) >> np.uint64(56))


@njit(cache=True)
def _col_mask(ncols):
    cw = (ncols + 63) // 64
    mask = np.empty(cw, np.uint64)
    for w in range(cw):
        mask[w] = ~np.uint64(0)
    rem = ncols & 63
    if rem and cw:
        mask[cw - 1] = (np.uint64(1) << np.uint64(rem)) - np.uint64(1)
    return mask


@njit(cache=True)
def _lowest_bit(aug, r, mask):
    for w in range(mask.shape[0]):
        x = aug[r, w] & mask[w]
        if x:
            return w * 64 + _ctz(x)
    return -1


@njit(cache=True)
def _eliminate(aug, r, c, rows_from, skip):
    """XOR row ``r`` into every row ``>= rows_from`` holding column ``c``.

    Rows flagged in ``skip`` are left alone.  Branch-free over the row set.
    """
    nrows, nwords = aug.shape
    wc = c >> 6
    sh = np.uint64(c & 63)
    prow = aug[r].copy()
    for r2 in range(rows_from, nrows):
        if r2 == r or skip[r2]:
            continue
        m = np.uint64(0) - ((aug[r2, wc] >> sh) & ONE)
        for k in range(nwords):
            aug[r2, k] ^= prow[k] & m


@njit(cache=True)
def gauss_jordan(aug, ncols):
    """Row-driven Gauss-Jordan elimination in place.

    Rows are visited in index order; each nonzero row pivots on its lowest set
    column and that column is cleared from every other row.  Returns the pivot
    column of every row (-1 for rows left zero).
    """
    nrows = aug.shape[0]
    mask = _col_mask(ncols)
    pivcol = np.full(nrows, -1, np.int64)
    noskip = np.zeros(nrows, np.bool_)
    for r in range(nrows):
        c = _lowest_bit(aug, r, mask)
        if c < 0:
            continue
        pivcol[r] = c
        _eliminate(aug, r, c, 0, noskip)
    return pivcol


@njit(cache=True)
def _back_substitute(aug, ncols, pivcol, order, npiv):
    """Resolve a triangular pivot set on the payload words.

    ``order[:npiv]`` lists pivot rows such that each row holds no pivot column
    of an earlier row.  Afterwards the payload of each pivot row is the value
    of its pivot unknown.
    """
    nwords = aug.shape[1]
    cw = (ncols + 63) // 64
    mask = _col_mask(ncols)
    rowof = np.full(ncols, -1, np.int64)
    for i in range(npiv):
        rowof[pivcol[order[i]]] = order[i]
    for i in range(npiv - 1, -1, -1):
        r = order[i]
        own = pivcol[r]
        for w in range(cw):
            x = aug[r, w] & mask[w]
            while x:
                b = _ctz(x)
                x &= x - ONE
                c = w * 64 + b
                if c == own:
                    continue
                src = rowof[c]
                if src >= 0:
                    for k in range(cw, nwords):
                        aug[r, k] ^= aug[src, k]


@njit(cache=True)
def forward_solve(aug, ncols):
    """Forward elimination in row order, then back substitution on the payload."""
    nrows = aug.shape[0]
    mask = _col_mask(ncols)
    pivcol = np.full(nrows, -1, np.int64)
    order = np.empty(nrows, np.int64)
    noskip = np.zeros(nrows, np.bool_)
    npiv = 0
    for r in range(nrows):
        c = _lowest_bit(aug, r, mask)
        if c < 0:
            continue
        pivcol[r] = c
        order[npiv] = r
        npiv += 1
        _eliminate(aug, r, c, r + 1, noskip)
    _back_substitute(aug, ncols, pivcol, order, npiv)
    return pivcol


@njit(cache=True)
def inactivation(aug, ncols):
    """Peeling with inactivation, then dense elimination of the inactive part.

    Returns ``(pivcol, n_inactivated)`` with ``pivcol`` as in ``gauss_jordan``;
    the payload of the pivot row of column ``c`` ends up holding unknown ``c``.
    """
    nrows, nwords = aug.shape
    mask = _col_mask(ncols)
    cw = mask.shape[0]
    active = mask.copy()
    used = np.zeros(nrows, np.bool_)
    pivcol = np.full(nrows, -1, np.int64)
    order = np.empty(nrows, np.int64)
    npiv = 0
    deg = np.zeros(nrows, np.int64)
    for r in range(nrows):
        d = 0
        for w in range(cw):
            d += _popcount(aug[r, w] & active[w])
        deg[r] = d
    n_active = ncols
    n_inact = 0

    while n_active > 0:
        r = -1
        for i in range(nrows):
            if not used[i] and deg[i] == 1:
                r = i
                break
        if r < 0:
            best = -1
            bd = ncols + 1
            for i in range(nrows):
                if not used[i] and deg[i] >= 2 and deg[i] < bd:
                    best = i
                    bd = deg[i]
            if best < 0:
                # remaining active columns appear in no free row
                for w in range(cw):
                    n_inact += _popcount(active[w])
                    active[w] = np.uint64(0)
                n_active = 0
                break
            # keep the lowest active column of the chosen row, inactivate the rest
            keep = -1
            for w in range(cw):
                x = aug[best, w] & active[w]
                while x:
                    b = _ctz(x)
                    x &= x - ONE
                    if keep < 0:
                        keep = w * 64 + b
                    else:
                        active[w] &= ~(ONE << np.uint64(b))
                        n_active -= 1
                        n_inact += 1
            for i in range(nrows):
                if not used[i]:
                    d = 0
                    for w in range(cw):
                        d += _popcount(aug[i, w] & active[w])
                    deg[i] = d
            r = best
        c = -1
        for w in range(cw):
            x = aug[r, w] & active[w]
            if x:
                c = w * 64 + _ctz(x)
                break
        used[r] = True
        pivcol[r] = c
        order[npiv] = r
        npiv += 1
        active[c >> 6] &= ~(ONE << np.uint64(c & 63))
        n_active -= 1
        wc = c >> 6
        sh = np.uint64(c & 63)
        for i in range(nrows):
            if used[i]:
                continue
            if (aug[i, wc] >> sh) & ONE:
                for k in range(nwords):
                    aug[i, k] ^= aug[r, k]
                deg[i] -= 1

    # dense phase: free rows now only touch inactive columns
    for r in range(nrows):
        if used[r]:
            continue
        c = _lowest_bit(aug, r, mask)
        if c < 0:
            continue
        used[r] = True
        pivcol[r] = c
        order[npiv] = r
        npiv += 1
        _eliminate(aug, r, c, r + 1, used)
    _back_substitute(aug, ncols, pivcol, order, npiv)
    return pivcol, n_inact


@njit(cache=True)
def matmul(a, b, b_ncols_words):
    """Packed product: row i of the result XORs rows of ``b`` selected by row i of ``a``."""
    nrows = a.shape[0]
    inner = b.shape[0]
    out = np.zeros((nrows, b_ncols_words), np.uint64)
    for i in range(nrows):
        for j in range(inner):
            if (a[i, j >> 6] >> np.uint64(j & 63)) & ONE:
                for k in range(b_ncols_words):
                    out[i, k] ^= b[j, k]
    return out


@njit(cache=True)
def rank(aug, ncols):
    piv = gauss_jordan(aug, ncols)
    n = 0
    for p in piv:
        if p >= 0:
            n += 1
    return n
