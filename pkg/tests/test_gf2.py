import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import rank_naive, solve_naive
from raptorflash.errors import InconsistentError, SingularError
from raptorflash.gf2 import BitMatrix, gaussian_eliminate, inactivation_solve, inverse, solve

# reduced system of the worked erasure example (symbol s4 dropped)
A_PRIME = [[0, 1, 0, 1], [1, 0, 1, 1], [0, 1, 0, 0], [1, 0, 0, 1]]


def dense_matrices(max_rows=20, max_cols=20):
    return st.integers(1, max_rows).flatmap(
        lambda r: st.integers(1, max_cols).flatmap(
            lambda c: arrays(np.uint8, (r, c), elements=st.integers(0, 1))
        )
    )


def test_pack_roundtrip_wide():
    rng = np.random.default_rng(0)
    d = rng.integers(0, 2, (7, 130), dtype=np.uint8)
    assert np.array_equal(BitMatrix.from_dense(d).to_dense(), d)


def test_identity_trace():
    tr = gaussian_eliminate(BitMatrix.identity(4))
    assert tr.rank == 4
    assert tr.transform == BitMatrix.identity(4)


def test_example_trace_first_rows():
    tr = gaussian_eliminate(BitMatrix.from_dense(A_PRIME))
    assert tr.rank == 4
    # each pivot combination expresses one unknown over the received symbols
    combos = {int(tr.col_perm[k]): tr.pivot_combination(k).tolist() for k in range(4)}
    assert combos[1] == [0, 0, 1, 0]  # m2 = s3
    assert combos[3] == [1, 0, 1, 0]  # m4 = s1 + s3
    assert combos[0] == [1, 0, 1, 1]  # m1 = s1 + s3 + r1
    assert combos[2] == [0, 1, 0, 1]  # m3 = s2 + r1


@given(dense_matrices())
def test_trace_reproduces_reduced_form(d):
    a = BitMatrix.from_dense(d)
    tr = gaussian_eliminate(a)
    assert tr.rank == rank_naive(d)
    reduced = (tr.transform @ BitMatrix.from_dense(d[tr.row_perm][:, tr.col_perm])).to_dense()
    r = tr.rank
    assert np.array_equal(reduced[:r, :r], np.eye(r, dtype=np.uint8))
    assert not reduced[r:].any()
    # the transform is invertible
    assert tr.transform.rank() == d.shape[0]


def test_random_12x8_rank_matches_oracle():
    rng = np.random.default_rng(12)
    for _ in range(50):
        d = rng.integers(0, 2, (12, 8), dtype=np.uint8)
        assert gaussian_eliminate(BitMatrix.from_dense(d)).rank == rank_naive(d)


def test_solve_identity():
    s = np.arange(5, dtype=np.uint8).reshape(5, 1)
    assert np.array_equal(solve(BitMatrix.identity(5), s), s)


def test_solve_example_system():
    # unit symbols s1, s2, s3, r1 as one-hot bytes
    rhs = np.array([[1], [2], [4], [8]], np.uint8)
    m = solve(BitMatrix.from_dense(A_PRIME), rhs)
    assert m.ravel().tolist() == [1 ^ 4 ^ 8, 4, 2 ^ 8, 1 ^ 4]
    assert np.array_equal(BitMatrix.from_dense(A_PRIME).mul_symbols(m), rhs)
    assert np.array_equal(inactivation_solve(BitMatrix.from_dense(A_PRIME), rhs), m)


def test_solve_20x16_matches_oracle():
    rng = np.random.default_rng(3)
    done = 0
    while done < 20:
        d = rng.integers(0, 2, (20, 16), dtype=np.uint8)
        if rank_naive(d) < 16:
            continue
        x = rng.integers(0, 256, 16)
        b = [int(np.bitwise_xor.reduce(x[d[i] == 1], initial=0)) for i in range(20)]
        got = solve(BitMatrix.from_dense(d), np.array(b, np.uint8).reshape(-1, 1)).ravel()
        assert got.tolist() == solve_naive(d.tolist(), b) == x.tolist()
        done += 1


def test_singular_raises():
    with pytest.raises(SingularError):
        solve(BitMatrix.from_dense([[1, 1], [1, 1]]), np.zeros((2, 1), np.uint8))
    with pytest.raises(SingularError):
        inactivation_solve(BitMatrix.from_dense([[1, 1], [1, 1]]), np.zeros((2, 1), np.uint8))


def test_inconsistent_overdetermined():
    a = BitMatrix.from_dense([[1, 0], [0, 1], [1, 1]])
    rhs = np.array([[1], [1], [1]], np.uint8)
    with pytest.raises(InconsistentError):
        solve(a, rhs)
    with pytest.raises(InconsistentError):
        inactivation_solve(a, rhs)


def test_peeling_chain_has_no_inactivations():
    n = 30
    d = np.eye(n, dtype=np.uint8)
    d[np.arange(1, n), np.arange(n - 1)] = 1
    rhs = np.arange(n, dtype=np.uint8).reshape(-1, 1)
    stats = {}
    m = inactivation_solve(BitMatrix.from_dense(d), rhs, stats)
    assert stats["inactivated"] == 0
    assert np.array_equal(m, solve(BitMatrix.from_dense(d), rhs))


def _outcome(fn, a, rhs):
    try:
        return ("ok", fn(a, rhs).tobytes())
    except SingularError:
        return ("singular", None)
    except InconsistentError:
        return ("inconsistent", None)


def test_solver_equivalence_64x48():
    rng = np.random.default_rng(64)
    for _ in range(200):
        a = BitMatrix.random(64, 48, rng)
        rhs = rng.integers(0, 256, (64, 3), dtype=np.uint8)
        if rng.random() < 0.5:
            rhs = a.mul_symbols(rng.integers(0, 256, (48, 3), dtype=np.uint8))
        assert _outcome(solve, a, rhs) == _outcome(inactivation_solve, a, rhs)


@given(dense_matrices(24, 16), st.integers(0, 2**32 - 1))
def test_solver_equivalence_property(d, seed):
    rng = np.random.default_rng(seed)
    a = BitMatrix.from_dense(d)
    rhs = a.mul_symbols(rng.integers(0, 256, (d.shape[1], 2), dtype=np.uint8))
    ga, gb = _outcome(solve, a, rhs), _outcome(inactivation_solve, a, rhs)
    assert ga == gb
    if ga[0] == "ok":
        m = solve(a, rhs)
        assert np.array_equal(a.mul_symbols(m), rhs)


@given(st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_inverse_property(n, seed):
    rng = np.random.default_rng(seed)
    a = BitMatrix.random(n, n, rng)
    if a.rank() < n:
        with pytest.raises(SingularError):
            inverse(a)
    else:
        assert inverse(a) @ a == BitMatrix.identity(n)


@given(dense_matrices(10, 70))
def test_identity_product(d):
    a = BitMatrix.from_dense(d)
    assert a @ BitMatrix.identity(d.shape[1]) == a
    assert a.rank() <= min(d.shape)


def test_random_square_singular_fraction():
    # limit of P(singular) for random square binary matrices is 1 - prod(1 - 2^-i) ~ 0.711
    rng = np.random.default_rng(9)
    sing = sum(BitMatrix.random(40, 40, rng).rank() < 40 for _ in range(2000))
    assert abs(sing / 2000 - 0.7112) < 0.04
