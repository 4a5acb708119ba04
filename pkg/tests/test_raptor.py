import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import rank_naive
from raptorflash.errors import DecodeFailure, InvalidParams, SingularPrecode
from raptorflash.gf2 import BitMatrix
from raptorflash.raptor import (
    LTMode,
    RaptorCode,
    RaptorParams,
    build_constraint_matrix,
    build_erasure_luts,
    build_parity_luts,
    decode,
    default_H,
    default_S,
    encode,
    is_recoverable,
    xor_fold,
)

EXAMPLE = [[0, 1, 0, 1], [1, 0, 1, 1], [0, 1, 0, 0], [0, 0, 1, 1], [1, 0, 0, 1]]


@pytest.fixture(scope="module")
def example():
    return RaptorCode.from_matrix(EXAMPLE, K=4)


@pytest.fixture(scope="module")
def k64():
    return RaptorCode.from_params(RaptorParams(K=64, N=72, T=4))


def _sources(T=1):
    # one-hot symbols make every XOR combination readable
    return np.array([[1 << i] for i in range(4)], np.uint8)


def test_default_sizes():
    assert (default_S(200), default_H(200, default_S(200))) == (23, 10)
    p = RaptorParams(K=200, N=220)
    assert (p.S, p.H, p.L) == (23, 10, 233)


def test_params_validation():
    with pytest.raises(InvalidParams):
        RaptorParams(K=10, N=9)
    assert RaptorParams(K=10, N=12, lt_mode="r10").lt_mode is LTMode.R10


def test_small_constraint_matrix_shape():
    p = RaptorParams(K=4, N=5, S=0, H=1)
    code = RaptorCode.from_params(p)
    A = code.A.to_dense()
    # one dense constraint row, then four source rows and one parity row
    assert A.shape == (1 + 5, 5)
    assert rank_naive(code.A_pre.to_dense()) == 5


def test_constraint_matrix_deterministic():
    p = RaptorCode.from_params(RaptorParams(K=30, N=40, seed=0)).params
    a, b = build_constraint_matrix(p), build_constraint_matrix(p)
    assert a == b


@pytest.mark.parametrize("mode", ["dense", "r10"])
def test_precode_full_rank(mode):
    code = RaptorCode.from_params(RaptorParams(K=80, N=90, lt_mode=mode))
    assert code.A_pre.rank() == code.L


def test_reseed_k100():
    singular = 0
    surfaced = 0
    for seed in range(50):
        p = RaptorParams(K=100, N=110, S=11, H=10, seed=seed * 1000)
        try:
            build_constraint_matrix(p)
        except SingularPrecode:
            singular += 1
        try:
            RaptorCode.from_params(p)
        except SingularPrecode:
            surfaced += 1
    assert singular > 0  # dense precodes need reseeding fairly often
    assert surfaced < 5


def test_example_parity_lut(example):
    lut = build_parity_luts(example)[0]
    # brute-force every source combination against the matrix path
    for bits in itertools.product([0, 1], repeat=4):
        src = np.array(bits, np.uint8).reshape(4, 1)
        cw = example.encode(src, method="matrix")
        assert cw.parity[0, 0] == np.bitwise_xor.reduce(src.ravel() & lut)


def test_example_encode_matches_row_five(example):
    src = _sources()
    m = example.intermediate(src)
    cw = example.encode(src)
    assert cw.parity[0, 0] == m[0, 0] ^ m[3, 0]


def test_example_erasure_lut(example):
    for method in ("trace", "precode"):
        luts = build_erasure_luts(example, [3], method=method)
        assert luts.erased == (3,)
        assert luts.luts[0].tolist() == [1, 1, 1, 0, 1]


def test_example_decode(example):
    src = _sources()
    cw = example.encode(src).symbols
    rec = example.decode(cw, [3])
    assert rec[3, 0] == cw[0, 0] ^ cw[1, 0] ^ cw[2, 0] ^ cw[4, 0]
    assert np.array_equal(rec, src)


def test_zero_source(k64):
    assert not k64.encode(np.zeros((64, 4), np.uint8)).symbols.any()


def test_encode_paths_agree(k64):
    rng = np.random.default_rng(1)
    src = rng.integers(0, 256, (64, 4), dtype=np.uint8)
    a = k64.encode(src, method="lut")
    b = encode(k64, src, method="matrix")
    assert np.array_equal(a.symbols, b.symbols)
    assert np.array_equal(a.source, src)
    luts = build_parity_luts(k64)
    assert np.array_equal(xor_fold(luts, src), a.parity)


def test_no_erasures_shortcut(k64):
    rng = np.random.default_rng(2)
    src = rng.integers(0, 256, (64, 4), dtype=np.uint8)
    cw = k64.encode(src).symbols
    assert np.array_equal(decode(k64, cw, []), src)
    assert build_erasure_luts(k64, []).luts.shape[0] == 0


def test_lut_roundtrip_k128():
    code = RaptorCode.from_params(RaptorParams(K=128, N=148, T=2))
    for seed in range(100):
        rng = np.random.default_rng(seed)
        src = rng.integers(0, 256, (128, 2), dtype=np.uint8)
        cw = code.encode(src).symbols
        erased = np.sort(rng.choice(128, 5, replace=False))
        luts = code.erasure_luts(erased)
        received = cw.copy()
        received[erased] = 0xAA  # garbage must not leak into the rebuild
        assert np.array_equal(luts.apply(received), src[erased])
        assert luts.size_bits == code.N * 5


def test_decode_failure_when_too_many_erasures(k64):
    with pytest.raises(DecodeFailure):
        k64.decode(np.zeros((72, 4), np.uint8), list(range(9)))
    assert not k64.is_recoverable(list(range(9)))


@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.sampled_from(["dense", "r10"]))
def test_lut_solver_duality(seed, n_erased, mode):
    code = RaptorCode.from_params(RaptorParams(K=40, N=50, T=3, lt_mode=mode))
    rng = np.random.default_rng(seed)
    src = rng.integers(0, 256, (40, 3), dtype=np.uint8)
    cw = code.encode(src).symbols
    erased = np.sort(rng.choice(50, n_erased, replace=False))
    outcomes = []
    for method in ("inactivation", "gauss", "lut"):
        try:
            outcomes.append(code.decode(cw, erased, method=method))
        except DecodeFailure:
            outcomes.append(None)
    ok = code.is_recoverable(erased)
    if ok:
        for out in outcomes:
            assert np.array_equal(out, src)
        lost = [e for e in erased if e < 40]
        for method in ("trace", "precode"):
            if lost:
                assert np.array_equal(code.erasure_luts(erased, method).apply(cw), src[lost])
    else:
        assert outcomes == [None, None, None]


def test_functional_surface_accepts_params():
    p = RaptorParams(K=20, N=26)
    src = np.arange(20, dtype=np.uint8).reshape(20, 1)
    cw = encode(p, src).symbols
    assert np.array_equal(decode(p, cw, [0, 5]), src)
    assert is_recoverable(p, [1, 2])


def test_determinism_across_builds():
    p = RaptorCode.from_params(RaptorParams(K=50, N=60, seed=11)).params
    a = RaptorCode.from_matrix(build_constraint_matrix(p).to_dense(), K=50, n_constraints=p.n_constraints)
    b = RaptorCode.from_params(p)
    assert a.parity_luts() == b.parity_luts()


def test_r10_benefits_from_dense_rows():
    K, N, erased = 500, 530, 28
    ok = {}
    for H in (None, 0):
        code = RaptorCode.from_params(RaptorParams(K=K, N=N, lt_mode="r10", H=H, seed=3))
        rng = np.random.default_rng(0)
        ok[H] = sum(code.is_recoverable(rng.choice(N, erased, replace=False)) for _ in range(600))
    assert ok[None] > ok[0]


def test_random_matrix_rank_law_small():
    # (K + R) x K random matrices are rank deficient at rate about 2^-R
    rng = np.random.default_rng(4)
    K = 60
    for R in (0, 2, 4):
        fails = sum(BitMatrix.random(K + R, K, rng).rank() < K for _ in range(3000))
        assert fails / 3000 <= 3 * 2.0**-R
