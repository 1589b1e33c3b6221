import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from ponqrng import _gf2
from ponqrng.extractor import (BudgetExhausted, ExtractorError, ExtractorParams, ToeplitzHasher,
                               ToeplitzSeed, derive_params, extract_block, extract_packed,
                               extract_stream, pack_samples, pack_samples_bytes, toeplitz_matrix)
from ponqrng.noise_model import RawTrace, TraceMeta

BACKENDS = [b for b in _gf2.BACKENDS if b != "clmul" or _gf2.HAVE_CLMUL]


def params(n, m, bps=1):
    # a tiny epsilon margin and maximal entropy keep small test shapes legal
    return ExtractorParams(n, m, bits_per_sample=bps, min_entropy_per_sample=bps, epsilon_log2=0)


def test_derive_params_defaults():
    p = derive_params()
    assert (p.n, p.k, p.m, p.seed_length) == (32768, 1024, 924, 32768 + 924 - 1)


def test_derive_params_no_margin():
    assert derive_params(epsilon_log2=0).m == 1024


def test_derive_params_budget_exhausted():
    with pytest.raises(BudgetExhausted):
        derive_params(800, 8, 0.25, 50)


def test_params_invariants():
    with pytest.raises(ExtractorError):
        ExtractorParams(32768, 925)  # over budget
    with pytest.raises(ExtractorError):
        ExtractorParams(100, 10, bits_per_sample=8)  # n not whole samples
    with pytest.raises(ExtractorError):
        params(16, 16)


def test_worked_example():
    p = params(3, 2)
    seed = ToeplitzSeed([1, 0, 1, 1])
    np.testing.assert_array_equal(toeplitz_matrix(seed, p), [[1, 0, 1], [1, 1, 0]])
    for backend in BACKENDS:
        np.testing.assert_array_equal(extract_block(seed, [1, 1, 0], p, backend), [1, 0])


@pytest.mark.parametrize("backend", BACKENDS)
def test_zero_seed_and_zero_input(backend):
    p = params(200, 70)
    rng = np.random.default_rng(1)
    x = rng.integers(0, 2, 200)
    zero_seed = ToeplitzSeed(np.zeros(p.seed_length, dtype=np.uint8))
    assert not extract_block(zero_seed, x, p, backend).any()
    seed = ToeplitzSeed(rng.integers(0, 2, p.seed_length))
    assert not extract_block(seed, np.zeros(200), p, backend).any()


@pytest.mark.parametrize("backend", BACKENDS)
@settings(max_examples=80, deadline=None)
@given(data=st.data())
def test_matches_dense_oracle(backend, data):
    n = data.draw(st.integers(2, 256))
    m = data.draw(st.integers(1, min(128, n - 1)))
    p = params(n, m)
    seed = data.draw(st.lists(st.integers(0, 1), min_size=p.seed_length, max_size=p.seed_length))
    x = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    got = extract_block(ToeplitzSeed(seed), x, p, backend)
    assert got.tolist() == oracles.dense_toeplitz(seed, x, n, m)


@pytest.mark.parametrize("backend", BACKENDS)
def test_default_shape_matches_matrix_product(backend):
    p = derive_params()
    rng = np.random.default_rng(3)
    seed = ToeplitzSeed.from_generator(p, rng, "test")
    xs = rng.integers(0, 2, (3, p.n), dtype=np.uint8)
    T = toeplitz_matrix(seed, p).astype(np.int64)
    expected = (xs.astype(np.int64) @ T.T) & 1
    got = ToeplitzHasher(seed, p, backend).hash_bit_blocks(xs)
    np.testing.assert_array_equal(got, expected)


@pytest.mark.parametrize("backend", BACKENDS)
def test_linearity(backend):
    p = derive_params()
    rng = np.random.default_rng(4)
    h = ToeplitzHasher(ToeplitzSeed.from_generator(p, rng, "test"), p, backend)
    x = rng.integers(0, 2, (50, p.n), dtype=np.uint8)
    y = rng.integers(0, 2, (50, p.n), dtype=np.uint8)
    np.testing.assert_array_equal(h.hash_bit_blocks(x ^ y), h.hash_bit_blocks(x) ^ h.hash_bit_blocks(y))


def test_backends_agree_on_odd_shapes():
    if len(BACKENDS) < 2:
        pytest.skip("only one backend on this CPU")
    rng = np.random.default_rng(5)
    for n, m in [(65, 3), (129, 64), (1000, 999), (4104, 77)]:
        p = params(n, m)
        seed = ToeplitzSeed(rng.integers(0, 2, p.seed_length))
        x = rng.integers(0, 2, (4, n), dtype=np.uint8)
        outs = [ToeplitzHasher(seed, p, b).hash_bit_blocks(x) for b in BACKENDS]
        np.testing.assert_array_equal(outs[0], outs[1])


def test_stream_composition_and_leftover():
    p = params(64, 20)
    rng = np.random.default_rng(6)
    seed = ToeplitzSeed(rng.integers(0, 2, p.seed_length))
    x = rng.integers(0, 2, 2 * 64 + 17, dtype=np.uint8)
    out, left = extract_stream(seed, x, p)
    assert left == 17 and out.size == 40
    np.testing.assert_array_equal(out[:20], extract_block(seed, x[:64], p))
    np.testing.assert_array_equal(out[20:], extract_block(seed, x[64:128], p))
    empty, left = extract_stream(seed, x[:50], p)
    assert empty.size == 0 and left == 50


def test_stream_randomized_against_oracle():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(8, 257))
        m = int(rng.integers(1, min(128, n - 1) + 1))
        p = params(n, m)
        seed = rng.integers(0, 2, p.seed_length).tolist()
        x = rng.integers(0, 2, 3 * n + int(rng.integers(0, n))).tolist()
        out, _ = extract_stream(ToeplitzSeed(seed), x, p)
        expected = sum((oracles.dense_toeplitz(seed, x[b * n:(b + 1) * n], n, m) for b in range(3)), [])
        assert out.tolist() == expected


def test_packed_equals_unpacked():
    for n, m in [(32768, 924), (1000, 100), (72, 10)]:
        bps = 8
        p = ExtractorParams(n, m, bits_per_sample=bps, min_entropy_per_sample=8, epsilon_log2=0)
        rng = np.random.default_rng(n)
        seed = ToeplitzSeed.from_generator(p, rng, "t")
        bits = rng.integers(0, 2, 5 * n + 13, dtype=np.uint8)
        packed = np.packbits(bits)
        a, la = extract_stream(seed, bits, p)
        b, lb = extract_packed(seed, packed, p, bit_count=bits.size, chunk_blocks=2)
        np.testing.assert_array_equal(a, b)
        assert la == lb == 13


def test_seed_length_and_io(tmp_path):
    p = params(16, 4)
    with pytest.raises(ExtractorError):
        extract_block(ToeplitzSeed(np.zeros(5, dtype=np.uint8)), np.zeros(16), p)
    with pytest.raises(ExtractorError):
        extract_block(ToeplitzSeed(np.zeros(19, dtype=np.uint8)), np.zeros(15), p)
    seed = ToeplitzSeed.from_os_entropy(p)
    assert len(seed) == 19 and seed.provenance == "os-entropy"
    seed.save(tmp_path / "s.bin")
    back = ToeplitzSeed.load(tmp_path / "s.bin")
    np.testing.assert_array_equal(back.bits, seed.bits)
    assert back.provenance == "os-entropy"


def test_different_seeds_give_different_outputs():
    p = derive_params()
    rng = np.random.default_rng(8)
    x = rng.integers(0, 2, (1, p.n), dtype=np.uint8)
    differ = 0
    trials = 200
    for _ in range(trials):
        a = ToeplitzHasher(ToeplitzSeed.from_generator(p, rng, "a"), p).hash_bit_blocks(x)
        b = ToeplitzHasher(ToeplitzSeed.from_generator(p, rng, "b"), p).hash_bit_blocks(x)
        differ += bool((a != b).any())
    assert differ >= 0.99 * trials


def _trace(codes, bits=8):
    return RawTrace(np.array(codes), TraceMeta(2e9, bits, 1.0))


def test_pack_samples_twos_complement():
    assert pack_samples(_trace([0])).tolist() == [0] * 8
    assert pack_samples(_trace([-1])).tolist() == [1] * 8
    assert pack_samples(_trace([1, -128])).tolist() == [0, 0, 0, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0]
    assert pack_samples(_trace([-2048, 2047], 12)).tolist() == [1] + [0] * 11 + [0] + [1] * 11
    with pytest.raises(ExtractorError):
        pack_samples(_trace([200], 12), bits_per_sample=8)


def test_pack_samples_bytes_matches_bits():
    t = _trace(np.arange(-128, 128))
    data, count = pack_samples_bytes(t)
    np.testing.assert_array_equal(np.unpackbits(data), pack_samples(t))
    t12 = _trace(np.arange(-2048, 2048, 7), 12)
    data, count = pack_samples_bytes(t12)
    np.testing.assert_array_equal(np.unpackbits(data, count=count), pack_samples(t12))
