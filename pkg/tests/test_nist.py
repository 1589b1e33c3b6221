import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from ponqrng.stats import nist

# worked examples from NIST SP 800-22 rev1a
E128 = ("11001100000101010110110001001100111000000000001001001101010100010001001111010110"
        "100000001101011111001100111001101101100010110010")
PI100 = ("11001001000011111101101010100010001000010110100011000010001101001100010011000110"
         "01100010100010111000")


def bits(s):
    return np.frombuffer(s.encode(), dtype=np.uint8) - ord("0")


@pytest.mark.parametrize("fn, seq, kwargs, expected", [
    (nist.monobit, "1011010101", {}, 0.527089),
    (nist.monobit, PI100, {}, 0.109599),
    (nist.block_frequency, "0110011010", {"block_size": 3}, 0.801252),
    (nist.block_frequency, PI100, {"block_size": 10}, 0.706438),
    (nist.runs, "1001101011", {}, 0.147232),
    (nist.runs, PI100, {}, 0.500798),
    (nist.longest_run, E128, {}, 0.180609),
    (nist.approximate_entropy, "0100110101", {"m": 3}, 0.261961),
])
def test_published_examples(fn, seq, kwargs, expected):
    assert fn(bits(seq), **kwargs) == pytest.approx(expected, abs=1e-6)


def test_cusum_examples():
    assert nist.cumulative_sums(bits("1011010111"))[0] == pytest.approx(0.411659, abs=1e-6)
    fwd, bwd = nist.cumulative_sums(bits(PI100))
    assert fwd == pytest.approx(0.219194, abs=1e-6)
    assert bwd == pytest.approx(0.114866, abs=1e-6)


def test_serial_example():
    p1, p2 = nist.serial(bits("0011011101"), m=3)
    assert p1 == pytest.approx(0.808792, abs=1e-6)
    assert p2 == pytest.approx(0.670320, abs=1e-6)


@pytest.mark.parametrize("seq", ["1001010011", PI100])
def test_dft_matches_naive_transform(seq):
    assert nist.dft_spectral(bits(seq)) == pytest.approx(oracles.dft(bits(seq).tolist()), abs=1e-12)


def test_alternating_monobit_is_one():
    assert nist.monobit(np.tile([0, 1], 50).astype(np.uint8)) == 1.0


def test_longest_run_probabilities_match_enumeration():
    exact = oracles._exact_longest_run_class_probs(8, 1, 4)
    assert nist.longest_run_probabilities(8, 1, 4) == pytest.approx(exact, abs=1e-15)
    # rev1a tabulates these rounded to four decimals
    assert nist.longest_run_probabilities(8, 1, 4) == pytest.approx((0.2148, 0.3672, 0.2305, 0.1875),
                                                                     abs=5e-5)
    assert nist.longest_run_probabilities(128, 4, 9) == pytest.approx(
        (0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124), abs=1e-4)
    assert sum(nist.longest_run_probabilities(10_000, 10, 16)) == pytest.approx(1.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=128, max_size=400))
def test_against_loop_oracles(seq):
    eps = np.array(seq, dtype=np.uint8)
    assert nist.monobit(eps) == pytest.approx(oracles.monobit(seq), abs=1e-12)
    assert nist.block_frequency(eps, 16) == pytest.approx(oracles.block_frequency(seq, 16), abs=1e-12)
    assert nist.runs(eps) == pytest.approx(oracles.runs(seq), abs=1e-12)
    assert nist.longest_run(eps) == pytest.approx(oracles.longest_run_m8(seq), abs=1e-12)
    fwd, bwd = nist.cumulative_sums(eps)
    assert fwd == pytest.approx(oracles.cusum(seq), abs=1e-9)
    assert bwd == pytest.approx(oracles.cusum(seq, reverse=True), abs=1e-9)
    assert nist.serial(eps, 4) == pytest.approx(oracles.serial(seq, 4), abs=1e-12)
    assert nist.approximate_entropy(eps, 3) == pytest.approx(oracles.apen(seq, 3), abs=1e-10)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=64, max_size=160))
def test_dft_against_naive(seq):
    eps = np.array(seq, dtype=np.uint8)
    assert nist.dft_spectral(eps) == pytest.approx(oracles.dft(seq), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1000, max_size=1200))
def test_p_values_in_unit_interval_and_complement_symmetry(seq):
    eps = np.array(seq, dtype=np.uint8)
    for kind in nist.KINDS:
        p = nist.nist_test(kind, eps, m=4) if kind in ("serial", "approximate_entropy") \
            else nist.nist_test(kind, eps)
        for v in (p if isinstance(p, tuple) else (p,)):
            assert 0.0 <= v <= 1.0
    comp = 1 - eps
    assert nist.monobit(comp) == nist.monobit(eps)
    assert nist.runs(comp) == pytest.approx(nist.runs(eps), abs=1e-12)


def test_strict_minimum_lengths():
    short = np.zeros(99, dtype=np.uint8)
    with pytest.raises(nist.SequenceTooShort):
        nist.monobit(short, strict=True)
    with pytest.raises(nist.SequenceTooShort):
        nist.longest_run(np.zeros(127, dtype=np.uint8))
    with pytest.raises(nist.SequenceTooShort):
        nist.dft_spectral(np.zeros(999, dtype=np.uint8), strict=True)


def test_invalid_parameters():
    eps = np.random.default_rng(0).integers(0, 2, 10_000).astype(np.uint8)
    with pytest.raises(nist.InvalidParameter):
        nist.block_frequency(eps, 10, strict=True)  # M must exceed 0.01 n
    with pytest.raises(nist.InvalidParameter):
        nist.serial(eps, 12, strict=True)  # m < floor(log2 n) - 2 = 11
    with pytest.raises(nist.InvalidParameter):
        nist.approximate_entropy(eps, 8, strict=True)  # m < floor(log2 n) - 5 = 8
    with pytest.raises(nist.InvalidParameter):
        nist.nist_test("matrix_rank", eps)


def test_default_parameters_are_strictly_valid():
    for n in (1000, 50_000, 100_000, 1_000_000):
        p = nist.default_parameters(n)
        eps = np.random.default_rng(n).integers(0, 2, n).astype(np.uint8)
        nist.block_frequency(eps, p["block_size"], strict=True)
        nist.serial(eps, p["serial_m"], strict=True)
        nist.approximate_entropy(eps, p["apen_m"], strict=True)
