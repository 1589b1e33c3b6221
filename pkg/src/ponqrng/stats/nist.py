"""Eight statistical tests from NIST SP 800-22 rev1a.

Each test takes a 0/1 ``uint8`` array and returns a P-value (serial and
cumulative sums return two). ``strict=True`` additionally enforces the
document's recommended minimum lengths and parameter ranges; without it only
the limits needed for the statistic to be defined apply, so the short worked
examples of the document can be evaluated.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import erfc, gammaincc
from scipy.stats import norm

from ..fileio import as_bits

KINDS = ("monobit", "block_frequency", "runs", "longest_run", "cumulative_sums",
         "dft_spectral", "serial", "approximate_entropy")

MIN_LENGTH = {"monobit": 100, "block_frequency": 100, "runs": 100, "longest_run": 128,
              "cumulative_sums": 100, "dft_spectral": 1000, "serial": 16,
              "approximate_entropy": 64}

# (block length, minimum n, category bounds: v <= first, ..., v >= last)
LONGEST_RUN_TABLE = (
    (10_000, 750_000, (10, 16)),
    (128, 6272, (4, 9)),
    (8, 128, (1, 4)),
)


class SequenceTooShort(ValueError):
    pass


class InvalidParameter(ValueError):
    pass


@lru_cache(maxsize=None)
def longest_run_probabilities(block: int, v_lo: int, v_hi: int) -> tuple[float, ...]:
    """Exact class probabilities for the longest run of ones in a fair block.

    Classes are ``v <= v_lo``, ``v_lo+1``, ..., ``v_hi-1``, ``v >= v_hi``.
    """
    def p_at_most(k: int) -> float:
        # distribution over the length of the current run of ones, capped at k
        state = np.zeros(k + 1)
        state[0] = 1.0
        for _ in range(block):
            nxt = np.empty_like(state)
            nxt[0] = 0.5 * state.sum()
            nxt[1:] = 0.5 * state[:-1]
            state = nxt
        return float(state.sum())

    cdf = [p_at_most(k) for k in range(v_lo, v_hi)]
    probs = [cdf[0]] + [b - a for a, b in zip(cdf, cdf[1:])] + [1.0 - cdf[-1]]
    return tuple(probs)


def _check_length(kind: str, bits: np.ndarray, strict: bool, floor: int = 1) -> int:
    n = bits.size
    need = MIN_LENGTH[kind] if strict else floor
    if n < need:
        raise SequenceTooShort(f"{kind} needs at least {need} bits, got {n}")
    return n


def igamc(a, x) -> float:
    return float(gammaincc(a, x))


def monobit(bits, strict: bool = False) -> float:
    bits = as_bits(bits)
    n = _check_length("monobit", bits, strict)
    s = 2 * int(np.count_nonzero(bits)) - n
    return float(erfc(abs(s) / math.sqrt(2 * n)))


def block_frequency(bits, block_size: int = 128, strict: bool = False) -> float:
    bits = as_bits(bits)
    n = _check_length("block_frequency", bits, strict)
    M = int(block_size)
    if M < 1 or M > n:
        raise InvalidParameter(f"block size must lie in [1, n], got {M}")
    if strict and (M < 20 or M <= 0.01 * n or n // M >= 100):
        raise InvalidParameter("block size outside M >= 20, M > 0.01 n, N < 100")
    N = n // M
    pi = bits[:N * M].reshape(N, M).sum(axis=1, dtype=np.int64) / M
    chi2 = 4.0 * M * float(np.sum((pi - 0.5) ** 2))
    return igamc(N / 2.0, chi2 / 2.0)


def runs(bits, strict: bool = False) -> float:
    bits = as_bits(bits)
    n = _check_length("runs", bits, strict, floor=2)
    pi = np.count_nonzero(bits) / n
    if abs(pi - 0.5) >= 2.0 / math.sqrt(n):
        return 0.0
    v_obs = 1 + int(np.count_nonzero(bits[1:] != bits[:-1]))
    num = abs(v_obs - 2.0 * n * pi * (1.0 - pi))
    den = 2.0 * math.sqrt(2.0 * n) * pi * (1.0 - pi)
    return float(erfc(num / den))


def longest_run(bits, strict: bool = False) -> float:
    bits = as_bits(bits)
    n = _check_length("longest_run", bits, strict, floor=128)
    for M, n_min, (v_lo, v_hi) in LONGEST_RUN_TABLE:
        if n >= n_min:
            break
    probs = longest_run_probabilities(M, v_lo, v_hi)
    N = n // M
    blocks = bits[:N * M].reshape(N, M).astype(np.int32)
    longest = _longest_ones_per_row(blocks)
    cats = np.clip(longest, v_lo, v_hi) - v_lo
    counts = np.bincount(cats, minlength=len(probs)).astype(float)
    expected = N * np.asarray(probs)
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    return igamc((len(probs) - 1) / 2.0, chi2 / 2.0)


def _longest_ones_per_row(blocks: np.ndarray) -> np.ndarray:
    run = np.zeros(blocks.shape[0], dtype=np.int32)
    best = np.zeros_like(run)
    for col in blocks.T:
        run = (run + 1) * col
        np.maximum(best, run, out=best)
    return best


def _c_div(a: int, b: int) -> int:
    """Integer division truncating toward zero."""
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b > 0) else -q


def _cusum_p(z: int, n: int) -> float:
    sqn = math.sqrt(n)
    total = 1.0
    k = np.arange(_c_div(_c_div(-n, z) + 1, 4), _c_div(_c_div(n, z) - 1, 4) + 1)
    total -= float(np.sum(norm.cdf((4 * k + 1) * z / sqn) - norm.cdf((4 * k - 1) * z / sqn)))
    k = np.arange(_c_div(_c_div(-n, z) - 3, 4), _c_div(_c_div(n, z) - 1, 4) + 1)
    total += float(np.sum(norm.cdf((4 * k + 3) * z / sqn) - norm.cdf((4 * k + 1) * z / sqn)))
    return min(1.0, max(0.0, total))


def cumulative_sums(bits, strict: bool = False) -> tuple[float, float]:
    """(forward, backward) P-values."""
    bits = as_bits(bits)
    n = _check_length("cumulative_sums", bits, strict)
    x = 2 * bits.astype(np.int64) - 1
    s = np.cumsum(x)
    z_fwd = int(np.max(np.abs(s)))
    # backward partial sums are total - forward prefix
    rev = s[-1] - np.concatenate(([0], s[:-1]))
    z_bwd = int(np.max(np.abs(rev)))
    return _cusum_p(z_fwd, n), _cusum_p(z_bwd, n)


def dft_spectral(bits, strict: bool = False) -> float:
    bits = as_bits(bits)
    n = _check_length("dft_spectral", bits, strict, floor=2)
    x = 2.0 * bits - 1.0
    mod = np.abs(np.fft.rfft(x))[:n // 2]
    threshold = math.sqrt(math.log(1.0 / 0.05) * n)
    n0 = 0.95 * n / 2.0
    n1 = int(np.count_nonzero(mod < threshold))
    d = (n1 - n0) / math.sqrt(n * 0.95 * 0.05 / 4.0)
    return float(erfc(abs(d) / math.sqrt(2.0)))


def _pattern_counts(bits: np.ndarray, m: int) -> np.ndarray:
    """Counts of all overlapping m-bit patterns, wrapping around the end."""
    n = bits.size
    if m == 0:
        return np.array([n])
    ext = np.concatenate((bits, bits[:m - 1])).astype(np.int64)
    code = np.zeros(n, dtype=np.int64)
    for k in range(m):
        code = (code << 1) | ext[k:k + n]
    return np.bincount(code, minlength=1 << m)


def _psi_sq(bits: np.ndarray, m: int) -> float:
    if m <= 0:
        return 0.0
    counts = _pattern_counts(bits, m).astype(np.float64)
    n = bits.size
    return float((2.0 ** m / n) * np.dot(counts, counts) - n)


def serial(bits, m: int = 16, strict: bool = False) -> tuple[float, float]:
    bits = as_bits(bits)
    n = _check_length("serial", bits, strict, floor=2)
    if m < 2:
        raise InvalidParameter("serial test needs m >= 2")
    if m > n or (strict and m >= math.floor(math.log2(n)) - 2):
        raise InvalidParameter(f"serial block length m={m} too large for n={n}")
    p0, p1, p2 = _psi_sq(bits, m), _psi_sq(bits, m - 1), _psi_sq(bits, m - 2)
    d1 = p0 - p1
    d2 = p0 - 2.0 * p1 + p2
    return igamc(2.0 ** (m - 2), d1 / 2.0), igamc(2.0 ** (m - 3), d2 / 2.0)


def _phi(bits: np.ndarray, m: int) -> float:
    counts = _pattern_counts(bits, m)
    c = counts[counts > 0] / bits.size
    return float(np.sum(c * np.log(c)))


def approximate_entropy(bits, m: int = 10, strict: bool = False) -> float:
    bits = as_bits(bits)
    n = _check_length("approximate_entropy", bits, strict, floor=2)
    if m < 1 or m + 1 > n or (strict and m >= math.floor(math.log2(n)) - 5):
        raise InvalidParameter(f"approximate entropy block length m={m} invalid for n={n}")
    apen = _phi(bits, m) - _phi(bits, m + 1)
    chi2 = 2.0 * n * (math.log(2.0) - apen)
    return igamc(2.0 ** (m - 1), chi2 / 2.0)


def default_parameters(n: int) -> dict[str, int]:
    """Parameters inside the recommended ranges for sequences of length n.

    The approximate-entropy block length keeps n / 2**m near 200 or more; at
    the rev1a upper limit the chi-square approximation visibly breaks (P-values
    pile up near zero for n = 1e5, m = 10).
    """
    lg = math.floor(math.log2(n))
    block = max(20, math.floor(0.01 * n) + 1)
    while n // block >= 100:
        block += 1
    return {"block_size": block,
            "serial_m": max(2, min(16, lg - 3)),
            "apen_m": max(1, min(10, lg - 7))}


def nist_test(kind: str, bits, strict: bool = False, **params):
    """Dispatch by test name; returns a float or a tuple of floats."""
    bits = as_bits(bits)
    if kind == "monobit":
        return monobit(bits, strict)
    if kind == "block_frequency":
        return block_frequency(bits, params.get("block_size", 128), strict)
    if kind == "runs":
        return runs(bits, strict)
    if kind == "longest_run":
        return longest_run(bits, strict)
    if kind == "cumulative_sums":
        return cumulative_sums(bits, strict)
    if kind == "dft_spectral":
        return dft_spectral(bits, strict)
    if kind == "serial":
        return serial(bits, params.get("m", 16), strict)
    if kind == "approximate_entropy":
        return approximate_entropy(bits, params.get("m", 10), strict)
    raise InvalidParameter(f"unknown test {kind!r}; known: {', '.join(KINDS)}")
