"""Seeded Toeplitz-hash randomness extractor sized by a min-entropy budget.

Bits are numpy ``uint8`` arrays of 0/1 values unless a function says it takes
packed bytes (MSB first within each byte, the on-disk layout).

Toeplitz layout: ``T[i][j] = seed[n - 1 + i - j]`` for an m x n matrix, so row
0 reads ``seed[n-1] .. seed[0]`` and each following row shifts by one.
"""

from __future__ import annotations

import math
import secrets
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _gf2
from .fileio import as_bits, read_bits, write_bits
from .noise_model import RawTrace


class ExtractorError(ValueError):
    """Extractor inputs have inconsistent sizes."""


class BudgetExhausted(ExtractorError):
    """Min-entropy of a block cannot cover the leftover-hash security margin."""


@dataclass(frozen=True)
class ExtractorParams:
    n: int
    m: int
    bits_per_sample: int = 8
    min_entropy_per_sample: float = 0.25
    epsilon_log2: float = 50

    def __post_init__(self):
        if self.bits_per_sample < 1:
            raise ExtractorError("bits_per_sample must be positive")
        if self.n % self.bits_per_sample:
            raise ExtractorError(f"n={self.n} is not a whole number of {self.bits_per_sample}-bit samples")
        if not 0 < self.min_entropy_per_sample <= self.bits_per_sample:
            raise ExtractorError("min_entropy_per_sample must lie in (0, bits_per_sample]")
        if self.epsilon_log2 < 0:
            raise ExtractorError("epsilon_log2 must be non-negative")
        if not 0 < self.m < self.n:
            raise ExtractorError(f"need 0 < m < n, got m={self.m}, n={self.n}")
        if self.m > self.k - 2 * self.epsilon_log2:
            raise BudgetExhausted(
                f"m={self.m} exceeds the leftover-hash budget k - 2*log2(1/eps) = "
                f"{self.k - 2 * self.epsilon_log2:g}")

    @property
    def k(self) -> float:
        """Min-entropy of one input block, bits."""
        return self.n // self.bits_per_sample * self.min_entropy_per_sample

    @property
    def seed_length(self) -> int:
        return self.n + self.m - 1

    @property
    def samples_per_block(self) -> int:
        return self.n // self.bits_per_sample


def derive_params(n: int = 32768, bits_per_sample: int = 8, min_entropy_per_sample: float = 0.25,
                  epsilon_log2: float = 50) -> ExtractorParams:
    """Largest output length the leftover hash lemma allows for an n-bit block."""
    if bits_per_sample < 1 or n % bits_per_sample:
        raise ExtractorError(f"n={n} is not a whole number of {bits_per_sample}-bit samples")
    if not 0 < min_entropy_per_sample <= bits_per_sample:
        raise ExtractorError("min_entropy_per_sample must lie in (0, bits_per_sample]")
    k = n // bits_per_sample * min_entropy_per_sample
    m = math.floor(k - 2 * epsilon_log2)
    if m <= 0:
        raise BudgetExhausted(f"block min-entropy k={k:g} does not exceed the margin 2*{epsilon_log2:g}")
    # with no margin the budget can reach n itself; the hash must still compress
    m = min(m, n - 1)
    return ExtractorParams(n, m, bits_per_sample, min_entropy_per_sample, epsilon_log2)


@dataclass(frozen=True)
class ToeplitzSeed:
    bits: np.ndarray
    provenance: str = "unspecified"

    def __post_init__(self):
        object.__setattr__(self, "bits", as_bits(self.bits))

    def __len__(self) -> int:
        return self.bits.size

    def check(self, params: ExtractorParams) -> None:
        if self.bits.size != params.seed_length:
            raise ExtractorError(
                f"seed has {self.bits.size} bits, params need n + m - 1 = {params.seed_length}")

    @classmethod
    def from_os_entropy(cls, params: ExtractorParams) -> "ToeplitzSeed":
        length = params.seed_length
        raw = np.frombuffer(secrets.token_bytes((length + 7) // 8), dtype=np.uint8)
        return cls(np.unpackbits(raw, count=length), "os-entropy")

    @classmethod
    def from_generator(cls, params: ExtractorParams, rng: np.random.Generator,
                       provenance: str) -> "ToeplitzSeed":
        return cls(rng.integers(0, 2, params.seed_length, dtype=np.uint8), provenance)

    def save(self, path: str | Path) -> Path:
        return write_bits(path, self.bits, {"provenance": self.provenance})

    @classmethod
    def load(cls, path: str | Path) -> "ToeplitzSeed":
        bits, meta = read_bits(path)
        return cls(bits, meta.get("provenance", f"file:{Path(path).name}"))


def toeplitz_matrix(seed: ToeplitzSeed, params: ExtractorParams) -> np.ndarray:
    """Dense m x n matrix; meant for inspection and small cases."""
    seed.check(params)
    i = np.arange(params.m)[:, None]
    j = np.arange(params.n)[None, :]
    return seed.bits[params.n - 1 + i - j]


class ToeplitzHasher:
    """Seed-bound extractor; reuse it to hash many blocks with one seed."""

    def __init__(self, seed: ToeplitzSeed, params: ExtractorParams, backend: str | None = None):
        seed.check(params)
        self.params = params
        self.backend = backend or _gf2.DEFAULT_BACKEND
        if self.backend == "clmul" and not _gf2.HAVE_CLMUL:
            raise ExtractorError("clmul backend needs a CPU with PCLMULQDQ")
        try:
            impl = _gf2.BACKENDS[self.backend]
        except KeyError:
            raise ExtractorError(f"unknown backend {self.backend!r}") from None
        self._impl = impl(seed.bits, params.n, params.m)

    def hash_bit_blocks(self, blocks: np.ndarray) -> np.ndarray:
        """(nblocks, n) 0/1 array -> (nblocks, m) 0/1 array."""
        n = self.params.n
        width = 8 * self._impl.bytes_per_block
        if blocks.shape[1] != n:
            raise ExtractorError(f"blocks must have n={n} columns")
        if width != n:
            padded = np.zeros((blocks.shape[0], width), dtype=np.uint8)
            padded[:, :n] = blocks
            blocks = padded
        return self._impl(np.packbits(blocks, axis=1))

    def hash_packed(self, data: np.ndarray, nblocks: int) -> np.ndarray:
        """Hash ``nblocks`` consecutive n-bit blocks from packed bytes."""
        n = self.params.n
        if n % 8 == 0 and 8 * self._impl.bytes_per_block == n:
            return self._impl(data[:nblocks * (n // 8)].reshape(nblocks, n // 8))
        bits = np.unpackbits(data, count=nblocks * n)
        return self.hash_bit_blocks(bits.reshape(nblocks, n))


def extract_block(seed: ToeplitzSeed, x, params: ExtractorParams, backend: str | None = None) -> np.ndarray:
    """y = T x over GF(2) for a single n-bit block."""
    x = as_bits(x)
    if x.size != params.n:
        raise ExtractorError(f"block has {x.size} bits, expected n={params.n}")
    return ToeplitzHasher(seed, params, backend).hash_bit_blocks(x[None, :])[0]


def extract_stream(seed: ToeplitzSeed, bits, params: ExtractorParams,
                   backend: str | None = None) -> tuple[np.ndarray, int]:
    """Hash consecutive n-bit blocks with one seed; trailing partial block is dropped.

    Returns the concatenated outputs and the number of discarded input bits.
    """
    bits = as_bits(bits)
    hasher = ToeplitzHasher(seed, params, backend)
    nblocks, leftover = divmod(bits.size, params.n)
    if nblocks == 0:
        return np.zeros(0, dtype=np.uint8), leftover
    out = hasher.hash_bit_blocks(bits[:nblocks * params.n].reshape(nblocks, params.n))
    return out.reshape(-1), leftover


def extract_packed(seed: ToeplitzSeed | ToeplitzHasher, data, params: ExtractorParams,
                   bit_count: int | None = None, backend: str | None = None,
                   chunk_blocks: int = 8192) -> tuple[np.ndarray, int]:
    """:func:`extract_stream` over MSB-first packed bytes (no unpacking when n % 64 == 0)."""
    data = np.frombuffer(data, dtype=np.uint8) if isinstance(data, (bytes, bytearray, memoryview)) \
        else np.asarray(data, dtype=np.uint8).reshape(-1)
    total = data.size * 8 if bit_count is None else int(bit_count)
    if total > data.size * 8:
        raise ExtractorError("bit_count exceeds the supplied data")
    hasher = seed if isinstance(seed, ToeplitzHasher) else ToeplitzHasher(seed, params, backend)
    n = params.n
    nblocks, leftover = divmod(total, n)
    if n % 8:
        bits = np.unpackbits(data, count=nblocks * n).reshape(nblocks, n)
    outs = []
    for b0 in range(0, nblocks, chunk_blocks):
        count = min(chunk_blocks, nblocks - b0)
        if n % 8:
            outs.append(hasher.hash_bit_blocks(bits[b0:b0 + count]).reshape(-1))
        else:
            part = data[b0 * n // 8:(b0 + count) * n // 8]
            outs.append(hasher.hash_packed(part, count).reshape(-1))
    out = np.concatenate(outs) if outs else np.zeros(0, dtype=np.uint8)
    return out, leftover


def pack_samples(trace: RawTrace, bits_per_sample: int | None = None) -> np.ndarray:
    """Serialize codes as two's-complement words, most significant bit first."""
    width = trace.meta.adc_bits if bits_per_sample is None else int(bits_per_sample)
    if not 1 <= width <= 16:
        raise ExtractorError("bits_per_sample must lie in [1, 16]")
    codes = trace.codes.astype(np.int32)
    lo, hi = -(1 << (width - 1)), (1 << (width - 1)) - 1
    if codes.min() < lo or codes.max() > hi:
        raise ExtractorError(f"codes exceed the {width}-bit two's-complement range")
    if width == 8:
        return np.unpackbits(trace.codes.astype(np.int8).view(np.uint8))
    shifts = np.arange(width - 1, -1, -1, dtype=np.int32)
    return ((codes[:, None] >> shifts[None, :]) & 1).astype(np.uint8).reshape(-1)


def pack_samples_bytes(trace: RawTrace, bits_per_sample: int | None = None) -> tuple[np.ndarray, int]:
    """Packed form of :func:`pack_samples`; zero-copy for 8-bit traces."""
    width = trace.meta.adc_bits if bits_per_sample is None else int(bits_per_sample)
    if width == 8 and trace.codes.dtype == np.int8:
        return trace.codes.view(np.uint8), trace.codes.size * 8
    bits = pack_samples(trace, width)
    return np.packbits(bits), bits.size
