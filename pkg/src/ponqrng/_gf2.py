"""Numba kernels for block Toeplitz hashing over GF(2).

Both kernels compute, for every input block x (n bits) and seed a (n+m-1 bits),

    y[i] = XOR_j a[n-1+i-j] & x[j],     i < m,

which is the slice [n-1, n+m-1) of the carry-less product a(z) * x(z).

``clmul`` evaluates only the needed middle words of that product with the
PCLMULQDQ instruction. Input blocks are read as raw MSB-first packed bytes;
byte-swapping each 64-bit word turns a block into its bit-reversed
polynomial, so the seed is reversed once up front instead of reversing every
input bit. ``table`` is a portable fallback: a byte-indexed table of
a(z) * v(z) for all 256 byte values, XORed in at byte-aligned offsets.
"""

from __future__ import annotations

import numba
import numpy as np
from llvmlite import ir
from numba import types
from numba.core import cgutils
from numba.extending import intrinsic


def _host_has_clmul() -> bool:
    try:
        import llvmlite.binding as llvm
        features = llvm.get_host_cpu_features()
        return bool(features.get("pclmul", False))
    except Exception:  # non-x86 hosts or llvmlite without feature probing
        return False


HAVE_CLMUL = _host_has_clmul()


@intrinsic
def _clmul64(typingctx, a, b):
    sig = types.UniTuple(types.uint64, 2)(types.uint64, types.uint64)

    def codegen(context, builder, signature, args):
        i32, i64 = ir.IntType(32), ir.IntType(64)
        vty = ir.VectorType(i64, 2)
        zero = ir.Constant(vty, [0, 0])
        va = builder.insert_element(zero, args[0], ir.Constant(i32, 0))
        vb = builder.insert_element(zero, args[1], ir.Constant(i32, 0))
        fnty = ir.FunctionType(vty, [vty, vty, ir.IntType(8)])
        fn = cgutils.get_or_insert_function(builder.module, fnty, "llvm.x86.pclmulqdq")
        prod = builder.call(fn, [va, vb, ir.Constant(ir.IntType(8), 0)])
        lo = builder.extract_element(prod, ir.Constant(i32, 0))
        hi = builder.extract_element(prod, ir.Constant(i32, 1))
        return context.make_tuple(builder, signature.return_type, [lo, hi])

    return sig, codegen


@intrinsic
def _bswap64(typingctx, x):
    sig = types.uint64(types.uint64)

    def codegen(context, builder, signature, args):
        i64 = ir.IntType(64)
        fn = cgutils.get_or_insert_function(builder.module, ir.FunctionType(i64, [i64]), "llvm.bswap.i64")
        return builder.call(fn, [args[0]])

    return sig, codegen


@numba.njit(cache=True, boundscheck=False, nogil=True)
def _clmul_middle(a, raw, nblocks, nx, k_lo, k_hi, out):
    """Words k_lo..k_hi of a * rev(x) for each block; out has k_hi-k_lo+1 columns."""
    na = a.shape[0]
    nd = k_hi - k_lo + 2
    d_lo = np.zeros(nd, np.uint64)
    d_hi = np.zeros(nd, np.uint64)
    for b in range(nblocks):
        base = b * nx + nx - 1
        for si in range(nd):
            s = k_lo - 1 + si
            lo = np.uint64(0)
            hi = np.uint64(0)
            j0 = max(0, s - na + 1)
            j1 = min(nx - 1, s)
            for j in range(j0, j1 + 1):
                p = _clmul64(a[s - j], _bswap64(raw[base - j]))
                lo ^= p[0]
                hi ^= p[1]
            d_lo[si] = lo
            d_hi[si] = hi
        for si in range(1, nd):
            out[b, si - 1] = d_lo[si] ^ d_hi[si - 1]


@numba.njit(cache=True, boundscheck=False, nogil=True)
def _table_accumulate(tables, data, nblocks, bpb, base, out):
    w_out = out.shape[1]
    for b in range(nblocks):
        acc = out[b]
        for g in range(bpb):
            off = base - g
            row = tables[off & 7, data[b * bpb + g]]
            w0 = off >> 3
            for w in range(w_out):
                acc[w] ^= row[w0 + w]


def _pack_words_le(bits: np.ndarray, nwords: int) -> np.ndarray:
    buf = np.zeros(nwords * 64, dtype=np.uint8)
    buf[:bits.size] = bits
    return np.packbits(buf, bitorder="little").view("<u8").astype(np.uint64)


class ClmulToeplitz:
    """Seed-specific state for the PCLMULQDQ kernel."""

    def __init__(self, seed_bits: np.ndarray, n: int, m: int):
        self.n, self.m = n, m
        self.nx = (n + 63) // 64
        n_pad = 64 * self.nx
        self.bytes_per_block = n_pad // 8
        length = n + m - 1
        self.a = _pack_words_le(seed_bits[::-1], (length + 63) // 64)
        self.k_lo = self.nx - 1
        self.k_hi = (n_pad + m - 2) // 64

    def __call__(self, blocks: np.ndarray) -> np.ndarray:
        """``blocks``: (nblocks, bytes_per_block) uint8, MSB-first, zero padded."""
        nblocks = blocks.shape[0]
        raw = np.ascontiguousarray(blocks).reshape(-1).view(np.uint64)
        out = np.zeros((nblocks, self.k_hi - self.k_lo + 1), dtype=np.uint64)
        if nblocks:
            _clmul_middle(self.a, raw, nblocks, self.nx, self.k_lo, self.k_hi, out)
        bits = np.unpackbits(out.view(np.uint8), axis=1, bitorder="little")
        return np.ascontiguousarray(bits[:, 63:63 + self.m][:, ::-1])


class TableToeplitz:
    """Seed-specific byte tables for the portable kernel."""

    def __init__(self, seed_bits: np.ndarray, n: int, m: int):
        self.n, self.m = n, m
        self.bytes_per_block = (n + 7) // 8
        length = n + m - 1
        shifted = np.zeros((8, length + 7), dtype=np.float32)
        for t in range(8):
            shifted[t, t:t + length] = seed_bits
        values = np.arange(256)
        # raw byte v carries x[8g+t] in bit (7 - t)
        v_bits = ((values[:, None] >> (7 - np.arange(8))[None, :]) & 1).astype(np.float32)
        prod = (v_bits @ shifted).astype(np.int64) & 1
        r = (n - 1) % 8
        prod = prod[:, r:].astype(np.uint8)
        self.w = (m + 63) // 64
        self.base = (n - 1) // 8
        nwords = self.base // 8 + self.w + 2
        padded = np.zeros((256, (nwords + 1) * 64), dtype=np.uint8)
        padded[:, :prod.shape[1]] = prod
        packed = np.packbits(padded, axis=1, bitorder="little")
        self.tables = np.empty((8, 256, nwords), dtype=np.uint64)
        for s in range(8):
            self.tables[s] = np.ascontiguousarray(packed[:, s:s + 8 * nwords]).view("<u8")

    def __call__(self, blocks: np.ndarray) -> np.ndarray:
        nblocks = blocks.shape[0]
        data = np.ascontiguousarray(blocks).reshape(-1)
        out = np.zeros((nblocks, self.w), dtype=np.uint64)
        if nblocks:
            _table_accumulate(self.tables, data, nblocks, self.bytes_per_block, self.base, out)
        bits = np.unpackbits(out.view(np.uint8), axis=1, bitorder="little")
        return np.ascontiguousarray(bits[:, :self.m])


BACKENDS = {"clmul": ClmulToeplitz, "table": TableToeplitz}
DEFAULT_BACKEND = "clmul" if HAVE_CLMUL else "table"
