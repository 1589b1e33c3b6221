"""Sidecar metadata and packed-bit file helpers.

Metadata sidecars are plain text, one ``key=value`` per line; ``#`` starts a
comment. Bit files hold bits packed most-significant-bit first within each
byte, zero-padded in the final byte; the valid bit count lives in the sidecar
under ``bit_count``.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np


class MetadataError(ValueError):
    """Raised for malformed or incomplete sidecar metadata."""


def meta_path_for(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta")


def read_meta(path: str | Path) -> dict[str, str]:
    meta: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise MetadataError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise MetadataError(f"{path}:{lineno}: empty key")
        meta[key] = value
    return meta


def write_meta(path: str | Path, meta: dict[str, object]) -> None:
    lines = [f"{key}={value}" for key, value in meta.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def as_bits(bits) -> np.ndarray:
    """Coerce a bit sequence (list, str of 0/1, ndarray) to a uint8 0/1 array."""
    if isinstance(bits, str):
        arr = np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0")
    else:
        arr = np.asarray(bits)
    if arr.ndim != 1:
        raise ValueError("bit sequence must be one-dimensional")
    if arr.dtype != np.uint8:
        arr = arr.astype(np.uint8)
    if arr.size and arr.max() > 1:
        raise ValueError("bit sequence may only contain 0 and 1")
    return arr


def write_bits(path: str | Path, bits, extra_meta: dict[str, object] | None = None) -> Path:
    """Write packed bits plus a sidecar carrying ``bit_count``. Returns the sidecar path."""
    bits = as_bits(bits)
    path = Path(path)
    path.write_bytes(np.packbits(bits).tobytes())
    meta = {"bit_count": bits.size}
    meta.update(extra_meta or {})
    sidecar = meta_path_for(path)
    write_meta(sidecar, meta)
    return sidecar


def read_bits(path: str | Path, meta_path: str | Path | None = None) -> tuple[np.ndarray, dict[str, str]]:
    path = Path(path)
    meta = read_meta(meta_path or meta_path_for(path))
    try:
        count = int(meta["bit_count"])
    except (KeyError, ValueError) as exc:
        raise MetadataError(f"{path}: sidecar lacks a valid bit_count") from exc
    raw = np.frombuffer(path.read_bytes(), dtype=np.uint8)
    if raw.size != (count + 7) // 8:
        raise MetadataError(f"{path}: {raw.size} bytes cannot hold exactly {count} bits")
    return np.unpackbits(raw, count=count), meta


def sha256_file(path: str | Path, chunk: int = 1 << 22) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        while block := fh.read(chunk):
            h.update(block)
    return h.hexdigest()
