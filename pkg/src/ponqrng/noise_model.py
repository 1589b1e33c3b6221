"""Balanced-homodyne entropy source: simulated dark/lit ADC traces and trace files.

Signal chain for every simulated sample::

    white Gaussian draw -> single-pole low-pass -> + dc offset + EMI tones -> ADC

The lit receiver adds vacuum (shot) noise to the electronic floor. By default
both components share the detector filter, which makes the lit/dark PSD ratio
(the clearance) flat and equal to ``(c**2 + q**2) / c**2``. Setting
``classical_filtered=False`` routes the electronic floor around the detector
filter, so clearance falls off above the cutoff the way a flat TIA noise floor
eats into a band-limited shot-noise spectrum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator

import numpy as np
from scipy.optimize import brentq
from scipy.signal import lfilter

from .fileio import MetadataError, meta_path_for, read_meta, write_meta

ORIGINS = ("simulated-dark", "simulated-lit", "ingested")
INGEST_ADC_BITS = (8, 12, 16)

_CHUNK = 1 << 22
# spawn key reserved for the independent shot-noise stream when the electronic
# floor bypasses the detector filter
_QUANTUM_STREAM = (1,)


class ConfigError(ValueError):
    """Source configuration violates its invariants."""


class TraceFormatError(ValueError):
    """Trace file or its metadata is malformed, truncated or out of range."""


def single_pole_coefficient(cutoff_hz: float, sample_rate: float) -> float:
    """Pole ``a`` of ``y[n] = (1 - a) x[n] + a y[n-1]`` (unit DC gain)."""
    return math.exp(-2.0 * math.pi * cutoff_hz / sample_rate)


def single_pole_power_response(freq_hz, cutoff_hz: float, sample_rate: float):
    """|H(f)|^2 of the discrete single-pole filter."""
    a = single_pole_coefficient(cutoff_hz, sample_rate)
    w = 2.0 * np.pi * np.asarray(freq_hz, dtype=float) / sample_rate
    return (1.0 - a) ** 2 / (1.0 - 2.0 * a * np.cos(w) + a * a)


def filtered_variance(sigma: float, cutoff_hz: float, sample_rate: float) -> float:
    """Steady-state variance of white noise (std ``sigma``) after the filter."""
    a = single_pole_coefficient(cutoff_hz, sample_rate)
    return sigma * sigma * (1.0 - a) / (1.0 + a)


@dataclass(frozen=True, kw_only=True)
class SourceConfig:
    """Parameters of the simulated balanced receiver and its ADC.

    Amplitudes are in arbitrary volts; the ADC maps ``adc_full_scale`` to
    ``2**(adc_bits - 1)`` codes. ``emi_tones`` holds ``(freq_hz, amplitude,
    phase_rad)`` triples added as ``amplitude * sin(2 pi f t + phase)``.
    """

    quantum_sigma: float
    classical_sigma: float
    detector_cutoff_hz: float
    sample_rate: float = 2e9
    adc_bits: int = 8
    adc_full_scale: float = 1.0
    emi_tones: tuple[tuple[float, float, float], ...] = ()
    dc_offset: float = 0.0
    prng_seed: int = 0
    classical_filtered: bool = True

    def __post_init__(self):
        object.__setattr__(self, "emi_tones", tuple(tuple(float(v) for v in t) for t in self.emi_tones))
        if int(self.adc_bits) != self.adc_bits or self.adc_bits < 2 or self.adc_bits > 16:
            raise ConfigError(f"adc_bits must be an integer in [2, 16], got {self.adc_bits}")
        if not self.sample_rate > 0:
            raise ConfigError("sample_rate must be positive")
        if not self.adc_full_scale > 0:
            raise ConfigError("adc_full_scale must be positive")
        if self.quantum_sigma < 0 or self.classical_sigma < 0:
            raise ConfigError("noise sigmas must be non-negative")
        if not 0 < self.detector_cutoff_hz <= self.sample_rate / 2:
            raise ConfigError("detector_cutoff_hz must lie in (0, sample_rate/2]")
        for tone in self.emi_tones:
            if len(tone) != 3:
                raise ConfigError(f"EMI tone must be (freq_hz, amplitude, phase), got {tone}")
            if not 0 <= tone[0] <= self.sample_rate / 2:
                raise ConfigError(f"EMI tone frequency {tone[0]} outside [0, Nyquist]")

    @property
    def lsb(self) -> float:
        return self.adc_full_scale / 2 ** (self.adc_bits - 1)

    @property
    def code_range(self) -> tuple[int, int]:
        half = 2 ** (self.adc_bits - 1)
        return -half, half - 1

    def replace(self, **changes) -> "SourceConfig":
        return replace(self, **changes)

    @classmethod
    def from_clearance(cls, clearance_db: float, *, classical_sigma: float, **kwargs) -> "SourceConfig":
        """Shared-filter source whose lit/dark variance ratio is ``clearance_db``."""
        if clearance_db < 0:
            raise ConfigError("clearance must be non-negative in dB")
        quantum = classical_sigma * math.sqrt(10.0 ** (clearance_db / 10.0) - 1.0)
        return cls(quantum_sigma=quantum, classical_sigma=classical_sigma,
                   classical_filtered=True, **kwargs)

    @classmethod
    def from_clearance_points(cls, low: tuple[float, float], high: tuple[float, float], *,
                              classical_sigma: float, **kwargs) -> "SourceConfig":
        """Roll-off source hitting two (frequency_hz, clearance_db) anchors.

        The electronic floor is white (bypassing the detector filter) and the
        quantum noise is shaped by the single pole; the cutoff and quantum
        sigma are solved so that both anchors are met, with the ADC's
        quantization floor counted as part of the dark spectrum.
        """
        probe = cls(quantum_sigma=0.0, classical_sigma=classical_sigma,
                    detector_cutoff_hz=1.0, classical_filtered=False, **kwargs)
        fs = probe.sample_rate
        (f1, xi1), (f2, xi2) = low, high
        if not (0 < f1 < f2 < fs / 2 and xi1 > xi2 > 0):
            raise ConfigError("need 0 < f_low < f_high < Nyquist and clearance falling with frequency")
        r1 = 10.0 ** (xi1 / 10.0) - 1.0
        r2 = 10.0 ** (xi2 / 10.0) - 1.0

        def mismatch(fc):
            h1 = single_pole_power_response(f1, fc, fs)
            h2 = single_pole_power_response(f2, fc, fs)
            return math.log(h1 / h2) - math.log(r1 / r2)

        lo, hi = fs * 1e-9, fs / 2
        if mismatch(lo) * mismatch(hi) > 0:
            raise ConfigError("clearance anchors are not reachable with a single-pole detector")
        cutoff = brentq(mismatch, lo, hi, xtol=1e-6, rtol=1e-13)
        floor = classical_sigma ** 2 + probe.lsb ** 2 / 12.0
        quantum = math.sqrt(r1 * floor / single_pole_power_response(f1, cutoff, fs))
        return replace(probe, quantum_sigma=quantum, detector_cutoff_hz=cutoff)


def default_source_config(prng_seed: int = 0, *, emi: bool = True) -> SourceConfig:
    """Receiver fitted to the 14.8 dB @ 200 MHz / 7.5 dB @ 600 MHz clearance curve.

    Electronic floor of 4 LSB rms; one 20 MHz EMI tone (about 2.6 LSB) as the
    deterministic contaminant the raw data should betray.
    """
    tones = ((20e6, 0.02, 0.3),) if emi else ()
    return SourceConfig.from_clearance_points(
        (200e6, 14.8), (600e6, 7.5), classical_sigma=4 / 128,
        emi_tones=tones, prng_seed=prng_seed)


@dataclass(frozen=True)
class TraceMeta:
    sample_rate: float
    adc_bits: int
    adc_full_scale: float
    origin: str = "ingested"

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise TraceFormatError("sample_rate must be positive")
        if int(self.adc_bits) != self.adc_bits or not 2 <= self.adc_bits <= 16:
            raise TraceFormatError(f"adc_bits must be an integer in [2, 16], got {self.adc_bits}")
        if self.origin not in ORIGINS:
            raise TraceFormatError(f"origin must be one of {ORIGINS}, got {self.origin!r}")

    @property
    def code_range(self) -> tuple[int, int]:
        half = 2 ** (self.adc_bits - 1)
        return -half, half - 1


def code_dtype(adc_bits: int) -> np.dtype:
    return np.dtype(np.int8) if adc_bits <= 8 else np.dtype(np.int16)


@dataclass
class RawTrace:
    """Signed ADC codes plus acquisition metadata."""

    codes: np.ndarray
    meta: TraceMeta = field(repr=False)

    def __post_init__(self):
        codes = np.asarray(self.codes)
        if codes.ndim != 1 or codes.size == 0:
            raise TraceFormatError("a trace needs a non-empty one-dimensional code array")
        if not np.issubdtype(codes.dtype, np.integer):
            raise TraceFormatError("trace codes must be integers")
        lo, hi = self.meta.code_range
        info = np.iinfo(codes.dtype)
        if info.min < lo or info.max > hi:
            cmin, cmax = int(codes.min()), int(codes.max())
            if cmin < lo or cmax > hi:
                raise TraceFormatError(
                    f"codes span [{cmin}, {cmax}], outside the {self.meta.adc_bits}-bit range [{lo}, {hi}]")
            codes = codes.astype(code_dtype(self.meta.adc_bits))
        self.codes = codes

    def __len__(self) -> int:
        return self.codes.size

    def volts(self) -> np.ndarray:
        return self.codes * (self.meta.adc_full_scale / 2 ** (self.meta.adc_bits - 1))


def iter_codes(config: SourceConfig, n_samples: int, *, lit: bool,
               chunk: int = _CHUNK) -> Iterator[np.ndarray]:
    """Yield the quantized trace in chunks; concatenation is chunk-size invariant."""
    if int(n_samples) != n_samples or n_samples < 1:
        raise ValueError(f"n_samples must be a positive integer, got {n_samples}")
    # quantum_sigma == 0 is allowed and degenerates to the dark trace
    fs = config.sample_rate
    a = single_pole_coefficient(config.detector_cutoff_hz, fs)
    b_coef, a_coef = [1.0 - a], [1.0, -a]
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.prng_seed)))
    split = lit and not config.classical_filtered
    if split:
        rng_q = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(config.prng_seed, spawn_key=_QUANTUM_STREAM)))
    if config.classical_filtered:
        sigma = math.hypot(config.classical_sigma, config.quantum_sigma) if lit else config.classical_sigma
    else:
        sigma = config.classical_sigma
    zi = np.zeros(1)
    lo, hi = config.code_range
    inv_lsb = 1.0 / config.lsb
    dtype = code_dtype(config.adc_bits)

    for start in range(0, n_samples, chunk):
        count = min(chunk, n_samples - start)
        v = rng.standard_normal(count)
        v *= sigma
        if config.classical_filtered:
            v, zi = lfilter(b_coef, a_coef, v, zi=zi)
        elif split:
            q = rng_q.standard_normal(count)
            q *= config.quantum_sigma
            q, zi = lfilter(b_coef, a_coef, q, zi=zi)
            v += q
        if config.dc_offset:
            v += config.dc_offset
        if config.emi_tones:
            t = np.arange(start, start + count, dtype=np.float64)
            for freq, amp, phase in config.emi_tones:
                v += amp * np.sin((2.0 * np.pi * freq / fs) * t + phase)
        v *= inv_lsb
        np.rint(v, out=v)
        np.clip(v, lo, hi, out=v)
        yield v.astype(dtype)


def _simulate(config: SourceConfig, n_samples: int, lit: bool) -> RawTrace:
    codes = np.empty(int(n_samples), dtype=code_dtype(config.adc_bits))
    pos = 0
    for part in iter_codes(config, n_samples, lit=lit):
        codes[pos:pos + part.size] = part
        pos += part.size
    meta = TraceMeta(config.sample_rate, config.adc_bits, config.adc_full_scale,
                     "simulated-lit" if lit else "simulated-dark")
    return RawTrace(codes, meta)


def simulate_dark(config: SourceConfig, n_samples: int) -> RawTrace:
    """Electronic-noise-only trace (laser off)."""
    return _simulate(config, n_samples, lit=False)


def simulate_lit(config: SourceConfig, n_samples: int) -> RawTrace:
    """Trace with vacuum noise on top of the electronic floor (laser on)."""
    return _simulate(config, n_samples, lit=True)


def write_trace(trace: RawTrace, path: str | Path, meta_path: str | Path | None = None) -> Path:
    """Write little-endian two's-complement codes and the key=value sidecar."""
    path = Path(path)
    dtype = "<i1" if trace.meta.adc_bits <= 8 else "<i2"
    path.write_bytes(np.ascontiguousarray(trace.codes, dtype=dtype).tobytes())
    sidecar = Path(meta_path) if meta_path else meta_path_for(path)
    m = trace.meta
    write_meta(sidecar, {"sample_rate": repr(float(m.sample_rate)), "adc_bits": m.adc_bits,
                         "adc_full_scale": repr(float(m.adc_full_scale)), "origin": m.origin})
    return sidecar


def ingest_trace(path: str | Path, meta_path: str | Path | None = None) -> RawTrace:
    """Read a captured (or previously written) trace file.

    ``meta_path`` defaults to ``<path>.meta``.
    """
    path = Path(path)
    try:
        meta = read_meta(meta_path or meta_path_for(path))
    except MetadataError as exc:
        raise TraceFormatError(str(exc)) from exc
    try:
        adc_bits = int(meta["adc_bits"])
        sample_rate = float(meta["sample_rate"])
        full_scale = float(meta.get("adc_full_scale", "1.0"))
    except KeyError as exc:
        raise TraceFormatError(f"trace metadata lacks {exc.args[0]!r}") from exc
    except ValueError as exc:
        raise TraceFormatError(f"unparseable trace metadata: {exc}") from exc
    if adc_bits not in INGEST_ADC_BITS:
        raise TraceFormatError(f"adc_bits must be one of {INGEST_ADC_BITS}, got {adc_bits}")
    origin = meta.get("origin", "ingested")
    width = 1 if adc_bits <= 8 else 2
    raw = path.read_bytes()
    if len(raw) == 0:
        raise TraceFormatError(f"{path}: empty trace file")
    if len(raw) % width:
        raise TraceFormatError(f"{path}: {len(raw)} bytes is not a whole number of {width}-byte samples")
    codes = np.frombuffer(raw, dtype="<i1" if width == 1 else "<i2").astype(code_dtype(adc_bits))
    try:
        return RawTrace(codes, TraceMeta(sample_rate, adc_bits, full_scale, origin))
    except TraceFormatError as exc:
        raise TraceFormatError(f"{path}: {exc}") from exc
