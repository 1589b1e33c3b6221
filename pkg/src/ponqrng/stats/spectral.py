"""Source characterization: Welch PSD, clearance spectrum, autocorrelation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import welch

from ..noise_model import RawTrace


class SpectralError(ValueError):
    pass


@dataclass(frozen=True)
class PSD:
    frequencies: np.ndarray
    density: np.ndarray  # one-sided, units^2 / Hz

    @property
    def bin_width(self) -> float:
        return float(self.frequencies[1] - self.frequencies[0])

    def integrated_power(self) -> float:
        return float(np.sum(self.density) * self.bin_width)

    def nearest_bin(self, freq_hz: float) -> int:
        return int(np.argmin(np.abs(self.frequencies - freq_hz)))


def estimate_psd(trace: RawTrace | np.ndarray, segment_length: int = 1024, overlap: float = 0.5,
                 sample_rate: float | None = None, window: str = "hann") -> PSD:
    """Averaged windowed periodogram, one-sided, scaled so that sum * df = mean square.

    ``trace`` may be a :class:`RawTrace` (dequantized to volts) or a plain
    array, in which case ``sample_rate`` is required.
    """
    if isinstance(trace, RawTrace):
        x = trace.volts()
        fs = trace.meta.sample_rate
    else:
        x = np.asarray(trace, dtype=float)
        if sample_rate is None:
            raise SpectralError("sample_rate is required for a bare array")
        fs = float(sample_rate)
    if segment_length < 2 or segment_length & (segment_length - 1):
        raise SpectralError("segment_length must be a power of two >= 2")
    if not 0 <= overlap < 1:
        raise SpectralError("overlap must lie in [0, 1)")
    if x.size < segment_length:
        raise SpectralError(f"trace of {x.size} samples is shorter than one segment ({segment_length})")
    freqs, dens = welch(x, fs=fs, window=window, nperseg=segment_length,
                        noverlap=int(overlap * segment_length), detrend=False,
                        return_onesided=True, scaling="density")
    return PSD(freqs, dens)


@dataclass(frozen=True)
class ClearanceSpectrum:
    frequencies: np.ndarray
    clearance_db: np.ndarray
    psd_lit: np.ndarray
    psd_dark: np.ndarray

    def at(self, freq_hz: float) -> float:
        """Clearance at the bin nearest ``freq_hz``."""
        idx = int(np.argmin(np.abs(self.frequencies - freq_hz)))
        return float(self.clearance_db[idx])

    def probes(self, freqs) -> dict[float, float]:
        return {float(f): self.at(f) for f in freqs}


def estimate_clearance(lit: RawTrace, dark: RawTrace, segment_length: int = 1024,
                       overlap: float = 0.5) -> ClearanceSpectrum:
    """Per-frequency ratio of lit to dark noise power, in dB."""
    ml, md = lit.meta, dark.meta
    if (ml.sample_rate, ml.adc_bits, ml.adc_full_scale) != (md.sample_rate, md.adc_bits, md.adc_full_scale):
        raise SpectralError("lit and dark traces differ in sample rate or ADC parameters")
    p_lit = estimate_psd(lit, segment_length, overlap)
    p_dark = estimate_psd(dark, segment_length, overlap)
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = 10.0 * np.log10(p_lit.density / p_dark.density)
    return ClearanceSpectrum(p_lit.frequencies, xi, p_lit.density, p_dark.density)


@dataclass(frozen=True)
class Autocorrelation:
    r: np.ndarray
    threshold: float
    suspect_lags: np.ndarray
    degenerate: bool = False


def autocorrelation(trace: RawTrace | np.ndarray, max_lag: int) -> Autocorrelation:
    """Biased normalized autocorrelation; lags with |r| > 3/sqrt(N) are flagged."""
    x = np.asarray(trace.codes if isinstance(trace, RawTrace) else trace, dtype=float)
    n = x.size
    if not 0 <= max_lag < n / 2:
        raise SpectralError("max_lag must be below half the trace length")
    threshold = 3.0 / math.sqrt(n)
    x = x - x.mean()
    energy = float(np.dot(x, x))
    if energy == 0.0:
        return Autocorrelation(np.full(max_lag + 1, np.nan), threshold,
                               np.zeros(0, dtype=np.int64), degenerate=True)
    if max_lag <= 32:
        acov = np.array([np.dot(x[:n - k], x[k:]) for k in range(max_lag + 1)])
    else:
        size = 1 << (2 * n - 1).bit_length()
        spec = np.fft.rfft(x, size)
        acov = np.fft.irfft(spec * np.conj(spec), size)[:max_lag + 1]
    r = acov / energy
    r[0] = 1.0
    suspect = np.flatnonzero(np.abs(r[1:]) > threshold) + 1
    return Autocorrelation(r, threshold, suspect)
