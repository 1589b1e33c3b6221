"""Most-common-value min-entropy estimate for raw ADC codes (non-ITS cross-check)."""

from __future__ import annotations

import math

import numpy as np

from ..noise_model import RawTrace

MIN_SAMPLES = 100_000
Z_99 = 2.576


def estimate_min_entropy_mcv(samples: RawTrace | np.ndarray) -> float:
    """-log2 of the upper 99% confidence bound on the most common code's probability."""
    codes = np.asarray(samples.codes if isinstance(samples, RawTrace) else samples)
    n = codes.size
    if n < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {n}")
    _, counts = np.unique(codes, return_counts=True)
    p = counts.max() / n
    p_upper = min(1.0, p + Z_99 * math.sqrt(p * (1.0 - p) / (n - 1)))
    return -math.log2(p_upper)
