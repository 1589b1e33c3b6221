"""Vacuum-noise QRNG overlay for a wavelength-stacked PON access link.

Subpackages and modules: ``noise_model`` (receiver and ADC simulation, trace
files), ``extractor`` (Toeplitz hashing), ``stats`` (randomness suite and
source characterization), ``channel_plan`` (cyclic AWG routing),
``frame_scheduler`` (QRNG/data time sharing) and ``pipeline`` (orchestration,
keys and rate accounting).
"""

from .extractor import ExtractorParams, ToeplitzSeed, derive_params, extract_block, extract_stream
from .noise_model import RawTrace, SourceConfig, default_source_config, simulate_dark, simulate_lit

__version__ = "0.1.0"

__all__ = ["ExtractorParams", "RawTrace", "SourceConfig", "ToeplitzSeed", "default_source_config",
           "derive_params", "extract_block", "extract_stream", "simulate_dark", "simulate_lit"]
