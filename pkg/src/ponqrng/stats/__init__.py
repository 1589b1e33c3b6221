from .entropy import estimate_min_entropy_mcv
from .nist import KINDS, InvalidParameter, SequenceTooShort, nist_test
from .spectral import (PSD, Autocorrelation, ClearanceSpectrum, SpectralError, autocorrelation,
                       estimate_clearance, estimate_psd)
from .suite import SuiteError, SuiteParams, TestReport, TestResult, run_suite

__all__ = [
    "KINDS", "PSD", "Autocorrelation", "ClearanceSpectrum", "InvalidParameter", "SequenceTooShort",
    "SpectralError", "SuiteError", "SuiteParams", "TestReport", "TestResult", "autocorrelation",
    "estimate_clearance", "estimate_min_entropy_mcv", "estimate_psd", "nist_test", "run_suite",
]
