import numpy as np
import pytest

from ponqrng.noise_model import (RawTrace, SourceConfig, TraceMeta, default_source_config,
                                 simulate_dark, simulate_lit)
from ponqrng.stats import (SpectralError, autocorrelation, estimate_clearance,
                           estimate_min_entropy_mcv, estimate_psd)

FS = 2e9


def test_sinusoid_peak():
    seg = 1024
    f0 = 37 * FS / seg
    t = np.arange(1 << 16)
    x = np.sin(2 * np.pi * f0 / FS * t) + 1e-3 * np.random.default_rng(0).standard_normal(t.size)
    psd = estimate_psd(x, seg, sample_rate=FS)
    peak = int(np.argmax(psd.density))
    assert psd.frequencies[peak] == pytest.approx(f0)
    assert 10 * np.log10(psd.density[peak] / np.median(psd.density)) >= 30


@pytest.mark.parametrize("seed", range(3))
def test_parseval_white_noise(seed):
    sigma = 0.7
    x = sigma * np.random.default_rng(seed).standard_normal(1_000_000)
    psd = estimate_psd(x, 1024, sample_rate=FS)
    assert psd.integrated_power() == pytest.approx(sigma ** 2, rel=0.02)
    assert psd.integrated_power() == pytest.approx(np.var(x), rel=0.02)


def test_dc_lands_in_zero_bin():
    psd = estimate_psd(np.full(8192, 0.25), 1024, sample_rate=FS, window="boxcar")
    assert psd.density[0] > 0
    assert np.all(psd.density[1:] <= 1e-12 * psd.density[0])


def test_psd_preconditions():
    with pytest.raises(SpectralError):
        estimate_psd(np.zeros(4096), 1000, sample_rate=FS)
    with pytest.raises(SpectralError):
        estimate_psd(np.zeros(4096), 1024, overlap=1.0, sample_rate=FS)
    with pytest.raises(SpectralError):
        estimate_psd(np.zeros(512), 1024, sample_rate=FS)


def test_clearance_of_identical_traces_is_zero():
    lit = simulate_lit(default_source_config(1), 1 << 16)
    x = estimate_clearance(lit, lit)
    assert np.all(x.clearance_db == 0.0)


def test_clearance_doubled_variance_is_flat():
    c = SourceConfig(quantum_sigma=0.08, classical_sigma=0.08, detector_cutoff_hz=300e6, prng_seed=11)
    x = estimate_clearance(simulate_lit(c, 1 << 21), simulate_dark(c.replace(prng_seed=12), 1 << 21))
    band = x.frequencies > 0
    assert np.all(np.abs(x.clearance_db[band] - 10 * np.log10(2)) <= 0.5)


def test_clearance_metadata_mismatch():
    a = RawTrace(np.zeros(4096, dtype=np.int8), TraceMeta(2e9, 8, 1.0))
    b = RawTrace(np.zeros(4096, dtype=np.int8), TraceMeta(1e9, 8, 1.0))
    with pytest.raises(SpectralError):
        estimate_clearance(a, b)


def test_white_noise_autocorrelation():
    rng = np.random.default_rng(21)
    clean = sum(autocorrelation(rng.standard_normal(1_000_000), 1).suspect_lags.size == 0
                for _ in range(100))
    assert clean >= 99
    r = autocorrelation(rng.standard_normal(100_000), 64)
    assert r.r[0] == 1.0 and r.r.size == 65


def test_emi_period_shows_in_autocorrelation():
    rng = np.random.default_rng(22)
    t = np.arange(200_000)
    x = 0.3 * rng.standard_normal(t.size) + np.sin(2 * np.pi * t / 100)
    r = autocorrelation(x, 500)
    for k in (100, 200, 300, 400, 500):
        assert k in r.suspect_lags
        assert r.r[k] > 0.8


def test_constant_autocorrelation_is_degenerate():
    r = autocorrelation(np.full(1000, 3.0), 10)
    assert r.degenerate and np.all(np.isnan(r.r))
    with pytest.raises(SpectralError):
        autocorrelation(np.zeros(100), 50)


def test_mcv_entropy():
    assert estimate_min_entropy_mcv(np.zeros(100_000, dtype=np.int8)) == 0.0
    uniform = np.random.default_rng(3).integers(-128, 128, 10_000_000)
    h = estimate_min_entropy_mcv(uniform)
    assert 7.9 < h < 8.0
    assert estimate_min_entropy_mcv(simulate_lit(default_source_config(4), 200_000)) > 0.25
    with pytest.raises(ValueError):
        estimate_min_entropy_mcv(np.zeros(99_999))
