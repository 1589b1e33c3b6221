import numpy as np
import pytest

from ponqrng.stats.suite import (ALPHA, SuiteError, SuiteParams, TestReport, proportion_threshold,
                                 run_suite, uniformity_p)


def test_all_zero_stream_fails_monobit():
    report = run_suite(np.zeros(20 * 1000, dtype=np.uint8), params=SuiteParams(1000, tests=("monobit",)))
    r = report.result("monobit")
    assert r.proportion == 0.0
    assert not report.verdict and not report.target_verdict
    assert report.failing() == ["monobit"]


def test_rev1a_threshold():
    assert proportion_threshold(100) == pytest.approx(0.960150, abs=1e-6)
    assert proportion_threshold(1000, ALPHA) == pytest.approx(0.99 - 3 * np.sqrt(0.0099 / 1000))


def test_uniformity_of_perfectly_uniform_p_values():
    assert uniformity_p(np.arange(1000) / 1000 + 5e-4) == pytest.approx(1.0)
    assert uniformity_p(np.full(100, 0.5)) < 1e-10


def test_too_few_sequences():
    with pytest.raises(SuiteError):
        run_suite(np.zeros(9 * 1000, dtype=np.uint8), params=SuiteParams(1000))


def _bits(n, seed=0):
    return np.random.default_rng(seed).integers(0, 2, n, dtype=np.uint8)


def test_pseudorandom_stream_passes_and_is_deterministic():
    bits = _bits(100 * 20_000, 5)
    params = SuiteParams(20_000)
    a, b = run_suite(bits, params=params), run_suite(bits, params=params)
    assert a.to_records() == b.to_records()
    assert len(a.results) == 10
    for r in a.results:
        assert r.proportion >= 0.96
        assert np.all((r.p_values >= 0) & (r.p_values <= 1))


def test_records_round_trip():
    report = run_suite(_bits(12 * 5000, 7), params=SuiteParams(5000))
    back = TestReport.from_records("run master_seed=1\n" + report.to_records())
    assert back.sequences == 12 and back.parameters == report.parameters
    for x, y in zip(report.results, back.results):
        assert x.name == y.name
        np.testing.assert_array_equal(x.p_values, y.p_values)
        assert x.passes_target == y.passes_target and x.passes_rev1a == y.passes_rev1a


def test_workers_match_serial():
    bits = _bits(10 * 3000, 8)
    serial = run_suite(bits, params=SuiteParams(3000))
    parallel = run_suite(bits, params=SuiteParams(3000, workers=2))
    assert serial.to_records() == parallel.to_records()
