import json
from fractions import Fraction

import numpy as np
import pytest

from ponqrng.config import ConfigFileError, RunConfig
from ponqrng.fileio import read_bits
from ponqrng.pipeline import (KEY_BITS, InsufficientBits, PipelineError, accounting_summary, carve_keys,
                              derive_seed, run_pipeline, verify_manifest)

SMALL = {"run.target_bits": 200_000, "run.toeplitz_seed": "master", "suite.sequence_length": 10_000}


def small(**extra):
    return RunConfig.default().with_overrides({**SMALL, **extra})


def test_default_config_round_trips():
    cfg = RunConfig.default()
    assert RunConfig.from_text(cfg.to_text()).config_hash == cfg.config_hash
    assert cfg.master_seed == 0 and cfg.toeplitz_seed_mode() == ("os", None)


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigFileError):
        RunConfig.from_text("[run]\nbogus = 1\n")
    with pytest.raises(ConfigFileError):
        RunConfig.from_text("[nope]\n")
    with pytest.raises(ConfigFileError):
        RunConfig.default().with_overrides({"schedule.settle_s": 3.0})


def test_stage_seeds_are_labeled():
    assert derive_seed(0, "source") != derive_seed(0, "other")
    assert derive_seed(0, "source") != derive_seed(1, "source")
    assert derive_seed(7, "source") == derive_seed(7, "source")


def test_pipeline_determinism(tmp_path):
    cfg = small()
    a = run_pipeline(cfg, tmp_path / "a")
    b = run_pipeline(cfg, tmp_path / "b")
    np.testing.assert_array_equal(a.extracted, b.extracted)
    assert a.extracted.size == 200_000
    assert (tmp_path / "a/report.txt").read_text() == (tmp_path / "b/report.txt").read_text()
    assert (tmp_path / "a/extracted.bin").read_bytes() == (tmp_path / "b/extracted.bin").read_bytes()


def test_os_seed_is_fresh_per_run(tmp_path):
    cfg = small(**{"run.toeplitz_seed": "os", "suite.tests": "none"})
    a = run_pipeline(cfg, tmp_path / "a")
    b = run_pipeline(cfg, tmp_path / "b")
    assert a.manifest["toeplitz_seed_provenance"] == "os-entropy"
    assert not np.array_equal(a.extracted, b.extracted)


def test_stored_seed_file_reproduces(tmp_path):
    first = run_pipeline(small(**{"run.toeplitz_seed": "os", "suite.tests": "none"}), tmp_path / "a")
    again = run_pipeline(small(**{"run.toeplitz_seed": f"file:{tmp_path / 'a/toeplitz_seed.bin'}",
                                  "suite.tests": "none"}), tmp_path / "b")
    np.testing.assert_array_equal(first.extracted, again.extracted)


def test_budget_exhausted_is_attributed(tmp_path):
    cfg = small(**{"extractor.n": 800})
    with pytest.raises(PipelineError) as err:
        run_pipeline(cfg, tmp_path / "x")
    assert err.value.stage == "derive_params"


def test_manifest_lists_and_verifies_every_file(tmp_path):
    res = run_pipeline(small(**{"run.write_trace": "yes"}), tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    on_disk = {p.name for p in tmp_path.iterdir()} - {"manifest.json"}
    assert set(manifest["files"]) == on_disk
    assert {"trace.bin", "extracted.bin", "report.txt", "accounting.txt", "config.ini"} <= on_disk
    assert manifest["master_seed"] == 0 and manifest["config_hash"] == res.manifest["config_hash"]
    assert manifest["counts"]["extracted_bits"] == 200_000
    assert verify_manifest(tmp_path) == []
    (tmp_path / "report.txt").write_text("tampered\n")
    assert verify_manifest(tmp_path) == ["report.txt"]


def test_master_seed_in_artifact_metadata(tmp_path):
    run_pipeline(small(**{"run.master_seed": 42, "suite.tests": "monobit"}), tmp_path)
    _, meta = read_bits(tmp_path / "extracted.bin")
    assert meta["master_seed"] == "42"
    assert (tmp_path / "report.txt").read_text().startswith("run master_seed=42")


def test_ingest_source(tmp_path):
    from ponqrng.noise_model import default_source_config, simulate_lit, write_trace
    write_trace(simulate_lit(default_source_config(3), 4096 * 40), tmp_path / "t.bin")
    cfg = small(**{"source.preset": "ingest", "source.ingest_path": tmp_path / "t.bin",
                   "suite.tests": "none"})
    res = run_pipeline(cfg, tmp_path / "run")
    assert res.counts["blocks"] == 40 and res.extracted.size == 40 * 924


@pytest.mark.parametrize("n_bits, keys, rest", [(512, 2, 0), (600, 2, 88), (256 * 7 + 1, 7, 1)])
def test_carve_keys(n_bits, keys, rest):
    bits = np.random.default_rng(n_bits).integers(0, 2, n_bits, dtype=np.uint8)
    out, remainder = carve_keys(bits, source_run="r")
    assert (len(out), remainder) == (keys, rest)
    assert [k.index for k in out] == list(range(keys))
    assert KEY_BITS * len(out) + remainder == n_bits
    np.testing.assert_array_equal(np.concatenate([k.key_bits for k in out]), bits[:KEY_BITS * keys])
    assert len(out[0].key_bytes) == 32


def test_carve_keys_limit_and_shortage():
    out, remainder = carve_keys(np.zeros(1024, dtype=np.uint8), count_limit=1)
    assert len(out) == 1 and remainder == 768
    with pytest.raises(InsufficientBits):
        carve_keys(np.zeros(255, dtype=np.uint8))


def test_accounting_defaults():
    acct = accounting_summary(RunConfig.default())
    assert acct.extracted_rate_bps == 451_171_875
    assert acct.key_rate == Fraction(451_171_875, 256)
    assert acct.pre_margin_rate_bps == 500_000_000
    assert acct.pre_margin_key_rate == 1_953_125
    assert acct.acquisition_s == Fraction("2.199949")
    assert acct.data_throughput_bps == 20 * 10 ** 9
    assert acct.min_duty_pre_margin == Fraction(1, 10 ** 8)
    assert acct.yield_per_slot_bits == 992_554_332


def test_accounting_without_margin_and_at_zero_duty():
    acct = accounting_summary(RunConfig.default().with_overrides({"extractor.epsilon_log2": 0}))
    assert acct.extracted_rate_bps == 500_000_000 and acct.key_rate == 1_953_125
    idle = accounting_summary(RunConfig.default(), duty=0)
    assert idle.data_throughput_bps == 40 * 10 ** 9 and idle.average_key_rate == 0


def test_accounting_text_is_exact():
    text = accounting_summary(RunConfig.default()).to_text()
    assert "key_rate_per_s=" in text and "exact 451171875/256" in text
