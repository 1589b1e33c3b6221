"""End-to-end run: source -> pack -> Toeplitz extraction -> randomness suite -> artifacts."""

from __future__ import annotations

import hashlib
import json
import math
import platform
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import metadata
from pathlib import Path

import numpy as np

from .config import RunConfig
from .extractor import (ExtractorError, ExtractorParams, ToeplitzHasher, ToeplitzSeed,
                        derive_params, extract_packed, pack_samples_bytes)
from .fileio import as_bits, read_meta, meta_path_for, sha256_file, write_bits, write_meta
from .frame_scheduler import (FrameSpec, aes_refresh_key_rate, exact, min_duty_cycle,
                              qrng_yield_per_frame, throughput_at_duty)
from .noise_model import RawTrace, TraceMeta, ingest_trace, iter_codes
from .stats.suite import TestReport, run_suite

KEY_BITS = 256
MANIFEST = "manifest.json"
# input blocks simulated and hashed per step
BLOCKS_PER_CHUNK = 2048


class PipelineError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it and ``__cause__`` holds the module error."""

    def __init__(self, stage: str, error: Exception):
        super().__init__(f"stage {stage!r} failed: {error}")
        self.stage = stage
        self.error = error


class InsufficientBits(ValueError):
    pass


def derive_seed(master: int, label: str) -> int:
    """Fixed labeled derivation of a 64-bit stage seed from the master seed."""
    digest = hashlib.sha256(f"ponqrng:{int(master)}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


# keys

@dataclass(frozen=True)
class KeyBlock:
    key_bits: np.ndarray
    index: int
    source_run: str = ""

    def __post_init__(self):
        if self.key_bits.size != KEY_BITS:
            raise ValueError(f"a key block holds exactly {KEY_BITS} bits")

    @property
    def key_bytes(self) -> bytes:
        return np.packbits(self.key_bits).tobytes()

    def hex(self) -> str:
        return self.key_bytes.hex()


def carve_keys(bits, count_limit: int | None = None, source_run: str = "") -> tuple[list[KeyBlock], int]:
    """Consecutive 256-bit keys from the front of ``bits``; returns (keys, remainder bits)."""
    bits = as_bits(bits)
    available = bits.size // KEY_BITS
    if available == 0:
        raise InsufficientBits(f"{bits.size} bits cannot hold one {KEY_BITS}-bit key")
    count = available if count_limit is None else min(available, int(count_limit))
    keys = [KeyBlock(bits[i * KEY_BITS:(i + 1) * KEY_BITS].copy(), i, source_run) for i in range(count)]
    return keys, bits.size - count * KEY_BITS


# accounting

@dataclass(frozen=True)
class Accounting:
    sample_rate: Fraction
    bits_per_sample: int
    n: int
    m: int
    min_entropy_per_sample: Fraction
    epsilon_log2: Fraction
    duty: Fraction
    acquisition_s: Fraction
    qrng_slot_s: Fraction
    data_throughput_bps: Fraction
    required_key_rate: Fraction
    yield_per_slot_bits: int

    @property
    def raw_rate_bps(self) -> Fraction:
        return self.sample_rate * self.bits_per_sample

    @property
    def extracted_rate_bps(self) -> Fraction:
        """Burst rate while acquiring, after the leftover-hash margin."""
        return self.raw_rate_bps * Fraction(self.m, self.n)

    @property
    def pre_margin_rate_bps(self) -> Fraction:
        return self.sample_rate * self.min_entropy_per_sample

    @property
    def key_rate(self) -> Fraction:
        return self.extracted_rate_bps / KEY_BITS

    @property
    def pre_margin_key_rate(self) -> Fraction:
        return self.pre_margin_rate_bps / KEY_BITS

    @property
    def average_key_rate(self) -> Fraction:
        """Key rate averaged over frames: duty times the acquiring share of the slot."""
        if self.duty == 0:
            return Fraction(0)
        return self.key_rate * self.duty * self.acquisition_s / self.qrng_slot_s

    @property
    def min_duty(self) -> Fraction:
        return min_duty_cycle(self.required_key_rate, self.key_rate).ratio

    @property
    def min_duty_pre_margin(self) -> Fraction:
        return min_duty_cycle(self.required_key_rate, self.pre_margin_key_rate).ratio

    def as_dict(self) -> dict[str, object]:
        return {
            "sample_rate_sps": self.sample_rate, "bits_per_sample": self.bits_per_sample,
            "n": self.n, "m": self.m, "min_entropy_per_sample": self.min_entropy_per_sample,
            "epsilon_log2": self.epsilon_log2,
            "raw_rate_bps": self.raw_rate_bps, "extracted_rate_bps": self.extracted_rate_bps,
            "pre_margin_rate_bps": self.pre_margin_rate_bps, "key_rate_per_s": self.key_rate,
            "pre_margin_key_rate_per_s": self.pre_margin_key_rate, "duty": self.duty,
            "acquisition_s": self.acquisition_s, "data_throughput_bps": self.data_throughput_bps,
            "average_key_rate_per_s": self.average_key_rate,
            "required_key_rate_per_s": self.required_key_rate,
            "min_duty": self.min_duty, "min_duty_pre_margin": self.min_duty_pre_margin,
            "yield_per_slot_bits": self.yield_per_slot_bits,
        }

    def to_text(self) -> str:
        lines = []
        for key, val in self.as_dict().items():
            if isinstance(val, Fraction):
                exact_txt = str(val) if val.denominator != 1 else str(val.numerator)
                lines.append(f"{key}={float(val)!r}  # exact {exact_txt}")
            else:
                lines.append(f"{key}={val}")
        return "\n".join(lines) + "\n"


def _params_from_inputs(config: RunConfig) -> ExtractorParams:
    e = config.extractor_inputs()
    if e.m is None:
        return derive_params(e.n, e.bits_per_sample, e.min_entropy_per_sample, e.epsilon_log2)
    return ExtractorParams(e.n, e.m, e.bits_per_sample, e.min_entropy_per_sample, e.epsilon_log2)


def _sample_rate(config: RunConfig) -> float:
    if config.source_mode == "ingest":
        return float(read_meta(meta_path_for(config.ingest_path))["sample_rate"])
    return config.source_config().sample_rate


def accounting_summary(config: RunConfig, duty=None, params: ExtractorParams | None = None) -> Accounting:
    """Rates, key rates, throughput and duty figures, all exact fractions of config inputs.

    ``duty`` overrides the configured frame's QRNG share (0 is allowed here even
    though no frame can be built with an empty slot).
    """
    try:
        params = params or _params_from_inputs(config)
    except ExtractorError as exc:
        raise PipelineError("derive_params", exc) from exc
    spec: FrameSpec = config.frame_spec()
    d = spec.duty_cycle if duty is None else exact(duty)
    fs = exact(_sample_rate(config))
    link, per_key = config.refresh_load()
    return Accounting(
        sample_rate=fs, bits_per_sample=params.bits_per_sample, n=params.n, m=params.m,
        min_entropy_per_sample=exact(params.min_entropy_per_sample),
        epsilon_log2=exact(params.epsilon_log2), duty=d, acquisition_s=spec.acquisition_s,
        qrng_slot_s=spec.qrng_slot_s, data_throughput_bps=throughput_at_duty(spec, d),
        required_key_rate=aes_refresh_key_rate(link, per_key),
        yield_per_slot_bits=qrng_yield_per_frame(spec, fs, params))


# pipeline

@dataclass
class RunResult:
    output_dir: Path
    params: ExtractorParams
    extracted: np.ndarray
    report: TestReport | None
    accounting: Accounting
    counts: dict[str, int]
    manifest: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.report is not None and self.report.target_verdict


def _toeplitz_seed(config: RunConfig, params: ExtractorParams) -> ToeplitzSeed:
    mode, path = config.toeplitz_seed_mode()
    if mode == "os":
        return ToeplitzSeed.from_os_entropy(params)
    if mode == "master":
        label = "toeplitz"
        rng = np.random.default_rng(derive_seed(config.master_seed, label))
        return ToeplitzSeed.from_generator(params, rng, f"master:{config.master_seed}:{label}")
    seed = ToeplitzSeed.load(path)
    seed.check(params)
    return seed


def _source_chunks(config: RunConfig, params: ExtractorParams, trace_path: Path | None):
    """Yield (packed bytes, bit count) in whole extractor blocks, plus the sample meta."""
    if config.source_mode == "ingest":
        trace = ingest_trace(config.ingest_path)
        if params.bits_per_sample != trace.meta.adc_bits:
            raise ValueError(f"extractor bits_per_sample={params.bits_per_sample} but trace has "
                             f"{trace.meta.adc_bits}-bit samples")
        yield trace.meta, None
        yield pack_samples_bytes(trace, params.bits_per_sample)
        return
    src = config.source_config(derive_seed(config.master_seed, "source"))
    if params.bits_per_sample != src.adc_bits:
        raise ValueError(f"extractor bits_per_sample={params.bits_per_sample} but the ADC has "
                         f"{src.adc_bits} bits")
    meta = TraceMeta(src.sample_rate, src.adc_bits, src.adc_full_scale, "simulated-lit")
    yield meta, None
    blocks = max(1, math.ceil(config.target_bits / params.m))
    spb = params.samples_per_block
    sink = open(trace_path, "wb") if trace_path else None
    try:
        for codes in iter_codes(src, blocks * spb, lit=True, chunk=BLOCKS_PER_CHUNK * spb):
            if sink:
                sink.write(codes.astype("<i1" if codes.dtype == np.int8 else "<i2").tobytes())
            yield pack_samples_bytes(RawTrace(codes, meta), params.bits_per_sample)
    finally:
        if sink:
            sink.close()


def _versions() -> dict[str, str]:
    out = {"python": platform.python_version()}
    for dist in ("artifact", "numpy", "scipy", "numba"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            out[dist] = "unknown"
    return out


def run_pipeline(config: RunConfig, output_dir: str | Path | None = None) -> RunResult:
    """Run every stage in order and write artifacts plus ``manifest.json``."""
    out = Path(output_dir) if output_dir is not None else config.output_dir
    stage = "derive_params"
    try:
        params = _params_from_inputs(config)
        stage = "setup"
        out.mkdir(parents=True, exist_ok=True)
        stamp = {"master_seed": config.master_seed, "config_hash": config.config_hash}
        (out / "config.ini").write_text(config.to_text())

        stage = "toeplitz_seed"
        seed = _toeplitz_seed(config, params)
        hasher = ToeplitzHasher(seed, params, config.backend)

        stage = "source"
        trace_path = out / "trace.bin" if config.write_trace else None
        chunks = _source_chunks(config, params, trace_path)
        meta, _ = next(chunks)
        parts, samples, blocks, leftover_total = [], 0, 0, 0
        for data, bit_count in chunks:
            stage = "extract"
            bits, leftover = extract_packed(hasher, data, params, bit_count)
            parts.append(bits)
            samples += bit_count // params.bits_per_sample
            blocks += bit_count // params.n
            leftover_total += leftover
            stage = "source"
        extracted = np.concatenate(parts) if parts else np.zeros(0, dtype=np.uint8)
        if config.source_mode != "ingest" and extracted.size > config.target_bits:
            extracted = extracted[:config.target_bits]

        stage = "suite"
        report = None
        if config.suite_enabled:
            report = run_suite(extracted, params=config.suite_params())

        stage = "accounting"
        acct = accounting_summary(config, params=params)

        stage = "write"
        if trace_path:
            write_meta(meta_path_for(trace_path), {
                "sample_rate": repr(float(meta.sample_rate)), "adc_bits": meta.adc_bits,
                "adc_full_scale": repr(float(meta.adc_full_scale)), "origin": meta.origin, **stamp})
        seed.save(out / "toeplitz_seed.bin")
        write_meta(meta_path_for(out / "toeplitz_seed.bin"),
                   {"bit_count": len(seed), "provenance": seed.provenance, **stamp})
        write_bits(out / "extracted.bin", extracted,
                   {**stamp, "n": params.n, "m": params.m, "toeplitz_seed": seed.provenance})
        if report is not None:
            (out / "report.txt").write_text(
                f"run master_seed={config.master_seed} config_hash={config.config_hash}\n"
                + report.to_records())
            (out / "summary.txt").write_text(report.summary_table() + "\n")
        (out / "accounting.txt").write_text(
            f"# master_seed={config.master_seed} config_hash={config.config_hash}\n" + acct.to_text())

        counts = {"samples": samples, "input_bits": samples * params.bits_per_sample,
                  "blocks": blocks,
                  "extracted_bits": int(extracted.size), "leftover_input_bits": leftover_total,
                  "sequences": report.sequences if report else 0}
        files = sorted(p for p in out.iterdir() if p.is_file() and p.name != MANIFEST)
        manifest = {
            "versions": _versions(), "config_hash": config.config_hash,
            "master_seed": config.master_seed,
            "stage_seeds": {"source": derive_seed(config.master_seed, "source")},
            "toeplitz_seed_provenance": seed.provenance,
            "extractor": {"n": params.n, "m": params.m, "bits_per_sample": params.bits_per_sample,
                          "min_entropy_per_sample": params.min_entropy_per_sample,
                          "epsilon_log2": params.epsilon_log2},
            "counts": counts,
            "verdict": None if report is None else {"target": report.target_verdict, "rev1a": report.verdict},
            "files": {p.name: sha256_file(p) for p in files},
        }
        (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(stage, exc) from exc
    return RunResult(out, params, extracted, report, acct, counts, manifest)


def verify_manifest(run_dir: str | Path) -> list[str]:
    """Names of files whose content no longer matches the manifest (empty when intact)."""
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / MANIFEST).read_text())
    bad = []
    for name, digest in manifest["files"].items():
        path = run_dir / name
        if not path.is_file() or sha256_file(path) != digest:
            bad.append(name)
    return bad
