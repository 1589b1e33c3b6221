"""Run configuration: one INI document with sections run/source/extractor/suite/schedule/plan.

Values not given in the document fall back to :data:`DEFAULTS`. The merged
document is dumped in canonical form (:meth:`RunConfig.to_text`) and that text
is what the config hash covers, so two files that differ only in comments or
key order hash the same.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass
from pathlib import Path

from .channel_plan import ChannelAllocation, GridSpec
from .frame_scheduler import FrameSpec, exact
from .noise_model import SourceConfig, default_source_config
from .stats.nist import KINDS
from .stats.suite import SuiteParams


class ConfigFileError(ValueError):
    pass


DEFAULTS: dict[str, dict[str, str]] = {
    "run": {
        "master_seed": "0",
        "output_dir": "ponqrng-run",
        "target_bits": "50000000",
        # os | master | file:<path>
        "toeplitz_seed": "os",
        "write_trace": "no",
        "backend": "auto",
    },
    "source": {
        # default | custom | ingest
        "preset": "default",
        "emi": "yes",
        "ingest_path": "",
    },
    "extractor": {
        "n": "32768",
        "bits_per_sample": "8",
        "min_entropy_per_sample": "0.25",
        "epsilon_log2": "50",
        "m": "auto",
    },
    "suite": {
        "tests": ",".join(KINDS),
        "sequence_length": "50000",
        "alpha": "0.01",
        "workers": "1",
    },
    "schedule": {
        "qrng_slot_s": "2.2",
        "settle_s": "51e-6",
        "retune_settle_s": "0",
        "frame_period_s": "2.2",
        "lanes_total": "4",
        "lanes_eroded": "2",
        "lane_rate_bps": "1e10",
        "refresh_link_rate_bps": "1e10",
        "refresh_bytes_per_key": "64e9",
    },
    "plan": {
        "nu_start_hz": "193600000000000",
        "delta_nu_hz": "100000000000",
        "fsr_hz": "auto",
        "ports": "4",
        "upstream": "1,3,5,7",
        "downstream": "9,11,13,15",
        "qrng_target": "0",
        "excess_loss_db": "1.9",
        "foldback_pair": "11,13",
    },
}

# optional [source] keys; with preset=default they override the fitted receiver
SOURCE_KEYS = ("quantum_sigma", "classical_sigma", "detector_cutoff_hz", "sample_rate", "adc_bits",
               "adc_full_scale", "emi_tones", "dc_offset", "classical_filtered")


@dataclass(frozen=True)
class ExtractorInputs:
    """Extractor settings before the leftover-hash budget is applied."""

    n: int
    bits_per_sample: int
    min_entropy_per_sample: float
    epsilon_log2: float
    m: int | None = None


def _bool(v: str) -> bool:
    low = v.strip().lower()
    if low in ("1", "yes", "true", "on"):
        return True
    if low in ("0", "no", "false", "off"):
        return False
    raise ConfigFileError(f"not a boolean: {v!r}")


def _ints(v: str) -> tuple[int, ...]:
    return tuple(int(x) for x in v.replace(" ", "").split(",") if x)


def _tones(v: str) -> tuple[tuple[float, float, float], ...]:
    """``freq:amplitude:phase`` triples separated by commas."""
    tones = []
    for item in v.replace(" ", "").split(","):
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 3:
            raise ConfigFileError(f"EMI tone {item!r} is not freq:amplitude:phase")
        tones.append(tuple(float(p) for p in parts))
    return tuple(tones)


@dataclass(frozen=True)
class RunConfig:
    values: dict[str, dict[str, str]]

    # construction

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigFileError(str(exc)) from exc
        merged = {sec: dict(keys) for sec, keys in DEFAULTS.items()}
        for sec in parser.sections():
            if sec not in merged:
                raise ConfigFileError(f"unknown section [{sec}]")
            for key, val in parser.items(sec):
                if key not in merged[sec] and not (sec == "source" and key in SOURCE_KEYS):
                    raise ConfigFileError(f"unknown key {key!r} in [{sec}]")
                merged[sec][key] = val.strip()
        cfg = cls(merged)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_text(Path(path).read_text())

    @classmethod
    def default(cls) -> "RunConfig":
        return cls.from_text("")

    def with_overrides(self, overrides: dict[str, object]) -> "RunConfig":
        """Apply ``{"section.key": value}`` overrides and re-validate."""
        lines = []
        for sec, keys in self.values.items():
            lines.append(f"[{sec}]")
            lines += [f"{k} = {v}" for k, v in keys.items()]
        text = "\n".join(lines) + "\n"
        merged = RunConfig.from_text(text).values
        for dotted, val in overrides.items():
            sec, _, key = dotted.partition(".")
            if sec not in merged or not key:
                raise ConfigFileError(f"override {dotted!r} must be section.key")
            if key not in merged[sec] and not (sec == "source" and key in SOURCE_KEYS):
                raise ConfigFileError(f"unknown key {key!r} in [{sec}]")
            merged[sec][key] = str(val)
        cfg = RunConfig(merged)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        """Build every embedded spec once so invalid documents fail at load time.

        The extractor budget is deliberately not checked here; the pipeline
        applies it as its own stage.
        """
        try:
            if self.source_mode != "ingest":
                self.source_config()
            elif not self.values["source"]["ingest_path"]:
                raise ConfigFileError("preset = ingest needs ingest_path")
            self.extractor_inputs()
            if self.suite_enabled:
                self.suite_params()
            self.frame_spec()
            self.grid_spec()
            self.allocation()
            self.refresh_load()
            int(self.values["run"]["target_bits"])
            _bool(self.values["run"]["write_trace"])
            self.toeplitz_seed_mode()
        except ConfigFileError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigFileError(str(exc)) from exc

    # canonical form

    def to_text(self) -> str:
        out = []
        for sec in DEFAULTS:
            out.append(f"[{sec}]")
            for key in sorted(self.values[sec]):
                out.append(f"{key} = {self.values[sec][key]}")
            out.append("")
        return "\n".join(out)

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    # typed views

    @property
    def master_seed(self) -> int:
        return int(self.values["run"]["master_seed"])

    @property
    def output_dir(self) -> Path:
        return Path(self.values["run"]["output_dir"])

    @property
    def target_bits(self) -> int:
        return int(self.values["run"]["target_bits"])

    @property
    def write_trace(self) -> bool:
        return _bool(self.values["run"]["write_trace"])

    @property
    def backend(self) -> str | None:
        b = self.values["run"]["backend"]
        return None if b == "auto" else b

    def toeplitz_seed_mode(self) -> tuple[str, str | None]:
        v = self.values["run"]["toeplitz_seed"]
        if v in ("os", "master"):
            return v, None
        if v.startswith("file:") and len(v) > 5:
            return "file", v[5:]
        raise ConfigFileError(f"toeplitz_seed must be os, master or file:<path>, got {v!r}")

    @property
    def source_mode(self) -> str:
        mode = self.values["source"]["preset"]
        if mode not in ("default", "custom", "ingest"):
            raise ConfigFileError(f"source preset must be default, custom or ingest, got {mode!r}")
        return mode

    @property
    def ingest_path(self) -> Path | None:
        p = self.values["source"]["ingest_path"]
        return Path(p) if p else None

    def source_config(self, prng_seed: int | None = None) -> SourceConfig:
        src = self.values["source"]
        seed = self.master_seed if prng_seed is None else prng_seed
        given = {}
        for key in SOURCE_KEYS:
            if key not in src:
                continue
            raw = src[key]
            if key == "adc_bits":
                given[key] = int(raw)
            elif key == "emi_tones":
                given[key] = _tones(raw)
            elif key == "classical_filtered":
                given[key] = _bool(raw)
            else:
                given[key] = float(raw)
        if self.source_mode == "default":
            base = default_source_config(seed, emi=_bool(src["emi"]))
            return base.replace(**given) if given else base
        if self.source_mode == "custom":
            missing = {"quantum_sigma", "classical_sigma", "detector_cutoff_hz"} - set(given)
            if missing:
                raise ConfigFileError(f"custom source needs {', '.join(sorted(missing))}")
            return SourceConfig(prng_seed=seed, **given)
        raise ConfigFileError("an ingest source has no simulation config")

    def extractor_inputs(self) -> ExtractorInputs:
        e = self.values["extractor"]
        m = None if e["m"] == "auto" else int(e["m"])
        return ExtractorInputs(int(e["n"]), int(e["bits_per_sample"]),
                               float(e["min_entropy_per_sample"]), float(e["epsilon_log2"]), m)

    @property
    def suite_enabled(self) -> bool:
        return self.values["suite"]["tests"].strip().lower() != "none"

    def suite_params(self) -> SuiteParams:
        s = self.values["suite"]
        if not self.suite_enabled:
            raise ConfigFileError("the suite is disabled (tests = none)")
        tests = KINDS if s["tests"] == "all" else tuple(t for t in s["tests"].replace(" ", "").split(",") if t)
        return SuiteParams(sequence_length=int(s["sequence_length"]), tests=tests,
                           alpha=float(s["alpha"]), workers=int(s["workers"]))

    def frame_spec(self) -> FrameSpec:
        s = self.values["schedule"]
        return FrameSpec(frame_period_s=exact(float(s["frame_period_s"])),
                         qrng_slot_s=exact(float(s["qrng_slot_s"])),
                         settle_s=exact(float(s["settle_s"])),
                         retune_settle_s=exact(float(s["retune_settle_s"])),
                         lanes_total=int(s["lanes_total"]), lanes_eroded=int(s["lanes_eroded"]),
                         lane_rate_bps=exact(float(s["lane_rate_bps"])))

    def refresh_load(self) -> tuple:
        s = self.values["schedule"]
        return exact(float(s["refresh_link_rate_bps"])), exact(float(s["refresh_bytes_per_key"]))

    def grid_spec(self) -> GridSpec:
        p = self.values["plan"]
        fsr = None if p["fsr_hz"] == "auto" else p["fsr_hz"]
        return GridSpec(p["nu_start_hz"], p["delta_nu_hz"], fsr, int(p["ports"]))

    def allocation(self) -> ChannelAllocation:
        p = self.values["plan"]
        pair = _ints(p["foldback_pair"])
        if len(pair) != 2:
            raise ConfigFileError("foldback_pair needs two channel indices")
        return ChannelAllocation(upstream_indices=_ints(p["upstream"]),
                                 downstream_indices=_ints(p["downstream"]),
                                 qrng_target_index=int(p["qrng_target"]),
                                 excess_loss_db=float(p["excess_loss_db"]),
                                 foldback_pair=pair)
