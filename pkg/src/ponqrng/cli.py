"""``ponqrng`` command line: simulate, extract, test, plan, schedule, keys, run, report."""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

from . import channel_plan as cp
from .config import ConfigFileError, RunConfig
from .extractor import ExtractorError, ToeplitzSeed, extract_packed, pack_samples_bytes
from .fileio import read_bits, write_bits
from .frame_scheduler import FrameSpec, build_frame, effective_throughput
from .noise_model import ingest_trace, simulate_dark, simulate_lit, write_trace
from .pipeline import (PipelineError, _params_from_inputs, accounting_summary, carve_keys,
                       derive_seed, run_pipeline, verify_manifest)
from .stats.suite import TestReport, run_suite


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig.default()
    overrides = {}
    for item in args.set or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigFileError(f"--set expects section.key=value, got {item!r}")
        overrides[key.strip()] = val.strip()
    for flag, key in (("seed", "run.master_seed"), ("out", "run.output_dir"),
                      ("target_bits", "run.target_bits"), ("sequence_length", "suite.sequence_length"),
                      ("tests", "suite.tests"), ("toeplitz_seed", "run.toeplitz_seed")):
        val = getattr(args, flag, None)
        if val is not None:
            overrides[key] = val
    return cfg.with_overrides(overrides) if overrides else cfg


def _fmt(x) -> str:
    if isinstance(x, Fraction):
        return f"{float(x):.10g}" + ("" if x.denominator == 1 else f" ({x})")
    return str(x)


def cmd_simulate(args) -> int:
    cfg = _config(args)
    src = cfg.source_config(derive_seed(cfg.master_seed, "source"))
    trace = (simulate_dark if args.dark else simulate_lit)(src, args.samples)
    write_trace(trace, args.output)
    print(f"wrote {trace.codes.size} {trace.meta.origin} samples to {args.output}")
    return 0


def cmd_extract(args) -> int:
    cfg = _config(args)
    params = _params_from_inputs(cfg)
    trace = ingest_trace(args.input)
    if args.seed_file:
        seed = ToeplitzSeed.load(args.seed_file)
    else:
        seed = ToeplitzSeed.from_os_entropy(params)
        seed_path = Path(args.output).with_suffix(".seed")
        seed.save(seed_path)
        print(f"fresh Toeplitz seed stored in {seed_path}")
    data, count = pack_samples_bytes(trace, params.bits_per_sample)
    bits, leftover = extract_packed(seed, data, params, count, cfg.backend)
    write_bits(args.output, bits, {"n": params.n, "m": params.m, "toeplitz_seed": seed.provenance})
    print(f"extracted {bits.size} bits (n={params.n}, m={params.m}); {leftover} input bits dropped")
    return 0


def cmd_test(args) -> int:
    cfg = _config(args)
    bits, _ = read_bits(args.input)
    report = run_suite(bits, params=cfg.suite_params())
    if args.report:
        Path(args.report).write_text(report.to_records())
    print(report.summary_table())
    return 0 if report.target_verdict else 1


def cmd_plan(args) -> int:
    cfg = _config(args)
    spec, alloc = cfg.grid_spec(), cfg.allocation()
    if args.action == "route":
        if args.freq is None:
            raise ConfigFileError("plan route needs --freq")
        r = cp.awg_route(spec, args.freq, alloc)
        print(f"{r.kind} ports={r.ports} loss_db={tuple(round(v, 3) for v in r.loss_db)}")
        return 0
    if args.action == "foldback":
        f = cp.qrng_foldback(spec, alloc, args.tx)
        print(f"tx nu{f.tx_index} -> {f.retuned_frequency} Hz, receivers {f.receiver_indices}, "
              f"ports {f.ports}, per-arm loss {f.per_arm_loss_db:.2f} dB")
        return 0
    report = cp.validate_plan(spec, alloc)
    for code, idx, msg in report.violations:
        print(f"violation {code} {idx}: {msg}")
    for f in report.feasible_foldbacks:
        print(f"foldback nu{f.tx_index} -> receivers {f.receiver_indices} "
              f"({f.per_arm_loss_db:.2f} dB per arm)")
    print("plan ok" if report.ok else "plan has violations")
    return 0 if report.ok else 1


def cmd_schedule(args) -> int:
    cfg = _config(args)
    spec = cfg.frame_spec()
    if args.duty is not None:
        spec = FrameSpec.with_duty(Fraction(args.duty), qrng_slot_s=spec.qrng_slot_s,
                                   settle_s=spec.settle_s, retune_settle_s=spec.retune_settle_s,
                                   lanes_total=spec.lanes_total, lanes_eroded=spec.lanes_eroded,
                                   lane_rate_bps=spec.lane_rate_bps)
    timeline = build_frame(spec)
    csv = timeline.to_csv()
    if args.csv:
        Path(args.csv).write_text(csv)
    else:
        sys.stdout.write(csv)
    print(f"acquisition window {_fmt(spec.acquisition_s)} s, duty {_fmt(spec.duty_cycle)}, "
          f"throughput {_fmt(effective_throughput(spec))} b/s")
    return 0


def cmd_keys(args) -> int:
    bits, _ = read_bits(args.input)
    keys, remainder = carve_keys(bits, args.count, source_run=str(args.input))
    lines = [f"{k.index} {k.hex()}" for k in keys]
    if args.output:
        Path(args.output).write_text("\n".join(lines) + "\n")
    else:
        print("\n".join(lines))
    print(f"{len(keys)} keys, {remainder} bits remaining", file=sys.stderr)
    return 0


def cmd_run(args) -> int:
    cfg = _config(args)
    result = run_pipeline(cfg)
    print(result.report.summary_table() if result.report else "suite disabled")
    print(f"artifacts in {result.output_dir}")
    return 0 if result.passed else 1


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    bad = verify_manifest(run_dir)
    report_file = run_dir / "report.txt"
    if report_file.exists():
        print(TestReport.from_records(report_file.read_text()).summary_table())
    if (run_dir / "accounting.txt").exists():
        print((run_dir / "accounting.txt").read_text(), end="")
    elif args.config or args.set:
        acct = accounting_summary(_config(args), duty=args.duty)
        for k, v in acct.as_dict().items():
            print(f"{k}={_fmt(v)}")
    print("manifest ok" if not bad else "manifest MISMATCH: " + ", ".join(bad))
    return 0 if not bad else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ponqrng", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="run configuration (INI)")
        sp.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override one configuration value (repeatable)")
        sp.add_argument("--seed", type=int, help="master seed (run.master_seed)")
        return sp

    s = common(sub.add_parser("simulate", help="write a simulated ADC trace"))
    s.add_argument("--samples", type=int, required=True)
    s.add_argument("--dark", action="store_true", help="electronic noise only")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_simulate)

    s = common(sub.add_parser("extract", help="Toeplitz-hash a trace file"))
    s.add_argument("input")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--seed-file", help="stored Toeplitz seed; a fresh one is drawn otherwise")
    s.set_defaults(func=cmd_extract)

    s = common(sub.add_parser("test", help="run the randomness suite on a bit file"))
    s.add_argument("input")
    s.add_argument("--sequence-length", type=int)
    s.add_argument("--tests", help="comma list of test kinds or 'all'")
    s.add_argument("--report", help="write key=value records here")
    s.set_defaults(func=cmd_test)

    s = common(sub.add_parser("plan", help="validate the wavelength plan or route a frequency"))
    s.add_argument("action", choices=("validate", "route", "foldback"), nargs="?", default="validate")
    s.add_argument("--freq", type=int, help="frequency in Hz (route)")
    s.add_argument("--tx", type=int, default=1, help="upstream channel index (foldback)")
    s.set_defaults(func=cmd_plan)

    s = common(sub.add_parser("schedule", help="emit a frame timeline"))
    s.add_argument("--duty", help="QRNG duty cycle, e.g. 1/1000")
    s.add_argument("--csv", help="write the timeline CSV here")
    s.set_defaults(func=cmd_schedule)

    s = sub.add_parser("keys", help="carve 256-bit keys from a bit file")
    s.add_argument("input")
    s.add_argument("--count", type=int)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_keys)

    s = common(sub.add_parser("run", help="end-to-end pipeline"))
    s.add_argument("--out", help="output directory")
    s.add_argument("--target-bits", type=int)
    s.add_argument("--sequence-length", type=int)
    s.add_argument("--tests")
    s.add_argument("--toeplitz-seed", help="os, master or file:PATH")
    s.set_defaults(func=cmd_run)

    s = common(sub.add_parser("report", help="show a run's report, accounting and manifest check"))
    s.add_argument("run_dir")
    s.add_argument("--duty")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error in stage {exc.stage}: {exc.error}", file=sys.stderr)
        return 2
    except (ConfigFileError, ExtractorError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
