"""Multi-sequence battery: pass proportions and P-value uniformity per test."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..fileio import as_bits
from . import nist

ALPHA = 0.01
TARGET_PROPORTION = 0.98
TARGET_UNIFORMITY = 0.01
REV1A_UNIFORMITY = 0.0001
MIN_SEQUENCES = 10
UNIFORMITY_BINS = 10


class SuiteError(ValueError):
    pass


@dataclass(frozen=True)
class SuiteParams:
    sequence_length: int = 1_000_000
    tests: tuple[str, ...] = nist.KINDS
    alpha: float = ALPHA
    block_size: int | None = None
    serial_m: int | None = None
    apen_m: int | None = None
    strict: bool = True
    workers: int = 1

    def __post_init__(self):
        unknown = set(self.tests) - set(nist.KINDS)
        if unknown:
            raise SuiteError(f"unknown tests: {', '.join(sorted(unknown))}")
        if not self.tests:
            raise SuiteError("no tests enabled")
        if not 0 < self.alpha < 1:
            raise SuiteError("alpha must lie in (0, 1)")

    def resolved(self) -> dict[str, int]:
        auto = nist.default_parameters(self.sequence_length)
        return {"block_size": self.block_size or auto["block_size"],
                "serial_m": self.serial_m or auto["serial_m"],
                "apen_m": self.apen_m or auto["apen_m"]}


def record_names(kind: str) -> tuple[str, ...]:
    if kind == "cumulative_sums":
        return ("cumulative_sums_forward", "cumulative_sums_backward")
    if kind == "serial":
        return ("serial_1", "serial_2")
    return (kind,)


def _run_one(args) -> list[float]:
    seq, tests, resolved, strict = args
    out: list[float] = []
    for kind in tests:
        if kind == "block_frequency":
            p = nist.block_frequency(seq, resolved["block_size"], strict)
        elif kind == "serial":
            p = nist.serial(seq, resolved["serial_m"], strict)
        elif kind == "approximate_entropy":
            p = nist.approximate_entropy(seq, resolved["apen_m"], strict)
        else:
            p = nist.nist_test(kind, seq, strict)
        out.extend(p if isinstance(p, tuple) else (p,))
    return out


def proportion_threshold(s: int, alpha: float = ALPHA) -> float:
    """Lower edge of the 3-sigma confidence interval for the pass proportion."""
    return (1 - alpha) - 3 * math.sqrt(alpha * (1 - alpha) / s)


def uniformity_p(p_values: np.ndarray, bins: int = UNIFORMITY_BINS) -> float:
    """Chi-square P-value of the P-value histogram against the uniform distribution."""
    s = p_values.size
    idx = np.minimum((np.asarray(p_values) * bins).astype(np.int64), bins - 1)
    counts = np.bincount(idx, minlength=bins)
    expected = s / bins
    chi2 = float(np.sum((counts - expected) ** 2) / expected)
    return nist.igamc((bins - 1) / 2.0, chi2 / 2.0)


@dataclass(frozen=True)
class TestResult:
    name: str
    p_values: np.ndarray
    proportion: float
    threshold: float
    uniformity_p: float

    __test__ = False  # not a pytest class

    @property
    def passes_rev1a(self) -> bool:
        return self.proportion >= self.threshold and self.uniformity_p >= REV1A_UNIFORMITY

    @property
    def passes_target(self) -> bool:
        return self.proportion >= TARGET_PROPORTION and self.uniformity_p >= TARGET_UNIFORMITY


@dataclass(frozen=True)
class TestReport:
    sequences: int
    sequence_length: int
    alpha: float
    parameters: dict[str, int]
    results: tuple[TestResult, ...] = field(default_factory=tuple)

    __test__ = False

    @property
    def verdict(self) -> bool:
        """rev1a acceptance: every proportion above its threshold, uniformity P >= 1e-4."""
        return all(r.passes_rev1a for r in self.results)

    @property
    def target_verdict(self) -> bool:
        """Proportion >= 0.98 and uniformity P >= 0.01 for every test."""
        return all(r.passes_target for r in self.results)

    def result(self, name: str) -> TestResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def failing(self, target: bool = True) -> list[str]:
        return [r.name for r in self.results if not (r.passes_target if target else r.passes_rev1a)]

    def to_records(self, include_p_values: bool = True) -> str:
        head = (f"suite sequences={self.sequences} sequence_length={self.sequence_length} "
                f"alpha={self.alpha!r} "
                + " ".join(f"{k}={v}" for k, v in sorted(self.parameters.items()))
                + f" verdict={'pass' if self.verdict else 'fail'}"
                f" target_verdict={'pass' if self.target_verdict else 'fail'}")
        lines = [head]
        for r in self.results:
            rec = (f"test name={r.name} proportion={r.proportion!r} threshold={r.threshold!r} "
                   f"uniformity_p={r.uniformity_p!r} rev1a={'pass' if r.passes_rev1a else 'fail'} "
                   f"target={'pass' if r.passes_target else 'fail'}")
            if include_p_values:
                rec += " p_values=" + ",".join(repr(float(p)) for p in r.p_values)
            lines.append(rec)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_records(cls, text: str) -> "TestReport":
        head, results = None, []
        for line in text.splitlines():
            if not line.strip():
                continue
            tag, _, rest = line.partition(" ")
            fields = dict(tok.split("=", 1) for tok in rest.split())
            if tag == "suite":
                head = fields
            elif tag == "test":
                pv = fields.get("p_values", "")
                results.append(TestResult(
                    fields["name"],
                    np.array([float(v) for v in pv.split(",")] if pv else [], dtype=float),
                    float(fields["proportion"]), float(fields["threshold"]),
                    float(fields["uniformity_p"])))
        if head is None:
            raise SuiteError("report has no suite header")
        params = {k: int(head[k]) for k in ("block_size", "serial_m", "apen_m") if k in head}
        return cls(int(head["sequences"]), int(head["sequence_length"]), float(head["alpha"]),
                   params, tuple(results))

    def summary_table(self) -> str:
        rows = [f"{'test':<26}{'proportion':>12}{'threshold':>11}{'uniformity P':>14}  result",
                "-" * 70]
        for r in self.results:
            ok = "PASS" if r.passes_target else "FAIL"
            rows.append(f"{r.name:<26}{r.proportion:>12.4f}{r.threshold:>11.4f}"
                        f"{r.uniformity_p:>14.6f}  {ok}")
        rows.append("-" * 70)
        rows.append(f"{self.sequences} sequences of {self.sequence_length} bits; "
                    f"criterion: proportion >= {TARGET_PROPORTION}, uniformity P >= {TARGET_UNIFORMITY} -> "
                    f"{'PASS' if self.target_verdict else 'FAIL'} "
                    f"(rev1a thresholds: {'PASS' if self.verdict else 'FAIL'})")
        return "\n".join(rows)


def run_suite(bits, sequence_length: int | None = None, params: SuiteParams | None = None) -> TestReport:
    """Split ``bits`` into equal sequences and run every enabled test on each."""
    if params is None:
        params = SuiteParams(sequence_length=sequence_length or 1_000_000)
    elif sequence_length is not None and sequence_length != params.sequence_length:
        params = SuiteParams(**{**params.__dict__, "sequence_length": sequence_length})
    bits = as_bits(bits)
    L = params.sequence_length
    s = bits.size // L
    if s < MIN_SEQUENCES:
        raise SuiteError(f"{bits.size} bits give {s} sequences of {L}; at least {MIN_SEQUENCES} needed")
    resolved = params.resolved()
    seqs = bits[:s * L].reshape(s, L)
    jobs = [(seqs[i], params.tests, resolved, params.strict) for i in range(s)]
    if params.workers > 1:
        with ProcessPoolExecutor(params.workers) as pool:
            rows = list(pool.map(_run_one, jobs, chunksize=max(1, s // (4 * params.workers))))
    else:
        rows = [_run_one(j) for j in jobs]
    table = np.clip(np.asarray(rows, dtype=float), 0.0, 1.0)
    names = [name for kind in params.tests for name in record_names(kind)]
    threshold = proportion_threshold(s, params.alpha)
    results = []
    for col, name in enumerate(names):
        pv = table[:, col]
        results.append(TestResult(name, pv, float(np.mean(pv >= params.alpha)), threshold,
                                  uniformity_p(pv)))
    return TestReport(s, L, params.alpha, resolved, tuple(results))
