"""Time-interleaved QRNG/data frame: timeline, throughput and bit-yield accounting.

Times, rates and counts are kept as :class:`fractions.Fraction` so that the
frame identities (data time + QRNG slot = frame period, and so on) hold
exactly. Float inputs are read through their decimal repr, so ``2.2`` means
11/5 and not the nearest binary double.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

EVENT_KINDS = ("blank_downstream", "tune_laser", "settling", "acquire_start",
               "acquire_end", "retune_laser", "unblank_downstream")


class ScheduleError(ValueError):
    """Frame specification violates its invariants."""


def exact(value) -> Fraction:
    """Fraction from an int, Fraction, decimal string or float (via its repr)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ScheduleError(f"non-finite value {value!r}")
        return Fraction(repr(value))
    return Fraction(value)


@dataclass(frozen=True)
class FrameSpec:
    frame_period_s: Fraction
    qrng_slot_s: Fraction = Fraction("2.2")
    settle_s: Fraction = Fraction("51e-6")
    lanes_total: int = 4
    lanes_eroded: int = 2
    lane_rate_bps: Fraction = Fraction(10 ** 10)
    # settling of the laser after tuning back; charged to the end of the slot
    retune_settle_s: Fraction = Fraction(0)
    blanked_channels: tuple[int, ...] = (13, 15)
    tx_channel: int = 1
    qrng_channel: int = 0

    def __post_init__(self):
        for name in ("frame_period_s", "qrng_slot_s", "settle_s", "lane_rate_bps", "retune_settle_s"):
            object.__setattr__(self, name, exact(getattr(self, name)))
        if not 0 < self.settle_s:
            raise ScheduleError("settle_s must be positive")
        if self.retune_settle_s < 0:
            raise ScheduleError("retune_settle_s must be non-negative")
        if not self.settle_s + self.retune_settle_s < self.qrng_slot_s:
            raise ScheduleError("settling leaves no acquisition time inside the QRNG slot")
        if not self.qrng_slot_s <= self.frame_period_s:
            raise ScheduleError("QRNG slot cannot exceed the frame period")
        if not 0 <= self.lanes_eroded <= self.lanes_total or self.lanes_total < 1:
            raise ScheduleError("need 0 <= lanes_eroded <= lanes_total and lanes_total >= 1")
        if self.lane_rate_bps <= 0:
            raise ScheduleError("lane_rate_bps must be positive")

    @classmethod
    def with_duty(cls, duty, **kwargs) -> "FrameSpec":
        """Frame whose QRNG slot occupies ``duty`` of the period."""
        duty = exact(duty)
        slot = exact(kwargs.get("qrng_slot_s", cls.qrng_slot_s))
        if not 0 < duty <= 1:
            raise ScheduleError("duty must lie in (0, 1]")
        return cls(frame_period_s=slot / duty, **kwargs)

    @property
    def duty_cycle(self) -> Fraction:
        return self.qrng_slot_s / self.frame_period_s

    @property
    def acquisition_s(self) -> Fraction:
        return self.qrng_slot_s - self.settle_s - self.retune_settle_s

    @property
    def data_full_rate_s(self) -> Fraction:
        return self.frame_period_s - self.qrng_slot_s


@dataclass(frozen=True)
class FrameEvent:
    time_s: Fraction
    kind: str
    detail: str = ""


@dataclass(frozen=True)
class LaneWindow:
    lane: int
    start_s: Fraction
    end_s: Fraction
    mode: str  # "data" | "qrng"


@dataclass(frozen=True)
class FrameTimeline:
    spec: FrameSpec
    events: tuple[FrameEvent, ...]

    @property
    def acquisition_s(self) -> Fraction:
        return self.spec.acquisition_s

    def window(self) -> tuple[Fraction, Fraction]:
        times = {e.kind: e.time_s for e in self.events}
        return times["acquire_start"], times["acquire_end"]

    def lane_windows(self) -> list[LaneWindow]:
        """Per-lane service intervals within one frame (lane 0 first)."""
        spec = self.spec
        slot, period = spec.qrng_slot_s, spec.frame_period_s
        out = []
        for lane in range(spec.lanes_total):
            eroded = lane >= spec.lanes_total - spec.lanes_eroded
            if eroded:
                out.append(LaneWindow(lane, Fraction(0), slot, "qrng"))
                if slot < period:
                    out.append(LaneWindow(lane, slot, period, "data"))
            else:
                out.append(LaneWindow(lane, Fraction(0), period, "data"))
        return out

    def to_csv(self) -> str:
        rows = ["time_offset_s,event"]
        rows += [f"{float(e.time_s):.9f},{e.kind}" for e in self.events]
        return "\n".join(rows) + "\n"


def build_frame(spec: FrameSpec) -> FrameTimeline:
    """Emit the QRNG slot at the head of the frame, followed by full-rate data.

    Control actions issued at the same instant (blanking and tuning at slot
    start) share a timestamp and keep their listed order.
    """
    blanked = ",".join(f"nu{c}" for c in spec.blanked_channels)
    tune = f"nu{spec.tx_channel}->nu{spec.qrng_channel}"
    back = f"nu{spec.qrng_channel}->nu{spec.tx_channel}"
    acq_start = spec.settle_s
    acq_end = spec.qrng_slot_s - spec.retune_settle_s
    events = (
        FrameEvent(Fraction(0), "blank_downstream", blanked),
        FrameEvent(Fraction(0), "tune_laser", tune),
        FrameEvent(Fraction(0), "settling", f"{float(spec.settle_s):g} s"),
        FrameEvent(acq_start, "acquire_start"),
        FrameEvent(acq_end, "acquire_end"),
        FrameEvent(acq_end, "retune_laser", back),
        FrameEvent(spec.qrng_slot_s, "unblank_downstream", blanked),
    )
    return FrameTimeline(spec, events)


def throughput_at_duty(spec: FrameSpec, duty) -> Fraction:
    """Time-averaged data capacity when a fraction ``duty`` runs in QRNG mode."""
    d = exact(duty)
    if not 0 <= d <= 1:
        raise ScheduleError("duty must lie in [0, 1]")
    full = spec.lanes_total * spec.lane_rate_bps
    reduced = (spec.lanes_total - spec.lanes_eroded) * spec.lane_rate_bps
    return full * (1 - d) + reduced * d


def effective_throughput(spec: FrameSpec) -> Fraction:
    return throughput_at_duty(spec, spec.duty_cycle)


def qrng_yield_per_frame(spec: FrameSpec, sample_rate, extractor) -> int:
    """Extracted bits from one acquisition window.

    ``extractor`` needs ``n``, ``m`` and ``bits_per_sample``; only whole input
    blocks count.
    """
    rate = exact(sample_rate)
    if rate <= 0:
        raise ScheduleError("sample_rate must be positive")
    samples = math.floor(spec.acquisition_s * rate)
    blocks = samples * extractor.bits_per_sample // extractor.n
    return blocks * extractor.m


@dataclass(frozen=True)
class DutyCycle:
    ratio: Fraction
    feasible: bool

    @property
    def duty(self) -> Fraction:
        """Ratio clamped to 1 (an infeasible load runs the QRNG continuously)."""
        return min(self.ratio, Fraction(1))


def min_duty_cycle(required_key_rate, burst_key_rate) -> DutyCycle:
    required, burst = exact(required_key_rate), exact(burst_key_rate)
    if burst <= 0:
        raise ScheduleError("burst_key_rate must be positive")
    if required < 0:
        raise ScheduleError("required_key_rate must be non-negative")
    ratio = required / burst
    return DutyCycle(ratio, ratio <= 1)


def aes_refresh_key_rate(link_rate_bps=10 ** 10, bytes_per_key=64 * 10 ** 9) -> Fraction:
    """Keys per second when a fresh key is used for every ``bytes_per_key`` of traffic."""
    return exact(link_rate_bps) / 8 / exact(bytes_per_key)
