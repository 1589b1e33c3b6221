"""NG-PON2 frequency grid, cyclic AWG routing and the QRNG foldback split.

All frequencies are integer Hz so that grid arithmetic and cyclic reduction
are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

# ideal 50/50 split; printed as 3.01 dB
IDEAL_SPLIT_LOSS_DB = 10.0 * math.log10(2.0)


class PlanError(ValueError):
    """Grid or allocation violates its invariants."""


class InvalidFoldback(ValueError):
    """Retuned transmitter does not land on a downstream half-channel crosspoint."""


def _hz(value) -> int:
    if isinstance(value, float):
        if not value.is_integer():
            raise PlanError(f"frequency {value!r} is not an integer number of Hz")
        return int(value)
    if isinstance(value, str):
        return _hz(float(value)) if any(c in value for c in ".eE") else int(value)
    return int(value)


@dataclass(frozen=True)
class GridSpec:
    """Channel grid ``nu_i = nu_start - 2 i delta_nu`` served by a cyclic AWG."""

    nu_start: int
    delta_nu: int = 100_000_000_000
    fsr: int | None = None
    ports: int = 4
    insertion_loss_db: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "nu_start", _hz(self.nu_start))
        object.__setattr__(self, "delta_nu", _hz(self.delta_nu))
        if self.delta_nu <= 0:
            raise PlanError("delta_nu must be positive")
        if self.nu_start <= 0:
            raise PlanError("nu_start must be positive")
        if self.ports < 2:
            raise PlanError("an AWG needs at least 2 ports")
        if self.fsr is None:
            object.__setattr__(self, "fsr", 16 * self.delta_nu)
        else:
            fsr = _hz(self.fsr)
            if fsr <= 0 or fsr % self.delta_nu:
                raise PlanError("fsr must be a positive multiple of delta_nu")
            object.__setattr__(self, "fsr", fsr)

    @property
    def tolerance(self) -> int:
        return self.delta_nu // 10


@dataclass(frozen=True)
class ChannelAllocation:
    upstream_indices: tuple[int, ...] = (1, 3, 5, 7)
    downstream_indices: tuple[int, ...] = (9, 11, 13, 15)
    qrng_target_index: int = 0
    excess_loss_db: float = 1.9
    reference_split_loss_db: float = IDEAL_SPLIT_LOSS_DB
    # receiver pair fed by the split; see qrng_foldback
    foldback_pair: tuple[int, int] = (11, 13)
    # None means one delta_nu
    retune_step: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "upstream_indices", tuple(int(i) for i in self.upstream_indices))
        object.__setattr__(self, "downstream_indices", tuple(int(i) for i in self.downstream_indices))
        object.__setattr__(self, "foldback_pair", tuple(int(i) for i in self.foldback_pair))
        if self.retune_step is not None:
            object.__setattr__(self, "retune_step", _hz(self.retune_step))
        if any(i < 0 for i in self.upstream_indices + self.downstream_indices):
            raise PlanError("channel indices must be non-negative")
        if self.excess_loss_db < 0:
            raise PlanError("excess_loss_db must be non-negative")


@dataclass(frozen=True)
class RouteResult:
    kind: str  # "port" | "crosspoint" | "stopband"
    ports: tuple[int, ...] = ()
    loss_db: tuple[float, ...] = ()
    # position inside the FSR in units of delta_nu (None in the stopband)
    lattice_offset: int | None = None

    def transmission(self) -> tuple[float, ...]:
        return tuple(10.0 ** (-loss / 10.0) for loss in self.loss_db)


@dataclass(frozen=True)
class FoldbackPlan:
    tx_index: int
    retuned_frequency: int
    receiver_indices: tuple[int, int]
    ports: tuple[int, int]
    per_arm_loss_db: float

    @property
    def per_arm_transmission(self) -> float:
        return 10.0 ** (-self.per_arm_loss_db / 10.0)


@dataclass
class ValidationReport:
    violations: list[tuple[str, tuple[int, ...], str]] = field(default_factory=list)
    feasible_foldbacks: list[FoldbackPlan] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code: str, indices, message: str) -> None:
        self.violations.append((code, tuple(indices), message))


def channel_frequency(spec: GridSpec, i: int) -> int:
    if i < 0:
        raise PlanError(f"channel index must be non-negative, got {i}")
    return spec.nu_start - 2 * i * spec.delta_nu


def awg_route(spec: GridSpec, freq: int, alloc: ChannelAllocation | None = None) -> RouteResult:
    """Where the cyclic AWG sends ``freq``.

    Even multiples of delta_nu from the start frequency hit one port; odd
    multiples sit on the crosspoint of two neighbouring ports and are split
    between them; anything further than delta_nu/10 from the lattice is
    blocked.
    """
    freq = _hz(freq)
    if freq <= 0:
        raise PlanError("frequency must be positive")
    alloc = alloc or ChannelAllocation()
    offset = (spec.nu_start - freq) % spec.fsr
    k, rem = divmod(offset, spec.delta_nu)
    if rem > spec.delta_nu - rem:
        k, rem = k + 1, rem - spec.delta_nu
    if abs(rem) > spec.tolerance:
        return RouteResult("stopband")
    k %= spec.fsr // spec.delta_nu
    if k % 2 == 0:
        return RouteResult("port", ((k // 2) % spec.ports,), (spec.insertion_loss_db,), k)
    arm = spec.insertion_loss_db + alloc.reference_split_loss_db + alloc.excess_loss_db
    ports = (((k - 1) // 2) % spec.ports, ((k + 1) // 2) % spec.ports)
    return RouteResult("crosspoint", ports, (arm, arm), k)


def _band_window(spec: GridSpec, indices) -> tuple[int, int]:
    """Span of a band's channels in delta_nu units, reduced into one FSR."""
    offsets = sorted((2 * i * spec.delta_nu) % spec.fsr // spec.delta_nu for i in indices)
    return offsets[0], offsets[-1]


def qrng_foldback(spec: GridSpec, alloc: ChannelAllocation, tx_index: int) -> FoldbackPlan:
    """Retune upstream channel ``tx_index`` onto a receiver crosspoint.

    The transmitter moves by ``alloc.retune_step`` (one delta_nu by default)
    toward the start frequency. The landing must be a half-channel crosspoint
    inside the downstream band (cyclically folded into one FSR). The receiver
    pair is taken from ``alloc.foldback_pair`` and must be two distinct
    downstream channels.
    """
    if tx_index not in alloc.upstream_indices:
        raise InvalidFoldback(f"channel {tx_index} is not an upstream channel")
    step = alloc.retune_step if alloc.retune_step is not None else spec.delta_nu
    freq = channel_frequency(spec, tx_index) + step
    route = awg_route(spec, freq, alloc)
    if route.kind != "crosspoint":
        raise InvalidFoldback(
            f"retuned channel {tx_index} at {freq} Hz lands {route.kind!r}, not on a crosspoint")
    lo, hi = _band_window(spec, alloc.downstream_indices)
    if not lo - 1 <= route.lattice_offset <= hi + 1:
        raise InvalidFoldback(
            f"retuned channel {tx_index} lands outside the downstream band")
    pair = alloc.foldback_pair
    if len(set(pair)) != 2 or not set(pair) <= set(alloc.downstream_indices):
        raise InvalidFoldback(f"foldback pair {pair} is not two distinct downstream channels")
    return FoldbackPlan(tx_index, freq, pair, route.ports, route.loss_db[0])


def validate_plan(spec: GridSpec, alloc: ChannelAllocation) -> ValidationReport:
    report = ValidationReport()
    up, down = set(alloc.upstream_indices), set(alloc.downstream_indices)
    if not up or not down:
        report.add("empty-band", (), "both upstream and downstream bands need channels")
    if up & down:
        report.add("overlap", sorted(up & down), "upstream and downstream bands share channels")
    if alloc.qrng_target_index in down:
        report.add("target-in-downstream", (alloc.qrng_target_index,),
                   "QRNG target channel collides with a downstream channel")
    for name, band in (("upstream", up), ("downstream", down)):
        if band and 2 * (max(band) - min(band)) * spec.delta_nu >= spec.fsr:
            report.add("range", sorted(band), f"{name} band spans one FSR or more")
    for i in sorted(up):
        try:
            report.feasible_foldbacks.append(qrng_foldback(spec, alloc, i))
        except InvalidFoldback:
            pass
    if up and not report.feasible_foldbacks:
        report.add("no-foldback", sorted(up), "no upstream channel can be folded back onto the receiver")
    return report
