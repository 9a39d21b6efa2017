"""One access slot of the TA-aided hybrid random-access protocol.

Contention side (machine-type devices), four steps per slot:

1. Every active device sends one preamble chosen uniformly at random.
2. The base station detects, per preamble, which annuli hold exactly one
   device (TA-collision-free) and answers each with a grant naming the
   annulus and a dedicated uplink resource block.
3. A device whose own annulus was granted transmits on its dedicated block at
   the top power level. Devices whose annulus collided pick one of the
   preamble's granted blocks and one of the lower power levels uniformly at
   random; with no grants on their preamble they stay silent.
4. Per block, successive interference cancellation decodes from the top
   power level down.

Latency-critical devices never contend: reserved resources are provisioned
from a forecast, and the slot succeeds for them when the forecast covered the
actual arrivals. An optional access-class-barring gate can thin the
contention load, and the ideal collision detector of step 2 can be replaced
by the correlation detector from the phy module.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .geometry import CellConfig, quantize_ta, sample_device_distance
from .phy import correlate_detect, detection_threshold, generate_zc, synthesize_received
from .sic import PowerLevelSet, sic_decode

__all__ = [
    "Device",
    "PhyDetectionConfig",
    "ResourceGrant",
    "SlotConfig",
    "SlotOutcome",
    "acb_gate",
    "detect_and_allocate",
    "make_mmtc_devices",
    "run_slot",
    "select_power_and_block",
    "select_preambles",
]

MMTC = "mmtc"
URLLC = "urllc"

BASELINE_MODES = ("lstmh-ra", "random")


@dataclass(slots=True)
class Device:
    """One terminal in one slot; contention fields stay None until assigned."""

    id: int
    kind: str
    distance_m: float
    ta: int
    preamble: int | None = None
    power_level: int | None = None
    resource_block: int | None = None


@dataclass(frozen=True)
class PhyDetectionConfig:
    """Correlation-detector settings for the optional non-ideal step 2."""

    length: int = 139
    antennas: int = 128
    noise_variance: float = 0.0
    threshold: float | None = None  # None: midpoint calibration


@dataclass(frozen=True)
class SlotConfig:
    """Static per-slot parameters shared by simulation and analysis."""

    cell: CellConfig
    preamble_count: int
    power_levels: PowerLevelSet
    n_mmtc: int
    acb_factor: float | None = None
    baseline_mode: str = "lstmh-ra"
    detector: str = "ideal"
    phy: PhyDetectionConfig | None = None
    retry_failed: bool = False

    def __post_init__(self):
        if self.preamble_count < 1:
            raise ValueError("preamble_count must be positive")
        if self.n_mmtc < 0:
            raise ValueError("n_mmtc must be non-negative")
        if self.acb_factor is not None and not 0.0 <= self.acb_factor <= 1.0:
            raise ValueError("acb_factor must lie in [0, 1]")
        if self.baseline_mode not in BASELINE_MODES:
            raise ValueError(f"baseline_mode must be one of {BASELINE_MODES}")
        if self.detector not in ("ideal", "correlator"):
            raise ValueError("detector must be 'ideal' or 'correlator'")
        if self.detector == "correlator":
            phy = self.phy if self.phy is not None else PhyDetectionConfig()
            object.__setattr__(self, "phy", phy)
            if self.preamble_count >= phy.length:
                raise ValueError("preamble_count must be below the sequence length")
            if self.cell.annulus_count > phy.length:
                raise ValueError("annulus count exceeds the sequence length")


@dataclass(frozen=True)
class ResourceGrant:
    """Step-2 answer: one collision-free annulus on one preamble gets a block."""

    preamble: int
    ta: int
    block: int


@dataclass(frozen=True)
class SlotOutcome:
    """Everything observable at the end of one slot."""

    decoded_mmtc: frozenset
    urllc_actual: int
    urllc_predicted: int
    urllc_success: bool
    per_preamble: tuple[tuple[int, int, int, int], ...]
    """(preamble, occupancy, granted blocks, decoded count) per used preamble."""

    CSV_HEADER = (
        "slot,decoded_mmtc,urllc_actual,urllc_predicted,urllc_success,"
        "active_mmtc,granted_blocks,preambles_used"
    )

    def to_csv_row(self, slot_index: int) -> str:
        active = sum(u for _, u, _, _ in self.per_preamble)
        blocks = sum(t for _, _, t, _ in self.per_preamble)
        return ",".join(
            [
                str(slot_index),
                str(len(self.decoded_mmtc)),
                str(self.urllc_actual),
                str(self.urllc_predicted),
                str(int(self.urllc_success)),
                str(active),
                str(blocks),
                str(len(self.per_preamble)),
            ]
        )


def make_mmtc_devices(
    config: SlotConfig, rng: np.random.Generator, first_id: int = 0
) -> list[Device]:
    """Drop n_mmtc contention devices uniformly over the cell."""
    devices = []
    for i in range(config.n_mmtc):
        distance = sample_device_distance(rng, config.cell)
        devices.append(
            Device(
                id=first_id + i,
                kind=MMTC,
                distance_m=distance,
                ta=quantize_ta(distance, config.cell),
            )
        )
    return devices


def acb_gate(
    devices: Sequence[Device], factor: float, rng: np.random.Generator
) -> list[Device]:
    """Access class barring: keep each contention device with the given
    probability; latency-critical devices always pass."""
    if not 0.0 <= factor <= 1.0:
        raise ValueError("factor must lie in [0, 1]")
    kept = []
    for device in devices:
        if device.kind != MMTC or rng.random() < factor:
            kept.append(device)
    return kept


def select_preambles(
    devices: Sequence[Device], preamble_count: int, rng: np.random.Generator
) -> list[Device]:
    """Assign each device an independent uniform preamble in 1..preamble_count."""
    if preamble_count < 1:
        raise ValueError("preamble_count must be positive")
    if devices:
        picks = rng.integers(1, preamble_count + 1, size=len(devices))
        for device, pick in zip(devices, picks):
            device.preamble = int(pick)
    return list(devices)


def _singleton_tas(occupants: Sequence[Device]) -> set[int]:
    counts: dict[int, int] = {}
    for device in occupants:
        counts[device.ta] = counts.get(device.ta, 0) + 1
    return {ta for ta, n in counts.items() if n == 1}


def _correlator_tas(
    occupants_by_preamble: Mapping[int, Sequence[Device]],
    config: SlotConfig,
    rng: np.random.Generator,
) -> dict[int, set[int]]:
    """Detected occupied annuli per preamble, via the correlation detector.

    Every preamble index maps to its own sequence root. The station cannot
    tell one occupant from two at the same lag, so detected lags are later
    intersected with the (ideally known) singleton set: a collided annulus
    fails identity decoding and gets no grant either way.
    """
    phy = config.phy
    preambles = [generate_zc(root, phy.length) for root in range(1, config.preamble_count + 1)]
    triples = []
    for preamble, occupants in occupants_by_preamble.items():
        for device in occupants:
            fading = (
                rng.standard_normal(phy.antennas)
                + 1j * rng.standard_normal(phy.antennas)
            ) / np.sqrt(2.0)
            triples.append((preamble - 1, device.ta, fading))
    signal = synthesize_received(preambles, triples, phy.antennas, phy.noise_variance, rng)
    threshold = (
        phy.threshold
        if phy.threshold is not None
        else detection_threshold(phy.length, phy.noise_variance)
    )
    return {
        preamble: correlate_detect(signal, preambles[preamble - 1], threshold)
        for preamble in occupants_by_preamble
    }


def detect_and_allocate(
    occupants_by_preamble: Mapping[int, Sequence[Device]],
    detected_tas: Mapping[int, set[int]] | None = None,
) -> dict[int, list[ResourceGrant]]:
    """Step 2: grant one block per TA-collision-free occupant of each preamble.

    With the default ideal detector a grant goes to every annulus holding
    exactly one occupant. When a detected-annulus map is supplied (from the
    correlation detector), an annulus additionally needs to appear there.
    Block tokens are unique across the slot.
    """
    grants: dict[int, list[ResourceGrant]] = {}
    block = 0
    for preamble in sorted(occupants_by_preamble):
        occupants = occupants_by_preamble[preamble]
        eligible = _singleton_tas(occupants)
        if detected_tas is not None:
            eligible &= detected_tas.get(preamble, set())
        preamble_grants = []
        for ta in sorted(eligible):
            preamble_grants.append(ResourceGrant(preamble=preamble, ta=ta, block=block))
            block += 1
        grants[preamble] = preamble_grants
    return grants


def select_power_and_block(
    device: Device,
    grants: Sequence[ResourceGrant],
    power_levels: PowerLevelSet,
    rng: np.random.Generator,
    mode: str = "lstmh-ra",
) -> Device:
    """Step 3: pick the uplink block and power level for one device.

    TA-matched devices (their annulus was granted) take their dedicated block
    at power level 1; the rest gamble on a uniform granted block and a
    uniform level in 2..level_count. Without any grant on the preamble the
    device stays silent. In the "random" reference mode nobody is privileged:
    every device draws a uniform block from the granted pool and a uniform
    level over all of 1..level_count.
    """
    if mode not in BASELINE_MODES:
        raise ValueError(f"mode must be one of {BASELINE_MODES}")
    device.power_level = None
    device.resource_block = None
    if not grants:
        return device
    levels = power_levels.level_count
    if mode == "random":
        device.resource_block = grants[int(rng.integers(len(grants)))].block
        device.power_level = int(rng.integers(1, levels + 1))
        return device
    own = next((g for g in grants if g.ta == device.ta), None)
    if own is not None:
        device.resource_block = own.block
        device.power_level = 1
    else:
        device.resource_block = grants[int(rng.integers(len(grants)))].block
        device.power_level = int(rng.integers(2, levels + 1))
    return device


def run_slot(
    config: SlotConfig,
    mmtc_devices: Sequence[Device],
    urllc_actual: int,
    urllc_predicted: int,
    rng: np.random.Generator,
) -> SlotOutcome:
    """Simulate one slot; mutates the contention fields of the given devices."""
    if urllc_actual < 0 or urllc_predicted < 0:
        raise ValueError("arrival counts must be non-negative")

    # step 0: optional load thinning
    active = list(mmtc_devices)
    if config.acb_factor is not None:
        active = acb_gate(active, config.acb_factor, rng)

    # step 1: preamble contention
    select_preambles(active, config.preamble_count, rng)
    occupants: dict[int, list[Device]] = defaultdict(list)
    for device in active:
        occupants[device.preamble].append(device)

    # step 2: TA detection and block grants
    detected = None
    if config.detector == "correlator":
        detected = _correlator_tas(occupants, config, rng)
    grants = detect_and_allocate(occupants, detected)

    # step 3: power level and block selection
    blocks: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for preamble in sorted(occupants):
        for device in occupants[preamble]:
            select_power_and_block(
                device, grants[preamble], config.power_levels, rng, config.baseline_mode
            )
            if device.resource_block is not None:
                blocks[device.resource_block].append((device.id, device.power_level))

    # step 4: per-block successive interference cancellation
    decoded: set[int] = set()
    for block in sorted(blocks):
        decoded |= sic_decode(blocks[block])

    per_preamble = []
    for preamble in sorted(occupants):
        members = occupants[preamble]
        per_preamble.append(
            (
                preamble,
                len(members),
                len(grants[preamble]),
                sum(1 for d in members if d.id in decoded),
            )
        )

    return SlotOutcome(
        decoded_mmtc=frozenset(decoded),
        urllc_actual=urllc_actual,
        urllc_predicted=urllc_predicted,
        urllc_success=urllc_predicted >= urllc_actual,
        per_preamble=tuple(per_preamble),
    )
