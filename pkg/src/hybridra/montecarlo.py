"""Monte-Carlo estimation of per-slot throughput, with reproducible seeding.

Each access slot is one independent experiment: a fresh uniform drop of
contention devices keeps slots i.i.d., so plain sample statistics and normal
95% confidence intervals apply to the decoded-device count. Seeding uses one
spawned child stream per slot, which makes every run reproducible from a
single master seed and immune to reordering.

An optional backlog mode chains slots instead: devices that fail keep their
position and retry next slot alongside fresh arrivals. Statistics from that
mode describe the transient of one queue, not an i.i.d. sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import expected_mmtc_success
from .protocol import SlotConfig, SlotOutcome, make_mmtc_devices, run_slot

__all__ = [
    "ComparisonRecord",
    "TrialStats",
    "compare_analytic",
    "run_trials",
    "simulate_slots",
    "summarize",
]

_Z95 = 1.959963984540054  # two-sided 95% normal quantile


def simulate_slots(
    config: SlotConfig,
    slot_count: int,
    master_seed: int | np.random.SeedSequence = 0,
    urllc_count: int = 0,
    urllc_failure_rate: float = 0.0,
    arrivals_per_slot: int | None = None,
) -> list[SlotOutcome]:
    """Run slot_count access slots and return their outcomes in order.

    Reserved-side arrivals are urllc_count every slot; with probability
    urllc_failure_rate the provisioning forecast falls one short (an
    under-prediction can only happen when something actually arrives).

    With config.retry_failed the same device population carries over: failed
    devices retry where they stand and arrivals_per_slot fresh devices join
    each later slot. Otherwise every slot gets its own fresh drop and
    arrivals_per_slot must be left unset.
    """
    if slot_count < 1:
        raise ValueError("slot_count must be positive")
    if urllc_count < 0:
        raise ValueError("urllc_count must be non-negative")
    if not 0.0 <= urllc_failure_rate <= 1.0:
        raise ValueError("urllc_failure_rate must lie in [0, 1]")
    if arrivals_per_slot is not None and not config.retry_failed:
        raise ValueError("arrivals_per_slot needs retry_failed")

    seed_seq = (
        master_seed
        if isinstance(master_seed, np.random.SeedSequence)
        else np.random.SeedSequence(master_seed)
    )
    children = seed_seq.spawn(slot_count)
    outcomes: list[SlotOutcome] = []
    backlog: list = []
    next_id = 0
    for index, child in enumerate(children):
        rng = np.random.default_rng(child)
        actual = urllc_count
        predicted = actual
        if actual > 0 and rng.random() < urllc_failure_rate:
            predicted = actual - 1

        if config.retry_failed:
            if index == 0:
                fresh = make_mmtc_devices(config, rng, first_id=next_id)
            else:
                fresh = _fresh_devices(config, arrivals_per_slot or 0, next_id, rng)
            next_id += len(fresh)
            backlog.extend(fresh)
            devices = backlog
        else:
            devices = make_mmtc_devices(config, rng)

        outcome = run_slot(config, devices, actual, predicted, rng)
        outcomes.append(outcome)
        if config.retry_failed:
            backlog = [d for d in backlog if d.id not in outcome.decoded_mmtc]
    return outcomes


def _fresh_devices(config: SlotConfig, count: int, first_id: int, rng) -> list:
    if count == 0:
        return []
    sized = SlotConfig(
        cell=config.cell,
        preamble_count=config.preamble_count,
        power_levels=config.power_levels,
        n_mmtc=count,
        acb_factor=config.acb_factor,
        baseline_mode=config.baseline_mode,
        detector=config.detector,
        phy=config.phy,
        retry_failed=config.retry_failed,
    )
    return make_mmtc_devices(sized, rng, first_id=first_id)


@dataclass(frozen=True)
class TrialStats:
    """Sample statistics over a batch of simulated slots."""

    label: str
    slot_count: int
    mmtc_mean: float
    mmtc_std_error: float
    mmtc_ci95: tuple[float, float]
    urllc_success_rate: float
    urllc_mean: float

    @property
    def total_mean(self) -> float:
        return self.mmtc_mean + self.urllc_mean


def summarize(outcomes, label: str = "") -> TrialStats:
    """Mean decoded contention devices per slot with a normal 95% interval,
    plus the reserved-side success rate and mean served arrivals."""
    decoded = np.array([len(o.decoded_mmtc) for o in outcomes], dtype=float)
    n = decoded.size
    if n == 0:
        raise ValueError("no outcomes to summarize")
    mean = float(decoded.mean())
    std_error = float(decoded.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    half = _Z95 * std_error
    urllc_served = np.array(
        [o.urllc_actual if o.urllc_success else 0 for o in outcomes], dtype=float
    )
    return TrialStats(
        label=label,
        slot_count=int(n),
        mmtc_mean=mean,
        mmtc_std_error=std_error,
        mmtc_ci95=(mean - half, mean + half),
        urllc_success_rate=float(np.mean([o.urllc_success for o in outcomes])),
        urllc_mean=float(urllc_served.mean()),
    )


def run_trials(
    config: SlotConfig,
    slot_count: int,
    master_seed: int | np.random.SeedSequence = 0,
    urllc_count: int = 0,
    urllc_failure_rate: float = 0.0,
    label: str = "",
) -> TrialStats:
    """simulate_slots followed by summarize."""
    outcomes = simulate_slots(
        config, slot_count, master_seed, urllc_count, urllc_failure_rate
    )
    return summarize(outcomes, label=label)


@dataclass(frozen=True)
class ComparisonRecord:
    """Simulated statistics next to the closed-form expectation."""

    stats: TrialStats
    analytic_mmtc: float | None
    analytic_urllc: float
    relative_gap: float | None
    within_ci95: bool | None


def compare_analytic(
    config: SlotConfig,
    slot_count: int,
    master_seed: int | np.random.SeedSequence = 0,
    urllc_count: int = 0,
    urllc_failure_rate: float = 0.0,
    label: str = "",
) -> ComparisonRecord:
    """Simulate and, where the closed form applies, report the gap.

    The closed form models the ungated TA-aided policy with ideal collision
    detection; for the uniform reference policy, an active barring gate or
    the correlation detector the analytic fields stay None.
    """
    stats = run_trials(
        config, slot_count, master_seed, urllc_count, urllc_failure_rate, label
    )
    analytic_urllc = urllc_count * (1.0 - urllc_failure_rate)
    covered = (
        config.baseline_mode == "lstmh-ra"
        and config.acb_factor is None
        and config.detector == "ideal"
        and config.n_mmtc >= 1
    )
    if not covered:
        return ComparisonRecord(stats, None, analytic_urllc, None, None)
    analytic = expected_mmtc_success(
        config.n_mmtc,
        config.preamble_count,
        config.power_levels.level_count,
        config.cell,
    )
    gap = abs(stats.mmtc_mean - analytic) / analytic
    lo, hi = stats.mmtc_ci95
    return ComparisonRecord(stats, analytic, analytic_urllc, gap, lo <= analytic <= hi)
