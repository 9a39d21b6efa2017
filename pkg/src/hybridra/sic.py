"""Power-domain SIC: the prescribed receive-power ladder and the decode rule.

Uplink transmissions on a shared resource block are separated by received
power. Level 1 is the strongest; a receiver peels levels from the top, so a
device survives only if its own level is uncontended and every occupied level
above it was peeled first.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable

__all__ = ["PowerLevelSet", "build_levels", "sic_decode"]


@dataclass(frozen=True)
class PowerLevelSet:
    """Receive-power targets l_1 > l_2 > ... for a given SINR threshold."""

    level_count: int
    target_sinr: float
    levels: tuple[float, ...]

    def sinr_at(self, index: int) -> float:
        """SINR of level ``index`` against all lower levels plus unit noise."""
        if not 1 <= index <= self.level_count:
            raise ValueError("level index out of range")
        interference = sum(self.levels[index:])
        return self.levels[index - 1] / (interference + 1.0)


def build_levels(level_count: int, target_sinr: float) -> PowerLevelSet:
    """Power ladder l_j = gamma * (gamma + 1)^(count - j), strongest first.

    With unit receiver noise this makes every level hit the SINR target
    exactly when all lower levels are occupied once: the interference below
    level j sums to (gamma + 1)^(count - j) - 1, a geometric series.
    """
    if not isinstance(level_count, int) or level_count < 2:
        raise ValueError("level_count must be an integer >= 2")
    if target_sinr <= 0:
        raise ValueError("target_sinr must be positive")
    gamma = float(target_sinr)
    levels = tuple(gamma * (gamma + 1.0) ** (level_count - j) for j in range(1, level_count + 1))
    return PowerLevelSet(level_count=level_count, target_sinr=gamma, levels=levels)


def sic_decode(assignments: Iterable[tuple[Hashable, int]]) -> set:
    """Decode devices from (device id, level index) pairs on one block.

    Scanning from level 1 downward: a sole occupant of a level is decoded and
    cancelled; two or more occupants on one level jam the cancellation chain,
    so that level and everything below it is lost.
    """
    by_level: dict[int, list] = {}
    for device, level in assignments:
        if not isinstance(level, int) or isinstance(level, bool) or level < 1:
            raise ValueError(f"level index must be a positive integer, got {level!r}")
        by_level.setdefault(level, []).append(device)
    decoded = set()
    for level in sorted(by_level):
        occupants = by_level[level]
        if len(occupants) > 1:
            break
        decoded.add(occupants[0])
    return decoded
