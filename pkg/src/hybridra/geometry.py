"""Cell geometry: uniform device placement and timing-advance quantization.

A single base station sits at the centre of a disc cell. Round-trip delay is
measured on a grid whose spacing corresponds to ``ta_unit_m`` metres of path
length, which slices the disc into annuli of width ``ta_unit_m / 2``. All
devices inside one annulus report the same timing-advance (TA) index, so the
annulus index doubles as a coarse position label.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CellConfig",
    "OutOfCellError",
    "annulus_probabilities",
    "annulus_probability",
    "distance_quantile",
    "max_ta",
    "quantize_ta",
    "sample_device_distance",
    "sample_device_distances",
]


class OutOfCellError(ValueError):
    """Raised when a distance lies beyond the cell edge."""


def max_ta(radius_m: float, ta_unit_m: float) -> int:
    """Largest TA index a device in the cell can report: ceil(2R / unit)."""
    if radius_m <= 0 or ta_unit_m <= 0:
        raise ValueError("radius_m and ta_unit_m must be positive")
    return math.ceil(2.0 * radius_m / ta_unit_m)


@dataclass(frozen=True)
class CellConfig:
    """Cell radius, TA granularity, and the derived annulus count."""

    radius_m: float
    ta_unit_m: float
    annulus_count: int = field(init=False)

    def __post_init__(self):
        if self.radius_m <= 0 or self.ta_unit_m <= 0:
            raise ValueError("radius_m and ta_unit_m must be positive")
        if self.ta_unit_m > 2.0 * self.radius_m:
            raise ValueError("ta_unit_m must not exceed the cell diameter")
        object.__setattr__(self, "annulus_count", max_ta(self.radius_m, self.ta_unit_m))

    @property
    def annulus_width_m(self) -> float:
        return self.ta_unit_m / 2.0


def quantize_ta(distance_m: float, config: CellConfig) -> int:
    """TA index of a device at the given distance from the base station.

    Index k covers distances ((k-1) * w, k * w] with w = ta_unit_m / 2; a
    device exactly on a ring boundary therefore gets the lower index, and
    distance zero maps to index 1. The outermost (possibly narrower) annulus
    absorbs everything past the regular grid.
    """
    if distance_m < 0:
        raise ValueError("distance_m must be non-negative")
    if distance_m > config.radius_m:
        raise OutOfCellError(
            f"distance {distance_m} m is outside the {config.radius_m} m cell"
        )
    if distance_m == 0:
        return 1
    index = math.ceil(distance_m / config.annulus_width_m)
    return min(index, config.annulus_count)


def annulus_probability(index: int, config: CellConfig) -> float:
    """Probability that a uniformly placed device falls into one annulus.

    Uniform placement over the disc has radial density 2x / R^2, so annulus k
    of width d/2 carries probability d^2 (2k - 1) / (4 R^2); the last annulus
    takes the remaining mass (it may be narrower than d/2).
    """
    zeta = config.annulus_count
    if not isinstance(index, (int, np.integer)) or isinstance(index, bool):
        raise ValueError("annulus index must be an integer")
    if index < 1 or index > zeta:
        raise ValueError(f"annulus index must lie in 1..{zeta}, got {index}")
    d2_over_4r2 = config.ta_unit_m**2 / (4.0 * config.radius_m**2)
    if index < zeta:
        return d2_over_4r2 * (2 * index - 1)
    return 1.0 - d2_over_4r2 * (zeta - 1) ** 2


def annulus_probabilities(config: CellConfig) -> np.ndarray:
    """All annulus probabilities as a vector indexed by annulus - 1."""
    return np.array(
        [annulus_probability(k, config) for k in range(1, config.annulus_count + 1)]
    )


def distance_quantile(u: float, config: CellConfig) -> float:
    """Inverse CDF of the uniform-in-disc radial distance: R * sqrt(u)."""
    if not 0.0 <= u <= 1.0:
        raise ValueError("u must lie in [0, 1]")
    return config.radius_m * math.sqrt(u)


def sample_device_distance(rng: np.random.Generator, config: CellConfig) -> float:
    """Draw one device distance, uniform over the disc area."""
    return distance_quantile(rng.random(), config)


def sample_device_distances(
    rng: np.random.Generator, config: CellConfig, count: int
) -> np.ndarray:
    """Vector version of sample_device_distance."""
    if count < 0:
        raise ValueError("count must be non-negative")
    return config.radius_m * np.sqrt(rng.random(count))
