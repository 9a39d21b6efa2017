"""Per-slot arrival counts and windowed-peak labels for forecaster training."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "TrafficTrace",
    "generate_trace",
    "load_trace",
    "save_trace",
    "windowed_max_labels",
]


@dataclass(frozen=True)
class TrafficTrace:
    """A sequence of non-negative arrival counts, one per access slot."""

    counts: np.ndarray
    lam: float
    slot_count: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1:
            raise ValueError("counts must be one-dimensional")
        if counts.size != self.slot_count:
            raise ValueError("slot_count does not match the counts array")
        if counts.size and counts.min() < 0:
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    def __len__(self) -> int:
        return self.slot_count


def generate_trace(lam: float, slot_count: int, rng: np.random.Generator) -> TrafficTrace:
    """Draw independent Poisson(lam) arrival counts for slot_count slots."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    if slot_count < 1:
        raise ValueError("slot_count must be at least 1")
    counts = rng.poisson(lam, size=slot_count)
    return TrafficTrace(counts=counts, lam=float(lam), slot_count=slot_count)


def _counts_of(trace) -> np.ndarray:
    if isinstance(trace, TrafficTrace):
        return trace.counts
    return np.asarray(trace, dtype=np.int64)


def windowed_max_labels(trace, window: int) -> np.ndarray:
    """label[t] = max(counts[t .. t + window]), both ends included.

    Budgeting against the peak of the next few slots is what makes
    under-provisioning rare, so labels are never below the raw counts they
    cover. The result has window fewer entries than the trace.
    """
    counts = _counts_of(trace)
    if window < 1:
        raise ValueError("window must be at least 1")
    if counts.size <= window:
        raise ValueError("trace must be longer than the window")
    return sliding_window_view(counts, window + 1).max(axis=1)


def save_trace(trace: TrafficTrace, path) -> None:
    """Write a trace as plain text, one integer count per line."""
    with open(path, "w", encoding="ascii") as fh:
        for value in trace.counts:
            fh.write(f"{int(value)}\n")


def load_trace(path, lam: float = float("nan")) -> TrafficTrace:
    """Read a plain-text trace written by save_trace."""
    with open(path, "r", encoding="ascii") as fh:
        counts = np.array([int(line) for line in fh if line.strip()], dtype=np.int64)
    return TrafficTrace(counts=counts, lam=lam, slot_count=counts.size)
