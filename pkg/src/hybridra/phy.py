"""Preamble-domain physical layer: Zadoff-Chu sequences and delay detection.

Devices transmit a cyclically shifted constant-amplitude sequence; the shift
encodes the annulus (TA) index. Because circular autocorrelation of a prime
length Zadoff-Chu sequence is an impulse, correlating the received multi
antenna signal against the unshifted sequence concentrates each device's
energy at the lag equal to its shift, and detecting occupied lags recovers
occupied annuli. Open-loop power control is assumed, so every device arrives
at unit amplitude and the lag energy per antenna is the sequence length.

This layer is an optional fidelity check under the protocol simulator, which
by default detects TA occupancy ideally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ReceivedPreambleSignal",
    "ZcPreamble",
    "correlate_detect",
    "detection_threshold",
    "generate_zc",
    "synthesize_received",
]


def _is_odd_prime(n: int) -> bool:
    if n < 3 or n % 2 == 0:
        return False
    for f in range(3, math.isqrt(n) + 1, 2):
        if n % f == 0:
            return False
    return True


@dataclass(frozen=True)
class ZcPreamble:
    """A Zadoff-Chu sequence with constant amplitude and impulsive autocorrelation."""

    root: int
    length: int
    samples: np.ndarray

    def shifted(self, lag: int) -> np.ndarray:
        """Cyclic shift by ``lag`` samples (a delay of lag symbols)."""
        return np.roll(self.samples, lag)


def generate_zc(root: int, length: int) -> ZcPreamble:
    """Build x[n] = exp(-j pi root n (n + 1) / length) for odd prime length.

    Requires 0 < root < length with gcd(root, length) = 1; primality keeps
    every root usable and every nonzero lag orthogonal.
    """
    if not _is_odd_prime(length):
        raise ValueError("length must be an odd prime")
    if not 0 < root < length:
        raise ValueError("root must lie in 1..length-1")
    if math.gcd(root, length) != 1:
        raise ValueError("root must be coprime to length")
    n = np.arange(length)
    samples = np.exp(-1j * np.pi * root * n * (n + 1) / length)
    return ZcPreamble(root=root, length=length, samples=samples)


@dataclass(frozen=True)
class ReceivedPreambleSignal:
    """One slot of received preamble samples, antennas by sequence length."""

    matrix: np.ndarray
    noise_variance: float

    def __post_init__(self):
        if self.matrix.ndim != 2:
            raise ValueError("matrix must be 2-D (antennas x length)")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be non-negative")

    @property
    def antennas(self) -> int:
        return self.matrix.shape[0]

    @property
    def length(self) -> int:
        return self.matrix.shape[1]


def synthesize_received(
    preambles: Sequence[ZcPreamble],
    devices: Iterable[tuple[int, int, np.ndarray]],
    antennas: int,
    noise_variance: float,
    rng: np.random.Generator,
) -> ReceivedPreambleSignal:
    """Superimpose delay-shifted preambles over antennas, plus receiver noise.

    ``devices`` holds (preamble index into ``preambles``, annulus index,
    fading vector) triples. A device in annulus k arrives shifted by k - 1
    samples, scaled per antenna by its small-scale fading coefficient; power
    control cancels path loss so there is no extra amplitude factor. Noise is
    circularly symmetric complex Gaussian with the given per-sample variance.
    """
    if not preambles:
        raise ValueError("at least one preamble is required")
    length = preambles[0].length
    if any(p.length != length for p in preambles):
        raise ValueError("all preambles must share one length")
    if antennas < 1:
        raise ValueError("antennas must be at least 1")
    if noise_variance < 0:
        raise ValueError("noise_variance must be non-negative")
    matrix = np.zeros((antennas, length), dtype=complex)
    for preamble_index, annulus, fading in devices:
        if not 0 <= preamble_index < len(preambles):
            raise ValueError(f"preamble index {preamble_index} out of range")
        if not 1 <= annulus <= length:
            raise ValueError(f"annulus index {annulus} exceeds the sequence length")
        fading = np.asarray(fading, dtype=complex)
        if fading.shape != (antennas,):
            raise ValueError("fading vector length must equal the antenna count")
        matrix += np.outer(fading, preambles[preamble_index].shifted(annulus - 1))
    if noise_variance > 0:
        scale = math.sqrt(noise_variance / 2.0)
        matrix += scale * (
            rng.standard_normal((antennas, length))
            + 1j * rng.standard_normal((antennas, length))
        )
    return ReceivedPreambleSignal(matrix=matrix, noise_variance=float(noise_variance))


def detection_threshold(length: int, noise_variance: float) -> float:
    """Midpoint between noise-only and single-device mean lag energies.

    After correlation against a unit-norm reference, a noise-only lag has
    mean energy equal to the noise variance while a single occupied lag adds
    the full sequence length. Averaging over antennas only sharpens both
    hypotheses around these means, so the midpoint works for any array size.
    """
    if length < 1:
        raise ValueError("length must be positive")
    if noise_variance < 0:
        raise ValueError("noise_variance must be non-negative")
    return (length + 2.0 * noise_variance) / 2.0


def correlate_detect(
    signal: ReceivedPreambleSignal, preamble: ZcPreamble, threshold: float
) -> set[int]:
    """Annulus indices whose lag energy against this preamble clears threshold.

    Each antenna row is circularly correlated against the unit-normalized
    preamble; per-lag energies are averaged over antennas and lags with
    energy above the threshold map back to annulus = lag + 1.
    """
    if signal.length != preamble.length:
        raise ValueError("signal and preamble lengths differ")
    reference = np.fft.fft(preamble.samples)
    spectrum = np.fft.fft(signal.matrix, axis=1) * np.conj(reference)[None, :]
    correlation = np.fft.ifft(spectrum, axis=1) / math.sqrt(preamble.length)
    energy = np.mean(np.abs(correlation) ** 2, axis=0)
    return {int(lag) + 1 for lag in np.nonzero(energy > threshold)[0]}
