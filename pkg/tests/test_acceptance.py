"""Acceptance suite: one test and one printed pass/fail line per criterion.

Each test exercises a pinned configuration at a pinned tolerance; the
verdict lines are echoed in a terminal section after the run (see conftest).
"""

import itertools
import math
import time

import numpy as np
from scipy import stats

from conftest import ACCEPTANCE_VERDICTS

from hybridra.analytic import (
    expected_mmtc_success,
    leftover_success_probability,
    partitions_min2,
)
from hybridra.cli import main
from hybridra.geometry import CellConfig, annulus_probabilities, sample_device_distances
from hybridra.montecarlo import run_trials
from hybridra.phy import correlate_detect, detection_threshold, generate_zc, synthesize_received
from hybridra.predictor import (
    initialize_network,
    loss_and_gradients,
    network_parameters,
    rms_error,
    train_forecaster,
    underprediction_rate,
)
from hybridra.protocol import SlotConfig
from hybridra.sic import build_levels, sic_decode
from hybridra.traffic import generate_trace

CELL = CellConfig(624.0, 156.0)


def report(number: int, ok: bool, detail: str, elapsed: float, budget: float | None):
    within = budget is None or elapsed <= budget
    verdict = "PASS" if (ok and within) else "FAIL"
    line = f"[{verdict}] criterion {number:2d}: {detail} ({elapsed:.2f}s)"
    ACCEPTANCE_VERDICTS.append(line)
    print(line)
    assert ok, line
    if budget is not None:
        assert within, f"criterion {number} overran its {budget:.0f}s budget: {elapsed:.2f}s"


def test_criterion_01_block_survival_matches_decoder_enumeration():
    # exact expected survival of i same-block gamblers vs averaging the real
    # decoder over every (levels-1)^i placement; owner fixed on top level
    start = time.perf_counter()
    worst = 0.0
    for levels in (3, 4, 5):
        for i in range(1, 7):
            decoded = 0
            for combo in itertools.product(range(2, levels + 1), repeat=i):
                assignments = [(0, 1)] + [(k + 1, lvl) for k, lvl in enumerate(combo)]
                decoded += len(sic_decode(assignments)) - 1
            brute = decoded / (i * (levels - 1) ** i)
            worst = max(worst, abs(leftover_success_probability(i, levels) - brute))
    anchors = (
        leftover_success_probability(1, 3) == 1.0
        and leftover_success_probability(1, 7) == 1.0
        and leftover_success_probability(2, 3) == 0.5
    )
    elapsed = time.perf_counter() - start
    report(
        1,
        worst <= 1e-12 and anchors,
        f"survival vs enumeration, i<=6, levels 3..5: worst gap {worst:.2e}",
        elapsed,
        1.0,
    )


def test_criterion_02_partitions_match_exhaustive_enumeration():
    def enumerate_parts(n, cap=None):
        if n == 0:
            yield ()
            return
        cap = n if cap is None else cap
        for first in range(min(n, cap), 1, -1):
            for rest in enumerate_parts(n - first, first):
                yield (first,) + rest

    start = time.perf_counter()
    ok = True
    for n in range(21):
        expected = {tuple(sorted(p, reverse=True)) for p in enumerate_parts(n)}
        got = partitions_min2(n)
        ok = ok and set(got) == expected and len(got) == len(expected)
    ok = ok and len(partitions_min2(2)) == 1
    ok = ok and len(partitions_min2(4)) == 2
    ok = ok and len(partitions_min2(6)) == 4
    elapsed = time.perf_counter() - start
    report(2, ok, "collision-size partitions vs enumeration, n<=20", elapsed, 1.0)


def test_criterion_03_annulus_masses_and_uniform_placement():
    start = time.perf_counter()
    ok = True
    detail_bits = []
    for radius in (624.0, 1000.0, 1500.0):
        probs = annulus_probabilities(CellConfig(radius, 156.0))
        ok = ok and abs(probs.sum() - 1.0) <= 1e-12
    reference = annulus_probabilities(CELL)
    for k in range(1, 8):
        ok = ok and abs(reference[k - 1] - (2 * k - 1) / 64) <= 1e-12
    ok = ok and abs(reference[7] - 15 / 64) <= 1e-12

    rng = np.random.default_rng(20260303)
    for radius in (624.0, 1000.0, 1500.0):
        cell = CellConfig(radius, 156.0)
        probs = annulus_probabilities(cell)
        width = cell.annulus_width_m
        edges = np.append(np.arange(cell.annulus_count) * width, radius)
        distances = sample_device_distances(rng, cell, 10**6)
        observed, _ = np.histogram(distances, bins=edges)
        expected = probs * distances.size
        statistic = float(((observed - expected) ** 2 / expected).sum())
        p_value = float(stats.chi2.sf(statistic, cell.annulus_count - 1))
        detail_bits.append(f"R={radius:.0f} p={p_value:.3f}")
        ok = ok and p_value > 0.01
    elapsed = time.perf_counter() - start
    report(3, ok, "annulus masses exact; placement chi-square " + ", ".join(detail_bits), elapsed, 5.0)


def test_criterion_04_power_ladder_hits_target_sinr_exactly():
    start = time.perf_counter()
    worst = 0.0
    for level_count in range(2, 8):
        for target in (0.5, 1.0, 2.0):
            ladder = build_levels(level_count, target)
            for j in range(1, level_count + 1):
                worst = max(worst, abs(ladder.sinr_at(j) - target))
    elapsed = time.perf_counter() - start
    report(4, worst <= 1e-12, f"ladder SINR identity, worst gap {worst:.2e}", elapsed, None)


def test_criterion_05_simulation_tracks_closed_form():
    start = time.perf_counter()
    points = [(28, 3), (40, 3), (64, 3), (28, 5), (28, 7)]
    ok = True
    worst = 0.0
    for index, (preambles, levels) in enumerate(points):
        config = SlotConfig(
            cell=CELL,
            preamble_count=preambles,
            power_levels=build_levels(levels, 1.0),
            n_mmtc=100,
        )
        stats_ = run_trials(config, 10**4, master_seed=20260822 + index)
        analytic = expected_mmtc_success(100, preambles, levels, CELL)
        gap = abs(stats_.mmtc_mean - analytic) / analytic
        worst = max(worst, gap)
        ok = ok and gap < 0.05
    elapsed = time.perf_counter() - start
    report(
        5,
        ok,
        f"sim vs closed form at 5 operating points, worst relative gap {worst:.4f}",
        elapsed,
        120.0,
    )


def test_criterion_06_throughput_orderings():
    start = time.perf_counter()

    def mean_at(preambles, levels, radius, seed, scheme="lstmh-ra"):
        config = SlotConfig(
            cell=CellConfig(radius, 156.0),
            preamble_count=preambles,
            power_levels=build_levels(levels, 1.0),
            n_mmtc=100,
            baseline_mode=scheme,
        )
        return run_trials(config, 10**4, master_seed=seed)

    tau = [mean_at(p, 3, 624.0, 100 + i) for i, p in enumerate((28, 40, 64))]
    lvl = [mean_at(28, l, 624.0, 200 + i) for i, l in enumerate((3, 5, 7))]
    rad = [mean_at(28, 3, r, 300 + i) for i, r in enumerate((624.0, 1000.0, 1500.0))]
    monotone = (
        tau[0].mmtc_mean <= tau[1].mmtc_mean <= tau[2].mmtc_mean
        and lvl[0].mmtc_mean <= lvl[1].mmtc_mean <= lvl[2].mmtc_mean
        and rad[0].mmtc_mean <= rad[1].mmtc_mean <= rad[2].mmtc_mean
    )

    aided = mean_at(28, 3, 624.0, 400)
    uniform = mean_at(28, 3, 624.0, 401, scheme="random")
    separation = (aided.mmtc_mean - uniform.mmtc_mean) / math.hypot(
        aided.mmtc_std_error, uniform.mmtc_std_error
    )
    elapsed = time.perf_counter() - start
    report(
        6,
        monotone and separation >= 3.0,
        "means rise with preambles/levels/radius; "
        f"TA-aided beats uniform by {separation:.0f} combined SEs",
        elapsed,
        300.0,
    )


def test_criterion_07_gradients_match_finite_differences():
    start = time.perf_counter()
    worst = 0.0
    step = 1e-5
    for draw in range(20):
        rng = np.random.default_rng(5000 + draw)
        net = initialize_network(3, 4, rng, attention=(draw % 2 == 0))
        xn = rng.poisson(6.0, size=(5, 3)).astype(float) / 10.0
        yn = (rng.poisson(6.0, size=5) + 1.0) / 10.0
        _, grads = loss_and_gradients(net, xn, yn)
        for name, tensor in network_parameters(net).items():
            flat = tensor.reshape(-1)
            grad = grads[name].reshape(-1)
            for idx in range(flat.size):
                saved = flat[idx]
                flat[idx] = saved + step
                up, _ = loss_and_gradients(net, xn, yn)
                flat[idx] = saved - step
                down, _ = loss_and_gradients(net, xn, yn)
                flat[idx] = saved
                numeric = (up - down) / (2 * step)
                denom = max(abs(numeric) + abs(grad[idx]), 1e-6)
                worst = max(worst, abs(numeric - grad[idx]) / denom)
    elapsed = time.perf_counter() - start
    report(
        7,
        worst <= 1e-4,
        f"20 random networks, every parameter: worst relative gap {worst:.2e}",
        elapsed,
        30.0,
    )


def test_criterion_08_forecaster_quality_and_ablation():
    start = time.perf_counter()
    train = generate_trace(6.0, 50000, np.random.default_rng(np.random.SeedSequence(606)))
    held_out = generate_trace(6.0, 200000, np.random.default_rng(np.random.SeedSequence(707)))
    kwargs = dict(window=5, horizon=5, hidden_size=32, epochs=8, batch_size=128,
                  learning_rate=1e-3, random_state=3)
    with_attention = train_forecaster(train, **kwargs)
    ablated = train_forecaster(train, attention=False, **kwargs)

    misses = underprediction_rate(with_attention, held_out)
    rms_full = rms_error(with_attention, held_out)
    rms_ablated = rms_error(ablated, held_out)
    elapsed = time.perf_counter() - start
    report(
        8,
        misses <= 0.05 and rms_ablated >= rms_full,
        f"held-out underprediction {misses:.4f} <= 0.05; "
        f"ablated RMS {rms_ablated:.4f} >= attention RMS {rms_full:.4f}",
        elapsed,
        600.0,
    )


def test_criterion_09_correlator_roundtrip_and_autocorrelation():
    start = time.perf_counter()
    length = 139
    off_peak = 0.0
    for root in (1, 7, 62):
        seq = generate_zc(root, length).samples
        spectrum = np.fft.fft(seq)
        corr = np.fft.ifft(spectrum * np.conj(spectrum))
        off_peak = max(off_peak, float(np.abs(corr[1:]).max()))

    rng = np.random.default_rng(20260909)
    exact = True
    for _ in range(100):
        root = int(rng.integers(1, length))
        ring = int(rng.integers(1, 9))
        preamble = generate_zc(root, length)
        fading = (rng.standard_normal(128) + 1j * rng.standard_normal(128)) / np.sqrt(2)
        signal = synthesize_received([preamble], [(0, ring, fading)], 128, 0.0, rng)
        found = correlate_detect(signal, preamble, detection_threshold(length, 0.0))
        exact = exact and found == {ring}
    elapsed = time.perf_counter() - start
    report(
        9,
        exact and off_peak <= 1e-9 * length,
        f"100 noiseless round trips exact; off-lag autocorrelation {off_peak:.2e}",
        elapsed,
        10.0,
    )


def test_criterion_10_figure_mode_reruns_are_byte_identical(tmp_path):
    start = time.perf_counter()
    config_path = tmp_path / "fig6.yaml"
    config_path.write_text(
        "mode: fig6\n"
        "protocol:\n"
        "  n_mmtc: 20\n"
        "sweeps:\n"
        "  preamble_values: [10, 14]\n"
        "  radius_values: [624.0]\n"
        "  slots: 200\n"
    )
    codes = []
    for name in ("a", "b"):
        codes.append(main(["--config", str(config_path), "--outdir", str(tmp_path / name)]))
    first = (tmp_path / "a" / "fig6.csv").read_bytes()
    second = (tmp_path / "b" / "fig6.csv").read_bytes()
    elapsed = time.perf_counter() - start
    report(
        10,
        codes == [0, 0] and first == second and len(first) > 0,
        f"fig6 rerun with the same seed: {len(first)} bytes, identical",
        elapsed,
        None,
    )
