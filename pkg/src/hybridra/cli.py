"""Experiment front-end: one YAML config in, plot-ready CSV files out.

A run is ``hybridra --config experiment.yaml``. The config picks one mode:

* ``simulate``     one operating point, per-slot log plus summary statistics
* ``analytic``     closed-form expected throughput for one operating point
* ``compare``      simulation and closed form side by side
* ``train-predictor`` / ``eval-predictor``  fit or score the arrival forecaster
* ``fig6``         throughput vs. preamble count, per cell radius and scheme
* ``fig7``         throughput vs. power-level count, per cell radius and scheme
* ``fig8``         throughput vs. active-device count with reserved arrivals
* ``fig4``         forecaster under-prediction rate vs. mean arrival rate

Defaults reproduce the reference setup (100 contending devices, 28 preambles,
3 power levels, 156 m timing unit, 624/1000/1500 m radii, 5 reserved-side
arrivals), so a config containing nothing but a mode is a meaningful run.
All randomness descends from one master seed; rerunning an unchanged config
rewrites every CSV byte for byte. Figure sweeps fan out one child seed per
point, so results do not depend on the worker count.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from copy import deepcopy
from dataclasses import dataclass
from typing import Any

import numpy as np
import yaml

from .analytic import expected_mmtc_success, expected_throughput
from .geometry import CellConfig
from .montecarlo import compare_analytic, simulate_slots, summarize
from .predictor import (
    load_forecaster,
    rms_error,
    save_forecaster,
    train_forecaster,
    underprediction_rate,
)
from .protocol import BASELINE_MODES, PhyDetectionConfig, SlotConfig, SlotOutcome
from .sic import build_levels
from .traffic import generate_trace, load_trace

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "main", "run"]

MODES = (
    "simulate",
    "analytic",
    "compare",
    "train-predictor",
    "eval-predictor",
    "fig6",
    "fig7",
    "fig8",
    "fig4",
)

DEFAULTS: dict[str, Any] = {
    "seed": 12345,
    "output_dir": ".",
    "cell": {"radius_m": 624.0, "ta_unit_m": 156.0},
    "protocol": {
        "preamble_count": 28,
        "level_count": 3,
        "target_sinr": 1.0,
        "n_mmtc": 100,
        "scheme": "lstmh-ra",
        "acb_factor": None,
        "detector": "ideal",
    },
    "phy": {"length": 139, "antennas": 128, "noise_variance": 0.0},
    "urllc": {"count": 5, "failure_rate": 0.0075},
    "simulate": {"slots": 1000},
    "traffic": {"lam": 6.0, "slots": 50000},
    "predictor": {
        "window": 5,
        "horizon": 5,
        "hidden_size": 32,
        "epochs": 8,
        "batch_size": 128,
        "learning_rate": 1e-3,
        "attention": True,
        "model_file": None,
        "trace_file": None,
        "eval_slots": 10000,
    },
    "sweeps": {
        "preamble_values": [28, 34, 40, 46, 52, 58, 64],
        "level_values": [3, 4, 5, 6, 7],
        "radius_values": [624.0, 1000.0, 1500.0],
        "active_values": [15, 20, 25, 30, 35, 40, 45, 50],
        "lam_values": [4.0, 5.0, 6.0, 7.0, 8.0],
        "schemes": list(BASELINE_MODES),
        "slots": 2000,
        "workers": 1,
    },
}


class ConfigError(Exception):
    """Configuration problem; the message carries the offending key path."""


def _fmt(x: float) -> str:
    return format(float(x), ".10g")


# ---------------------------------------------------------------------------
# config loading and validation
# ---------------------------------------------------------------------------

def _merge(base: dict, override: dict, path: str) -> dict:
    merged = deepcopy(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else str(key)
        if key not in base:
            raise ConfigError(f"{here}: unknown key")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{here}: expected a mapping")
            merged[key] = _merge(base[key], value, here)
        else:
            merged[key] = value
    return merged


def _want_int(cfg: dict, section: str, key: str, minimum: int, maximum: int | None = None):
    value = cfg[section][key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{section}.{key}: expected an integer")
    if value < minimum or (maximum is not None and value > maximum):
        bound = f">= {minimum}" if maximum is None else f"in {minimum}..{maximum}"
        raise ConfigError(f"{section}.{key}: must be {bound}")


def _want_number(cfg: dict, section: str, key: str, minimum=None, maximum=None, above=None):
    value = cfg[section][key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key}: expected a number")
    if above is not None and not value > above:
        raise ConfigError(f"{section}.{key}: must be > {above}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{section}.{key}: must be >= {minimum}")
    if maximum is not None and value > maximum:
        raise ConfigError(f"{section}.{key}: must be <= {maximum}")


def _want_choice(cfg: dict, section: str, key: str, choices):
    if cfg[section][key] not in choices:
        raise ConfigError(f"{section}.{key}: must be one of {', '.join(choices)}")


def _want_list(cfg: dict, section: str, key: str, integer: bool, minimum):
    values = cfg[section][key]
    if not isinstance(values, list) or not values:
        raise ConfigError(f"{section}.{key}: expected a non-empty list")
    for v in values:
        ok = (
            not isinstance(v, bool)
            and isinstance(v, int if integer else (int, float))
            and v >= minimum
        )
        if not ok:
            kind = "integers" if integer else "numbers"
            raise ConfigError(f"{section}.{key}: entries must be {kind} >= {minimum}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully validated experiment description."""

    mode: str
    seed: int
    output_dir: str
    cell: dict
    protocol: dict
    phy: dict
    urllc: dict
    simulate: dict
    traffic: dict
    predictor: dict
    sweeps: dict

    def cell_config(self, radius_m: float | None = None) -> CellConfig:
        return CellConfig(
            radius_m=float(radius_m if radius_m is not None else self.cell["radius_m"]),
            ta_unit_m=float(self.cell["ta_unit_m"]),
        )

    def slot_config(
        self,
        scheme: str | None = None,
        radius_m: float | None = None,
        preamble_count: int | None = None,
        level_count: int | None = None,
        n_mmtc: int | None = None,
    ) -> SlotConfig:
        proto = self.protocol
        levels = build_levels(
            int(level_count if level_count is not None else proto["level_count"]),
            float(proto["target_sinr"]),
        )
        phy = None
        if proto["detector"] == "correlator":
            phy = PhyDetectionConfig(
                length=int(self.phy["length"]),
                antennas=int(self.phy["antennas"]),
                noise_variance=float(self.phy["noise_variance"]),
            )
        return SlotConfig(
            cell=self.cell_config(radius_m),
            preamble_count=int(
                preamble_count if preamble_count is not None else proto["preamble_count"]
            ),
            power_levels=levels,
            n_mmtc=int(n_mmtc if n_mmtc is not None else proto["n_mmtc"]),
            acb_factor=proto["acb_factor"],
            baseline_mode=scheme if scheme is not None else proto["scheme"],
            detector=proto["detector"],
            phy=phy,
        )


def validate_config(raw: Any, source: str = "config") -> ExperimentConfig:
    """Check types, ranges and cross-field constraints; raise ConfigError
    with a dotted key path on the first problem."""
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    if "mode" not in raw:
        raise ConfigError("mode: required")
    mode = raw["mode"]
    if mode not in MODES:
        raise ConfigError(f"mode: must be one of {', '.join(MODES)}")
    body = {k: v for k, v in raw.items() if k != "mode"}
    cfg = _merge(DEFAULTS, body, "")

    if isinstance(cfg["seed"], bool) or not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigError("seed: expected a non-negative integer")
    if not isinstance(cfg["output_dir"], str) or not cfg["output_dir"]:
        raise ConfigError("output_dir: expected a non-empty path")

    _want_number(cfg, "cell", "radius_m", above=0)
    _want_number(cfg, "cell", "ta_unit_m", above=0)
    if cfg["cell"]["ta_unit_m"] > 2 * cfg["cell"]["radius_m"]:
        raise ConfigError("cell.ta_unit_m: exceeds the cell diameter")

    _want_int(cfg, "protocol", "preamble_count", 1)
    _want_int(cfg, "protocol", "level_count", 2)
    _want_number(cfg, "protocol", "target_sinr", above=0)
    _want_int(cfg, "protocol", "n_mmtc", 0)
    _want_choice(cfg, "protocol", "scheme", BASELINE_MODES)
    _want_choice(cfg, "protocol", "detector", ("ideal", "correlator"))
    if cfg["protocol"]["acb_factor"] is not None:
        _want_number(cfg, "protocol", "acb_factor", minimum=0.0, maximum=1.0)

    _want_int(cfg, "phy", "length", 3)
    _want_int(cfg, "phy", "antennas", 1)
    _want_number(cfg, "phy", "noise_variance", minimum=0.0)

    _want_int(cfg, "urllc", "count", 0)
    _want_number(cfg, "urllc", "failure_rate", minimum=0.0, maximum=1.0)

    _want_int(cfg, "simulate", "slots", 1)

    _want_number(cfg, "traffic", "lam", above=0)
    _want_int(cfg, "traffic", "slots", 2)

    _want_int(cfg, "predictor", "window", 1)
    _want_int(cfg, "predictor", "horizon", 1)
    _want_int(cfg, "predictor", "hidden_size", 1)
    _want_int(cfg, "predictor", "epochs", 1)
    _want_int(cfg, "predictor", "batch_size", 1)
    _want_number(cfg, "predictor", "learning_rate", above=0)
    if not isinstance(cfg["predictor"]["attention"], bool):
        raise ConfigError("predictor.attention: expected true or false")
    for key in ("model_file", "trace_file"):
        value = cfg["predictor"][key]
        if value is not None and (not isinstance(value, str) or not value):
            raise ConfigError(f"predictor.{key}: expected a non-empty path")
    _want_int(cfg, "predictor", "eval_slots", 2)

    _want_list(cfg, "sweeps", "preamble_values", True, 1)
    _want_list(cfg, "sweeps", "level_values", True, 2)
    _want_list(cfg, "sweeps", "radius_values", False, 1)
    _want_list(cfg, "sweeps", "active_values", True, 0)
    _want_list(cfg, "sweeps", "lam_values", False, 1)
    if not isinstance(cfg["sweeps"]["schemes"], list) or not cfg["sweeps"]["schemes"]:
        raise ConfigError("sweeps.schemes: expected a non-empty list")
    for scheme in cfg["sweeps"]["schemes"]:
        if scheme not in BASELINE_MODES:
            raise ConfigError(f"sweeps.schemes: must draw from {', '.join(BASELINE_MODES)}")
    _want_int(cfg, "sweeps", "slots", 1)
    _want_int(cfg, "sweeps", "workers", 1)

    if mode == "fig8":
        low = min(cfg["sweeps"]["active_values"])
        if low < cfg["urllc"]["count"]:
            raise ConfigError(
                "sweeps.active_values: every entry must reach urllc.count"
            )
    if mode == "eval-predictor" and cfg["predictor"]["model_file"] is None:
        raise ConfigError("predictor.model_file: required for eval-predictor")

    return ExperimentConfig(
        mode=mode,
        seed=cfg["seed"],
        output_dir=cfg["output_dir"],
        cell=cfg["cell"],
        protocol=cfg["protocol"],
        phy=cfg["phy"],
        urllc=cfg["urllc"],
        simulate=cfg["simulate"],
        traffic=cfg["traffic"],
        predictor=cfg["predictor"],
        sweeps=cfg["sweeps"],
    )


def load_config(path: str) -> ExperimentConfig:
    """Parse and validate a YAML experiment file.

    Parse failures carry the line and column; semantic failures carry the
    dotted key path.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file")
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        problem = getattr(exc, "problem", None) or "invalid YAML"
        if mark is not None:
            raise ConfigError(f"{path}:{mark.line + 1}:{mark.column + 1}: {problem}")
        raise ConfigError(f"{path}: {problem}")
    if raw is None:
        raise ConfigError(f"{path}: empty config")
    return validate_config(raw, source=path)


# ---------------------------------------------------------------------------
# shared run helpers
# ---------------------------------------------------------------------------

def _write_csv(outdir: str, name: str, header: str, rows) -> str:
    path = os.path.join(outdir, name)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(row + "\n")
    return path


@dataclass(frozen=True)
class _PointResult:
    mmtc_mean: float
    mmtc_lo: float
    mmtc_hi: float
    total_mean: float
    total_lo: float
    total_hi: float


def _point_result(args) -> _PointResult:
    slot_config, slots, seed_seq, urllc_count, urllc_rate = args
    outcomes = simulate_slots(slot_config, slots, seed_seq, urllc_count, urllc_rate)
    stats = summarize(outcomes)
    totals = np.array(
        [len(o.decoded_mmtc) + (o.urllc_actual if o.urllc_success else 0) for o in outcomes],
        dtype=float,
    )
    n = totals.size
    se = float(totals.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    half = 1.959963984540054 * se
    mean = float(totals.mean())
    return _PointResult(
        mmtc_mean=stats.mmtc_mean,
        mmtc_lo=stats.mmtc_ci95[0],
        mmtc_hi=stats.mmtc_ci95[1],
        total_mean=mean,
        total_lo=mean - half,
        total_hi=mean + half,
    )


def _map_points(payloads, workers: int):
    if workers <= 1 or len(payloads) <= 1:
        return [_point_result(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_point_result, payloads))


def _log(verbose: bool, message: str) -> None:
    if verbose:
        print(message, file=sys.stderr)


# ---------------------------------------------------------------------------
# modes
# ---------------------------------------------------------------------------

def _run_simulate(config: ExperimentConfig, outdir: str, verbose: bool) -> list[str]:
    slots = int(config.simulate["slots"])
    outcomes = simulate_slots(
        config.slot_config(),
        slots,
        config.seed,
        int(config.urllc["count"]),
        float(config.urllc["failure_rate"]),
    )
    stats = summarize(outcomes)
    slot_rows = [o.to_csv_row(i) for i, o in enumerate(outcomes)]
    summary_header = (
        "slots,mmtc_mean,mmtc_std_error,ci_lo,ci_hi,urllc_success_rate,urllc_mean"
    )
    summary_row = ",".join(
        [
            str(stats.slot_count),
            _fmt(stats.mmtc_mean),
            _fmt(stats.mmtc_std_error),
            _fmt(stats.mmtc_ci95[0]),
            _fmt(stats.mmtc_ci95[1]),
            _fmt(stats.urllc_success_rate),
            _fmt(stats.urllc_mean),
        ]
    )
    return [
        _write_csv(outdir, "slots.csv", SlotOutcome.CSV_HEADER, slot_rows),
        _write_csv(outdir, "summary.csv", summary_header, [summary_row]),
    ]


def _run_analytic(config: ExperimentConfig, outdir: str, verbose: bool) -> list[str]:
    report = expected_throughput(
        n_mmtc=int(config.protocol["n_mmtc"]),
        n_urllc=int(config.urllc["count"]),
        underprediction_rate=float(config.urllc["failure_rate"]),
        preamble_count=int(config.protocol["preamble_count"]),
        level_count=int(config.protocol["level_count"]),
        cell=config.cell_config(),
    )
    return [_write_csv(outdir, "analytic.csv", report.CSV_HEADER, [report.to_csv_row()])]


def _run_compare(config: ExperimentConfig, outdir: str, verbose: bool) -> list[str]:
    record = compare_analytic(
        config.slot_config(),
        int(config.simulate["slots"]),
        config.seed,
        int(config.urllc["count"]),
        float(config.urllc["failure_rate"]),
    )
    stats = record.stats
    header = "slots,scheme,sim_mean,ci_lo,ci_hi,analytic,relative_gap,within_ci95"
    row = ",".join(
        [
            str(stats.slot_count),
            config.protocol["scheme"],
            _fmt(stats.mmtc_mean),
            _fmt(stats.mmtc_ci95[0]),
            _fmt(stats.mmtc_ci95[1]),
            _fmt(record.analytic_mmtc) if record.analytic_mmtc is not None else "",
            _fmt(record.relative_gap) if record.relative_gap is not None else "",
            str(int(record.within_ci95)) if record.within_ci95 is not None else "",
        ]
    )
    return [_write_csv(outdir, "compare.csv", header, [row])]


def _run_fig6(config: ExperimentConfig, outdir: str, verbose: bool) -> list[str]:
    sweeps = config.sweeps
    radii = [float(r) for r in sweeps["radius_values"]]
    taus = [int(t) for t in sweeps["preamble_values"]]
    schemes = list(sweeps["schemes"])
    slots = int(sweeps["slots"])
    level_count = int(config.protocol["level_count"])
    n_mmtc = int(config.protocol["n_mmtc"])

    points = [(r, tau, s) for r in radii for tau in taus for s in schemes]
    children = np.random.SeedSequence(config.seed).spawn(len(points))
    payloads = [
        (config.slot_config(scheme=s, radius_m=r, preamble_count=tau), slots, child, 0, 0.0)
        for (r, tau, s), child in zip(points, children)
    ]
    results = _map_points(payloads, int(sweeps["workers"]))

    analytic_cache: dict[tuple[float, int], float] = {}
    rows = []
    for (r, tau, scheme), result in zip(points, results):
        if scheme == "lstmh-ra":
            key = (r, tau)
            if key not in analytic_cache:
                analytic_cache[key] = expected_mmtc_success(
                    n_mmtc, tau, level_count, config.cell_config(r)
                )
            analytic = _fmt(analytic_cache[key])
        else:
            analytic = ""
        rows.append(
            ",".join(
                [
                    _fmt(r),
                    str(tau),
                    scheme,
                    _fmt(result.mmtc_mean),
                    _fmt(result.mmtc_lo),
                    _fmt(result.mmtc_hi),
                    analytic,
                ]
            )
        )
        _log(verbose, f"fig6 R={r:g} tau_p={tau} {scheme}: {result.mmtc_mean:.4g}")
    header = "R,tau_p,scheme,sim_mean,ci_lo,ci_hi,analytic"
    return [_write_csv(outdir, "fig6.csv", header, rows)]


def _run_fig7(config: ExperimentConfig, outdir: str, verbose: bool) -> list[str]:
    sweeps = config.sweeps
    radii = [float(r) for r in sweeps["radius_values"]]
    levels = [int(l) for l in sweeps["level_values"]]
    schemes = list(sweeps["schemes"])
    slots = int(sweeps["slots"])
    tau = int(config.protocol["preamble_count"])
    n_mmtc = int(config.protocol["n_mmtc"])

    points = [(r, lc, s) for r in radii for lc in levels for s in schemes]
    children = np.random.SeedSequence(config.seed).spawn(len(points))
    payloads = [
        (config.slot_config(scheme=s, radius_m=r, level_count=lc), slots, child, 0, 0.0)
        for (r, lc, s), child in zip(points, children)
    ]
    results = _map_points(payloads, int(sweeps["workers"]))

    rows = []
    for (r, lc, scheme), result in zip(points, results):
        analytic = (
            _fmt(expected_mmtc_success(n_mmtc, tau, lc, config.cell_config(r)))
            if scheme == "lstmh-ra"
            else ""
        )
        rows.append(
            ",".join(
                [
                    _fmt(r),
                    str(lc),
                    scheme,
                    _fmt(result.mmtc_mean),
                    _fmt(result.mmtc_lo),
                    _fmt(result.mmtc_hi),
                    analytic,
                ]
            )
        )
        _log(verbose, f"fig7 R={r:g} levels={lc} {scheme}: {result.mmtc_mean:.4g}")
    header = "R,levels,scheme,sim_mean,ci_lo,ci_hi,analytic"
    return [_write_csv(outdir, "fig7.csv", header, rows)]


def _run_fig8(config: ExperimentConfig, outdir: str, verbose: bool) -> list[str]:
    sweeps = config.sweeps
    radii = [float(r) for r in sweeps["radius_values"]]
    actives = [int(a) for a in sweeps["active_values"]]
    schemes = list(sweeps["schemes"])
    slots = int(sweeps["slots"])
    tau = int(config.protocol["preamble_count"])
    level_count = int(config.protocol["level_count"])
    urllc_count = int(config.urllc["count"])
    urllc_rate = float(config.urllc["failure_rate"])

    points = [(r, a, s) for r in radii for a in actives for s in schemes]
    children = np.random.SeedSequence(config.seed).spawn(len(points))
    payloads = [
        (
            config.slot_config(scheme=s, radius_m=r, n_mmtc=a - urllc_count),
            slots,
            child,
            urllc_count,
            urllc_rate,
        )
        for (r, a, s), child in zip(points, children)
    ]
    results = _map_points(payloads, int(sweeps["workers"]))

    rows = []
    for (r, a, scheme), result in zip(points, results):
        if scheme == "lstmh-ra" and a > urllc_count:
            analytic_total = expected_mmtc_success(
                a - urllc_count, tau, level_count, config.cell_config(r)
            ) + urllc_count * (1.0 - urllc_rate)
            analytic = _fmt(analytic_total)
        elif scheme == "lstmh-ra":
            analytic = _fmt(urllc_count * (1.0 - urllc_rate))
        else:
            analytic = ""
        rows.append(
            ",".join(
                [
                    _fmt(r),
                    str(a),
                    scheme,
                    _fmt(result.total_mean),
                    _fmt(result.total_lo),
                    _fmt(result.total_hi),
                    analytic,
                ]
            )
        )
        _log(verbose, f"fig8 R={r:g} n_active={a} {scheme}: {result.total_mean:.4g}")
    header = "R,n_active,scheme,sim_mean,ci_lo,ci_hi,analytic"
    return [_write_csv(outdir, "fig8.csv", header, rows)]


def _train_one(config: ExperimentConfig, lam: float, train_seq, eval_seq, fit_seq):
    pred = config.predictor
    train_trace = generate_trace(
        lam, int(config.traffic["slots"]), np.random.default_rng(train_seq)
    )
    eval_trace = generate_trace(
        lam, int(pred["eval_slots"]), np.random.default_rng(eval_seq)
    )
    model = train_forecaster(
        train_trace,
        window=int(pred["window"]),
        horizon=int(pred["horizon"]),
        hidden_size=int(pred["hidden_size"]),
        epochs=int(pred["epochs"]),
        batch_size=int(pred["batch_size"]),
        learning_rate=float(pred["learning_rate"]),
        attention=bool(pred["attention"]),
        random_state=np.random.default_rng(fit_seq),
    )
    rate = underprediction_rate(model, eval_trace)
    rms = rms_error(model, eval_trace)
    return model, rate, rms


def _run_fig4(config: ExperimentConfig, outdir: str, verbose: bool) -> list[str]:
    lams = [float(l) for l in config.sweeps["lam_values"]]
    children = np.random.SeedSequence(config.seed).spawn(3 * len(lams))
    rows = []
    for i, lam in enumerate(lams):
        _, rate, rms = _train_one(
            config, lam, children[3 * i], children[3 * i + 1], children[3 * i + 2]
        )
        rows.append(",".join([_fmt(lam), _fmt(rate), _fmt(rms)]))
        _log(verbose, f"fig4 lam={lam:g}: underprediction {rate:.4g}, rms {rms:.4g}")
    header = "lam,underprediction_rate,holdout_rms"
    return [_write_csv(outdir, "fig4.csv", header, rows)]


def _run_train_predictor(config: ExperimentConfig, outdir: str, verbose: bool) -> list[str]:
    pred = config.predictor
    lam = float(config.traffic["lam"])
    children = np.random.SeedSequence(config.seed).spawn(3)
    if pred["trace_file"] is not None:
        trace = load_trace(pred["trace_file"], lam=lam)
        eval_trace = generate_trace(
            lam, int(pred["eval_slots"]), np.random.default_rng(children[1])
        )
        model = train_forecaster(
            trace,
            window=int(pred["window"]),
            horizon=int(pred["horizon"]),
            hidden_size=int(pred["hidden_size"]),
            epochs=int(pred["epochs"]),
            batch_size=int(pred["batch_size"]),
            learning_rate=float(pred["learning_rate"]),
            attention=bool(pred["attention"]),
            random_state=np.random.default_rng(children[2]),
        )
        rate = underprediction_rate(model, eval_trace)
        rms = rms_error(model, eval_trace)
    else:
        model, rate, rms = _train_one(config, lam, children[0], children[1], children[2])
    model_path = pred["model_file"] or os.path.join(outdir, "forecaster.txt")
    save_forecaster(model, model_path)
    header = "lam,train_slots,window,horizon,epochs,final_loss,underprediction_rate,holdout_rms"
    row = ",".join(
        [
            _fmt(lam),
            str(int(config.traffic["slots"])),
            str(int(pred["window"])),
            str(int(pred["horizon"])),
            str(int(pred["epochs"])),
            _fmt(model.loss_history_[-1]),
            _fmt(rate),
            _fmt(rms),
        ]
    )
    _log(verbose, f"saved forecaster to {model_path}")
    return [model_path, _write_csv(outdir, "train.csv", header, [row])]


def _run_eval_predictor(config: ExperimentConfig, outdir: str, verbose: bool) -> list[str]:
    pred = config.predictor
    model = load_forecaster(pred["model_file"])
    lam = float(config.traffic["lam"])
    if pred["trace_file"] is not None:
        trace = load_trace(pred["trace_file"], lam=lam)
    else:
        child = np.random.SeedSequence(config.seed).spawn(1)[0]
        trace = generate_trace(lam, int(pred["eval_slots"]), np.random.default_rng(child))
    rate = underprediction_rate(model, trace)
    label_rate = underprediction_rate(model, trace, against="label")
    rms = rms_error(model, trace)
    header = "lam,eval_slots,underprediction_rate,label_underprediction_rate,holdout_rms"
    row = ",".join(
        [_fmt(lam), str(len(trace.counts)), _fmt(rate), _fmt(label_rate), _fmt(rms)]
    )
    return [_write_csv(outdir, "eval.csv", header, [row])]


_MODE_RUNNERS = {
    "simulate": _run_simulate,
    "analytic": _run_analytic,
    "compare": _run_compare,
    "fig6": _run_fig6,
    "fig7": _run_fig7,
    "fig8": _run_fig8,
    "fig4": _run_fig4,
    "train-predictor": _run_train_predictor,
    "eval-predictor": _run_eval_predictor,
}


def run(config: ExperimentConfig, verbose: bool = False) -> list[str]:
    """Execute one experiment; returns the paths written."""
    outdir = config.output_dir
    os.makedirs(outdir, exist_ok=True)
    return _MODE_RUNNERS[config.mode](config, outdir, verbose)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _parse_args(argv):
    parser = argparse.ArgumentParser(
        prog="hybridra",
        description="Hybrid random-access experiments: simulation, closed form, forecaster.",
    )
    parser.add_argument("--config", required=True, help="YAML experiment file")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument(
        "--outdir", default=None, help="override the config output directory"
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="progress messages on stderr"
    )
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = _parse_args(argv)
    try:
        config = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed: expected a non-negative integer")
            config = ExperimentConfig(**{**config.__dict__, "seed": args.seed})
        if args.outdir is not None:
            config = ExperimentConfig(**{**config.__dict__, "output_dir": args.outdir})
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        written = run(config, verbose=args.verbose)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0
