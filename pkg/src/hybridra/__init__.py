"""Desk-scale simulator and closed-form model for TA-aided hybrid random
access with power-domain SIC, plus an attention-LSTM arrival forecaster.

The package splits into three layers. ``geometry``, ``traffic``, ``phy`` and
``sic`` hold the physical ingredients: cell annuli and timing-advance
quantization, Poisson arrival traces, Zadoff-Chu preamble detection, and the
power-level cancellation rule. ``protocol``, ``analytic`` and ``montecarlo``
build the access scheme on top of them, as an event simulation and as an
exact-expectation model, and cross-check the two. ``predictor`` trains the
reserved-resource arrival forecaster, and ``cli`` drives full experiments
from a YAML file.
"""

from .analytic import (
    AnalyticReport,
    expected_mmtc_success,
    expected_preamble_successes,
    expected_throughput,
    leftover_success_probability,
    partitions_min2,
    ta_allocation_probability,
)
from .geometry import (
    CellConfig,
    OutOfCellError,
    annulus_probabilities,
    annulus_probability,
    max_ta,
    quantize_ta,
    sample_device_distances,
)
from .montecarlo import (
    ComparisonRecord,
    TrialStats,
    compare_analytic,
    run_trials,
    simulate_slots,
    summarize,
)
from .phy import ZcPreamble, correlate_detect, detection_threshold, generate_zc
from .predictor import (
    AttentionLstmRegressor,
    load_forecaster,
    rms_error,
    save_forecaster,
    train_forecaster,
    training_pairs,
    underprediction_rate,
)
from .protocol import Device, PhyDetectionConfig, SlotConfig, SlotOutcome, run_slot
from .sic import PowerLevelSet, build_levels, sic_decode
from .traffic import TrafficTrace, generate_trace, load_trace, save_trace, windowed_max_labels

__version__ = "0.1.0"

__all__ = [
    "AnalyticReport",
    "AttentionLstmRegressor",
    "CellConfig",
    "ComparisonRecord",
    "Device",
    "OutOfCellError",
    "PhyDetectionConfig",
    "PowerLevelSet",
    "SlotConfig",
    "SlotOutcome",
    "TrafficTrace",
    "TrialStats",
    "ZcPreamble",
    "annulus_probabilities",
    "annulus_probability",
    "build_levels",
    "compare_analytic",
    "correlate_detect",
    "detection_threshold",
    "expected_mmtc_success",
    "expected_preamble_successes",
    "expected_throughput",
    "generate_trace",
    "generate_zc",
    "leftover_success_probability",
    "load_forecaster",
    "load_trace",
    "max_ta",
    "partitions_min2",
    "quantize_ta",
    "run_slot",
    "run_trials",
    "sample_device_distances",
    "rms_error",
    "save_forecaster",
    "save_trace",
    "sic_decode",
    "simulate_slots",
    "summarize",
    "ta_allocation_probability",
    "train_forecaster",
    "training_pairs",
    "underprediction_rate",
    "windowed_max_labels",
    "__version__",
]
