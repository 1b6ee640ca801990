"""Link-level simulator of uplink cell-free massive MIMO on a radio stripe with
out-of-system interference suppression."""

from .exceptions import ConfigError, DetectionError, EstimationError, FronthaulParseError
from .topology import SystemConfig, place_entities, large_scale, pathloss_db
from .projection import build_pilots, ls_estimate, compute_residuals, project_oos_signal
from .channel import draw_channels, draw_oos_signal, synthesize_pilot_rx, synthesize_payload_rx
from .fronthaul import FronthaulLedger, FronthaulMessage, Phase, expected_load
from .oos_estimation import (
    Method,
    rank1_approx,
    estimate_centralized,
    estimate_local,
    estimate_gramian,
    estimate_phase_rotate,
    phase_align,
)
from .detection import qpsk_modulate, qpsk_demodulate, detect_centralized, detect_sequential
from .harness import ExperimentSpec, BerReport, run_trial, run_experiment

__version__ = "0.1.0"
