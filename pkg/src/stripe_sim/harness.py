"""Monte-Carlo BER experiments over random deployments.

Every method sees the same channel, noise and data realization in a trial,
so method differences can be tested with paired statistics.
"""

from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import stats

from .channel import draw_channels, draw_oos_signal, synthesize_payload_rx, synthesize_pilot_rx
from .detection import (
    augment,
    detect_centralized,
    detect_genie,
    detect_no_suppression,
    detect_sequential,
    qpsk_demodulate,
    qpsk_modulate,
)
from .exceptions import ConfigError, DetectionError, EstimationError
from .fronthaul import FronthaulLedger, Phase, expected_load
from .oos_estimation import Method, estimate
from .projection import build_pilots, compute_residuals, ls_estimate
from .topology import Placement, SystemConfig, large_scale, place_entities

__all__ = [
    "ALL_METHODS",
    "ExperimentSpec",
    "TrialResult",
    "BerReport",
    "setup_rng",
    "trial_rng",
    "run_trial",
    "run_experiment",
    "paired_test",
    "emit_csv",
    "emit_fronthaul_csv",
    "emit_plotdata",
]

log = logging.getLogger(__name__)

ALL_METHODS = (
    Method.NO_SUPPRESSION,
    Method.LOCAL,
    Method.PHASE_ROTATE,
    Method.GRAMIAN,
    Method.CENTRALIZED,
    Method.GENIE,
)

# centralized estimation and the genie feed the batch pseudoinverse; the rest use sequential LS
_CENTRAL_DETECTION = {Method.CENTRALIZED, Method.GENIE}


@dataclass(frozen=True)
class ExperimentSpec:
    config: SystemConfig = field(default_factory=SystemConfig)
    power_grid_db: tuple = (-10.0, -8.0, -6.0, -4.0, -2.0, 0.0)
    num_setups: int = 200
    symbols_per_setup: int = 100
    methods: tuple = ALL_METHODS

    def __post_init__(self):
        object.__setattr__(self, "power_grid_db", tuple(float(p) for p in self.power_grid_db))
        object.__setattr__(self, "methods", tuple(Method(m) for m in self.methods))
        if self.num_setups < 1:
            raise ConfigError("num_setups must be at least 1")
        if self.symbols_per_setup < 1:
            raise ConfigError("symbols_per_setup must be at least 1")
        if not self.power_grid_db or list(self.power_grid_db) != sorted(self.power_grid_db):
            raise ConfigError("power grid must be nonempty and sorted")
        if not self.methods or len(set(self.methods)) != len(self.methods):
            raise ConfigError("methods must be a nonempty list without repeats")

    @property
    def num_symbols(self) -> int:
        return min(self.config.payload_len, self.symbols_per_setup)


@dataclass
class TrialResult:
    bit_errors: dict
    num_bits: int
    ledgers: dict


def setup_rng(seed: int, setup: int) -> np.random.Generator:
    return np.random.default_rng([seed, setup, 0])


def trial_rng(seed: int, setup: int, power_index: int) -> np.random.Generator:
    """Independent stream for one (setup, power) trial, derived from the master seed."""
    return np.random.default_rng([seed, setup, 1, power_index])


@lru_cache(maxsize=16)
def _pilots(tau_p: int, num_ues: int):
    return build_pilots(tau_p, num_ues)


def run_trial(
    config: SystemConfig,
    placement: Placement,
    methods,
    rng: np.random.Generator,
    num_symbols: int | None = None,
    transport=None,
) -> TrialResult:
    """
    Simulate one coherence block and count bit errors for every method.

    Parameters
    ----------
    config : SystemConfig
        Configuration carrying the (linear) transmit powers of this trial.
    placement : Placement
        Node positions, shared by all powers of one setup.
    methods : iterable of Method
    rng : np.random.Generator
    num_symbols : int, optional
        Payload symbols to detect; at most ``coherence_len - pilot_len``.
    transport : callable, optional
        Passed to every ledger, e.g. to replay fronthaul through the wire format.
    """
    K = config.num_ues
    S = config.payload_len if num_symbols is None else min(num_symbols, config.payload_len)
    chan = draw_channels(large_scale(placement, config), config, rng)
    pilots = _pilots(config.pilot_len, K)
    s_pilot = draw_oos_signal(config, rng, config.pilot_len)
    rx = synthesize_pilot_rx(chan, pilots, s_pilot, config, rng)
    est = ls_estimate(rx, pilots, config)
    res = compute_residuals(rx, est, pilots, config)

    bits = rng.integers(0, 2, size=(2 * K, S), dtype=np.uint8)
    x = qpsk_modulate(bits).symbols
    s_pay = draw_oos_signal(config, rng, S)
    prx = synthesize_payload_rx(chan, x, s_pay, config, rng)

    errors, ledgers = {}, {}
    for method in map(Method, methods):
        ledger = FronthaulLedger(config.num_aps, method, transport)
        if method == Method.GENIE:
            x_hat = detect_genie(prx.y, chan.H, chan.g, config, ledger)
        elif method == Method.NO_SUPPRESSION:
            x_hat = detect_no_suppression(prx.y, est.H_hat, config, "sequential", ledger)
        else:
            oos = estimate(method, res, ledger)
            channels = augment(est.H_hat, oos.g_hat, config.ue_power)
            if method in _CENTRAL_DETECTION:
                out = detect_centralized(prx.y, channels, ledger)
            else:
                out = detect_sequential(prx.y, channels, config, ledger)
            x_hat = out[:K]
        errors[method] = int(np.count_nonzero(qpsk_demodulate(x_hat) != bits))
        ledgers[method] = ledger
    return TrialResult(bit_errors=errors, num_bits=bits.size, ledgers=ledgers)


def _ledger_matches(ledger: FronthaulLedger, method: Method, config: SystemConfig) -> bool:
    return all(
        np.array_equal(ledger.per_period(ph), expected_load(method, ph, config)) for ph in Phase
    )


def _run_setup(spec: ExperimentSpec, seed: int, setup: int):
    placement = place_entities(spec.config, setup_rng(seed, setup))
    P = len(spec.power_grid_db)
    errors = np.zeros((len(spec.methods), P), dtype=np.int64)
    excluded = np.zeros(P, dtype=bool)
    table_ok = True
    for j, pdb in enumerate(spec.power_grid_db):
        cfg = spec.config.with_power_db(pdb)
        try:
            trial = run_trial(cfg, placement, spec.methods, trial_rng(seed, setup, j), spec.num_symbols)
        except (EstimationError, DetectionError) as err:
            log.warning("setup %d, power %.1f dB excluded: %s", setup, pdb, err)
            excluded[j] = True
            continue
        for i, m in enumerate(spec.methods):
            errors[i, j] = trial.bit_errors[m]
            table_ok &= _ledger_matches(trial.ledgers[m], m, cfg)
    return setup, errors, excluded, table_ok


def _num_workers() -> int:
    env = os.environ.get("STRIPE_SIM_THREADS")
    cpus = os.cpu_count() or 1
    if env:
        return max(1, min(cpus, int(env)))
    return cpus


@dataclass
class BerReport:
    """
    Aggregated bit-error counts.

    ``trial_errors[i, s, j]`` holds the errors of method ``i`` in setup ``s``
    at power index ``j``; excluded trials hold zero and are flagged in
    ``excluded``.
    """

    methods: tuple
    power_grid_db: tuple
    trial_errors: np.ndarray
    excluded: np.ndarray
    bits_per_trial: int
    fronthaul: dict
    fronthaul_matches_table: bool

    @property
    def bit_errors(self) -> np.ndarray:
        return self.trial_errors.sum(axis=1)

    @property
    def bits_total(self) -> np.ndarray:
        return (~self.excluded).sum(axis=0) * self.bits_per_trial

    @property
    def ber(self) -> np.ndarray:
        return self.bit_errors / np.maximum(self.bits_total, 1)

    def ci95(self) -> np.ndarray:
        """Half-width of the 95 % Wilson score interval for every (method, power)."""
        out = np.zeros(self.trial_errors.shape[0:1] + self.trial_errors.shape[2:])
        totals = self.bits_total
        for i in range(out.shape[0]):
            for j in range(out.shape[1]):
                if totals[j] == 0:
                    out[i, j] = np.nan
                    continue
                ci = stats.binomtest(int(self.bit_errors[i, j]), int(totals[j])).proportion_ci(
                    0.95, method="wilson"
                )
                out[i, j] = 0.5 * (ci.high - ci.low)
        return out

    def index(self, method) -> int:
        return self.methods.index(Method(method))

    def ber_of(self, method, power_db: float) -> float:
        return float(self.ber[self.index(method), self.power_grid_db.index(float(power_db))])


def run_experiment(spec: ExperimentSpec, workers: int | None = None) -> BerReport:
    """Run every (setup, power) trial of `spec`; deterministic in ``spec.config.rng_seed``."""
    seed = spec.config.rng_seed
    workers = _num_workers() if workers is None else workers
    M, P = len(spec.methods), len(spec.power_grid_db)
    trial_errors = np.zeros((M, spec.num_setups, P), dtype=np.int64)
    excluded = np.zeros((spec.num_setups, P), dtype=bool)
    table_ok = True

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(_run_setup, [spec] * spec.num_setups, [seed] * spec.num_setups, range(spec.num_setups))
            )
    else:
        results = (_run_setup(spec, seed, s) for s in range(spec.num_setups))
    for setup, errors, excl, ok in results:
        trial_errors[:, setup, :] = errors
        excluded[setup] = excl
        table_ok &= ok

    fronthaul = {
        m: {ph: expected_load(m, ph, spec.config) for ph in Phase} for m in spec.methods
    }
    return BerReport(
        methods=spec.methods,
        power_grid_db=spec.power_grid_db,
        trial_errors=trial_errors,
        excluded=excluded,
        bits_per_trial=2 * spec.config.num_ues * spec.num_symbols,
        fronthaul=fronthaul,
        fronthaul_matches_table=bool(table_ok),
    )


def paired_test(report: BerReport, better, worse, power_db: float) -> tuple[float, float]:
    """
    One-sided paired t-test that `better` makes fewer errors than `worse`.

    Returns the mean per-trial error difference (worse minus better) and the
    p-value over the non-excluded setups at `power_db`.
    """
    j = report.power_grid_db.index(float(power_db))
    keep = ~report.excluded[:, j]
    d = (
        report.trial_errors[report.index(worse), keep, j]
        - report.trial_errors[report.index(better), keep, j]
    ).astype(float)
    mean = float(d.mean())
    if np.all(d == d[0]):
        return mean, 0.0 if d[0] > 0 else 1.0
    return mean, float(stats.ttest_1samp(d, 0.0, alternative="greater").pvalue)


def _open_for_write(path):
    path = Path(path)
    try:
        return path.open("w", newline="")
    except OSError as err:
        raise OSError(f"cannot write {path}: {err}") from err


def emit_csv(report: BerReport, path) -> None:
    ci = report.ci95()
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "power_db", "ber", "ci95", "bits_total", "bit_errors"])
        for i, m in enumerate(report.methods):
            for j, pdb in enumerate(report.power_grid_db):
                w.writerow(
                    [m.value, repr(pdb), repr(float(report.ber[i, j])), repr(float(ci[i, j])),
                     int(report.bits_total[j]), int(report.bit_errors[i, j])]
                )


def emit_fronthaul_csv(report: BerReport, path) -> None:
    """Per-link loads: pilot and return per coherence block, payload per symbol period."""
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "phase", "link", "real_symbols"])
        for m in report.methods:
            for ph in Phase:
                for link, load in enumerate(report.fronthaul[m][ph], start=1):
                    w.writerow([m.value, ph.value, link, int(load)])


def emit_plotdata(report: BerReport, path) -> None:
    """Comma-separated series, one column per method, first column the power in dB."""
    with _open_for_write(path) as fh:
        fh.write("# power_db," + ",".join(m.value for m in report.methods) + "\n")
        for j, pdb in enumerate(report.power_grid_db):
            fh.write(",".join([repr(pdb)] + [repr(float(b)) for b in report.ber[:, j]]) + "\n")
