from types import SimpleNamespace

import numpy as np
import pytest

from stripe_sim.channel import ChannelRealization, crandn, synthesize_pilot_rx
from stripe_sim.projection import build_pilots, compute_residuals, ls_estimate
from stripe_sim.topology import SystemConfig

_ACCEPTANCE_LINES = []


def make_instance(rng, L=4, N=4, K=5, tau_p=50, noise_var=1.0, oos_power=1.0, ue_power=1.0):
    """Pilot-phase instance with unit large-scale fading on every link."""
    config = SystemConfig(
        num_aps=L,
        antennas_per_ap=N,
        num_ues=K,
        pilot_len=tau_p,
        coherence_len=max(tau_p, 200),
        ue_power=ue_power,
        oos_power=oos_power,
        noise_var=noise_var,
    )
    chan = ChannelRealization(H=crandn(rng, (L, N, K)), g=crandn(rng, (L, N)))
    pilots = build_pilots(tau_p, K)
    s = crandn(rng, (tau_p,), oos_power)
    rx = synthesize_pilot_rx(chan, pilots, s, config, rng)
    est = ls_estimate(rx, pilots, config)
    res = compute_residuals(rx, est, pilots, config)
    s_bar = pilots.Psi.conj().T @ s
    return SimpleNamespace(config=config, chan=chan, pilots=pilots, s=s, s_bar=s_bar, rx=rx, est=est, res=res)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def instance(rng):
    return make_instance(rng)


@pytest.fixture
def noiseless(rng):
    return make_instance(rng, noise_var=0.0)


@pytest.fixture
def acceptance_log():
    def record(number, passed, detail):
        _ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
