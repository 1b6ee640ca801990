"""
Blind estimation of an out-of-system interferer
===============================================

The interferer has no known pilot, but everything it leaves in the
pilot-phase residual is rank one. This script builds one coherence block
and compares how well each estimator recovers that rank-one term.
"""

import numpy as np

from stripe_sim import SystemConfig, build_pilots, compute_residuals, ls_estimate
from stripe_sim.channel import crandn, ChannelRealization, synthesize_pilot_rx
from stripe_sim.fronthaul import FronthaulLedger, Phase
from stripe_sim.oos_estimation import Method, estimate

rng = np.random.default_rng(3)
config = SystemConfig(oos_power=1.0, noise_var=0.05)
L, N, K = config.num_aps, config.antennas_per_ap, config.num_ues

chan = ChannelRealization(H=crandn(rng, (L, N, K)), g=crandn(rng, (L, N)))
pilots = build_pilots(config.pilot_len, K)
s = crandn(rng, (config.pilot_len,), config.oos_power)
rx = synthesize_pilot_rx(chan, pilots, s, config, rng)

# %%
# Residuals: the received pilots minus the reconstructed served users
res = compute_residuals(rx, ls_estimate(rx, pilots, config), pilots, config)
print("residual per AP:", res.Zpsi.shape[1:], "(antennas x complement dimension)")

# %%
# Only the product g s_bar^H is identifiable, so compare that
s_bar = pilots.Psi.conj().T @ s
for method in (Method.LOCAL, Method.PHASE_ROTATE, Method.GRAMIAN, Method.CENTRALIZED):
    ledger = FronthaulLedger(L)
    est = estimate(method, res, ledger)
    err = np.mean([
        np.linalg.norm(est.outer(l) - np.outer(chan.g[l], s_bar.conj())) / np.linalg.norm(np.outer(chan.g[l], s_bar))
        for l in range(L)
    ])
    print(f"{method.value:>13}: relative error {err:.4f}, pilot load on last link {ledger.loads[Phase.PILOT][-1]}")
