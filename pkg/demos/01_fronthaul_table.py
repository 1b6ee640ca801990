"""
Fronthaul cost of the interference estimators
=============================================

Each access point on the stripe forwards a message to its neighbour. The
size of that message, counted in real scalars, is what the estimators
trade against estimation quality.
"""

import numpy as np

from stripe_sim import SystemConfig, expected_load
from stripe_sim.fronthaul import Phase
from stripe_sim.oos_estimation import Method

config = SystemConfig()
print(f"L={config.num_aps} APs, N={config.antennas_per_ap} antennas, K={config.num_ues} UEs, "
      f"tau_p={config.pilot_len}")

# %%
# Pilot phase: per-link load, link 1 leaves the first AP
for method in (Method.LOCAL, Method.GRAMIAN, Method.PHASE_ROTATE, Method.CENTRALIZED):
    print(f"{method.value:>13}  pilot   {expected_load(method, Phase.PILOT, config)}")

# %%
# Payload phase, per symbol period. Sequential LS forwards a fixed-size
# state, the centralized detector forwards everything it has seen.
for method in (Method.GRAMIAN, Method.CENTRALIZED):
    print(f"{method.value:>13}  payload {expected_load(method, Phase.PAYLOAD, config)}")

# %%
# Forwarding the full Gramian instead of its Hermitian half
full = expected_load(Method.GRAMIAN, Phase.PILOT, config, full_gramian=True)
print("full Gramian would cost", full[0], "instead of", expected_load(Method.GRAMIAN, Phase.PILOT, config)[0])
assert np.all(full >= expected_load(Method.GRAMIAN, Phase.PILOT, config))
