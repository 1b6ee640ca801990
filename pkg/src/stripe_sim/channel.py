"""Small-scale fading and received-signal synthesis.

Per-AP quantities are stacked along a leading AP axis: ``H`` has shape
``(L, N, K)``, ``g`` has shape ``(L, N)``. Payload signals may carry a
trailing symbol axis so a whole coherence block is synthesized at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .projection import PilotBasis
from .topology import LargeScale, SystemConfig

__all__ = [
    "ChannelRealization",
    "PilotRx",
    "PayloadRx",
    "crandn",
    "draw_channels",
    "draw_oos_signal",
    "synthesize_pilot_rx",
    "synthesize_payload_rx",
]


@dataclass(frozen=True)
class ChannelRealization:
    H: np.ndarray  # (L, N, K) served-UE channels
    g: np.ndarray  # (L, N) OoS channels


@dataclass(frozen=True)
class PilotRx:
    Y: np.ndarray  # (L, N, tau_p)
    s_pilot: np.ndarray  # (tau_p,) OoS transmit signal during the pilot phase


@dataclass(frozen=True)
class PayloadRx:
    y: np.ndarray  # (L, N) or (L, N, S)
    x_true: np.ndarray  # (K,) or (K, S)
    s_true: np.ndarray  # () or (S,)


def crandn(rng: np.random.Generator, shape, var=1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with variance `var` (broadcastable)."""
    scale = np.sqrt(np.asarray(var, dtype=float) / 2)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def draw_channels(large: LargeScale, config: SystemConfig, rng: np.random.Generator) -> ChannelRealization:
    beta = large.beta
    L, K1 = beta.shape
    if (L, K1) != (config.num_aps, config.num_ues + 1):
        raise ValueError(f"large-scale matrix shape {beta.shape} does not match config")
    N = config.antennas_per_ap
    G = crandn(rng, (L, N, K1), beta[:, None, :])
    return ChannelRealization(H=G[:, :, :-1], g=G[:, :, -1])


def draw_oos_signal(config: SystemConfig, rng: np.random.Generator, length: int) -> np.ndarray:
    if length < 1:
        raise ValueError("length must be at least 1")
    return crandn(rng, (length,), config.oos_power)


def synthesize_pilot_rx(
    chan: ChannelRealization,
    pilots: PilotBasis,
    oos_signal: np.ndarray,
    config: SystemConfig,
    rng: np.random.Generator,
) -> PilotRx:
    """Received pilot-phase block ``Y_l = sqrt(p tau_p) H_l Phi^H + g_l s^H + N_l`` at every AP."""
    tau_p = pilots.Phi.shape[0]
    s = np.asarray(oos_signal)
    if s.shape != (tau_p,):
        raise ValueError(f"oos_signal must have shape ({tau_p},), got {s.shape}")
    L, N, K = chan.H.shape
    if pilots.Phi.shape[1] != K:
        raise ValueError("pilot matrix and channel disagree on the number of UEs")
    gain = np.sqrt(config.ue_power * tau_p)
    Y = gain * chan.H @ pilots.Phi.conj().T
    Y = Y + chan.g[:, :, None] * s.conj()[None, None, :]
    Y = Y + crandn(rng, (L, N, tau_p), config.noise_var)
    return PilotRx(Y=Y, s_pilot=s)


def synthesize_payload_rx(
    chan: ChannelRealization,
    x: np.ndarray,
    s,
    config: SystemConfig,
    rng: np.random.Generator,
) -> PayloadRx:
    """
    Received payload signal ``y_l = sqrt(p) H_l x + g_l s + n_l``.

    `x` holds unit-energy symbols; the UE power enters through ``sqrt(p)``
    while `s` is drawn at the interferer's own power.

    Parameters
    ----------
    x : np.ndarray
        UE symbols, shape ``(K,)`` for one symbol period or ``(K, S)``.
    s : complex or np.ndarray
        OoS sample(s), scalar or shape ``(S,)`` matching `x`.
    """
    x = np.asarray(x)
    s = np.asarray(s)
    L, N, K = chan.H.shape
    if x.shape[0] != K or s.shape != x.shape[1:]:
        raise ValueError(f"payload shapes x={x.shape}, s={s.shape} inconsistent with K={K}")
    y = np.sqrt(config.ue_power) * (chan.H @ x) + np.multiply.outer(chan.g, s)
    y = y + crandn(rng, y.shape, config.noise_var)
    return PayloadRx(y=y, x_true=x, s_true=s)
