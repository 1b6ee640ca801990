"""System configuration, node placement and large-scale fading."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError

__all__ = [
    "SystemConfig",
    "Placement",
    "LargeScale",
    "place_entities",
    "pathloss_db",
    "large_scale",
    "perimeter_points",
]


@dataclass(frozen=True)
class SystemConfig:
    """
    Scalar parameters of one radio-stripe deployment.

    Powers are linear and normalized to the receiver noise, so ``noise_var``
    is 1 in all experiments and ``ue_power`` is the transmit power over the
    noise floor. ``oos_power`` defaults to -3 dB relative to ``ue_power``.

    ``noise_floor_db`` is only used when converting a swept uplink power in
    dB into the linear, noise-normalized ``ue_power``: a swept value of
    ``P`` dB gives ``p = 10**((P - noise_floor_db) / 10)``. The default of
    -118 dB places the genie detector near a BER of 1e-3 at 0 dB for the
    default geometry (-88 dBm noise, e.g. 80 MHz at a 7 dB noise figure).
    """

    num_aps: int = 4
    antennas_per_ap: int = 4
    num_ues: int = 5
    pilot_len: int = 50
    coherence_len: int = 200
    ue_power: float = 1.0
    oos_power: float | None = None
    noise_var: float = 1.0
    area_side: float = 500.0
    border_gap: float = 10.0
    ap_height_diff: float = 5.0
    rls_prior: float = 1e8
    rng_seed: int = 0
    noise_floor_db: float = -118.0
    oos_rel_db: float = -3.0

    def __post_init__(self):
        if self.oos_power is None:
            object.__setattr__(self, "oos_power", 10 ** (self.oos_rel_db / 10) * self.ue_power)
        self.validate()

    def validate(self) -> None:
        for name in ("num_aps", "antennas_per_ap", "num_ues", "pilot_len", "coherence_len"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.pilot_len <= self.num_ues:
            raise ConfigError(
                f"pilot_len ({self.pilot_len}) must exceed num_ues ({self.num_ues}) "
                "to leave a nonzero residual subspace"
            )
        if self.coherence_len < self.pilot_len:
            raise ConfigError("coherence_len must be at least pilot_len")
        if not self.ue_power > 0:
            raise ConfigError("ue_power must be strictly positive")
        # zero is allowed for noiseless / interference-free checks
        if self.oos_power < 0 or self.noise_var < 0:
            raise ConfigError("oos_power and noise_var must be nonnegative")
        if not self.rls_prior > 0:
            raise ConfigError("rls_prior must be strictly positive")
        if self.area_side <= 0 or not 0 <= self.border_gap < self.area_side / 2:
            raise ConfigError("need area_side > 0 and 0 <= border_gap < area_side / 2")

    @property
    def residual_dim(self) -> int:
        """Dimension of the pilot orthogonal complement, ``pilot_len - num_ues``."""
        return self.pilot_len - self.num_ues

    @property
    def payload_len(self) -> int:
        return self.coherence_len - self.pilot_len

    def with_power_db(self, power_db: float) -> SystemConfig:
        """Return a copy transmitting at the swept power ``power_db``, keeping the OoS power ratio."""
        ratio = self.oos_power / self.ue_power
        p = 10 ** ((power_db - self.noise_floor_db) / 10) * self.noise_var
        return dataclasses.replace(self, ue_power=p, oos_power=ratio * p)


@dataclass(frozen=True)
class Placement:
    ap_positions: np.ndarray  # (L, 2)
    ue_positions: np.ndarray  # (K, 2)
    oos_position: np.ndarray  # (2,)

    @property
    def tx_positions(self) -> np.ndarray:
        """All transmitters, served UEs first and the OoS source last, shape (K+1, 2)."""
        return np.vstack([self.ue_positions, self.oos_position[None, :]])


@dataclass(frozen=True)
class LargeScale:
    beta: np.ndarray  # (L, K+1), last column is the OoS source


def perimeter_points(num: int, side: float) -> np.ndarray:
    """
    Place `num` points at equal arc length along the border of a square.

    The walk starts at the midpoint of the bottom edge and runs
    counter-clockwise.
    """
    t = (np.arange(num) * 4 * side / num + side / 2) % (4 * side)
    edge, off = np.divmod(t, side)
    pts = np.empty((num, 2))
    for i, (e, o) in enumerate(zip(edge.astype(int), off)):
        if e == 0:
            pts[i] = (o, 0.0)
        elif e == 1:
            pts[i] = (side, o)
        elif e == 2:
            pts[i] = (side - o, side)
        else:
            pts[i] = (0.0, side - o)
    return pts


def place_entities(config: SystemConfig, rng: np.random.Generator) -> Placement:
    """Put APs on the square border and drop UEs and the OoS source uniformly inside."""
    lo = config.border_gap
    hi = config.area_side - config.border_gap
    aps = perimeter_points(config.num_aps, config.area_side)
    users = rng.uniform(lo, hi, size=(config.num_ues + 1, 2))
    return Placement(ap_positions=aps, ue_positions=users[:-1], oos_position=users[-1])


def pathloss_db(distance_3d):
    """
    3GPP UMi path gain at 2 GHz in dB.

    Parameters
    ----------
    distance_3d : float or array_like
        Distance in meters. Must be strictly positive.
    """
    d = np.asarray(distance_3d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be strictly positive")
    out = -30.5 - 36.7 * np.log10(d)
    return float(out) if out.ndim == 0 else out


def large_scale(placement: Placement, config: SystemConfig) -> LargeScale:
    diff = placement.ap_positions[:, None, :] - placement.tx_positions[None, :, :]
    horiz2 = np.sum(diff**2, axis=-1)
    dist = np.sqrt(horiz2 + config.ap_height_diff**2)
    return LargeScale(beta=10 ** (pathloss_db(dist) / 10))
