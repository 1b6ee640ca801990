"""QPSK mapping and payload detectors.

Detectors take the received payload ``y`` with shape ``(L, N)`` or
``(L, N, S)`` and per-AP channel matrices with shape ``(L, N, C)`` and
return the LS estimate with shape ``(C,)`` or ``(C, S)``. When the
interferer is handled as a fictitious user, its channel occupies the last
column and its estimate the last row; callers drop that row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DetectionError
from .fronthaul import FronthaulLedger, FronthaulMessage
from .topology import SystemConfig

__all__ = [
    "QpskSymbols",
    "RlsState",
    "QPSK_POINTS",
    "qpsk_modulate",
    "qpsk_demodulate",
    "augment",
    "pinv_solve",
    "detect_centralized",
    "rls_init",
    "rls_step",
    "detect_sequential",
    "detect_no_suppression",
    "detect_genie",
]

# constellation point for the bit pair (first, second) at index 2*first + second
QPSK_POINTS = np.array([1 + 1j, -1 + 1j, 1 - 1j, -1 - 1j]) / np.sqrt(2)
_BITS = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.uint8)

PINV_RTOL = 1e-12


@dataclass(frozen=True)
class QpskSymbols:
    bits: np.ndarray
    symbols: np.ndarray


@dataclass(frozen=True)
class RlsState:
    est: np.ndarray  # (C,) or (C, S)
    Q: np.ndarray  # (C, C)


def qpsk_modulate(bits) -> QpskSymbols:
    """
    Map bit pairs to unit-energy QPSK symbols with a Gray code.

    Bits ``2k`` and ``2k+1`` form symbol ``k``: 00 -> (1+j), 01 -> (-1+j),
    11 -> (-1-j), 10 -> (1-j), all scaled by 1/sqrt(2). A trailing axis is
    carried through, so ``(2K, S)`` bits give ``(K, S)`` symbols.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.shape[0] % 2:
        raise ValueError("number of bits must be even")
    first, second = bits[0::2], bits[1::2]
    symbols = ((1 - 2.0 * second) + 1j * (1 - 2.0 * first)) / np.sqrt(2)
    return QpskSymbols(bits=bits, symbols=symbols)


def qpsk_demodulate(estimates) -> np.ndarray:
    """Nearest-point decisions, returned as bits in the layout `qpsk_modulate` expects."""
    z = np.asarray(estimates)
    idx = np.argmin(np.abs(z[..., None] - QPSK_POINTS) ** 2, axis=-1)
    pairs = _BITS[idx]  # (K, [S,] 2)
    out = np.empty((2 * z.shape[0], *z.shape[1:]), dtype=np.uint8)
    out[0::2] = pairs[..., 0]
    out[1::2] = pairs[..., 1]
    return out


def augment(H_hat: np.ndarray, g_hat: np.ndarray | None, ue_power: float = 1.0) -> np.ndarray:
    """
    Effective per-AP channel ``[sqrt(p) H_hat, g_hat]`` of shape ``(L, N, K+1)``.

    UEs transmit with power `ue_power`, so their columns are scaled by its
    square root. The interferer column is left as is: its scale is absorbed
    by the (discarded) fictitious-user estimate. With ``g_hat=None`` the
    result has only the K UE columns.
    """
    H_eff = np.sqrt(ue_power) * H_hat
    if g_hat is None:
        return H_eff
    return np.concatenate([H_eff, g_hat[:, :, None]], axis=2)


def pinv_solve(A: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``pinv(A) @ y`` after checking that `A` has full column rank."""
    U, sv, Vh = np.linalg.svd(A, full_matrices=False)
    if sv.size < A.shape[1] or sv[-1] <= PINV_RTOL * sv[0]:
        raise DetectionError(f"channel matrix of shape {A.shape} is rank deficient")
    return Vh.conj().T @ ((U.conj().T @ y) / (sv[:, None] if y.ndim == 2 else sv))


def detect_centralized(y: np.ndarray, channels: np.ndarray, ledger: FronthaulLedger | None = None) -> np.ndarray:
    L, N, C = channels.shape
    if ledger is not None:
        for link in range(1, L + 1):
            for ap in range(link):
                ledger.charge(link, FronthaulMessage.payload_forward(y[ap], channels[ap]))
    A = channels.reshape(L * N, C)
    Y = y.reshape(L * N, *y.shape[2:])
    return pinv_solve(A, Y)


def rls_init(num_cols: int, alpha: float, num_symbols: int | None = None) -> RlsState:
    shape = (num_cols,) if num_symbols is None else (num_cols, num_symbols)
    return RlsState(est=np.zeros(shape, dtype=complex), Q=alpha * np.eye(num_cols, dtype=complex))


def rls_step(state: RlsState, y_l: np.ndarray, A_l: np.ndarray, noise_var: float) -> RlsState:
    """
    Fold one AP's observation into the running sequential-LS estimate.

    ``T = Q A^H (noise_var I + A Q A^H)^{-1}``,
    ``est <- est + T (y_l - A est)``, ``Q <- (I - T A) Q``.
    """
    Q = state.Q
    N = A_l.shape[0]
    QAh = Q @ A_l.conj().T
    innov = noise_var * np.eye(N) + A_l @ QAh
    try:
        # T = QAh innov^{-1}; innov is Hermitian so solve innov T^H = QAh^H
        T = np.linalg.solve(innov, QAh.conj().T).conj().T
    except np.linalg.LinAlgError:
        raise DetectionError("singular innovation matrix in sequential LS") from None
    if not np.all(np.isfinite(T)) or np.linalg.cond(innov) > 1 / np.finfo(float).eps:
        raise DetectionError("singular innovation matrix in sequential LS")
    est = state.est + T @ (y_l - A_l @ state.est)
    Q_new = Q - T @ A_l @ Q
    Q_new = 0.5 * (Q_new + Q_new.conj().T)
    return RlsState(est=est, Q=Q_new)


def detect_sequential(
    y: np.ndarray,
    channels: np.ndarray,
    config: SystemConfig,
    ledger: FronthaulLedger | None = None,
) -> np.ndarray:
    """
    Sequential LS along the stripe.

    AP ``l`` updates the state received from AP ``l-1`` with its own
    observation and forwards ``(est, Q)`` on link ``l``.
    """
    L, N, C = channels.shape
    state = rls_init(C, config.rls_prior, None if y.ndim == 2 else y.shape[2])
    for ap in range(L):
        state = rls_step(state, y[ap], channels[ap], config.noise_var)
        if ledger is not None:
            msg = ledger.forward(ap + 1, FronthaulMessage.rls_state(state.est, state.Q))
            state = RlsState(est=msg.arrays[0], Q=msg.arrays[1])
    return state.est


def detect_no_suppression(
    y: np.ndarray,
    H_hat: np.ndarray,
    config: SystemConfig,
    mode: str = "sequential",
    ledger: FronthaulLedger | None = None,
) -> np.ndarray:
    """Detect with the served-UE channel estimates only, ignoring the interferer."""
    channels = augment(H_hat, None, config.ue_power)
    if mode == "centralized":
        return detect_centralized(y, channels, ledger)
    if mode == "sequential":
        return detect_sequential(y, channels, config, ledger)
    raise ValueError(f"unknown detection mode {mode!r}")


def detect_genie(
    y: np.ndarray,
    H: np.ndarray,
    g: np.ndarray,
    config: SystemConfig,
    ledger: FronthaulLedger | None = None,
) -> np.ndarray:
    """Centralized LS with the true channels; returns the UE symbol estimates only."""
    return detect_centralized(y, augment(H, g, config.ue_power), ledger)[: H.shape[2]]
