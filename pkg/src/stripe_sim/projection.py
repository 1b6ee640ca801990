"""Orthogonal pilots, LS channel estimation and the residual subspace."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .exceptions import ConfigError

if TYPE_CHECKING:
    from .channel import PilotRx
    from .topology import SystemConfig

__all__ = [
    "PilotBasis",
    "Residuals",
    "ChannelEstimates",
    "build_pilots",
    "ls_estimate",
    "compute_residuals",
    "project_oos_signal",
]


@dataclass(frozen=True)
class PilotBasis:
    Phi: np.ndarray  # (tau_p, K), orthonormal columns
    P: np.ndarray  # (tau_p, tau_p), projector onto the complement of span(Phi)
    Psi: np.ndarray  # (tau_p, tau_p - K), orthonormal basis of range(P)


@dataclass(frozen=True)
class Residuals:
    Z: np.ndarray  # (L, N, tau_p)
    Zpsi: np.ndarray  # (L, N, tau_p - K)

    @property
    def stacked(self) -> np.ndarray:
        """All APs' despread residuals as one ``(L*N, tau_p - K)`` matrix."""
        L, N, M = self.Zpsi.shape
        return self.Zpsi.reshape(L * N, M)


@dataclass(frozen=True)
class ChannelEstimates:
    H_hat: np.ndarray  # (L, N, K)


def build_pilots(tau_p: int, num_ues: int) -> PilotBasis:
    """
    Split the unitary DFT matrix into pilots and a complement basis.

    The first `num_ues` columns become the pilot matrix and the remaining
    ``tau_p - num_ues`` columns form ``Psi``; being columns of one unitary
    matrix, ``Psi Psi^H`` equals ``I - Phi Phi^H`` exactly.
    """
    if num_ues < 1 or tau_p <= num_ues:
        raise ConfigError(f"need tau_p > K >= 1, got tau_p={tau_p}, K={num_ues}")
    F = np.fft.fft(np.eye(tau_p)) / np.sqrt(tau_p)
    Phi = F[:, :num_ues]
    Psi = F[:, num_ues:]
    P = np.eye(tau_p) - Phi @ Phi.conj().T
    return PilotBasis(Phi=Phi, P=P, Psi=Psi)


def ls_estimate(rx: PilotRx, pilots: PilotBasis, config: SystemConfig) -> ChannelEstimates:
    tau_p = pilots.Phi.shape[0]
    return ChannelEstimates(H_hat=rx.Y @ pilots.Phi / np.sqrt(config.ue_power * tau_p))


def compute_residuals(
    rx: PilotRx, est: ChannelEstimates, pilots: PilotBasis, config: SystemConfig
) -> Residuals:
    """Subtract the reconstructed pilot component and despread onto ``Psi``."""
    tau_p = pilots.Phi.shape[0]
    Z = rx.Y - np.sqrt(config.ue_power * tau_p) * est.H_hat @ pilots.Phi.conj().T
    return Residuals(Z=Z, Zpsi=Z @ pilots.Psi)


def project_oos_signal(s: np.ndarray, pilots: PilotBasis) -> np.ndarray:
    return pilots.Psi.conj().T @ s
