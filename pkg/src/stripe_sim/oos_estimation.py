"""Blind estimation of the out-of-system interferer from pilot-phase residuals.

Four estimators share one output convention: a signal estimate ``s_hat``
over the residual subspace and per-AP channel estimates
``g_hat[l] = Zpsi[l] @ s_hat / ||s_hat||**2``. Only the product
``g_hat[l] s_hat^H`` is identifiable, so the split of scale and phase between
the two factors is a convention (unit-norm ``s_hat`` whose largest-modulus
entry is real and nonnegative).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .exceptions import EstimationError
from .fronthaul import FronthaulLedger, FronthaulMessage, Phase
from .projection import Residuals

__all__ = [
    "Method",
    "Rank1Factors",
    "OosEstimate",
    "rank1_approx",
    "canonical_phase",
    "channel_from_signal",
    "estimate_centralized",
    "estimate_local",
    "accumulate_gramian",
    "estimate_gramian",
    "phase_align",
    "estimate_phase_rotate",
    "estimate",
]


class Method(str, enum.Enum):
    NO_SUPPRESSION = "NoSuppression"
    LOCAL = "Local"
    PHASE_ROTATE = "PhaseRotate"
    GRAMIAN = "Gramian"
    CENTRALIZED = "Centralized"
    GENIE = "Genie"

    def __str__(self) -> str:
        return self.value


# relative gap below which the top two singular values are treated as tied
DEGENERATE_GAP = 1e-12


@dataclass(frozen=True)
class Rank1Factors:
    u: np.ndarray
    v: np.ndarray
    sigma1: float
    degenerate: bool = False

    @property
    def matrix(self) -> np.ndarray:
        return self.sigma1 * np.outer(self.u, self.v.conj())


@dataclass
class OosEstimate:
    """
    Interferer estimate produced by one method.

    For :attr:`Method.LOCAL` ``s_bar_hat`` has one row per AP; for every
    other method it is a single vector shared by all APs. ``valid`` marks
    APs whose local residual carried a usable estimate.
    """

    s_bar_hat: np.ndarray
    g_hat: np.ndarray  # (L, N)
    method: Method
    valid: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.valid is None:
            self.valid = np.ones(self.g_hat.shape[0], dtype=bool)

    def outer(self, ap: int) -> np.ndarray:
        """The identifiable rank-1 term ``g_hat[ap] s_hat^H`` at one AP."""
        s = self.s_bar_hat[ap] if self.s_bar_hat.ndim == 2 else self.s_bar_hat
        return np.outer(self.g_hat[ap], s.conj())


def canonical_phase(v: np.ndarray) -> complex:
    """Unit-modulus factor that makes the largest-modulus entry of `v` real and nonnegative."""
    k = np.argmax(np.abs(v))
    a = v[k]
    return np.exp(-1j * np.angle(a)) if a != 0 else 1.0 + 0j


def rank1_approx(M: np.ndarray) -> Rank1Factors:
    """
    Best rank-1 approximation of a complex matrix.

    Returns the dominant singular triple with the canonical phase applied
    to ``v`` (and compensated in ``u``).

    Raises
    ------
    EstimationError
        If `M` is identically zero.
    """
    M = np.asarray(M)
    if not np.any(M):
        raise EstimationError("zero matrix has no dominant singular direction")
    U, sv, Vh = np.linalg.svd(M, full_matrices=False)
    v = Vh[0].conj()
    u = U[:, 0]
    c = canonical_phase(v)
    degenerate = sv.size > 1 and (sv[0] - sv[1]) < DEGENERATE_GAP * sv[0]
    return Rank1Factors(u=u * c, v=v * c, sigma1=float(sv[0]), degenerate=bool(degenerate))


def channel_from_signal(Zpsi: np.ndarray, s_hat: np.ndarray) -> np.ndarray:
    """Per-AP interferer channel ``Zpsi_l s_hat / ||s_hat||^2`` for every AP (stacked)."""
    return Zpsi @ s_hat / np.vdot(s_hat, s_hat).real


def estimate_centralized(res: Residuals, ledger: FronthaulLedger | None = None) -> OosEstimate:
    """Rank-1 fit of all APs' despread residuals collected at the CPU."""
    L, N, M = res.Zpsi.shape
    if ledger is not None:
        # accumulate-and-forward: link l carries the blocks of APs 1..l
        for link in range(1, L + 1):
            for ap in range(link):
                ledger.charge(link, FronthaulMessage.residual_block(res.Zpsi[ap]))
    f = rank1_approx(res.stacked)
    g_hat = (f.sigma1 * f.u).reshape(L, N)
    return OosEstimate(s_bar_hat=f.v, g_hat=g_hat, method=Method.CENTRALIZED)


def estimate_local(res: Residuals) -> OosEstimate:
    """Independent rank-1 fit at every AP; costs no fronthaul."""
    L, N, M = res.Zpsi.shape
    s_hat = np.zeros((L, M), dtype=complex)
    g_hat = np.zeros((L, N), dtype=complex)
    valid = np.zeros(L, dtype=bool)
    for ap in range(L):
        try:
            f = rank1_approx(res.Zpsi[ap])
        except EstimationError:
            continue
        s_hat[ap] = f.v
        g_hat[ap] = f.sigma1 * f.u
        valid[ap] = True
    return OosEstimate(s_bar_hat=s_hat, g_hat=g_hat, method=Method.LOCAL, valid=valid)


def _broadcast(ledger: FronthaulLedger | None, s_hat: np.ndarray, num_links: int) -> np.ndarray:
    if ledger is None:
        return s_hat
    msg = FronthaulMessage.signal_estimate(s_hat)
    for link in range(num_links, 0, -1):
        msg = ledger.forward(link, msg, Phase.RETURN)
    return msg.arrays[0]


def accumulate_gramian(res: Residuals, ledger: FronthaulLedger | None = None) -> np.ndarray:
    """
    Sum the local Gramians ``Zpsi_l^H Zpsi_l`` along the stripe.

    Each AP adds its own term to the running sum received from its
    predecessor and forwards the result; the last AP delivers the total to
    the CPU.
    """
    L, N, M = res.Zpsi.shape
    acc = np.zeros((M, M), dtype=complex)
    for ap in range(L):
        local = res.Zpsi[ap].conj().T @ res.Zpsi[ap]
        acc = acc + local
        acc = 0.5 * (acc + acc.conj().T)
        msg = FronthaulMessage.gramian_partial(acc)
        if ledger is not None:
            msg = ledger.forward(ap + 1, msg)
        acc = msg.arrays[0]
    return acc


def estimate_gramian(res: Residuals, ledger: FronthaulLedger | None = None) -> OosEstimate:
    gram = accumulate_gramian(res, ledger)
    if not np.any(gram):
        raise EstimationError("accumulated Gramian is zero")
    _, vecs = np.linalg.eigh(gram)
    s_hat = vecs[:, -1]
    s_hat = s_hat * canonical_phase(s_hat)
    L = res.Zpsi.shape[0]
    s_hat = _broadcast(ledger, s_hat, L)
    return OosEstimate(s_bar_hat=s_hat, g_hat=channel_from_signal(res.Zpsi, s_hat), method=Method.GRAMIAN)


def phase_align(s_prev: np.ndarray, s_local: np.ndarray) -> tuple[float, np.ndarray]:
    """
    Rotate `s_local` onto `s_prev` and average the two.

    The angle ``-arg(s_prev^H s_local)`` minimizes
    ``||s_prev - s_local e^{j alpha}||``; when the inner product vanishes the
    angle is taken as 0.

    Returns
    -------
    alpha : float
    merged : np.ndarray
        ``0.5 * (s_prev + s_local * exp(1j * alpha))``
    """
    s_prev = np.asarray(s_prev)
    s_local = np.asarray(s_local)
    if s_prev.shape != s_local.shape:
        raise ValueError("phase_align needs vectors of equal length")
    inner = np.vdot(s_prev, s_local)
    alpha = float(-np.angle(inner)) if inner != 0 else 0.0
    return alpha, 0.5 * (s_prev + s_local * np.exp(1j * alpha))


def estimate_phase_rotate(res: Residuals, ledger: FronthaulLedger | None = None) -> OosEstimate:
    """
    Sequential phase-rotate-and-average along the stripe.

    Starting from a zero vector, each AP aligns its local dominant right
    singular vector to the estimate received from upstream, averages the
    two with equal weight and forwards the result. APs with an all-zero
    residual forward the incoming estimate unchanged.
    """
    L, N, M = res.Zpsi.shape
    local = estimate_local(res)
    if not local.valid.any():
        raise EstimationError("no AP has a nonzero residual")
    s_hat = np.zeros(M, dtype=complex)
    for ap in range(L):
        if local.valid[ap]:
            _, s_hat = phase_align(s_hat, local.s_bar_hat[ap])
        msg = FronthaulMessage.signal_estimate(s_hat)
        if ledger is not None:
            msg = ledger.forward(ap + 1, msg)
        s_hat = msg.arrays[0]
    s_hat = _broadcast(ledger, s_hat, L)
    return OosEstimate(
        s_bar_hat=s_hat, g_hat=channel_from_signal(res.Zpsi, s_hat), method=Method.PHASE_ROTATE
    )


_ESTIMATORS = {
    Method.CENTRALIZED: estimate_centralized,
    Method.GRAMIAN: estimate_gramian,
    Method.PHASE_ROTATE: estimate_phase_rotate,
}


def estimate(method, res: Residuals, ledger: FronthaulLedger | None = None) -> OosEstimate:
    """Dispatch to the estimator for `method` (one of the four blind estimators)."""
    method = Method(method)
    if method == Method.LOCAL:
        return estimate_local(res)
    try:
        fn = _ESTIMATORS[method]
    except KeyError:
        raise ValueError(f"{method} does not estimate the interferer") from None
    return fn(res, ledger)
