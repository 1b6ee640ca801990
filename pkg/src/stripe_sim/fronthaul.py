"""Fronthaul messages, their wire format and the per-link load ledger.

Loads are counted in real scalars: a complex value costs 2, a Hermitian
``M x M`` matrix costs ``M**2`` (real diagonal plus the strict upper
triangle as real/imaginary pairs).

Links are numbered from 1: link ``l < L`` connects AP ``l`` to AP ``l+1``
and link ``L`` connects the last AP to the CPU.

Wire format of one message (little-endian, no padding)::

    kind   u8
    link   u16
    dims   3 x u32   (meaning depends on kind, see ``_dims``)
    body   float64 reals, exactly ``real_symbol_count`` of them
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .exceptions import ConfigError, FronthaulParseError
from .topology import SystemConfig

__all__ = [
    "MessageKind",
    "Phase",
    "FronthaulMessage",
    "FronthaulLedger",
    "charge",
    "expected_load",
    "pack_hermitian",
    "unpack_hermitian",
    "serialize",
    "deserialize",
    "iter_messages",
    "serialized_transport",
]

_HEADER = struct.Struct("<BHIII")


class MessageKind(enum.IntEnum):
    RESIDUAL_BLOCK = 1
    GRAMIAN_PARTIAL = 2
    SIGNAL_ESTIMATE = 3
    RLS_STATE = 4
    PAYLOAD_FORWARD = 5


class Phase(str, enum.Enum):
    PILOT = "pilot"
    PAYLOAD = "payload"
    # CPU -> AP broadcast of the interferer signal estimate, metered apart from Table-style loads
    RETURN = "return"


_DEFAULT_PHASE = {
    MessageKind.RESIDUAL_BLOCK: Phase.PILOT,
    MessageKind.GRAMIAN_PARTIAL: Phase.PILOT,
    MessageKind.SIGNAL_ESTIMATE: Phase.PILOT,
    MessageKind.RLS_STATE: Phase.PAYLOAD,
    MessageKind.PAYLOAD_FORWARD: Phase.PAYLOAD,
}


def pack_hermitian(M: np.ndarray) -> np.ndarray:
    """Pack a Hermitian matrix into ``n**2`` reals: diagonal, then upper-triangle re/im pairs."""
    n = M.shape[0]
    iu = np.triu_indices(n, k=1)
    upper = M[iu]
    out = np.empty(n * n)
    out[:n] = M.real.diagonal()
    out[n::2] = upper.real
    out[n + 1 :: 2] = upper.imag
    return out


def unpack_hermitian(packed: np.ndarray, n: int) -> np.ndarray:
    packed = np.asarray(packed, dtype=float)
    if packed.shape != (n * n,):
        raise ValueError(f"expected {n * n} packed reals, got {packed.shape}")
    M = np.zeros((n, n), dtype=complex)
    iu = np.triu_indices(n, k=1)
    M[iu] = packed[n::2] + 1j * packed[n + 1 :: 2]
    M = M + M.conj().T
    M[np.diag_indices(n)] = packed[:n]
    return M


def _c2r(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=complex).view(float).ravel()


def _r2c(a: np.ndarray, shape) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=float).view(complex).reshape(shape)


@dataclass(frozen=True, eq=False)
class FronthaulMessage:
    """
    One message on a fronthaul link.

    Payload-phase kinds may carry a trailing symbol axis; they then stand for
    that many symbol periods and are counted (and serialized) as if the
    per-period message were sent once per period.
    """

    kind: MessageKind
    arrays: tuple

    @classmethod
    def residual_block(cls, block: np.ndarray) -> FronthaulMessage:
        return cls(MessageKind.RESIDUAL_BLOCK, (np.asarray(block, dtype=complex),))

    @classmethod
    def gramian_partial(cls, gram: np.ndarray) -> FronthaulMessage:
        return cls(MessageKind.GRAMIAN_PARTIAL, (np.asarray(gram, dtype=complex),))

    @classmethod
    def signal_estimate(cls, s: np.ndarray) -> FronthaulMessage:
        return cls(MessageKind.SIGNAL_ESTIMATE, (np.asarray(s, dtype=complex),))

    @classmethod
    def rls_state(cls, est: np.ndarray, Q: np.ndarray) -> FronthaulMessage:
        return cls(MessageKind.RLS_STATE, (np.asarray(est, dtype=complex), np.asarray(Q, dtype=complex)))

    @classmethod
    def payload_forward(cls, y: np.ndarray, channel: np.ndarray) -> FronthaulMessage:
        return cls(
            MessageKind.PAYLOAD_FORWARD,
            (np.asarray(y, dtype=complex), np.asarray(channel, dtype=complex)),
        )

    @property
    def periods(self) -> int:
        if self.kind in (MessageKind.RLS_STATE, MessageKind.PAYLOAD_FORWARD):
            first = self.arrays[0]
            return 1 if first.ndim == 1 else first.shape[1]
        return 1

    @property
    def real_symbol_count(self) -> int:
        k = self.kind
        if k == MessageKind.RESIDUAL_BLOCK:
            return 2 * self.arrays[0].size
        if k == MessageKind.GRAMIAN_PARTIAL:
            return self.arrays[0].shape[0] ** 2
        if k == MessageKind.SIGNAL_ESTIMATE:
            return 2 * self.arrays[0].size
        if k == MessageKind.RLS_STATE:
            m = self.arrays[1].shape[0]
            return self.periods * (2 * m + m * m)
        n, c = self.arrays[1].shape
        return self.periods * (2 * n + 2 * n * c)

    def _dims(self) -> tuple[int, int, int]:
        a = self.arrays
        k = self.kind
        if k == MessageKind.RESIDUAL_BLOCK:
            return a[0].shape[0], a[0].shape[1], 0
        if k in (MessageKind.GRAMIAN_PARTIAL, MessageKind.SIGNAL_ESTIMATE):
            return a[0].shape[0], 0, 0
        # a zero symbol count marks an unbatched (1-D) vector
        batch = 0 if a[0].ndim == 1 else a[0].shape[1]
        if k == MessageKind.RLS_STATE:
            return a[1].shape[0], batch, 0
        return a[1].shape[0], a[1].shape[1], batch

    def body(self) -> np.ndarray:
        """The message as a flat array of ``real_symbol_count`` reals."""
        a = self.arrays
        k = self.kind
        if k in (MessageKind.RESIDUAL_BLOCK, MessageKind.SIGNAL_ESTIMATE):
            return _c2r(a[0])
        if k == MessageKind.GRAMIAN_PARTIAL:
            return pack_hermitian(a[0])
        vec = a[0] if a[0].ndim == 2 else a[0][:, None]
        if k == MessageKind.RLS_STATE:
            per = pack_hermitian(a[1])
            parts = [np.concatenate([_c2r(vec[:, t]), per]) for t in range(vec.shape[1])]
        else:
            ch = _c2r(a[1])
            parts = [np.concatenate([_c2r(vec[:, t]), ch]) for t in range(vec.shape[1])]
        return np.concatenate(parts)


def _from_body(kind: MessageKind, dims, body: np.ndarray) -> FronthaulMessage:
    d0, d1, d2 = dims
    if kind == MessageKind.RESIDUAL_BLOCK:
        return FronthaulMessage.residual_block(_r2c(body, (d0, d1)))
    if kind == MessageKind.GRAMIAN_PARTIAL:
        return FronthaulMessage.gramian_partial(unpack_hermitian(body, d0))
    if kind == MessageKind.SIGNAL_ESTIMATE:
        return FronthaulMessage.signal_estimate(_r2c(body, (d0,)))
    if kind == MessageKind.RLS_STATE:
        m, batch = d0, d1
        per = 2 * m + m * m
        rows = body.reshape(max(batch, 1), per)
        est = np.stack([_r2c(r[: 2 * m], (m,)) for r in rows], axis=1)
        Q = unpack_hermitian(rows[0, 2 * m :], m)
        return FronthaulMessage.rls_state(est if batch else est[:, 0], Q)
    n, c, batch = d0, d1, d2
    per = 2 * n + 2 * n * c
    rows = body.reshape(max(batch, 1), per)
    y = np.stack([_r2c(r[: 2 * n], (n,)) for r in rows], axis=1)
    channel = _r2c(rows[0, 2 * n :], (n, c))
    return FronthaulMessage.payload_forward(y if batch else y[:, 0], channel)


def _expected_reals(kind: MessageKind, dims) -> int:
    d0, d1, d2 = dims
    if kind == MessageKind.RESIDUAL_BLOCK:
        return 2 * d0 * d1
    if kind == MessageKind.GRAMIAN_PARTIAL:
        return d0 * d0
    if kind == MessageKind.SIGNAL_ESTIMATE:
        return 2 * d0
    if kind == MessageKind.RLS_STATE:
        return max(d1, 1) * (2 * d0 + d0 * d0)
    return max(d2, 1) * (2 * d0 + 2 * d0 * d1)


def serialize(message: FronthaulMessage, link: int = 0) -> bytes:
    body = message.body()
    assert body.size == message.real_symbol_count
    header = _HEADER.pack(int(message.kind), link, *message._dims())
    return header + body.astype("<f8").tobytes()


def deserialize(data: bytes, offset: int = 0) -> tuple[int, FronthaulMessage, int]:
    """
    Decode one message starting at `offset`.

    Returns
    -------
    link : int
    message : FronthaulMessage
    next_offset : int
        Offset of the first byte after the message.
    """
    if len(data) - offset < _HEADER.size:
        raise FronthaulParseError("truncated header", offset)
    kind_raw, link, *dims = _HEADER.unpack_from(data, offset)
    try:
        kind = MessageKind(kind_raw)
    except ValueError:
        raise FronthaulParseError(f"unknown message kind {kind_raw}", offset) from None
    start = offset + _HEADER.size
    nbytes = 8 * _expected_reals(kind, dims)
    if len(data) - start < nbytes:
        raise FronthaulParseError(
            f"truncated body: need {nbytes} bytes, have {len(data) - start}", start
        )
    body = np.frombuffer(data, dtype="<f8", count=nbytes // 8, offset=start).astype(float)
    return link, _from_body(kind, dims, body), start + nbytes


def iter_messages(data: bytes) -> Iterator[tuple[int, FronthaulMessage]]:
    offset = 0
    while offset < len(data):
        link, msg, offset = deserialize(data, offset)
        yield link, msg


def serialized_transport(link: int, message: FronthaulMessage) -> FronthaulMessage:
    """Transport hook that sends every message through the binary wire format."""
    got_link, out, _ = deserialize(serialize(message, link))
    assert got_link == link
    return out


Transport = Callable[[int, FronthaulMessage], FronthaulMessage]


class FronthaulLedger:
    """
    Per-link counters of real scalars sent, split by phase.

    Parameters
    ----------
    num_links : int
        Number of links in the stripe (equal to the number of APs).
    method : str, optional
        Label of the processing method this ledger meters.
    transport : callable, optional
        ``transport(link, message) -> message`` applied by :meth:`forward`;
        the identity when omitted.
    """

    def __init__(self, num_links: int, method=None, transport: Transport | None = None):
        self.num_links = num_links
        self.method = method
        self.transport = transport
        self.loads = {ph: np.zeros(num_links, dtype=np.int64) for ph in Phase}
        self.periods = {ph: np.zeros(num_links, dtype=np.int64) for ph in Phase}

    def charge(self, link: int, message: FronthaulMessage, phase: Phase | None = None) -> FronthaulLedger:
        if not 1 <= link <= self.num_links:
            raise IndexError(f"link index {link} outside 1..{self.num_links}")
        phase = Phase(phase) if phase is not None else _DEFAULT_PHASE[message.kind]
        self.loads[phase][link - 1] += message.real_symbol_count
        self.periods[phase][link - 1] = max(self.periods[phase][link - 1], message.periods)
        return self

    def forward(self, link: int, message: FronthaulMessage, phase: Phase | None = None) -> FronthaulMessage:
        """Charge `message` to `link` and return what the receiving end gets."""
        self.charge(link, message, phase)
        if self.transport is None:
            return message
        return self.transport(link, message)

    def per_period(self, phase: Phase) -> np.ndarray:
        """Load per symbol period (payload) or per coherence block (other phases)."""
        loads = self.loads[Phase(phase)]
        if Phase(phase) != Phase.PAYLOAD:
            return loads.copy()
        periods = np.maximum(self.periods[Phase.PAYLOAD], 1)
        return loads // periods

    @property
    def total(self) -> int:
        return int(sum(v.sum() for v in self.loads.values()))


def charge(ledger: FronthaulLedger, link: int, message: FronthaulMessage, phase=None) -> FronthaulLedger:
    return ledger.charge(link, message, phase)


def expected_load(method, phase, config: SystemConfig, full_gramian: bool = False) -> np.ndarray:
    """
    Closed-form per-link fronthaul load.

    Pilot and return loads are per coherence block; payload loads are per
    symbol period. With ``full_gramian=True`` the Gramian method is charged
    for forwarding the full ``tau_p x tau_p`` matrix instead of the reduced
    ``(tau_p - K)``-sized one.
    """
    from .oos_estimation import Method

    try:
        method = Method(method)
        phase = Phase(phase)
    except ValueError as err:
        raise ConfigError(str(err)) from None
    L, N, K = config.num_aps, config.antennas_per_ap, config.num_ues
    M = config.residual_dim
    links = np.arange(1, L + 1, dtype=np.int64)
    zeros = np.zeros(L, dtype=np.int64)
    ones = np.ones(L, dtype=np.int64)

    if phase == Phase.PILOT:
        table = {
            Method.CENTRALIZED: 2 * N * M * links,
            Method.LOCAL: zeros,
            Method.GRAMIAN: (config.pilot_len**2 if full_gramian else M * M) * ones,
            Method.PHASE_ROTATE: 2 * M * ones,
            Method.NO_SUPPRESSION: zeros,
            Method.GENIE: zeros,
        }
    elif phase == Phase.RETURN:
        table = {m: zeros for m in Method}
        table[Method.GRAMIAN] = table[Method.PHASE_ROTATE] = 2 * M * ones
    else:
        seq = (2 * (K + 1) + (K + 1) ** 2) * ones
        central = (2 * N + 2 * N * (K + 1)) * links
        table = {
            Method.CENTRALIZED: central,
            Method.GENIE: central,
            Method.LOCAL: seq,
            Method.GRAMIAN: seq,
            Method.PHASE_ROTATE: seq,
            Method.NO_SUPPRESSION: (2 * K + K * K) * ones,
        }
    return table[method].copy()
