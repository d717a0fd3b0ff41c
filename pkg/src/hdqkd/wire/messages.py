"""Classical-channel message vocabulary and payload codecs.

All integers are big-endian and fixed width; bitmaps are packed LSB-first
(bit i of byte j covers item 8*j + i). Every message validates its own
payload on decode so malformed input surfaces as a typed error instead of
propagating garbage into the session.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "AbortReason",
    "Message",
    "Hello",
    "BasisAnnounce",
    "SiftMask",
    "DiscloseRequest",
    "DiscloseReply",
    "QberResult",
    "KeyReport",
    "Abort",
    "MESSAGE_TYPES",
    "pack_bits",
    "unpack_bits",
]


class AbortReason(enum.IntEnum):
    VERSION_MISMATCH = 1
    PROTOCOL_ORDER = 2
    PARAMETER_MISMATCH = 3
    QBER_EXCEEDED = 4
    DESYNC = 5
    TRANSPORT = 6
    INTERNAL = 7


def pack_bits(bits: np.ndarray) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little").tobytes()


def unpack_bits(data: bytes, count: int) -> np.ndarray:
    got = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
    if len(got) < count:
        raise ValueError("bitmap shorter than the announced range")
    return got[:count].astype(bool)


def _bitmap_len(count: int) -> int:
    return (count + 7) // 8


@dataclass(frozen=True)
class Hello:
    """Session opener: alphabet size, round count, protocol version."""

    dimension: int
    n_rounds: int
    protocol_version: int

    TYPE = 0x01

    def encode_payload(self) -> bytes:
        return struct.pack(">BQB", self.dimension, self.n_rounds, self.protocol_version)

    @classmethod
    def decode_payload(cls, data: bytes) -> "Hello":
        d, n, v = struct.unpack(">BQB", data)
        return cls(d, n, v)


@dataclass(frozen=True)
class BasisAnnounce:
    """Measurement bases for rounds [start, end): bit 0 = basis 1."""

    start: int
    end: int
    bases_bits: bytes

    TYPE = 0x02

    def __post_init__(self) -> None:
        if self.end < self.start:
            raise ValueError("round range is reversed")
        if len(self.bases_bits) != _bitmap_len(self.end - self.start):
            raise ValueError("bitmap length does not match the round range")

    def encode_payload(self) -> bytes:
        return struct.pack(">QQ", self.start, self.end) + self.bases_bits

    @classmethod
    def decode_payload(cls, data: bytes) -> "BasisAnnounce":
        start, end = struct.unpack(">QQ", data[:16])
        return cls(start, end, data[16:])

    def bases(self) -> np.ndarray:
        """Per-round basis values (1 or 2)."""
        return unpack_bits(self.bases_bits, self.end - self.start).astype(np.int8) + 1

    @classmethod
    def from_bases(cls, bases: np.ndarray, start: int = 0) -> "BasisAnnounce":
        bits = np.asarray(bases, dtype=np.int8) - 1
        return cls(start, start + len(bits), pack_bits(bits))


@dataclass(frozen=True)
class SiftMask:
    """Kept-round bitmap over [start, end): bit 1 = round survives sifting."""

    start: int
    end: int
    kept_bits: bytes

    TYPE = 0x03

    def __post_init__(self) -> None:
        if self.end < self.start:
            raise ValueError("round range is reversed")
        if len(self.kept_bits) != _bitmap_len(self.end - self.start):
            raise ValueError("bitmap length does not match the round range")

    def encode_payload(self) -> bytes:
        return struct.pack(">QQ", self.start, self.end) + self.kept_bits

    @classmethod
    def decode_payload(cls, data: bytes) -> "SiftMask":
        start, end = struct.unpack(">QQ", data[:16])
        return cls(start, end, data[16:])

    def kept(self) -> np.ndarray:
        return unpack_bits(self.kept_bits, self.end - self.start)

    @classmethod
    def from_mask(cls, mask: np.ndarray, start: int = 0) -> "SiftMask":
        return cls(start, start + len(mask), pack_bits(mask))


@dataclass(frozen=True)
class DiscloseRequest:
    """Strictly increasing global round indices to reveal for estimation."""

    rounds: tuple[int, ...]

    TYPE = 0x04

    def __post_init__(self) -> None:
        if any(b <= a for a, b in zip(self.rounds, self.rounds[1:])):
            raise ValueError("disclosure indices must be strictly increasing")

    def encode_payload(self) -> bytes:
        return struct.pack(">I", len(self.rounds)) + struct.pack(
            f">{len(self.rounds)}Q", *self.rounds
        )

    @classmethod
    def decode_payload(cls, data: bytes) -> "DiscloseRequest":
        (count,) = struct.unpack(">I", data[:4])
        body = data[4:]
        if len(body) != 8 * count:
            raise ValueError("disclosure payload length mismatch")
        return cls(tuple(struct.unpack(f">{count}Q", body)))


@dataclass(frozen=True)
class DiscloseReply:
    """Measured symbols for the requested rounds, in request order."""

    symbols: tuple[int, ...]

    TYPE = 0x05

    def encode_payload(self) -> bytes:
        return struct.pack(">I", len(self.symbols)) + bytes(self.symbols)

    @classmethod
    def decode_payload(cls, data: bytes) -> "DiscloseReply":
        (count,) = struct.unpack(">I", data[:4])
        body = data[4:]
        if len(body) != count:
            raise ValueError("disclosure payload length mismatch")
        return cls(tuple(body))


@dataclass(frozen=True)
class QberResult:
    e_b1: float
    e_b2: float

    TYPE = 0x06

    def encode_payload(self) -> bytes:
        return struct.pack(">dd", self.e_b1, self.e_b2)

    @classmethod
    def decode_payload(cls, data: bytes) -> "QberResult":
        e1, e2 = struct.unpack(">dd", data)
        return cls(e1, e2)


@dataclass(frozen=True)
class KeyReport:
    rate: float
    secret_bits: int

    TYPE = 0x07

    def encode_payload(self) -> bytes:
        return struct.pack(">dQ", self.rate, self.secret_bits)

    @classmethod
    def decode_payload(cls, data: bytes) -> "KeyReport":
        rate, bits = struct.unpack(">dQ", data)
        return cls(rate, bits)


@dataclass(frozen=True)
class Abort:
    reason: AbortReason

    TYPE = 0x08

    def encode_payload(self) -> bytes:
        return struct.pack(">B", int(self.reason))

    @classmethod
    def decode_payload(cls, data: bytes) -> "Abort":
        (code,) = struct.unpack(">B", data)
        return cls(AbortReason(code))


Message = (
    Hello
    | BasisAnnounce
    | SiftMask
    | DiscloseRequest
    | DiscloseReply
    | QberResult
    | KeyReport
    | Abort
)

MESSAGE_TYPES: dict[int, type] = {
    cls.TYPE: cls
    for cls in (
        Hello,
        BasisAnnounce,
        SiftMask,
        DiscloseRequest,
        DiscloseReply,
        QberResult,
        KeyReport,
        Abort,
    )
}
