"""Binary frame layer: magic, version, type, length, payload, CRC32.

Layout (all integers big-endian):

    offset  size  field
    0       4     magic "HQKD"
    4       1     frame version (currently 1)
    5       1     message type
    6       4     payload length (max 16 MiB)
    10      L     payload
    10+L    4     CRC32 over bytes 5 .. 10+L (type, length, payload)

The length bound is enforced from the header alone, before any payload
is read or buffered.
"""

from __future__ import annotations

import struct
import zlib
from typing import Callable

from .messages import MESSAGE_TYPES, Message

__all__ = [
    "MAGIC",
    "FRAME_VERSION",
    "MAX_PAYLOAD",
    "FrameError",
    "BadMagic",
    "BadCrc",
    "Truncated",
    "UnknownType",
    "FrameTooLarge",
    "UnsupportedFrameVersion",
    "encode_frame",
    "decode_frame",
    "read_frame",
]

MAGIC = b"HQKD"
FRAME_VERSION = 1
MAX_PAYLOAD = 16 * 1024 * 1024
_HEADER = struct.Struct(">4sBBI")


class FrameError(Exception):
    """Base class for malformed frames."""


class BadMagic(FrameError):
    pass


class BadCrc(FrameError):
    pass


class Truncated(FrameError):
    pass


class UnknownType(FrameError):
    pass


class FrameTooLarge(FrameError):
    pass


class UnsupportedFrameVersion(FrameError):
    pass


def encode_frame(msg: Message) -> bytes:
    payload = msg.encode_payload()
    if len(payload) > MAX_PAYLOAD:
        raise FrameTooLarge(f"payload of {len(payload)} bytes exceeds the limit")
    header = _HEADER.pack(MAGIC, FRAME_VERSION, msg.TYPE, len(payload))
    crc = zlib.crc32(header[4:] + payload) & 0xFFFFFFFF
    return header + payload + struct.pack(">I", crc)


def _parse_header(header: bytes) -> tuple[int, int]:
    magic, version, msg_type, length = _HEADER.unpack(header)
    if magic != MAGIC:
        raise BadMagic(f"bad frame magic {magic!r}")
    if version != FRAME_VERSION:
        raise UnsupportedFrameVersion(f"frame version {version} not supported")
    if length > MAX_PAYLOAD:
        raise FrameTooLarge(f"declared payload of {length} bytes exceeds the limit")
    if msg_type not in MESSAGE_TYPES:
        raise UnknownType(f"unknown message type 0x{msg_type:02x}")
    return msg_type, length


def _decode_body(msg_type: int, header: bytes, payload: bytes, crc_bytes: bytes) -> Message:
    (expected,) = struct.unpack(">I", crc_bytes)
    actual = zlib.crc32(header[4:] + payload) & 0xFFFFFFFF
    if actual != expected:
        raise BadCrc(f"crc mismatch: got 0x{actual:08x}, frame says 0x{expected:08x}")
    try:
        return MESSAGE_TYPES[msg_type].decode_payload(payload)
    except (struct.error, ValueError) as exc:
        raise Truncated(f"payload does not decode: {exc}") from exc


def decode_frame(data: bytes) -> Message:
    """Decode exactly one frame from a byte string.

    Raises:
        Truncated: buffer shorter than the declared frame or has trailing
            bytes beyond it.
        BadMagic / BadCrc / UnknownType / FrameTooLarge /
        UnsupportedFrameVersion: per the respective check.
    """
    if len(data) < _HEADER.size:
        raise Truncated(f"frame header needs {_HEADER.size} bytes, got {len(data)}")
    msg_type, length = _parse_header(data[: _HEADER.size])
    total = _HEADER.size + length + 4
    if len(data) < total:
        raise Truncated(f"frame needs {total} bytes, got {len(data)}")
    if len(data) > total:
        raise Truncated(f"{len(data) - total} trailing bytes after the frame")
    payload = data[_HEADER.size : _HEADER.size + length]
    return _decode_body(msg_type, data[: _HEADER.size], payload, data[total - 4 :])


def read_frame(read_exactly: Callable[[int], bytes]) -> Message:
    """Read one frame from a blocking byte source.

    ``read_exactly(n)`` must return exactly n bytes or raise; the length
    bound is checked before the payload is requested.
    """
    header = read_exactly(_HEADER.size)
    msg_type, length = _parse_header(header)
    payload = read_exactly(length)
    crc_bytes = read_exactly(4)
    return _decode_body(msg_type, header, payload, crc_bytes)
