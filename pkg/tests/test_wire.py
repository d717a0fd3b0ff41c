import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hdqkd.wire import (
    Abort,
    AbortReason,
    BadCrc,
    BadMagic,
    BasisAnnounce,
    DiscloseReply,
    DiscloseRequest,
    FrameTooLarge,
    Hello,
    KeyReport,
    QberResult,
    SiftMask,
    Truncated,
    UnknownType,
    UnsupportedFrameVersion,
    decode_frame,
    encode_frame,
)
from hdqkd.wire.framing import MAX_PAYLOAD
from hdqkd.wire.messages import pack_bits, unpack_bits


def sample_messages():
    rng = np.random.default_rng(0)
    bases = rng.integers(1, 3, 77).astype(np.int8)
    mask = rng.random(77) < 0.5
    return [
        Hello(3, 10**6, 1),
        Hello(2, 1, 0),
        BasisAnnounce.from_bases(bases),
        SiftMask.from_mask(mask),
        DiscloseRequest((0, 5, 17, 2**40)),
        DiscloseRequest(()),
        DiscloseReply((0, 1, 2, 2, 1)),
        DiscloseReply(()),
        QberResult(0.036, 0.04),
        QberResult(0.0, 1.0),
        KeyReport(1.0430286471542605, 324625),
        Abort(AbortReason.QBER_EXCEEDED),
    ]


@pytest.mark.parametrize("msg", sample_messages(), ids=lambda m: type(m).__name__)
def test_round_trip(msg):
    assert decode_frame(encode_frame(msg)) == msg


def test_known_frame_bytes():
    # golden frames, stable across releases and quoted in PROTOCOL.md
    frame = encode_frame(Hello(3, 10**6, 1))
    assert frame.hex() == "48514b4401010000000a0300000000000f4240015eb3d4c0"
    frame = encode_frame(Abort(AbortReason.QBER_EXCEEDED))
    assert frame.hex() == "48514b4401080000000104c93ea3ff"


def test_bad_magic():
    frame = bytearray(encode_frame(Hello(3, 10, 1)))
    frame[0] = ord("X")
    with pytest.raises(BadMagic):
        decode_frame(bytes(frame))


def test_unsupported_frame_version():
    frame = bytearray(encode_frame(Hello(3, 10, 1)))
    frame[4] = 9
    with pytest.raises(UnsupportedFrameVersion):
        decode_frame(bytes(frame))


def test_unknown_type():
    frame = bytearray(encode_frame(Hello(3, 10, 1)))
    frame[5] = 0x7F
    with pytest.raises(UnknownType):
        decode_frame(bytes(frame))


def test_flipped_payload_byte_fails_crc():
    frame = bytearray(encode_frame(QberResult(0.036, 0.04)))
    frame[12] ^= 0x01
    with pytest.raises(BadCrc):
        decode_frame(bytes(frame))


def test_flipped_type_byte_fails_crc():
    # the type byte is covered by the checksum, so retyping a frame
    # to another known type must not slip through
    frame = bytearray(encode_frame(QberResult(0.036, 0.04)))
    frame[5] = KeyReport.TYPE
    with pytest.raises(BadCrc):
        decode_frame(bytes(frame))


def test_truncations_at_every_boundary():
    frame = encode_frame(DiscloseRequest((1, 2, 3)))
    for cut in (0, 3, 9, 10, len(frame) - 5, len(frame) - 1):
        with pytest.raises(Truncated):
            decode_frame(frame[:cut])


def test_trailing_bytes_rejected():
    frame = encode_frame(Hello(3, 10, 1))
    with pytest.raises(Truncated):
        decode_frame(frame + b"\x00")


def test_oversized_length_rejected_from_header():
    header = b"HQKD" + bytes([1, Hello.TYPE]) + struct.pack(">I", 2**32 - 1)
    with pytest.raises(FrameTooLarge):
        decode_frame(header)  # header alone is enough to reject


def test_payload_above_limit_rejected_on_encode():
    with pytest.raises(FrameTooLarge):
        encode_frame(DiscloseReply(tuple([0] * (MAX_PAYLOAD + 8))))


def test_bitmap_round_trip_and_validation():
    rng = np.random.default_rng(1)
    bits = rng.random(130) < 0.3
    assert np.array_equal(unpack_bits(pack_bits(bits), 130), bits)
    with pytest.raises(ValueError):
        unpack_bits(b"\x00", 100)
    with pytest.raises(ValueError):
        BasisAnnounce(0, 100, b"\x00")  # bitmap too short for the range
    with pytest.raises(ValueError):
        SiftMask(10, 5, b"")


def test_disclose_request_must_increase():
    with pytest.raises(ValueError):
        DiscloseRequest((3, 3))
    with pytest.raises(ValueError):
        DiscloseRequest((5, 2))


@settings(max_examples=300, deadline=None)
@given(
    st.one_of(
        st.builds(
            Hello,
            dimension=st.integers(0, 255),
            n_rounds=st.integers(0, 2**64 - 1),
            protocol_version=st.integers(0, 255),
        ),
        st.builds(
            QberResult,
            e_b1=st.floats(allow_nan=False, allow_infinity=False),
            e_b2=st.floats(allow_nan=False, allow_infinity=False),
        ),
        st.builds(
            KeyReport,
            rate=st.floats(allow_nan=False, allow_infinity=False),
            secret_bits=st.integers(0, 2**64 - 1),
        ),
        st.builds(
            DiscloseReply,
            symbols=st.lists(st.integers(0, 255), max_size=64).map(tuple),
        ),
        st.lists(st.integers(0, 2**64 - 1), max_size=32, unique=True)
        .map(lambda xs: DiscloseRequest(tuple(sorted(xs)))),
        st.lists(st.sampled_from([1, 2]), min_size=0, max_size=200)
        .map(lambda bs: BasisAnnounce.from_bases(np.array(bs, dtype=np.int8))),
        st.lists(st.booleans(), min_size=0, max_size=200)
        .map(lambda bs: SiftMask.from_mask(np.array(bs, dtype=bool))),
        st.sampled_from(list(AbortReason)).map(Abort),
    )
)
def test_fuzzed_round_trip(msg):
    assert decode_frame(encode_frame(msg)) == msg
