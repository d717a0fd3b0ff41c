"""Framed classical channel: wire format, messages, session state machine."""

from .framing import (
    BadCrc,
    BadMagic,
    FrameError,
    FrameTooLarge,
    Truncated,
    UnknownType,
    UnsupportedFrameVersion,
    decode_frame,
    encode_frame,
    read_frame,
)
from .messages import (
    Abort,
    AbortReason,
    BasisAnnounce,
    DiscloseReply,
    DiscloseRequest,
    Hello,
    KeyReport,
    Message,
    QberResult,
    SiftMask,
)
from .session import START, Phase, SessionState, make_session, session_step
from .transport import (
    SessionAbortedError,
    SocketTransport,
    TransportError,
    loopback_run,
    run_alice_client,
    run_bob_server,
    run_over_stream,
)

__all__ = [
    "FrameError", "BadMagic", "BadCrc", "Truncated", "UnknownType",
    "FrameTooLarge", "UnsupportedFrameVersion",
    "encode_frame", "decode_frame", "read_frame",
    "Message", "Hello", "BasisAnnounce", "SiftMask", "DiscloseRequest",
    "DiscloseReply", "QberResult", "KeyReport", "Abort", "AbortReason",
    "Phase", "START", "SessionState", "make_session", "session_step",
    "TransportError", "SessionAbortedError", "SocketTransport",
    "run_over_stream", "run_bob_server", "run_alice_client", "loopback_run",
]
