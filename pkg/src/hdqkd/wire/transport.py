"""Byte-stream drivers for sessions: sockets, TCP endpoints, loopback."""

from __future__ import annotations

import socket
import threading

from ..protocol import ChannelModel, KeyRateReport, ProtocolConfig
from .framing import FrameError, encode_frame, read_frame
from .messages import Abort, AbortReason
from .session import START, Phase, make_session, session_step

__all__ = [
    "TransportError",
    "SessionAbortedError",
    "SocketTransport",
    "run_over_stream",
    "run_bob_server",
    "run_alice_client",
    "loopback_run",
]

DEFAULT_TIMEOUT = 60.0


class TransportError(RuntimeError):
    """Stream failed: disconnect, timeout, or socket error."""


class SessionAbortedError(RuntimeError):
    """Session ended without a usable report."""

    def __init__(self, reason: AbortReason, message: str = ""):
        super().__init__(message or f"session aborted: {reason.name}")
        self.reason = reason


class SocketTransport:
    """Blocking exact-read/write wrapper over a connected socket."""

    def __init__(self, sock: socket.socket, timeout: float = DEFAULT_TIMEOUT):
        self._sock = sock
        sock.settimeout(timeout)

    def read_exactly(self, n: int) -> bytes:
        chunks = []
        remaining = n
        while remaining > 0:
            try:
                chunk = self._sock.recv(min(remaining, 1 << 20))
            except (OSError, socket.timeout) as exc:
                raise TransportError(f"receive failed: {exc}") from exc
            if not chunk:
                raise TransportError("peer closed the connection mid-frame")
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    def write(self, data: bytes) -> None:
        try:
            self._sock.sendall(data)
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


def run_over_stream(
    role: str,
    config: ProtocolConfig,
    channel: ChannelModel,
    seed: int,
    transport: SocketTransport,
) -> KeyRateReport:
    """Drive one session over a reliable byte stream to completion.

    Returns the key-rate report on a completed session, including a
    threshold abort (the report then carries ``aborted=True`` and zero
    secret bits). Raises :class:`SessionAbortedError` when the session
    dies for structural reasons (ordering, desync, version), and
    :class:`TransportError` if the stream breaks; no partial key is ever
    returned.
    """
    state = make_session(role, config, channel, seed)  # type: ignore[arg-type]
    if role == "alice":
        state, outgoing = session_step(state, START)
        for msg in outgoing:
            transport.write(encode_frame(msg))
    while not state.finished:
        try:
            msg = read_frame(transport.read_exactly)
        except FrameError as exc:
            try:
                transport.write(encode_frame(Abort(AbortReason.INTERNAL)))
            except TransportError:
                pass
            raise SessionAbortedError(
                AbortReason.INTERNAL, f"malformed frame from peer: {exc}"
            ) from exc
        state, outgoing = session_step(state, msg)
        for out in outgoing:
            transport.write(encode_frame(out))
    if state.phase is Phase.DONE:
        return state.report
    if state.abort_reason is AbortReason.QBER_EXCEEDED:
        return state.report
    raise SessionAbortedError(state.abort_reason or AbortReason.INTERNAL)


def run_bob_server(
    host: str,
    port: int,
    config: ProtocolConfig,
    channel: ChannelModel,
    seed: int,
    ready: threading.Event | None = None,
    bound_port: list | None = None,
    timeout: float = DEFAULT_TIMEOUT,
) -> KeyRateReport:
    """Listen for one session and run the measuring side."""
    server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        server.bind((host, port))
        server.listen(1)
        server.settimeout(timeout)
        if bound_port is not None:
            bound_port.append(server.getsockname()[1])
        if ready is not None:
            ready.set()
        try:
            conn, _ = server.accept()
        except (OSError, socket.timeout) as exc:
            raise TransportError(f"accept failed: {exc}") from exc
    finally:
        pass
    transport = SocketTransport(conn, timeout)
    try:
        return run_over_stream("bob", config, channel, seed, transport)
    finally:
        transport.close()
        server.close()


def run_alice_client(
    host: str,
    port: int,
    config: ProtocolConfig,
    channel: ChannelModel,
    seed: int,
    timeout: float = DEFAULT_TIMEOUT,
) -> KeyRateReport:
    """Connect to the measuring side and run the preparing side."""
    try:
        sock = socket.create_connection((host, port), timeout=timeout)
    except OSError as exc:
        raise TransportError(f"connect to {host}:{port} failed: {exc}") from exc
    transport = SocketTransport(sock, timeout)
    try:
        return run_over_stream("alice", config, channel, seed, transport)
    finally:
        transport.close()


def loopback_run(
    config: ProtocolConfig, channel: ChannelModel, seed: int
) -> tuple[KeyRateReport, KeyRateReport]:
    """Run both parties in-process over a socket pair.

    Returns (alice_report, bob_report); exceptions from either side are
    re-raised in the caller's thread.
    """
    left, right = socket.socketpair()
    bob_result: dict = {}

    def bob_main() -> None:
        transport = SocketTransport(right)
        try:
            bob_result["report"] = run_over_stream("bob", config, channel, seed, transport)
        except Exception as exc:  # noqa: BLE001 - re-raised in the caller
            bob_result["error"] = exc
        finally:
            transport.close()

    thread = threading.Thread(target=bob_main, daemon=True)
    thread.start()
    alice_transport = SocketTransport(left)
    try:
        alice_report = run_over_stream("alice", config, channel, seed, alice_transport)
    finally:
        alice_transport.close()
        thread.join(timeout=DEFAULT_TIMEOUT)
    if "error" in bob_result:
        raise bob_result["error"]
    return alice_report, bob_result["report"]
