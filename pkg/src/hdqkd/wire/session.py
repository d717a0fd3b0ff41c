"""Two-party session state machine for the framed classical channel.

Both processes are configured with the same channel model and master
seed, so each can derive the full joint simulation of the quantum link
locally (the photons never cross the classical wire). The message
exchange then performs the classical protocol faithfully: Bob announces
his bases only after his measurement record exists, Alice computes the
sift mask and the disclosure sample, and both sides independently compute
the error rates and key rate, verifying every peer message against their
own derivation. Any mismatch means the two processes were configured
differently and the session aborts with a desync code.

``session_step`` is a pure transition: (state, event) -> (state, replies).
No key symbols other than the disclosed sample ever enter a message.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from ..protocol import (
    NO_CLICK,
    AliceRecords,
    BobRecords,
    ChannelModel,
    KeyRateReport,
    ProtocolConfig,
    QberReport,
    SiftedKey,
    alice_prepare,
    assemble_report,
    bob_choose_bases,
    estimate_qber,
    measure_rounds,
    sift,
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

__all__ = ["Phase", "START", "SessionState", "make_session", "session_step",
           "PROTOCOL_VERSION"]

PROTOCOL_VERSION = 1
_RATE_MATCH_TOL = 1e-9

START = "start"

Role = Literal["alice", "bob"]


class Phase(enum.Enum):
    INIT = "init"
    ANNOUNCED = "announced"
    SIFTED = "sifted"
    ESTIMATED = "estimated"
    DONE = "done"
    ABORTED = "aborted"


@dataclass(frozen=True)
class SessionState:
    role: Role
    phase: Phase
    config: ProtocolConfig
    seed: int
    alice: AliceRecords
    bob: BobRecords
    sifted: SiftedKey
    kept_mask: np.ndarray
    disclosed_rounds: tuple[int, ...]
    qber: QberReport
    report: KeyRateReport
    hello_sent: bool = False
    peer_hello_seen: bool = False
    abort_reason: AbortReason | None = None

    @property
    def finished(self) -> bool:
        return self.phase in (Phase.DONE, Phase.ABORTED)


def make_session(
    role: Role, config: ProtocolConfig, channel: ChannelModel, seed: int
) -> SessionState:
    """Derive the local view of the session from the shared seed.

    Runs the co-simulated quantum phase (prepare and measure) and the
    deterministic estimation schedule, so the state machine afterwards
    only exchanges and validates classical artifacts.
    """
    alice = alice_prepare(config, seed)
    bob_basis = bob_choose_bases(config, seed)
    bob = measure_rounds(alice, bob_basis, channel, seed)
    sifted = sift(alice, bob)
    qber, remaining = estimate_qber(
        sifted, config.disclosure_fraction, seed, config.min_disclosed
    )
    report = assemble_report(config, seed, len(sifted), qber, len(remaining))
    kept_mask = np.zeros(config.n_rounds, dtype=bool)
    kept_mask[sifted.rounds] = True
    disclosed = tuple(
        int(r) for r in np.setdiff1d(sifted.rounds, remaining.rounds)
    )
    return SessionState(
        role=role,
        phase=Phase.INIT,
        config=config,
        seed=seed,
        alice=alice,
        bob=bob,
        sifted=sifted,
        kept_mask=kept_mask,
        disclosed_rounds=disclosed,
        qber=qber,
        report=report,
    )


def _hello(state: SessionState) -> Hello:
    return Hello(state.config.dimension, state.config.n_rounds, PROTOCOL_VERSION)


def _abort(state: SessionState, reason: AbortReason) -> tuple[SessionState, list[Message]]:
    out = [] if reason is None else [Abort(reason)]
    return replace(state, phase=Phase.ABORTED, abort_reason=reason), out


def _aborted_by_peer(state: SessionState, msg: Abort) -> tuple[SessionState, list[Message]]:
    return replace(state, phase=Phase.ABORTED, abort_reason=msg.reason), []


def _check_hello(state: SessionState, msg: Hello) -> AbortReason | None:
    if msg.protocol_version != PROTOCOL_VERSION:
        return AbortReason.VERSION_MISMATCH
    if msg.dimension != state.config.dimension or msg.n_rounds != state.config.n_rounds:
        return AbortReason.PARAMETER_MISMATCH
    return None


def _alice_step(state: SessionState, event) -> tuple[SessionState, list[Message]]:
    if event == START and state.phase is Phase.INIT and not state.hello_sent:
        return replace(state, hello_sent=True), [_hello(state)]
    if isinstance(event, Abort):
        return _aborted_by_peer(state, event)
    if isinstance(event, Hello) and state.phase is Phase.INIT and state.hello_sent:
        problem = _check_hello(state, event)
        if problem is not None:
            return _abort(state, problem)
        return replace(state, peer_hello_seen=True), []
    if (
        isinstance(event, BasisAnnounce)
        and state.phase is Phase.INIT
        and state.peer_hello_seen
    ):
        if (event.start, event.end) != (0, state.config.n_rounds):
            return _abort(state, AbortReason.DESYNC)
        if not np.array_equal(event.bases(), state.bob.basis):
            return _abort(state, AbortReason.DESYNC)
        out = [
            SiftMask.from_mask(state.kept_mask),
            DiscloseRequest(state.disclosed_rounds),
        ]
        return replace(state, phase=Phase.SIFTED), out
    if isinstance(event, DiscloseReply) and state.phase is Phase.SIFTED:
        expected = tuple(
            int(state.bob.outcome[r]) for r in state.disclosed_rounds
        )
        if event.symbols != expected:
            return _abort(state, AbortReason.DESYNC)
        result = QberResult(state.qber.e_b1, state.qber.e_b2)
        if state.report.aborted:
            next_state = replace(
                state, phase=Phase.ABORTED, abort_reason=AbortReason.QBER_EXCEEDED
            )
            return next_state, [result, Abort(AbortReason.QBER_EXCEEDED)]
        return replace(state, phase=Phase.ESTIMATED), [result]
    if isinstance(event, KeyReport) and state.phase is Phase.ESTIMATED:
        if (
            abs(event.rate - state.report.rate) > _RATE_MATCH_TOL
            or event.secret_bits != state.report.secret_bits
        ):
            return _abort(state, AbortReason.DESYNC)
        return replace(state, phase=Phase.DONE), []
    return _abort(state, AbortReason.PROTOCOL_ORDER)


def _bob_step(state: SessionState, event) -> tuple[SessionState, list[Message]]:
    if isinstance(event, Abort):
        return _aborted_by_peer(state, event)
    if isinstance(event, Hello) and state.phase is Phase.INIT:
        problem = _check_hello(state, event)
        if problem is not None:
            return _abort(state, problem)
        out = [
            _hello(state),
            BasisAnnounce.from_bases(state.bob.basis),
        ]
        return replace(state, phase=Phase.ANNOUNCED, hello_sent=True), out
    if isinstance(event, SiftMask) and state.phase is Phase.ANNOUNCED:
        if (event.start, event.end) != (0, state.config.n_rounds):
            return _abort(state, AbortReason.DESYNC)
        if not np.array_equal(event.kept(), state.kept_mask):
            return _abort(state, AbortReason.DESYNC)
        return replace(state, phase=Phase.SIFTED), []
    if isinstance(event, DiscloseRequest) and state.phase is Phase.SIFTED:
        if event.rounds != state.disclosed_rounds:
            return _abort(state, AbortReason.DESYNC)
        symbols = tuple(int(state.bob.outcome[r]) for r in event.rounds)
        if any(s == NO_CLICK for s in symbols):
            return _abort(state, AbortReason.DESYNC)
        return replace(state, phase=Phase.ESTIMATED), [DiscloseReply(symbols)]
    if isinstance(event, QberResult) and state.phase is Phase.ESTIMATED:
        if (
            abs(event.e_b1 - state.qber.e_b1) > _RATE_MATCH_TOL
            or abs(event.e_b2 - state.qber.e_b2) > _RATE_MATCH_TOL
        ):
            return _abort(state, AbortReason.DESYNC)
        if state.report.aborted:
            # hold for the peer's abort frame; no key report goes out
            return state, []
        out = [KeyReport(state.report.rate, state.report.secret_bits)]
        return replace(state, phase=Phase.DONE), out
    return _abort(state, AbortReason.PROTOCOL_ORDER)


def session_step(state: SessionState, event) -> tuple[SessionState, list[Message]]:
    """Advance the session on a local start or an inbound message.

    Out-of-order or inconsistent input aborts the session with a typed
    reason; the returned messages must be written to the peer in order.
    """
    if state.finished:
        return state, []
    if state.role == "alice":
        return _alice_step(state, event)
    return _bob_step(state, event)
