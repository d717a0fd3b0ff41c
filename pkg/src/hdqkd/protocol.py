"""Prepare-and-measure engine: rounds, sifting, error estimation, key rate.

Alice draws a uniform basis and symbol per round; Bob measures in his own
uniform basis by sampling from the channel's projection statistics.
Rounds with matching bases and a click survive sifting; a random fraction
of them is disclosed to estimate the per-basis error rates that enter the
key-rate formula.

All randomness is drawn from named streams derived from one master seed
(see :func:`hdqkd.source.derive_rng`), so a session is reproducible and
both parties of a distributed run can re-derive the same transcripts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .keyrate import max_tolerated_error, secure_key_rate
from .source import derive_rng

__all__ = [
    "NO_CLICK",
    "ProtocolConfig",
    "ChannelModel",
    "AliceRecords",
    "BobRecords",
    "SiftedKey",
    "QberReport",
    "KeyRateReport",
    "InsufficientSamplesError",
    "alice_prepare",
    "bob_choose_bases",
    "measure_round",
    "measure_rounds",
    "sift",
    "estimate_qber",
    "expected_qber",
    "assemble_report",
    "run_protocol",
]

NO_CLICK = -1

# Named randomness streams (master seed, stream id).
STREAM_ALICE = 21
STREAM_BOB_BASIS = 22
STREAM_LOSS = 23
STREAM_OUTCOME = 24
STREAM_DARK = 25
STREAM_SQUASH = 26
STREAM_DISCLOSURE = 27


class InsufficientSamplesError(RuntimeError):
    """Too few sifted rounds to disclose a meaningful estimation sample."""


@dataclass(frozen=True)
class ProtocolConfig:
    n_rounds: int
    dimension: int = 3
    disclosure_fraction: float = 0.1
    abort_threshold: float | None = None
    min_disclosed: int = 10

    def __post_init__(self) -> None:
        if self.dimension < 2:
            raise ValueError("dimension must be at least 2")
        if self.n_rounds < 1:
            raise ValueError("need at least one round")
        if not 0.0 < self.disclosure_fraction < 1.0:
            raise ValueError("disclosure fraction must be in (0, 1)")
        limit = max_tolerated_error(self.dimension)
        if self.abort_threshold is None:
            object.__setattr__(self, "abort_threshold", limit)
        elif not 0.0 < self.abort_threshold <= limit:
            raise ValueError(
                f"abort threshold must be in (0, {limit:.4f}] for d={self.dimension}"
            )


@dataclass(frozen=True)
class ChannelModel:
    """Quantum-channel statistics: projection matrix, loss, dark clicks.

    ``projection`` is the 6x6 block-column-normalized matrix
    P[bob_state, alice_state]; ``transmittance`` is the survival
    probability of the photon; ``dark_click_prob`` is the per-round
    chance of a spurious click on each of the three outcomes.
    """

    projection: np.ndarray
    transmittance: float = 1.0
    dark_click_prob: float = 0.0

    def __post_init__(self) -> None:
        p = np.asarray(self.projection, dtype=float)
        if p.shape != (6, 6):
            raise ValueError("projection matrix must be 6x6")
        if np.any(p < -1e-12) or np.any(p > 1 + 1e-12):
            raise ValueError("projection entries must be probabilities")
        for rows in (slice(0, 3), slice(3, 6)):
            if np.abs(p[rows, :].sum(axis=0) - 1.0).max() > 1e-6:
                raise ValueError("projection block columns must sum to 1")
        if not 0.0 <= self.transmittance <= 1.0:
            raise ValueError("transmittance must be in [0, 1]")
        if not 0.0 <= self.dark_click_prob <= 1.0:
            raise ValueError("dark click probability must be in [0, 1]")
        object.__setattr__(self, "projection", p)

    @staticmethod
    def exact(transmittance: float = 1.0, dark_click_prob: float = 0.0) -> "ChannelModel":
        """Channel with textbook statistics: perfect same-basis projection."""
        p = np.full((6, 6), 1.0 / 3.0)
        p[:3, :3] = np.eye(3)
        p[3:, 3:] = np.eye(3)
        return ChannelModel(p, transmittance, dark_click_prob)

    def outcome_distribution(self, alice_basis: int, symbol: int, bob_basis: int) -> np.ndarray:
        col = 3 * (alice_basis - 1) + symbol
        rows = slice(3 * (bob_basis - 1), 3 * bob_basis)
        return self.projection[rows, col]


@dataclass(frozen=True)
class AliceRecords:
    """Per-round prepared basis (1 or 2) and symbol (0..d-1)."""

    basis: np.ndarray
    symbol: np.ndarray

    def __len__(self) -> int:
        return len(self.basis)


@dataclass(frozen=True)
class BobRecords:
    """Per-round measurement basis and outcome (NO_CLICK when nothing fired)."""

    basis: np.ndarray
    outcome: np.ndarray

    def __len__(self) -> int:
        return len(self.basis)


@dataclass(frozen=True)
class SiftedKey:
    """Rounds kept after basis reconciliation: indices and symbol pairs."""

    rounds: np.ndarray
    basis: np.ndarray
    alice_symbols: np.ndarray
    bob_symbols: np.ndarray

    def __len__(self) -> int:
        return len(self.rounds)

    def subset(self, mask: np.ndarray) -> "SiftedKey":
        return SiftedKey(
            self.rounds[mask],
            self.basis[mask],
            self.alice_symbols[mask],
            self.bob_symbols[mask],
        )


@dataclass(frozen=True)
class QberReport:
    e_b1: float
    e_b2: float
    ci_b1: tuple[float, float]
    ci_b2: tuple[float, float]
    disclosed_b1: int
    disclosed_b2: int
    errors_b1: int
    errors_b2: int


@dataclass(frozen=True)
class KeyRateReport:
    e_b1: float
    e_b2: float
    ci_b1: tuple[float, float]
    ci_b2: tuple[float, float]
    rate: float
    sifted_count: int
    disclosed_count: int
    secret_bits: int
    aborted: bool
    dimension: int
    n_rounds: int
    seed: int


def alice_prepare(config: ProtocolConfig, seed: int) -> AliceRecords:
    """Uniform i.i.d. basis and symbol choices for every round."""
    rng = derive_rng(seed, STREAM_ALICE)
    basis = rng.integers(1, 3, config.n_rounds).astype(np.int8)
    symbol = rng.integers(0, config.dimension, config.n_rounds).astype(np.int8)
    return AliceRecords(basis=basis, symbol=symbol)


def bob_choose_bases(config: ProtocolConfig, seed: int) -> np.ndarray:
    rng = derive_rng(seed, STREAM_BOB_BASIS)
    return rng.integers(1, 3, config.n_rounds).astype(np.int8)


def _require_qutrit(dimension: int) -> None:
    if dimension != 3:
        raise ValueError(
            "channel sampling is defined for the six-mode qutrit link (d=3); "
            "rate arithmetic alone supports other dimensions"
        )


def measure_rounds(
    alice: AliceRecords,
    bob_basis: np.ndarray,
    channel: ChannelModel,
    seed: int,
) -> BobRecords:
    """Sample Bob's outcomes for all rounds.

    Per round: the photon survives with probability ``transmittance`` and
    lands on an outcome drawn from the projection column for (prepared
    state, measured basis); each outcome can also dark-click. When several
    outcomes clicked, one is chosen uniformly (squashing); when none did,
    the round is NO_CLICK.
    """
    n = len(alice)
    if len(bob_basis) != n:
        raise ValueError("basis array length mismatch")
    # per-round outcome distributions via an indexed (12, 3) table
    table = np.zeros((12, 3))
    for col in range(6):
        for block in range(2):
            table[2 * col + block] = channel.projection[
                3 * block : 3 * block + 3, col
            ]
    col_index = 3 * (alice.basis.astype(np.int64) - 1) + alice.symbol
    row = 2 * col_index + (bob_basis.astype(np.int64) - 1)
    probs = table[row]
    cdf = np.cumsum(probs, axis=1)

    present = derive_rng(seed, STREAM_LOSS).random(n) < channel.transmittance
    u = derive_rng(seed, STREAM_OUTCOME).random(n)
    photon_outcome = (u[:, None] >= cdf).sum(axis=1).clip(0, 2)
    dark = derive_rng(seed, STREAM_DARK).random((n, 3)) < channel.dark_click_prob

    clicked = dark.copy()
    clicked[np.arange(n)[present], photon_outcome[present]] = True
    any_click = clicked.any(axis=1)
    priority = derive_rng(seed, STREAM_SQUASH).random((n, 3))
    priority[~clicked] = -1.0
    outcome = priority.argmax(axis=1).astype(np.int8)
    outcome[~any_click] = NO_CLICK
    return BobRecords(basis=bob_basis.astype(np.int8), outcome=outcome)


def measure_round(
    alice_basis: int,
    alice_symbol: int,
    bob_basis: int,
    channel: ChannelModel,
    rng: np.random.Generator,
) -> int:
    """Single-round outcome with caller-supplied randomness.

    Draw order: photon survival, outcome quantile, three dark clicks,
    three squashing priorities. Statistically identical to one row of
    :func:`measure_rounds`.
    """
    dist = channel.outcome_distribution(alice_basis, alice_symbol, bob_basis)
    present = rng.random() < channel.transmittance
    u = rng.random()
    photon_outcome = int((u >= np.cumsum(dist)).sum().clip(0, 2))
    dark = rng.random(3) < channel.dark_click_prob
    clicked = dark.copy()
    if present:
        clicked[photon_outcome] = True
    if not clicked.any():
        rng.random(3)  # keep the draw count fixed
        return NO_CLICK
    priority = rng.random(3)
    priority[~clicked] = -1.0
    return int(priority.argmax())


def sift(alice: AliceRecords, bob: BobRecords) -> SiftedKey:
    """Keep rounds where the bases agree and Bob registered a click."""
    if len(alice) != len(bob):
        raise ValueError("transcripts are misaligned")
    keep = (alice.basis == bob.basis) & (bob.outcome != NO_CLICK)
    rounds = np.flatnonzero(keep).astype(np.int64)
    return SiftedKey(
        rounds=rounds,
        basis=alice.basis[keep],
        alice_symbols=alice.symbol[keep],
        bob_symbols=bob.outcome[keep],
    )


def _binomial_ci(errors: int, n: int) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    e = errors / n
    half = 1.96 * math.sqrt(max(e * (1.0 - e), 1e-12) / n)
    return (max(e - half, 0.0), min(e + half, 1.0))


def estimate_qber(
    sifted: SiftedKey,
    fraction: float,
    seed: int,
    min_disclosed: int = 10,
) -> tuple[QberReport, SiftedKey]:
    """Disclose a random per-basis sample and count mismatches.

    Returns the per-basis error estimates with 95% binomial intervals and
    the sifted key with the disclosed rounds removed.

    Raises:
        InsufficientSamplesError: a basis would disclose fewer than
            ``min_disclosed`` rounds.
    """
    if len(sifted) == 0:
        raise InsufficientSamplesError("empty sifted key")
    rng = derive_rng(seed, STREAM_DISCLOSURE)
    disclosed_mask = np.zeros(len(sifted), dtype=bool)
    stats: dict[int, tuple[int, int]] = {}
    for basis in (1, 2):
        idx = np.flatnonzero(sifted.basis == basis)
        n_disc = int(round(fraction * len(idx)))
        if n_disc < min_disclosed:
            raise InsufficientSamplesError(
                f"basis {basis}: would disclose {n_disc} < {min_disclosed} rounds"
            )
        chosen = np.sort(rng.choice(len(idx), size=n_disc, replace=False))
        rows = idx[chosen]
        disclosed_mask[rows] = True
        errors = int(
            (sifted.alice_symbols[rows] != sifted.bob_symbols[rows]).sum()
        )
        stats[basis] = (errors, n_disc)
    (err1, n1), (err2, n2) = stats[1], stats[2]
    report = QberReport(
        e_b1=err1 / n1,
        e_b2=err2 / n2,
        ci_b1=_binomial_ci(err1, n1),
        ci_b2=_binomial_ci(err2, n2),
        disclosed_b1=n1,
        disclosed_b2=n2,
        errors_b1=err1,
        errors_b2=err2,
    )
    return report, sifted.subset(~disclosed_mask)


def expected_qber(channel: ChannelModel, basis: int) -> tuple[float, float]:
    """Analytic (error rate, click probability) for matching-basis rounds.

    Exact enumeration of the photon branch (present/absent, three
    outcomes) against all eight dark-click subsets, averaged over a
    uniform prepared symbol. Serves as the closed-form reference the
    Monte Carlo engine is tested against.
    """
    t = channel.transmittance
    p = channel.dark_click_prob
    e_weighted = 0.0
    click_prob = 0.0
    for symbol in range(3):
        dist = channel.outcome_distribution(basis, symbol, basis)
        p_correct = 0.0
        p_click = 0.0
        for dark_bits in range(8):
            dark = [(dark_bits >> k) & 1 for k in range(3)]
            p_dark = math.prod(p if d else (1.0 - p) for d in dark)
            # photon present on outcome x
            for x in range(3):
                clicked = set(i for i in range(3) if dark[i]) | {x}
                weight = t * dist[x] * p_dark
                p_click += weight
                if symbol in clicked:
                    p_correct += weight / len(clicked)
            # photon absent
            clicked = set(i for i in range(3) if dark[i])
            if clicked:
                weight = (1.0 - t) * p_dark
                p_click += weight
                if symbol in clicked:
                    p_correct += weight / len(clicked)
        e_weighted += (p_click - p_correct) / 3.0
        click_prob += p_click / 3.0
    return e_weighted / click_prob, click_prob


def assemble_report(
    config: ProtocolConfig,
    seed: int,
    sifted_count: int,
    qber: QberReport,
    remaining_count: int,
) -> KeyRateReport:
    """Rate, abort decision and yield from the estimation result."""
    rate = secure_key_rate(qber.e_b1, qber.e_b2, config.dimension)
    aborted = (
        qber.e_b1 > config.abort_threshold or qber.e_b2 > config.abort_threshold
    )
    secret_bits = 0 if aborted else max(int(math.floor(rate * remaining_count)), 0)
    return KeyRateReport(
        e_b1=qber.e_b1,
        e_b2=qber.e_b2,
        ci_b1=qber.ci_b1,
        ci_b2=qber.ci_b2,
        rate=rate,
        sifted_count=sifted_count,
        disclosed_count=qber.disclosed_b1 + qber.disclosed_b2,
        secret_bits=secret_bits,
        aborted=aborted,
        dimension=config.dimension,
        n_rounds=config.n_rounds,
        seed=seed,
    )


def run_protocol(
    config: ProtocolConfig, channel: ChannelModel, seed: int
) -> tuple[AliceRecords, BobRecords, QberReport, KeyRateReport]:
    """Full in-process session: prepare, measure, sift, estimate, rate."""
    _require_qutrit(config.dimension)
    alice = alice_prepare(config, seed)
    bob_basis = bob_choose_bases(config, seed)
    bob = measure_rounds(alice, bob_basis, channel, seed)
    sifted = sift(alice, bob)
    qber, remaining = estimate_qber(
        sifted, config.disclosure_fraction, seed, config.min_disclosed
    )
    report = assemble_report(config, seed, len(sifted), qber, len(remaining))
    return alice, bob, qber, report
