"""Monte Carlo model of a pulsed quantum-dot single-photon source.

Each excitation pulse can emit a fast photon (short-lived biexciton level)
and a slow photon (single-exciton level) with independent exponential
delays; detector dark counts arrive uniformly over the pulse period.
Discarding early arrivals (temporal gating) strips most of the fast
component and purifies the stream toward single-photon statistics, which
is quantified by the center-to-side peak ratio g2(0) of a two-detector
coincidence histogram.

Determinism: every random draw comes from a generator derived as
``SeedSequence((seed, stream_id[, block_index]))``. Emission is generated
in fixed-size pulse blocks with per-block generators, so a block-parallel
implementation would reproduce the sequential output bit for bit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "Origin",
    "SourceParams",
    "PhotonEvents",
    "HbtHistogram",
    "G2Estimate",
    "InsufficientStatisticsError",
    "CalibrationRangeError",
    "derive_rng",
    "simulate_emission",
    "poisson_pulse_stream",
    "apply_gate",
    "hbt_coincidences",
    "g2_zero",
    "calibrate_biexciton_yield",
]

EMISSION_BLOCK = 1 << 18

# Stream identifiers for seed derivation.
STREAM_EMISSION = 11
STREAM_HBT_ROUTING = 12
STREAM_POISSON = 13
STREAM_CALIBRATION = 14


class Origin(enum.IntEnum):
    EXCITON = 0
    BIEXCITON = 1
    DARK = 2


class InsufficientStatisticsError(RuntimeError):
    """Raised when an estimate would divide by an empty histogram region."""


class CalibrationRangeError(ValueError):
    """Raised when the requested target is outside the reachable range."""


def derive_rng(seed: int, *stream: int) -> np.random.Generator:
    """Named-stream generator: independent per (seed, stream ids)."""
    return np.random.default_rng(np.random.SeedSequence((seed, *stream)))


@dataclass(frozen=True)
class SourceParams:
    """Pulsed-source and detector parameters (times in ns, rates in Hz)."""

    rep_rate_hz: float = 2.0e6
    exciton_lifetime_ns: float = 25.0
    biexciton_lifetime_ns: float = 4.0
    exciton_prob: float = 0.7
    biexciton_prob: float = 0.39
    efficiency: float = 1.0
    dark_rate_hz: float = 0.0

    def __post_init__(self) -> None:
        for name in ("exciton_prob", "biexciton_prob", "efficiency"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        if self.exciton_lifetime_ns <= 0 or self.biexciton_lifetime_ns <= 0:
            raise ValueError("lifetimes must be positive")
        if self.biexciton_lifetime_ns >= self.exciton_lifetime_ns:
            raise ValueError("the biexciton level must decay faster than the exciton")
        if self.rep_rate_hz <= 0 or self.dark_rate_hz < 0:
            raise ValueError("rates must be positive (dark rate non-negative)")
        if self.period_ns <= 5.0 * self.exciton_lifetime_ns:
            raise ValueError(
                "pulse period must exceed five exciton lifetimes so pulses decay out"
            )

    @property
    def period_ns(self) -> float:
        return 1.0e9 / self.rep_rate_hz


@dataclass(frozen=True)
class PhotonEvents:
    """Detected events as parallel arrays, sorted by (pulse, offset)."""

    pulse: np.ndarray  # int64 pulse index
    t_offset: np.ndarray  # float64 ns since the pulse
    origin: np.ndarray  # uint8 Origin code

    def __len__(self) -> int:
        return len(self.pulse)

    @staticmethod
    def empty() -> "PhotonEvents":
        return PhotonEvents(
            np.empty(0, np.int64), np.empty(0, np.float64), np.empty(0, np.uint8)
        )

    @staticmethod
    def concatenate(parts: list["PhotonEvents"]) -> "PhotonEvents":
        if not parts:
            return PhotonEvents.empty()
        return PhotonEvents(
            np.concatenate([p.pulse for p in parts]),
            np.concatenate([p.t_offset for p in parts]),
            np.concatenate([p.origin for p in parts]),
        )

    def select(self, keep: np.ndarray) -> "PhotonEvents":
        return PhotonEvents(self.pulse[keep], self.t_offset[keep], self.origin[keep])

    def absolute_times(self, period_ns: float) -> np.ndarray:
        return self.pulse.astype(np.float64) * period_ns + self.t_offset


def _sorted(pulse, t_offset, origin) -> PhotonEvents:
    order = np.lexsort((t_offset, pulse))
    return PhotonEvents(
        pulse[order].astype(np.int64),
        t_offset[order].astype(np.float64),
        origin[order].astype(np.uint8),
    )


def _emit_block(
    params: SourceParams, first_pulse: int, n_pulses: int, rng: np.random.Generator
) -> PhotonEvents:
    pulses = np.arange(first_pulse, first_pulse + n_pulses, dtype=np.int64)
    parts_pulse, parts_time, parts_origin = [], [], []
    # fixed draw order: exciton branch, biexciton branch, darks
    for prob, lifetime, code in (
        (params.exciton_prob, params.exciton_lifetime_ns, Origin.EXCITON),
        (params.biexciton_prob, params.biexciton_lifetime_ns, Origin.BIEXCITON),
    ):
        emitted = rng.random(n_pulses) < prob
        times = rng.exponential(lifetime, int(emitted.sum()))
        detected = rng.random(len(times)) < params.efficiency
        parts_pulse.append(pulses[emitted][detected])
        parts_time.append(times[detected])
        parts_origin.append(np.full(int(detected.sum()), code, np.uint8))
    mean_darks = params.dark_rate_hz * params.period_ns * 1e-9
    if mean_darks > 0:
        counts = rng.poisson(mean_darks, n_pulses)
        total = int(counts.sum())
        parts_pulse.append(np.repeat(pulses, counts))
        parts_time.append(rng.uniform(0.0, params.period_ns, total))
        parts_origin.append(np.full(total, Origin.DARK, np.uint8))
    return _sorted(
        np.concatenate(parts_pulse),
        np.concatenate(parts_time),
        np.concatenate(parts_origin),
    )


def simulate_emission(params: SourceParams, n_pulses: int, seed: int) -> PhotonEvents:
    """Detected photon events for ``n_pulses`` excitation pulses.

    Per pulse, independently: an exciton photon with probability
    ``exciton_prob`` at an Exp(exciton lifetime) delay, a biexciton photon
    with probability ``biexciton_prob`` at an Exp(biexciton lifetime)
    delay; each survives detection with probability ``efficiency``. Dark
    events are appended uniformly over the period at ``dark_rate_hz``.
    """
    if n_pulses < 1:
        raise ValueError("need at least one pulse")
    parts = []
    for block, start in enumerate(range(0, n_pulses, EMISSION_BLOCK)):
        count = min(EMISSION_BLOCK, n_pulses - start)
        rng = derive_rng(seed, STREAM_EMISSION, block)
        parts.append(_emit_block(params, start, count, rng))
    return PhotonEvents.concatenate(parts)


def poisson_pulse_stream(
    mean_photons: float, n_pulses: int, lifetime_ns: float, seed: int
) -> PhotonEvents:
    """Coherent-statistics reference stream: Poisson photon number per pulse.

    Used as the analytic test case where the coincidence ratio g2(0) is
    exactly 1.
    """
    rng = derive_rng(seed, STREAM_POISSON)
    counts = rng.poisson(mean_photons, n_pulses)
    pulse = np.repeat(np.arange(n_pulses, dtype=np.int64), counts)
    times = rng.exponential(lifetime_ns, int(counts.sum()))
    return _sorted(pulse, times, np.full(len(pulse), Origin.EXCITON, np.uint8))


def apply_gate(events: PhotonEvents, gate_ns: float) -> PhotonEvents:
    """Drop events arriving earlier than ``gate_ns`` after their pulse."""
    if gate_ns < 0:
        raise ValueError("gate must be non-negative")
    if gate_ns == 0:
        return events
    return events.select(events.t_offset >= gate_ns)


@dataclass(frozen=True)
class HbtHistogram:
    """Histogram of detector-B minus detector-A arrival differences."""

    counts: np.ndarray  # int64 per bin
    bin_ns: float
    period_ns: float
    window_periods: int

    @property
    def bin_edges(self) -> np.ndarray:
        half = self.window_periods * self.period_ns
        n_bins = len(self.counts)
        return -half + np.arange(n_bins + 1) * self.bin_ns

    def peak_integral(self, peak_index: int) -> int:
        """Counts within half a period of delay peak_index * period."""
        center = peak_index * self.period_ns
        edges = self.bin_edges
        lo = np.searchsorted(edges, center - self.period_ns / 2.0, side="left")
        hi = np.searchsorted(edges, center + self.period_ns / 2.0, side="left")
        return int(self.counts[lo:hi].sum())

    def side_peaks(self) -> list[int]:
        """Fully contained side-peak integrals, peaks +/-1 .. +/-(k-1)."""
        ms = [m for m in range(-self.window_periods + 1, self.window_periods) if m]
        return [self.peak_integral(m) for m in ms]


@dataclass(frozen=True)
class G2Estimate:
    g2_zero: float
    stderr: float
    gate_ns: float


def hbt_coincidences(
    events: PhotonEvents,
    params: SourceParams,
    seed: int,
    window_periods: int = 5,
    bin_ns: float = 1.0,
) -> HbtHistogram:
    """Route photons 50/50 onto two detectors and histogram A-B delays.

    All cross-detector pairs within ``window_periods`` pulse periods enter
    the histogram, delay measured as t_B - t_A.
    """
    if bin_ns <= 0 or window_periods < 2:
        raise ValueError("need positive bin width and at least two periods")
    half = window_periods * params.period_ns
    n_bins = int(round(2.0 * half / bin_ns))
    counts = np.zeros(n_bins, dtype=np.int64)
    if len(events) > 0:
        rng = derive_rng(seed, STREAM_HBT_ROUTING)
        to_b = rng.integers(0, 2, len(events)).astype(bool)
        t_abs = events.absolute_times(params.period_ns)
        t_a = np.sort(t_abs[~to_b])
        t_b = np.sort(t_abs[to_b])
        lo = np.searchsorted(t_b, t_a - half, side="left")
        hi = np.searchsorted(t_b, t_a + half, side="right")
        spans = hi - lo
        cum = np.cumsum(spans)
        chunk_pairs = 4_000_000
        start = 0
        while start < len(t_a):
            done = cum[start - 1] if start else 0
            stop = int(np.searchsorted(cum, done + chunk_pairs, side="right"))
            stop = min(max(stop, start + 1), len(t_a))
            sp = spans[start:stop]
            total = int(sp.sum())
            if total:
                # flatten the per-event B windows without a Python loop
                first = np.repeat(lo[start:stop], sp)
                within = np.arange(total) - np.repeat(np.cumsum(sp) - sp, sp)
                delays = t_b[first + within] - np.repeat(t_a[start:stop], sp)
                hist, _ = np.histogram(delays, bins=n_bins, range=(-half, half))
                counts += hist
            start = stop
    return HbtHistogram(
        counts=counts,
        bin_ns=bin_ns,
        period_ns=params.period_ns,
        window_periods=window_periods,
    )


def g2_zero(hist: HbtHistogram, gate_ns: float = 0.0) -> G2Estimate:
    """Center-peak integral over the mean side-peak integral.

    The standard error propagates Poisson counting noise from both the
    center and side windows; it scales as one over the square root of the
    accumulated side counts.

    Raises:
        InsufficientStatisticsError: if the side peaks are empty.
    """
    center = hist.peak_integral(0)
    sides = hist.side_peaks()
    total_side = sum(sides)
    if total_side == 0:
        raise InsufficientStatisticsError(
            "no side-peak coincidences; run more pulses"
        )
    mean_side = total_side / len(sides)
    value = center / mean_side
    stderr = float(np.sqrt(center * (1.0 + center / total_side)) / mean_side)
    return G2Estimate(g2_zero=float(value), stderr=stderr, gate_ns=gate_ns)


def _gated_g2(
    params: SourceParams, gate_ns: float, n_pulses: int, seed: int
) -> G2Estimate:
    events = apply_gate(simulate_emission(params, n_pulses, seed), gate_ns)
    return g2_zero(hbt_coincidences(events, params, seed), gate_ns)


def calibrate_biexciton_yield(
    target_g2: float,
    gate_ns: float,
    base: SourceParams,
    seed: int = 0,
    n_pulses: int = 300_000,
    q_max: float = 1.0,
    max_iters: int = 40,
) -> float:
    """Biexciton probability whose gated g2(0) matches ``target_g2``.

    Bisection over [0, q_max]; the gated g2 grows monotonically with the
    biexciton yield. Each iterate gets its own derived seed, so the whole
    schedule is reproducible. Stops once the simulated estimate agrees
    with the target within its own standard error (or the bracket closes).

    Raises:
        CalibrationRangeError: target negative or above the q_max response.
    """
    if target_g2 < 0:
        raise CalibrationRangeError("target g2 cannot be negative")
    if target_g2 == 0:
        return 0.0
    top = _gated_g2(replace(base, biexciton_prob=q_max), gate_ns, n_pulses, seed)
    if target_g2 > top.g2_zero + 3.0 * top.stderr:
        raise CalibrationRangeError(
            f"target {target_g2} above reachable gated g2 "
            f"{top.g2_zero:.4f} at biexciton_prob={q_max}"
        )
    lo, hi = 0.0, q_max
    for iteration in range(max_iters):
        mid = 0.5 * (lo + hi)
        est = _gated_g2(
            replace(base, biexciton_prob=mid), gate_ns, n_pulses, seed + iteration + 1
        )
        if abs(est.g2_zero - target_g2) <= est.stderr or hi - lo < 1e-4:
            return mid
        if est.g2_zero < target_g2:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
