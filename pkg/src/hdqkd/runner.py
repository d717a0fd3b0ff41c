"""Orchestration helpers shared by the HTTP service and the CLI.

Thin composition layer over the core modules: build the channel from a
configuration, run the standard experiments, and cache the expensive
crosstalk computation per parameter set for long-running service use.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .config import RunConfig
from .grids import Grid, on_axis_fraction
from .keyrate import max_tolerated_error, secure_key_rate
from .lifetime import BiexpFit, DecayCurve, fit_biexponential, lifetime_histogram
from .modes import CrosstalkMatrix, crosstalk_matrix, decoded_far_field_intensity
from .mub import MODE_LABELS, ModeLabel, parse_label
from .protocol import (
    AliceRecords,
    BobRecords,
    ChannelModel,
    KeyRateReport,
    alice_prepare,
    bob_choose_bases,
    measure_rounds,
)
from .source import (
    G2Estimate,
    HbtHistogram,
    PhotonEvents,
    apply_gate,
    g2_zero,
    hbt_coincidences,
    simulate_emission,
)
from .wire import loopback_run

__all__ = [
    "crosstalk_cached",
    "build_crosstalk",
    "build_channel",
    "G2Results",
    "g2_experiment",
    "emission_events",
    "SweepResults",
    "sweep_results",
    "loopback_report",
    "transcripts",
    "gallery_image",
    "gallery_pairs",
]


@lru_cache(maxsize=8)
def crosstalk_cached(
    grid_n: int,
    grid_extent: float,
    waist: float,
    smf_waist: float | None,
    encoding: str,
) -> CrosstalkMatrix:
    return crosstalk_matrix(
        Grid(grid_n, grid_extent), waist, smf_waist, encoding  # type: ignore[arg-type]
    )


def build_crosstalk(cfg: RunConfig) -> CrosstalkMatrix:
    return crosstalk_cached(
        cfg.grid_n, cfg.grid_extent, cfg.waist, cfg.smf_waist, cfg.encoding
    )


def build_channel(cfg: RunConfig) -> ChannelModel:
    return ChannelModel(
        build_crosstalk(cfg).values,
        transmittance=cfg.transmittance,
        dark_click_prob=cfg.dark_click_prob,
    )


@dataclass(frozen=True)
class G2Results:
    curve: DecayCurve
    fit: BiexpFit
    estimates: list[G2Estimate]
    histograms: list[HbtHistogram]


def emission_events(cfg: RunConfig, n_pulses: int | None = None) -> PhotonEvents:
    params = cfg.source_params()
    return simulate_emission(params, n_pulses or cfg.n_pulses_g2, cfg.seed)


def g2_experiment(cfg: RunConfig) -> G2Results:
    """Lifetime curve with its two-component fit, plus g2 per gate."""
    params = cfg.source_params()
    lifetime_events = simulate_emission(params, cfg.n_pulses_lifetime, cfg.seed)
    curve = lifetime_histogram(lifetime_events, cfg.lifetime_bin_ns, params.period_ns)
    fit = fit_biexponential(curve)
    g2_events = (
        lifetime_events
        if cfg.n_pulses_g2 == cfg.n_pulses_lifetime
        else simulate_emission(params, cfg.n_pulses_g2, cfg.seed)
    )
    estimates, histograms = [], []
    for gate in cfg.gate_list_ns:
        gated = apply_gate(g2_events, gate)
        hist = hbt_coincidences(
            gated, params, cfg.seed, cfg.hbt_window_periods, cfg.hbt_bin_ns
        )
        histograms.append(hist)
        estimates.append(g2_zero(hist, gate))
    return G2Results(curve=curve, fit=fit, estimates=estimates, histograms=histograms)


@dataclass(frozen=True)
class SweepResults:
    errors: list[float]
    rates_by_dim: dict[int, list[float]]
    thresholds: dict[int, float]


def sweep_results(cfg: RunConfig, dims: tuple[int, ...] = (2, 3)) -> SweepResults:
    errors = [
        cfg.sweep_e_max * i / (cfg.sweep_points - 1) for i in range(cfg.sweep_points)
    ]
    rates = {d: [secure_key_rate(e, e, d) for e in errors] for d in dims}
    thresholds = {d: max_tolerated_error(d) for d in dims}
    return SweepResults(errors=errors, rates_by_dim=rates, thresholds=thresholds)


def loopback_report(cfg: RunConfig) -> KeyRateReport:
    """Both parties in-process over a socket pair; reports must agree."""
    alice_report, bob_report = loopback_run(
        cfg.protocol_config(), build_channel(cfg), cfg.seed
    )
    if alice_report != bob_report:
        raise RuntimeError("loopback parties disagree; seed schedule broken")
    return alice_report


def transcripts(cfg: RunConfig) -> tuple[AliceRecords, BobRecords]:
    protocol_cfg = cfg.protocol_config()
    channel = build_channel(cfg)
    alice = alice_prepare(protocol_cfg, cfg.seed)
    bob_basis = bob_choose_bases(protocol_cfg, cfg.seed)
    bob = measure_rounds(alice, bob_basis, channel, cfg.seed)
    return alice, bob


def gallery_image(
    cfg: RunConfig, alice_name: str, bob_name: str
) -> tuple[np.ndarray, float]:
    """Rendered decoded far-field intensity and its on-axis fraction."""
    alice: ModeLabel = parse_label(alice_name)
    bob: ModeLabel = parse_label(bob_name)
    image = decoded_far_field_intensity(
        cfg.grid(),
        cfg.waist,
        alice,
        bob,
        cfg.encoding,  # type: ignore[arg-type]
        npix=cfg.image_npix,
    )
    return image, on_axis_fraction(image)


def gallery_pairs() -> list[tuple[str, str]]:
    return [(a.name, b.name) for a in MODE_LABELS for b in MODE_LABELS]
