"""Flat key=value experiment configuration with digest-based provenance.

The file format is one ``key = value`` pair per line (``#`` comments and
blank lines ignored), deliberately flat so experiment variants diff
cleanly. Every consumer-facing module precondition is checked eagerly at
load time; outputs embed a short digest of the canonicalized pairs so any
result file can be traced to the exact configuration that produced it.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

from .grids import Grid
from .keyrate import max_tolerated_error
from .protocol import ProtocolConfig
from .source import SourceParams

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_overrides"]


class ConfigError(ValueError):
    """Bad configuration file, key, or value."""


@dataclass(frozen=True)
class RunConfig:
    # spatial-mode simulation
    grid_n: int = 512
    grid_extent: float = 5.0
    waist: float = 1.0
    smf_waist: float | None = None  # None = matched to the source waist
    encoding: str = "phase_only"
    image_npix: int = 321
    # photon source and correlation analysis
    rep_rate_hz: float = 2.0e6
    exciton_lifetime_ns: float = 25.0
    biexciton_lifetime_ns: float = 4.0
    exciton_prob: float = 0.7
    biexciton_prob: float = 0.393
    efficiency: float = 1.0
    dark_rate_hz: float = 0.0
    gate_list_ns: tuple[float, ...] = (0.0, 11.0)
    lifetime_bin_ns: float = 1.0
    hbt_bin_ns: float = 1.0
    hbt_window_periods: int = 5
    n_pulses_lifetime: int = 10_000_000
    n_pulses_g2: int = 1_000_000
    # protocol and channel
    dimension: int = 3
    n_rounds: int = 1_000_000
    disclosure_fraction: float = 0.4
    abort_threshold: float | None = None  # None = max tolerated error
    min_disclosed: int = 10
    transmittance: float = 1.0
    dark_click_prob: float = 0.0248
    # key-rate sweep
    sweep_e_max: float = 0.2
    sweep_points: int = 201
    # session plumbing
    seed: int = 20240901
    host: str = "127.0.0.1"
    port: int = 9151
    timeout_s: float = 60.0

    def __post_init__(self) -> None:
        # instantiate every dependent object so invariants fire here,
        # before any work starts
        try:
            self.grid()
            self.source_params()
            self.protocol_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.encoding not in ("ideal", "phase_only"):
            raise ConfigError(f"unknown encoding {self.encoding!r}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if any(g < 0 for g in self.gate_list_ns):
            raise ConfigError("gates must be non-negative")
        if self.n_pulses_lifetime < 1 or self.n_pulses_g2 < 1:
            raise ConfigError("pulse counts must be positive")
        if not 0.0 <= self.transmittance <= 1.0:
            raise ConfigError("transmittance must be in [0, 1]")
        if not 0.0 <= self.dark_click_prob <= 1.0:
            raise ConfigError("dark click probability must be in [0, 1]")
        if self.sweep_points < 2 or self.sweep_e_max <= 0:
            raise ConfigError("sweep needs at least two points and a span")
        if self.image_npix < 3:
            raise ConfigError("image raster too small")
        if self.grid_extent < 3.0 * self.waist:
            raise ConfigError("grid extent must be at least three waists")

    def grid(self) -> Grid:
        return Grid(self.grid_n, self.grid_extent)

    def source_params(self) -> SourceParams:
        return SourceParams(
            rep_rate_hz=self.rep_rate_hz,
            exciton_lifetime_ns=self.exciton_lifetime_ns,
            biexciton_lifetime_ns=self.biexciton_lifetime_ns,
            exciton_prob=self.exciton_prob,
            biexciton_prob=self.biexciton_prob,
            efficiency=self.efficiency,
            dark_rate_hz=self.dark_rate_hz,
        )

    def protocol_config(self) -> ProtocolConfig:
        threshold = self.abort_threshold
        if threshold is None:
            threshold = max_tolerated_error(self.dimension)
        return ProtocolConfig(
            n_rounds=self.n_rounds,
            dimension=self.dimension,
            disclosure_fraction=self.disclosure_fraction,
            abort_threshold=threshold,
            min_disclosed=self.min_disclosed,
        )

    def canonical_items(self) -> list[tuple[str, str]]:
        out = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                rendered = ",".join(repr(v) for v in value)
            else:
                rendered = repr(value)
            out.append((f.name, rendered))
        return sorted(out)

    def digest(self) -> str:
        blob = "\n".join(f"{k}={v}" for k, v in self.canonical_items())
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


_FIELD_TYPES: dict[str, Any] = {f.name: f.type for f in fields(RunConfig)}
_OPTIONAL_FLOATS = {"smf_waist", "abort_threshold"}
_INT_FIELDS = {
    "grid_n", "image_npix", "hbt_window_periods", "n_pulses_lifetime",
    "n_pulses_g2", "dimension", "n_rounds", "min_disclosed", "sweep_points",
    "seed", "port",
}
_STR_FIELDS = {"encoding", "host"}
_TUPLE_FIELDS = {"gate_list_ns"}


def _convert(key: str, raw: str) -> Any:
    raw = raw.strip()
    if key in _OPTIONAL_FLOATS:
        return None if raw == "" else float(raw)
    if key in _TUPLE_FIELDS:
        if raw == "":
            return ()
        return tuple(float(part) for part in raw.split(","))
    if key in _INT_FIELDS:
        return int(raw)
    if key in _STR_FIELDS:
        return raw
    return float(raw)


def parse_overrides(pairs: list[str]) -> dict[str, Any]:
    """Parse ``key=value`` strings (CLI overrides) to typed values."""
    out: dict[str, Any] = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not of the form key=value")
        key, raw = pair.split("=", 1)
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown configuration key {key!r}")
        try:
            out[key] = _convert(key, raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from exc
    return out


def load_config(
    path: str | Path | None = None, overrides: dict[str, Any] | None = None
) -> RunConfig:
    """Build a RunConfig from an optional file plus override values."""
    values: dict[str, Any] = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, raw = stripped.split("=", 1)
            key = key.strip()
            if key not in _FIELD_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _convert(key, raw)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value: {exc}") from exc
    if overrides:
        values.update(overrides)
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
