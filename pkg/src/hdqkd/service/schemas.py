"""Pydantic request/response models for the compute service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field, field_validator

Encoding = Literal["ideal", "phase_only"]


class GridSpec(BaseModel):
    grid_n: int = Field(512, ge=64, le=4096)
    grid_extent: float = Field(5.0, gt=0)
    waist: float = Field(1.0, gt=0)

    @field_validator("grid_n")
    @classmethod
    def _even(cls, v: int) -> int:
        if v % 2:
            raise ValueError("grid_n must be even")
        return v


class CrosstalkRequest(GridSpec):
    smf_waist: float | None = Field(None, gt=0)
    encoding: Encoding = "phase_only"


class CrosstalkResponse(BaseModel):
    labels: list[str]
    values: list[list[float]]
    raw: list[list[float]]
    grid_n: int
    grid_extent: float
    waist: float
    smf_waist: float
    encoding: str


class FarFieldImageRequest(GridSpec):
    alice: str
    bob: str
    encoding: Encoding = "phase_only"
    npix: int = Field(321, ge=3, le=2048)


class FarFieldImageResponse(BaseModel):
    alice: str
    bob: str
    npix: int
    on_axis_fraction: float
    pgm_base64: str


class SourceSpec(BaseModel):
    rep_rate_hz: float = Field(2.0e6, gt=0)
    exciton_lifetime_ns: float = Field(25.0, gt=0)
    biexciton_lifetime_ns: float = Field(4.0, gt=0)
    exciton_prob: float = Field(0.7, ge=0, le=1)
    biexciton_prob: float = Field(0.393, ge=0, le=1)
    efficiency: float = Field(1.0, ge=0, le=1)
    dark_rate_hz: float = Field(0.0, ge=0)


class G2Request(SourceSpec):
    gate_list_ns: list[float] = [0.0, 11.0]
    lifetime_bin_ns: float = Field(1.0, gt=0)
    hbt_bin_ns: float = Field(1.0, gt=0)
    hbt_window_periods: int = Field(5, ge=2, le=20)
    n_pulses_lifetime: int = Field(1_000_000, ge=1, le=50_000_000)
    n_pulses_g2: int = Field(1_000_000, ge=1, le=50_000_000)
    seed: int = Field(0, ge=0)
    include_histograms: bool = True


class DecayCurveModel(BaseModel):
    bin_centers_ns: list[float]
    counts: list[int]


class BiexpFitModel(BaseModel):
    amp_fast: float
    tau_fast_ns: float
    amp_slow: float
    tau_slow_ns: float
    residual_norm: float
    degenerate: bool


class G2EstimateModel(BaseModel):
    gate_ns: float
    g2_zero: float
    stderr: float
    histogram_counts: list[int] | None = None
    histogram_bin_ns: float | None = None


class G2Response(BaseModel):
    lifetime: DecayCurveModel
    fit: BiexpFitModel
    estimates: list[G2EstimateModel]


class EventsRequest(SourceSpec):
    n_pulses: int = Field(100_000, ge=1, le=2_000_000)
    gate_ns: float = Field(0.0, ge=0)
    seed: int = Field(0, ge=0)


class CalibrateRequest(SourceSpec):
    target_g2: float = Field(0.1, ge=0)
    gate_ns: float = Field(11.0, ge=0)
    n_pulses: int = Field(300_000, ge=1_000, le=5_000_000)
    seed: int = Field(0, ge=0)


class CalibrateResponse(BaseModel):
    biexciton_prob: float


class SweepRequest(BaseModel):
    dims: list[int] = [2, 3]
    e_max: float = Field(0.2, gt=0, le=0.5)
    n_points: int = Field(201, ge=2, le=100_000)

    @field_validator("dims")
    @classmethod
    def _dims(cls, v: list[int]) -> list[int]:
        if not v or any(d < 2 for d in v):
            raise ValueError("dimensions must all be at least 2")
        return sorted(set(v))


class SweepResponse(BaseModel):
    errors: list[float]
    rates_by_dim: dict[int, list[float]]
    thresholds: dict[int, float]


class ChannelSpec(BaseModel):
    """Channel statistics: inline projection matrix, or optics to compute it."""

    projection: list[list[float]] | None = None
    grid_n: int = Field(512, ge=64, le=4096)
    grid_extent: float = Field(5.0, gt=0)
    waist: float = Field(1.0, gt=0)
    smf_waist: float | None = Field(None, gt=0)
    encoding: Encoding = "phase_only"
    transmittance: float = Field(1.0, ge=0, le=1)
    dark_click_prob: float = Field(0.0, ge=0, le=1)


class ProtocolRunRequest(BaseModel):
    n_rounds: int = Field(1_000_000, ge=1, le=100_000_000)
    dimension: int = Field(3, ge=2)
    disclosure_fraction: float = Field(0.1, gt=0, lt=1)
    abort_threshold: float | None = Field(None, gt=0)
    min_disclosed: int = Field(10, ge=1)
    seed: int = Field(0, ge=0)
    channel: ChannelSpec = ChannelSpec()
    include_transcripts: bool = False


class KeyRateReportModel(BaseModel):
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


class TranscriptsModel(BaseModel):
    alice_basis: list[int]
    alice_symbol: list[int]
    bob_basis: list[int]
    bob_outcome: list[int]


class ProtocolRunResponse(BaseModel):
    report: KeyRateReportModel
    transcripts: TranscriptsModel | None = None


class VersionResponse(BaseModel):
    tool: str
    version: str
