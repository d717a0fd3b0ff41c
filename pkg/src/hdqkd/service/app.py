"""FastAPI compute service wrapping the simulation package.

One long-running instance can serve a lab group: crosstalk matrices and
far-field galleries are cached per optical configuration, and every
endpoint is a pure function of its request, so responses are reproducible
across instances.
"""

from __future__ import annotations

import base64
import io

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse

from .. import __version__
from ..config import ConfigError, RunConfig
from ..lifetime import FitConvergenceError
from ..protocol import (
    ChannelModel,
    ProtocolConfig,
    alice_prepare,
    bob_choose_bases,
    measure_rounds,
)
from ..source import (
    CalibrationRangeError,
    InsufficientStatisticsError,
    Origin,
    SourceParams,
    apply_gate,
    calibrate_biexciton_yield,
    simulate_emission,
)
from ..runner import crosstalk_cached, g2_experiment, gallery_image
from ..keyrate import max_tolerated_error, secure_key_rate
from ..wire import loopback_run
from . import schemas


def _bad_request(exc: Exception) -> HTTPException:
    return HTTPException(status_code=400, detail=str(exc))


def _pgm16_bytes(intensity: np.ndarray) -> bytes:
    peak = float(intensity.max())
    scale = peak if peak > 0 else 1.0
    samples = np.round(intensity / scale * 65535.0).astype(">u2")
    header = f"P5\n{intensity.shape[1]} {intensity.shape[0]}\n65535\n"
    buffer = io.BytesIO()
    buffer.write(header.encode("ascii"))
    buffer.write(samples.tobytes())
    return buffer.getvalue()


def _channel_from_spec(spec: schemas.ChannelSpec) -> ChannelModel:
    if spec.projection is not None:
        return ChannelModel(
            np.asarray(spec.projection, dtype=float),
            transmittance=spec.transmittance,
            dark_click_prob=spec.dark_click_prob,
        )
    matrix = crosstalk_cached(
        spec.grid_n, spec.grid_extent, spec.waist, spec.smf_waist, spec.encoding
    )
    return ChannelModel(
        matrix.values,
        transmittance=spec.transmittance,
        dark_click_prob=spec.dark_click_prob,
    )


def create_app() -> FastAPI:
    app = FastAPI(
        title="hdqkd",
        description="Simulation service for a three-dimensional "
        "OAM-mode quantum key distribution link",
        version=__version__,
    )

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/version", response_model=schemas.VersionResponse)
    def version() -> schemas.VersionResponse:
        return schemas.VersionResponse(tool="hdqkd", version=__version__)

    @app.post("/crosstalk", response_model=schemas.CrosstalkResponse)
    def crosstalk(req: schemas.CrosstalkRequest) -> schemas.CrosstalkResponse:
        try:
            matrix = crosstalk_cached(
                req.grid_n, req.grid_extent, req.waist, req.smf_waist, req.encoding
            )
        except ValueError as exc:
            raise _bad_request(exc) from exc
        return schemas.CrosstalkResponse(
            labels=list(matrix.labels),
            values=matrix.values.tolist(),
            raw=matrix.raw.tolist(),
            grid_n=matrix.grid_n,
            grid_extent=matrix.grid_extent,
            waist=matrix.waist,
            smf_waist=matrix.smf_waist,
            encoding=matrix.encoding,
        )

    @app.post("/farfield-image", response_model=schemas.FarFieldImageResponse)
    def farfield_image(req: schemas.FarFieldImageRequest) -> schemas.FarFieldImageResponse:
        try:
            cfg = RunConfig(
                grid_n=req.grid_n,
                grid_extent=req.grid_extent,
                waist=req.waist,
                encoding=req.encoding,
                image_npix=req.npix,
            )
            image, fraction = gallery_image(cfg, req.alice, req.bob)
        except (ValueError, ConfigError) as exc:
            raise _bad_request(exc) from exc
        return schemas.FarFieldImageResponse(
            alice=req.alice,
            bob=req.bob,
            npix=req.npix,
            on_axis_fraction=fraction,
            pgm_base64=base64.b64encode(_pgm16_bytes(image)).decode("ascii"),
        )

    @app.post("/g2", response_model=schemas.G2Response)
    def g2(req: schemas.G2Request) -> schemas.G2Response:
        try:
            cfg = RunConfig(
                rep_rate_hz=req.rep_rate_hz,
                exciton_lifetime_ns=req.exciton_lifetime_ns,
                biexciton_lifetime_ns=req.biexciton_lifetime_ns,
                exciton_prob=req.exciton_prob,
                biexciton_prob=req.biexciton_prob,
                efficiency=req.efficiency,
                dark_rate_hz=req.dark_rate_hz,
                gate_list_ns=tuple(req.gate_list_ns),
                lifetime_bin_ns=req.lifetime_bin_ns,
                hbt_bin_ns=req.hbt_bin_ns,
                hbt_window_periods=req.hbt_window_periods,
                n_pulses_lifetime=req.n_pulses_lifetime,
                n_pulses_g2=req.n_pulses_g2,
                seed=req.seed,
            )
            results = g2_experiment(cfg)
        except (ConfigError, ValueError, InsufficientStatisticsError) as exc:
            raise _bad_request(exc) from exc
        except FitConvergenceError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        estimates = []
        for est, hist in zip(results.estimates, results.histograms):
            model = schemas.G2EstimateModel(
                gate_ns=est.gate_ns, g2_zero=est.g2_zero, stderr=est.stderr
            )
            if req.include_histograms:
                model = model.model_copy(
                    update={
                        "histogram_counts": hist.counts.tolist(),
                        "histogram_bin_ns": hist.bin_ns,
                    }
                )
            estimates.append(model)
        return schemas.G2Response(
            lifetime=schemas.DecayCurveModel(
                bin_centers_ns=results.curve.bin_centers.tolist(),
                counts=results.curve.counts.tolist(),
            ),
            fit=schemas.BiexpFitModel(
                amp_fast=results.fit.amp_fast,
                tau_fast_ns=results.fit.tau_fast,
                amp_slow=results.fit.amp_slow,
                tau_slow_ns=results.fit.tau_slow,
                residual_norm=results.fit.residual_norm,
                degenerate=results.fit.degenerate,
            ),
            estimates=estimates,
        )

    @app.post("/events", response_class=PlainTextResponse)
    def events(req: schemas.EventsRequest) -> str:
        base = SourceParams(
            rep_rate_hz=req.rep_rate_hz,
            exciton_lifetime_ns=req.exciton_lifetime_ns,
            biexciton_lifetime_ns=req.biexciton_lifetime_ns,
            exciton_prob=req.exciton_prob,
            biexciton_prob=req.biexciton_prob,
            efficiency=req.efficiency,
            dark_rate_hz=req.dark_rate_hz,
        )
        try:
            stream = apply_gate(
                simulate_emission(base, req.n_pulses, req.seed), req.gate_ns
            )
        except ValueError as exc:
            raise _bad_request(exc) from exc
        names = {int(o): o.name.lower() for o in Origin}
        lines = ["pulse_index,t_offset_ns,origin"]
        lines += [
            f"{int(p)},{t:.9g},{names[int(o)]}"
            for p, t, o in zip(stream.pulse, stream.t_offset, stream.origin)
        ]
        return "\n".join(lines) + "\n"

    @app.post("/calibrate", response_model=schemas.CalibrateResponse)
    def calibrate(req: schemas.CalibrateRequest) -> schemas.CalibrateResponse:
        base = SourceParams(
            rep_rate_hz=req.rep_rate_hz,
            exciton_lifetime_ns=req.exciton_lifetime_ns,
            biexciton_lifetime_ns=req.biexciton_lifetime_ns,
            exciton_prob=req.exciton_prob,
            biexciton_prob=req.biexciton_prob,
            efficiency=req.efficiency,
            dark_rate_hz=req.dark_rate_hz,
        )
        try:
            q = calibrate_biexciton_yield(
                req.target_g2, req.gate_ns, base, seed=req.seed, n_pulses=req.n_pulses
            )
        except (CalibrationRangeError, InsufficientStatisticsError, ValueError) as exc:
            raise _bad_request(exc) from exc
        return schemas.CalibrateResponse(biexciton_prob=q)

    @app.post("/keyrate-sweep", response_model=schemas.SweepResponse)
    def keyrate_sweep(req: schemas.SweepRequest) -> schemas.SweepResponse:
        errors = [req.e_max * i / (req.n_points - 1) for i in range(req.n_points)]
        rates = {
            d: [secure_key_rate(e, e, d) for e in errors] for d in req.dims
        }
        thresholds = {d: max_tolerated_error(d) for d in req.dims}
        return schemas.SweepResponse(
            errors=errors, rates_by_dim=rates, thresholds=thresholds
        )

    @app.post("/protocol-run", response_model=schemas.ProtocolRunResponse)
    def protocol_run(req: schemas.ProtocolRunRequest) -> schemas.ProtocolRunResponse:
        try:
            channel = _channel_from_spec(req.channel)
            cfg = ProtocolConfig(
                n_rounds=req.n_rounds,
                dimension=req.dimension,
                disclosure_fraction=req.disclosure_fraction,
                abort_threshold=req.abort_threshold,
                min_disclosed=req.min_disclosed,
            )
            alice_report, bob_report = loopback_run(cfg, channel, req.seed)
        except (ValueError, ConfigError) as exc:
            raise _bad_request(exc) from exc
        if alice_report != bob_report:
            raise HTTPException(status_code=500, detail="party reports diverged")
        transcripts_model = None
        if req.include_transcripts:
            alice = alice_prepare(cfg, req.seed)
            bob_basis = bob_choose_bases(cfg, req.seed)
            bob = measure_rounds(alice, bob_basis, channel, req.seed)
            transcripts_model = schemas.TranscriptsModel(
                alice_basis=alice.basis.tolist(),
                alice_symbol=alice.symbol.tolist(),
                bob_basis=bob.basis.tolist(),
                bob_outcome=bob.outcome.tolist(),
            )
        report = alice_report
        return schemas.ProtocolRunResponse(
            report=schemas.KeyRateReportModel(
                e_b1=report.e_b1,
                e_b2=report.e_b2,
                ci_b1=report.ci_b1,
                ci_b2=report.ci_b2,
                rate=report.rate,
                sifted_count=report.sifted_count,
                disclosed_count=report.disclosed_count,
                secret_bits=report.secret_bits,
                aborted=report.aborted,
                dimension=report.dimension,
                n_rounds=report.n_rounds,
                seed=report.seed,
            ),
            transcripts=transcripts_model,
        )

    return app


app = create_app()
