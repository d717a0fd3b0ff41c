"""Command-line client for the simulation service and the TCP sessions.

Every data-product command (``crosstalk``, ``g2``, ``keyrate-sweep``,
``run``) talks to the HTTP compute service: a remote instance when
``--server`` is given, otherwise an in-process one, so the command line
stays a thin client either way. ``alice`` and ``bob`` speak
the binary framed protocol directly over TCP, which is a wire format of
its own, not HTTP.

Exit codes: 0 success, 2 configuration error, 3 protocol abort,
4 transport failure.
"""

from __future__ import annotations

import base64
import sys
from pathlib import Path

import click
import httpx
import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config, parse_overrides
from .lifetime import BiexpFit, DecayCurve
from .modes import CrosstalkMatrix
from .protocol import AliceRecords, BobRecords, KeyRateReport
from .source import G2Estimate, HbtHistogram
from . import outputs, runner
from .wire import SessionAbortedError, TransportError, run_alice_client, run_bob_server

EXIT_CONFIG = 2
EXIT_ABORT = 3
EXIT_TRANSPORT = 4


class ServiceClient:
    """HTTP client over a remote service or an in-process application."""

    def __init__(self, server: str | None):
        if server:
            self._client = httpx.Client(base_url=server, timeout=600.0)
        else:
            import warnings

            with warnings.catch_warnings():
                # starlette favors httpx2, which is not packaged everywhere;
                # the httpx-backed client is fully functional for our use
                warnings.simplefilter("ignore", UserWarning)
                from starlette.testclient import TestClient

                from .service import create_app

                self._client = TestClient(create_app())

    def post(self, path: str, payload: dict) -> httpx.Response:
        response = self._client.post(path, json=payload)
        if response.status_code >= 400:
            detail = response.text
            try:
                detail = response.json().get("detail", detail)
            except ValueError:
                pass
            raise ConfigError(f"{path} rejected: {detail}")
        return response

    def post_json(self, path: str, payload: dict) -> dict:
        return self.post(path, payload).json()


def _load(ctx: click.Context) -> RunConfig:
    options = ctx.obj
    try:
        overrides = parse_overrides(list(options["set"]))
        if options["seed"] is not None:
            overrides["seed"] = options["seed"]
        return load_config(options["config"], overrides)
    except (ConfigError, OSError) as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)


def _out_dir(ctx: click.Context) -> Path:
    path = Path(ctx.obj["out"])
    path.mkdir(parents=True, exist_ok=True)
    return path


def _client(ctx: click.Context) -> ServiceClient:
    return ServiceClient(ctx.obj["server"])


def _echo_written(paths) -> None:
    for path in paths:
        click.echo(f"wrote {path}")


@click.group()
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Flat key=value configuration file.")
@click.option("--seed", type=int, default=None, help="Override the master seed.")
@click.option("--out", type=click.Path(file_okay=False), default="out",
              help="Output directory.")
@click.option("--server", default=None,
              help="Base URL of a running service; default runs in-process.")
@click.option("--set", "set_", multiple=True, metavar="KEY=VALUE",
              help="Override one configuration key (repeatable).")
@click.version_option(__version__, prog_name="hdqkd")
@click.pass_context
def main(ctx: click.Context, config, seed, out, server, set_) -> None:
    """Simulator of a three-dimensional OAM-mode quantum key link."""
    ctx.obj = {"config": config, "seed": seed, "out": out, "server": server,
               "set": set_}


@main.command()
@click.option("--images/--no-images", default=True,
              help="Also render the 6x6 far-field gallery as PGM files.")
@click.pass_context
def crosstalk(ctx: click.Context, images: bool) -> None:
    """Projection matrix between all prepared and measured states."""
    cfg = _load(ctx)
    out = _out_dir(ctx)
    client = _client(ctx)
    try:
        data = client.post_json("/crosstalk", {
            "grid_n": cfg.grid_n,
            "grid_extent": cfg.grid_extent,
            "waist": cfg.waist,
            "smf_waist": cfg.smf_waist,
            "encoding": cfg.encoding,
        })
        matrix = CrosstalkMatrix(
            values=np.array(data["values"]),
            raw=np.array(data["raw"]),
            labels=tuple(data["labels"]),
            grid_n=data["grid_n"],
            grid_extent=data["grid_extent"],
            waist=data["waist"],
            smf_waist=data["smf_waist"],
            encoding=data["encoding"],
        )
        written = [
            outputs.write_crosstalk_csv(matrix, out / "crosstalk.csv"),
            outputs.write_crosstalk_json(matrix, out / "crosstalk.json", cfg.digest()),
        ]
        if images:
            entries = []
            for alice_name, bob_name in runner.gallery_pairs():
                reply = client.post_json("/farfield-image", {
                    "grid_n": cfg.grid_n,
                    "grid_extent": cfg.grid_extent,
                    "waist": cfg.waist,
                    "encoding": cfg.encoding,
                    "npix": cfg.image_npix,
                    "alice": alice_name,
                    "bob": bob_name,
                })
                name = f"farfield_{alice_name}_{bob_name}.pgm"
                (out / name).write_bytes(base64.b64decode(reply["pgm_base64"]))
                entries.append({
                    "alice": alice_name,
                    "bob": bob_name,
                    "file": name,
                    "npix": reply["npix"],
                    "on_axis_fraction": reply["on_axis_fraction"],
                })
            written.append(
                outputs.write_image_index(entries, out / "farfield_index.json",
                                          cfg.digest())
            )
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    _echo_written(written)


@main.command()
@click.option("--dump-events", is_flag=True, default=False,
              help="Also export the gated event stream as CSV.")
@click.pass_context
def g2(ctx: click.Context, dump_events: bool) -> None:
    """Lifetime histogram with two-component fit, and gated g2 estimates."""
    cfg = _load(ctx)
    out = _out_dir(ctx)
    client = _client(ctx)
    try:
        data = client.post_json("/g2", {
            "rep_rate_hz": cfg.rep_rate_hz,
            "exciton_lifetime_ns": cfg.exciton_lifetime_ns,
            "biexciton_lifetime_ns": cfg.biexciton_lifetime_ns,
            "exciton_prob": cfg.exciton_prob,
            "biexciton_prob": cfg.biexciton_prob,
            "efficiency": cfg.efficiency,
            "dark_rate_hz": cfg.dark_rate_hz,
            "gate_list_ns": list(cfg.gate_list_ns),
            "lifetime_bin_ns": cfg.lifetime_bin_ns,
            "hbt_bin_ns": cfg.hbt_bin_ns,
            "hbt_window_periods": cfg.hbt_window_periods,
            "n_pulses_lifetime": cfg.n_pulses_lifetime,
            "n_pulses_g2": cfg.n_pulses_g2,
            "seed": cfg.seed,
            "include_histograms": True,
        })
        curve = DecayCurve(
            bin_centers=np.array(data["lifetime"]["bin_centers_ns"]),
            counts=np.array(data["lifetime"]["counts"], dtype=np.int64),
            bin_ns=cfg.lifetime_bin_ns,
        )
        fit = BiexpFit(
            amp_fast=data["fit"]["amp_fast"],
            tau_fast=data["fit"]["tau_fast_ns"],
            amp_slow=data["fit"]["amp_slow"],
            tau_slow=data["fit"]["tau_slow_ns"],
            residual_norm=data["fit"]["residual_norm"],
            degenerate=data["fit"]["degenerate"],
        )
        written = [
            outputs.write_decay_csv(curve, out / "lifetime.csv"),
            outputs.write_fit_json(fit, out / "lifetime_fit.json", cfg.seed,
                                   cfg.digest()),
        ]
        estimates = []
        period_ns = 1e9 / cfg.rep_rate_hz
        for item in data["estimates"]:
            est = G2Estimate(item["g2_zero"], item["stderr"], item["gate_ns"])
            estimates.append(est)
            hist = HbtHistogram(
                counts=np.array(item["histogram_counts"], dtype=np.int64),
                bin_ns=item["histogram_bin_ns"],
                period_ns=period_ns,
                window_periods=cfg.hbt_window_periods,
            )
            gate_tag = format(item["gate_ns"], "g")
            written.append(
                outputs.write_hbt_csv(hist, out / f"g2_gate_{gate_tag}.csv")
            )
        written.append(
            outputs.write_g2_json(estimates, cfg.n_pulses_g2, cfg.seed,
                                  cfg.digest(), out / "g2.json")
        )
        for est in estimates:
            click.echo(
                f"gate {est.gate_ns:g} ns: g2(0) = {est.g2_zero:.4f} "
                f"+- {est.stderr:.4f}"
            )
        if dump_events:
            text = client.post("/events", {
                "rep_rate_hz": cfg.rep_rate_hz,
                "exciton_lifetime_ns": cfg.exciton_lifetime_ns,
                "biexciton_lifetime_ns": cfg.biexciton_lifetime_ns,
                "exciton_prob": cfg.exciton_prob,
                "biexciton_prob": cfg.biexciton_prob,
                "efficiency": cfg.efficiency,
                "dark_rate_hz": cfg.dark_rate_hz,
                "n_pulses": min(cfg.n_pulses_g2, 2_000_000),
                "gate_ns": 0.0,
                "seed": cfg.seed,
            }).text
            written.append(outputs.write_text(out / "events.csv", text))
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    _echo_written(written)


@main.command("keyrate-sweep")
@click.pass_context
def keyrate_sweep(ctx: click.Context) -> None:
    """Key rate against symmetric error rate for d = 2 and d = 3."""
    cfg = _load(ctx)
    out = _out_dir(ctx)
    client = _client(ctx)
    try:
        data = client.post_json("/keyrate-sweep", {
            "dims": [2, 3],
            "e_max": cfg.sweep_e_max,
            "n_points": cfg.sweep_points,
        })
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    rates = {int(d): r for d, r in data["rates_by_dim"].items()}
    thresholds = {int(d): t for d, t in data["thresholds"].items()}
    written = [
        outputs.write_sweep_csv(data["errors"], rates, out / "keyrate_sweep.csv"),
        outputs.write_thresholds_json(thresholds, out / "keyrate_thresholds.json",
                                      cfg.digest()),
    ]
    for d, t in sorted(thresholds.items()):
        click.echo(f"d={d}: zero-rate error threshold = {t:.4f}")
    _echo_written(written)


def _report_from_dict(data: dict) -> KeyRateReport:
    return KeyRateReport(
        e_b1=data["e_b1"],
        e_b2=data["e_b2"],
        ci_b1=tuple(data["ci_b1"]),
        ci_b2=tuple(data["ci_b2"]),
        rate=data["rate"],
        sifted_count=data["sifted_count"],
        disclosed_count=data["disclosed_count"],
        secret_bits=data["secret_bits"],
        aborted=data["aborted"],
        dimension=data["dimension"],
        n_rounds=data["n_rounds"],
        seed=data["seed"],
    )


def _finish_with_report(cfg: RunConfig, out: Path, report: KeyRateReport) -> None:
    path = outputs.write_key_rate_report(report, out / "keyrate_report.json",
                                         cfg.digest())
    click.echo(
        f"e_b1 = {report.e_b1:.4f}, e_b2 = {report.e_b2:.4f}, "
        f"rate = {report.rate:.4f} bits/photon, secret bits = {report.secret_bits}"
    )
    _echo_written([path])
    if report.aborted:
        click.echo("session aborted: error rate above threshold", err=True)
        sys.exit(EXIT_ABORT)


@main.command()
@click.option("--dump-transcripts", is_flag=True, default=False,
              help="Also export both parties' per-round transcripts.")
@click.pass_context
def run(ctx: click.Context, dump_transcripts: bool) -> None:
    """Both parties in-process over a loopback byte stream."""
    cfg = _load(ctx)
    out = _out_dir(ctx)
    client = _client(ctx)
    try:
        data = client.post_json("/protocol-run", {
            "n_rounds": cfg.n_rounds,
            "dimension": cfg.dimension,
            "disclosure_fraction": cfg.disclosure_fraction,
            "abort_threshold": cfg.abort_threshold,
            "min_disclosed": cfg.min_disclosed,
            "seed": cfg.seed,
            "channel": {
                "grid_n": cfg.grid_n,
                "grid_extent": cfg.grid_extent,
                "waist": cfg.waist,
                "smf_waist": cfg.smf_waist,
                "encoding": cfg.encoding,
                "transmittance": cfg.transmittance,
                "dark_click_prob": cfg.dark_click_prob,
            },
            "include_transcripts": dump_transcripts,
        })
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    if dump_transcripts and data.get("transcripts"):
        t = data["transcripts"]
        alice = AliceRecords(
            basis=np.array(t["alice_basis"], np.int8),
            symbol=np.array(t["alice_symbol"], np.int8),
        )
        bob = BobRecords(
            basis=np.array(t["bob_basis"], np.int8),
            outcome=np.array(t["bob_outcome"], np.int8),
        )
        _echo_written(outputs.write_transcripts(
            alice, bob, out / "alice_transcript.csv", out / "bob_transcript.csv"
        ))
    _finish_with_report(cfg, out, _report_from_dict(data["report"]))


def _run_party(ctx: click.Context, role: str, host: str | None, port: int | None) -> None:
    cfg = _load(ctx)
    out = _out_dir(ctx)
    host = host or cfg.host
    port = port if port is not None else cfg.port
    click.echo(f"{role}: building channel (grid {cfg.grid_n}, {cfg.encoding})")
    channel = runner.build_channel(cfg)
    try:
        if role == "alice":
            report = run_alice_client(host, port, cfg.protocol_config(), channel,
                                      cfg.seed, timeout=cfg.timeout_s)
        else:
            click.echo(f"bob: listening on {host}:{port}")
            report = run_bob_server(host, port, cfg.protocol_config(), channel,
                                    cfg.seed, timeout=cfg.timeout_s)
    except TransportError as exc:
        click.echo(f"transport failure: {exc}", err=True)
        sys.exit(EXIT_TRANSPORT)
    except SessionAbortedError as exc:
        click.echo(f"session aborted: {exc}", err=True)
        sys.exit(EXIT_ABORT)
    _finish_with_report(cfg, out, report)


@main.command()
@click.option("--host", default=None, help="Peer host (default from config).")
@click.option("--port", type=int, default=None, help="Peer port (default from config).")
@click.pass_context
def alice(ctx: click.Context, host, port) -> None:
    """Preparing party: connect to a listening bob over TCP."""
    _run_party(ctx, "alice", host, port)


@main.command()
@click.option("--host", default=None, help="Bind host (default from config).")
@click.option("--port", type=int, default=None, help="Bind port (default from config).")
@click.pass_context
def bob(ctx: click.Context, host, port) -> None:
    """Measuring party: listen for one session over TCP."""
    _run_party(ctx, "bob", host, port)


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(host: str, port: int) -> None:
    """Run the HTTP compute service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
