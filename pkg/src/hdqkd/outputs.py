"""Canonical file writers: CSV, 16-bit PGM, structured JSON reports.

Writers are deterministic byte for byte: fixed field order, 9-significant-
digit decimals in CSV, newline-terminated lines, sorted JSON keys. Every
JSON document embeds the tool version, the master seed and the
configuration digest so outputs are traceable to their inputs.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from . import __version__
from .lifetime import BiexpFit, DecayCurve
from .modes import CrosstalkMatrix
from .protocol import NO_CLICK, AliceRecords, BobRecords, KeyRateReport
from .source import G2Estimate, HbtHistogram, Origin, PhotonEvents

__all__ = [
    "format_value",
    "metadata_block",
    "write_text",
    "write_crosstalk_csv",
    "write_crosstalk_json",
    "write_pgm16",
    "write_image_index",
    "write_decay_csv",
    "write_fit_json",
    "write_hbt_csv",
    "write_g2_json",
    "write_events_csv",
    "write_sweep_csv",
    "write_thresholds_json",
    "write_key_rate_report",
    "write_transcripts",
]


def format_value(value: float) -> str:
    """Nine significant digits, plain decimal or exponent as needed."""
    return f"{value:.9g}"


def metadata_block(seed: int | None, config_digest: str) -> dict[str, Any]:
    return {
        "tool": "hdqkd",
        "version": __version__,
        "seed": seed,
        "config_digest": config_digest,
    }


def write_text(path: Path, content: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(content.encode("utf-8"))
    return path


def _write_json(path: Path, document: dict[str, Any]) -> Path:
    return write_text(
        path, json.dumps(document, sort_keys=True, indent=2) + "\n"
    )


def write_crosstalk_csv(matrix: CrosstalkMatrix, path: Path) -> Path:
    lines = ["bob_state," + ",".join(matrix.labels)]
    for row, bob in enumerate(matrix.labels):
        cells = ",".join(format_value(matrix.values[row, col]) for col in range(6))
        lines.append(f"{bob},{cells}")
    return write_text(path, "\n".join(lines) + "\n")


def write_crosstalk_json(
    matrix: CrosstalkMatrix, path: Path, config_digest: str
) -> Path:
    return _write_json(
        path,
        {
            "metadata": metadata_block(None, config_digest),
            "labels": list(matrix.labels),
            "values": matrix.values.tolist(),
            "raw": matrix.raw.tolist(),
            "grid_n": matrix.grid_n,
            "grid_extent": matrix.grid_extent,
            "waist": matrix.waist,
            "smf_waist": matrix.smf_waist,
            "encoding": matrix.encoding,
        },
    )


def write_pgm16(intensity: np.ndarray, path: Path) -> float:
    """Write a 16-bit binary PGM, scaled so the peak maps to 65535.

    Returns the intensity value mapped to full scale (for the sidecar).
    """
    peak = float(intensity.max())
    scale = peak if peak > 0 else 1.0
    samples = np.round(intensity / scale * 65535.0).astype(">u2")
    header = f"P5\n{intensity.shape[1]} {intensity.shape[0]}\n65535\n"
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(header.encode("ascii") + samples.tobytes())
    return scale


def write_image_index(
    entries: list[dict[str, Any]], path: Path, config_digest: str
) -> Path:
    return _write_json(
        path,
        {"metadata": metadata_block(None, config_digest), "images": entries},
    )


def write_decay_csv(curve: DecayCurve, path: Path) -> Path:
    lines = ["bin_center_ns,counts"]
    lines += [
        f"{format_value(t)},{int(c)}"
        for t, c in zip(curve.bin_centers, curve.counts)
    ]
    return write_text(path, "\n".join(lines) + "\n")


def write_fit_json(
    fit: BiexpFit, path: Path, seed: int, config_digest: str
) -> Path:
    return _write_json(
        path,
        {
            "metadata": metadata_block(seed, config_digest),
            "amp_fast": fit.amp_fast,
            "tau_fast_ns": fit.tau_fast,
            "amp_slow": fit.amp_slow,
            "tau_slow_ns": fit.tau_slow,
            "residual_norm": fit.residual_norm,
            "degenerate": fit.degenerate,
        },
    )


def write_hbt_csv(hist: HbtHistogram, path: Path) -> Path:
    edges = hist.bin_edges
    centers = 0.5 * (edges[:-1] + edges[1:])
    lines = ["bin_center_ns,counts"]
    lines += [f"{format_value(t)},{int(c)}" for t, c in zip(centers, hist.counts)]
    return write_text(path, "\n".join(lines) + "\n")


def write_g2_json(
    estimates: list[G2Estimate],
    n_pulses: int,
    seed: int,
    config_digest: str,
    path: Path,
) -> Path:
    return _write_json(
        path,
        {
            "metadata": metadata_block(seed, config_digest),
            "n_pulses": n_pulses,
            "estimates": [
                {
                    "gate_ns": est.gate_ns,
                    "g2_zero": est.g2_zero,
                    "stderr": est.stderr,
                }
                for est in estimates
            ],
        },
    )


def write_events_csv(events: PhotonEvents, path: Path) -> Path:
    lines = ["pulse_index,t_offset_ns,origin"]
    names = {int(o): o.name.lower() for o in Origin}
    lines += [
        f"{int(p)},{format_value(t)},{names[int(o)]}"
        for p, t, o in zip(events.pulse, events.t_offset, events.origin)
    ]
    return write_text(path, "\n".join(lines) + "\n")


def write_sweep_csv(
    errors: Iterable[float],
    rates_by_dim: dict[int, list[float]],
    path: Path,
) -> Path:
    dims = sorted(rates_by_dim)
    lines = ["error_rate," + ",".join(f"rate_d{d}" for d in dims)]
    for i, e in enumerate(errors):
        cells = ",".join(format_value(rates_by_dim[d][i]) for d in dims)
        lines.append(f"{format_value(e)},{cells}")
    return write_text(path, "\n".join(lines) + "\n")


def write_thresholds_json(
    thresholds: dict[int, float], path: Path, config_digest: str
) -> Path:
    return _write_json(
        path,
        {
            "metadata": metadata_block(None, config_digest),
            "max_tolerated_error": {
                f"d{d}": value for d, value in sorted(thresholds.items())
            },
        },
    )


def write_key_rate_report(
    report: KeyRateReport, path: Path, config_digest: str
) -> Path:
    return _write_json(
        path,
        {
            "metadata": metadata_block(report.seed, config_digest),
            "e_b1": report.e_b1,
            "e_b2": report.e_b2,
            "ci_b1": list(report.ci_b1),
            "ci_b2": list(report.ci_b2),
            "rate": report.rate,
            "sifted_count": report.sifted_count,
            "disclosed_count": report.disclosed_count,
            "secret_bits": report.secret_bits,
            "aborted": report.aborted,
            "dimension": report.dimension,
            "n_rounds": report.n_rounds,
        },
    )


def write_transcripts(
    alice: AliceRecords, bob: BobRecords, alice_path: Path, bob_path: Path
) -> tuple[Path, Path]:
    a_lines = ["round,basis,symbol"]
    a_lines += [
        f"{i},{int(b)},{int(s)}"
        for i, (b, s) in enumerate(zip(alice.basis, alice.symbol))
    ]
    b_lines = ["round,basis,outcome"]
    b_lines += [
        f"{i},{int(b)},{'no_click' if o == NO_CLICK else int(o)}"
        for i, (b, o) in enumerate(zip(bob.basis, bob.outcome))
    ]
    return (
        write_text(alice_path, "\n".join(a_lines) + "\n"),
        write_text(bob_path, "\n".join(b_lines) + "\n"),
    )
