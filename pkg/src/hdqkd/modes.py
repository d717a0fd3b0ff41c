"""State synthesis, phase-mask decoding, and the 6x6 projection matrix.

Every state shares one Gaussian envelope exp(-r^2/w^2): a phase-only
modulator illuminated by a Gaussian beam can shape phase but not
amplitude. Basis-1 states are exact (helical phase only). Basis-2
superpositions have structured amplitude, so their physical encoding
keeps only the phase profile over the Gaussian envelope; that
approximation is what the ``phase_only`` mode reproduces, while
``ideal`` evaluates the exact textbook projections for reference.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .grids import (
    ComplexField,
    Grid,
    PhaseMask,
    apply_mask,
    far_field,
    far_field_image,
    gaussian_field,
    overlap_probability,
    smf_coupling,
)
from .mub import MODE_LABELS, ModeLabel, mub_coefficients

__all__ = [
    "Encoding",
    "CrosstalkMatrix",
    "synthesize_state",
    "decode_mask",
    "crosstalk_matrix",
    "far_field_smf_waist",
    "decoded_far_field_intensity",
]

Encoding = Literal["ideal", "phase_only"]

# Acceptable leak of total power into the outermost two-pixel border.
_BORDER_LEAK_LIMIT = 1e-6


def _check_window(grid: Grid, waist: float) -> None:
    if not np.isfinite(waist) or waist <= 0:
        raise ValueError(f"waist must be positive and finite, got {waist}")
    if grid.extent < 3.0 * waist:
        raise ValueError(
            f"window half-width {grid.extent} is below 3 waists ({3 * waist}); "
            "the mode would leak out of the simulated aperture"
        )


def _border_leak(field: ComplexField) -> float:
    intensity = np.abs(field.amplitudes) ** 2
    total = np.sum(intensity)
    inner = np.sum(intensity[2:-2, 2:-2])
    return float((total - inner) / total)


def _mub1_field(grid: Grid, waist: float, oam: int) -> ComplexField:
    envelope = gaussian_field(grid, waist)
    _, phi = grid.polar()
    return ComplexField(
        grid, envelope.amplitudes * np.exp(1j * oam * phi)
    ).normalized()


def _ideal_field(grid: Grid, waist: float, label: ModeLabel) -> ComplexField:
    if label.basis == 1:
        return _mub1_field(grid, waist, label.oam)
    coeffs = mub_coefficients()[:, label.index]
    acc = np.zeros((grid.n, grid.n), dtype=np.complex128)
    for row, coeff in enumerate(coeffs):
        acc += coeff * _mub1_field(grid, waist, row - 1).amplitudes
    return ComplexField(grid, acc).normalized()


def synthesize_state(
    grid: Grid, waist: float, label: ModeLabel, encoding: Encoding = "phase_only"
) -> ComplexField:
    """Build one of the six states on the grid, unit power.

    ``ideal`` returns the exact state (basis-2 states keep their structured
    amplitude). ``phase_only`` keeps the ideal phase profile over the plain
    Gaussian envelope, which is what a phase-only modulator emits; for
    basis 1 the two encodings coincide.

    Raises:
        ValueError: non-finite or non-positive waist, unknown encoding, or
            a window too small to hold the mode.
    """
    if encoding not in ("ideal", "phase_only"):
        raise ValueError(f"unknown encoding {encoding!r}")
    _check_window(grid, waist)
    ideal = _ideal_field(grid, waist, label)
    if encoding == "ideal" or label.basis == 1:
        field = ideal
    else:
        envelope = gaussian_field(grid, waist)
        field = ComplexField(
            grid, envelope.amplitudes * np.exp(1j * np.angle(ideal.amplitudes))
        ).normalized()
    leak = _border_leak(field)
    if leak > _BORDER_LEAK_LIMIT:
        raise ValueError(
            f"mode leaks {leak:.2e} of its power into the window border; "
            "enlarge the grid extent"
        )
    return field


def decode_mask(grid: Grid, label: ModeLabel, waist: float = 1.0) -> PhaseMask:
    """Conjugate-phase mask that flattens the ideal state ``label``.

    The mask is the negated phase profile of the ideal state (for basis 1
    simply the opposite helical ramp), so applying it to a state with the
    same phase leaves a plain Gaussian that couples maximally on axis.
    The envelope waist does not affect the phase profile.
    """
    ideal = _ideal_field(grid, waist, label)
    return PhaseMask(grid, -np.angle(ideal.amplitudes))


def far_field_smf_waist(smf_waist: float) -> float:
    """Fiber-mode waist expressed in the far-field (frequency) plane.

    A waist-w Gaussian Fourier-transforms to a waist-1/(pi*w) Gaussian, so
    a fiber matched to source waist w accepts exactly that far-field mode.
    """
    return 1.0 / (np.pi * smf_waist)


@dataclass(frozen=True)
class CrosstalkMatrix:
    """Projection probabilities P[bob_state, alice_state] over the six modes.

    ``values`` is block-column normalized: within each 3x3 basis block,
    every column (fixed prepared state, one measurement basis) sums to 1.
    ``raw`` keeps the unnormalized couplings for loss bookkeeping. Row and
    column order follows ``labels``.
    """

    values: np.ndarray
    raw: np.ndarray
    labels: tuple[str, ...]
    grid_n: int
    grid_extent: float
    waist: float
    smf_waist: float
    encoding: str

    def column_distribution(self, alice: ModeLabel, bob_basis: int) -> np.ndarray:
        """Outcome probabilities for measuring ``alice`` in ``bob_basis``."""
        col = 3 * (alice.basis - 1) + alice.index
        rows = slice(3 * (bob_basis - 1), 3 * (bob_basis - 1) + 3)
        return self.values[rows, col]


def _normalize_blocks(raw: np.ndarray) -> np.ndarray:
    values = raw.copy()
    for block_row in (slice(0, 3), slice(3, 6)):
        block = values[block_row, :]
        sums = block.sum(axis=0)
        if np.any(sums <= 0):
            raise ValueError("cannot normalize a block column with zero total")
        values[block_row, :] = block / sums
    return values


def crosstalk_matrix(
    grid: Grid,
    waist: float = 1.0,
    smf_waist: float | None = None,
    encoding: Encoding = "phase_only",
) -> CrosstalkMatrix:
    """Projection matrix between all prepared and measured states.

    In ``phase_only`` mode each entry follows the physical pipeline:
    synthesize the prepared state, apply the measuring side's conjugate
    phase mask, propagate to the far field, and couple into the fiber
    mode. In ``ideal`` mode both preparation and measurement are exact,
    so entries are plain state overlaps |<bob|alice>|^2; this is the
    reference the physical pipeline is compared against.

    ``smf_waist`` is quoted as an equivalent source-plane waist; matched
    coupling (the default) uses the source waist itself.

    Every pair is an independent pure computation, so evaluation order
    (or a parallel map over pairs) cannot change the result.
    """
    if smf_waist is None:
        smf_waist = waist
    fiber_far_waist = far_field_smf_waist(smf_waist)
    raw = np.zeros((6, 6), dtype=float)
    alice_fields = {
        label: synthesize_state(grid, waist, label, encoding)
        for label in MODE_LABELS
    }
    if encoding == "ideal":
        bob_fields = {
            label: synthesize_state(grid, waist, label, "ideal")
            for label in MODE_LABELS
        }
        for col, alice in enumerate(MODE_LABELS):
            for row, bob in enumerate(MODE_LABELS):
                raw[row, col] = overlap_probability(
                    bob_fields[bob], alice_fields[alice]
                )
    else:
        masks = {label: decode_mask(grid, label, waist) for label in MODE_LABELS}
        for col, alice in enumerate(MODE_LABELS):
            for row, bob in enumerate(MODE_LABELS):
                decoded = apply_mask(alice_fields[alice], masks[bob])
                raw[row, col] = smf_coupling(far_field(decoded), fiber_far_waist)
    return CrosstalkMatrix(
        values=_normalize_blocks(raw),
        raw=raw,
        labels=tuple(label.name for label in MODE_LABELS),
        grid_n=grid.n,
        grid_extent=grid.extent,
        waist=waist,
        smf_waist=smf_waist,
        encoding=encoding,
    )


def decoded_far_field_intensity(
    grid: Grid,
    waist: float,
    alice: ModeLabel,
    bob: ModeLabel,
    encoding: Encoding = "phase_only",
    npix: int = 321,
    f_halfwidth: float | None = None,
) -> np.ndarray:
    """Far-field intensity seen by a camera after the decoding mask.

    Rendered on a fine axis-centered raster (default +/- 2 far-field
    waists) so the near-axis structure of mismatched modes is resolved.
    """
    if f_halfwidth is None:
        f_halfwidth = 2.0 / (np.pi * waist)
    prepared = synthesize_state(grid, waist, alice, encoding)
    decoded = apply_mask(prepared, decode_mask(grid, bob, waist))
    return far_field_image(decoded, f_halfwidth, npix)
