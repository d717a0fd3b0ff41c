"""Discrete transverse-field machinery: grids, phase masks, Fourier optics.

Fields live on a square, cell-centered grid: sample j sits at
x_j = (j - (n-1)/2) * dx with dx = 2*extent/n, so no sample falls exactly
on the optical axis and the sample set is symmetric under reflections and
quarter-turn rotations. That symmetry is what makes azimuthal-phase
orthogonality exact on the grid instead of merely approximate.

``far_field`` maps a field to the focal plane of an ideal lens, i.e. a
continuous Fourier transform with kernel exp(-2*pi*i*f.x), discretized as
a centered DFT with half-sample phase ramps. Output coordinates are
spatial frequencies; a waist-w Gaussian maps to a waist-1/(pi*w) Gaussian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid",
    "ComplexField",
    "PhaseMask",
    "gaussian_field",
    "apply_mask",
    "far_field",
    "smf_coupling",
    "overlap_probability",
    "intensity_image",
    "on_axis_fraction",
    "far_field_image",
]


@dataclass(frozen=True)
class Grid:
    """Square sampling window: ``n`` points per side, half-width ``extent``."""

    n: int
    extent: float

    def __post_init__(self) -> None:
        if self.n < 64 or self.n % 2 != 0:
            raise ValueError(f"grid size must be even and >= 64, got {self.n}")
        if not np.isfinite(self.extent) or self.extent <= 0:
            raise ValueError(f"grid extent must be positive, got {self.extent}")

    @property
    def dx(self) -> float:
        return 2.0 * self.extent / self.n

    def axis(self) -> np.ndarray:
        """Cell-centered sample coordinates along one side."""
        return (np.arange(self.n) - (self.n - 1) / 2.0) * self.dx

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """(y, x) coordinate arrays, row index first."""
        ax = self.axis()
        return np.meshgrid(ax, ax, indexing="ij")

    def polar(self) -> tuple[np.ndarray, np.ndarray]:
        """(r, phi) arrays; phi in (-pi, pi]."""
        yy, xx = self.mesh()
        return np.hypot(xx, yy), np.arctan2(yy, xx)


@dataclass(frozen=True)
class ComplexField:
    """Complex transverse field sampled on a grid."""

    grid: Grid
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        a = self.amplitudes
        if a.shape != (self.grid.n, self.grid.n):
            raise ValueError(
                f"amplitude shape {a.shape} does not match grid n={self.grid.n}"
            )
        if not np.iscomplexobj(a):
            object.__setattr__(self, "amplitudes", a.astype(np.complex128))

    def power(self) -> float:
        """Total power, the quadrature estimate of the |psi|^2 integral."""
        return float(np.sum(np.abs(self.amplitudes) ** 2)) * self.grid.dx**2

    def normalized(self) -> "ComplexField":
        p = self.power()
        if p <= 0.0 or not np.isfinite(p):
            raise ValueError("cannot normalize a field with non-positive power")
        return ComplexField(self.grid, self.amplitudes / np.sqrt(p))


@dataclass(frozen=True)
class PhaseMask:
    """Pointwise phase in (-pi, pi] applied by an ideal phase-only modulator."""

    grid: Grid
    phases: np.ndarray

    def __post_init__(self) -> None:
        if self.phases.shape != (self.grid.n, self.grid.n):
            raise ValueError("phase array does not match grid")


def gaussian_field(grid: Grid, waist: float) -> ComplexField:
    """Normalized fundamental Gaussian exp(-r^2/w^2) on the grid."""
    if not np.isfinite(waist) or waist <= 0:
        raise ValueError(f"waist must be positive and finite, got {waist}")
    r, _ = grid.polar()
    return ComplexField(grid, np.exp(-(r**2) / waist**2)).normalized()


def apply_mask(field: ComplexField, mask: PhaseMask) -> ComplexField:
    """Multiply by exp(i*phase) pointwise. Power is preserved."""
    if field.grid != mask.grid:
        raise ValueError("field and mask live on different grids")
    return ComplexField(field.grid, field.amplitudes * np.exp(1j * mask.phases))


def _half_sample_ramp(n: int) -> np.ndarray:
    # exp(+2*pi*i*c*j/n) with c = (n-1)/2 compensates the cell-center offset
    c = (n - 1) / 2.0
    return np.exp(2j * np.pi * c * np.arange(n) / n)


def far_field(field: ComplexField) -> ComplexField:
    """Propagate to the lens focal plane (spatial-frequency coordinates).

    Energy-preserving: output power equals input power (Parseval). The
    output grid spans +/- 1/(2*dx) with the same cell-centered layout.
    """
    grid = field.grid
    n, dx = grid.n, grid.dx
    c = (n - 1) / 2.0
    ramp = _half_sample_ramp(n)
    inner = field.amplitudes * np.outer(ramp, ramp)
    spectrum = np.fft.fft2(inner)
    spectrum *= np.outer(ramp, ramp)
    spectrum *= dx**2 * np.exp(-4j * np.pi * c**2 / n)
    out_grid = Grid(n, 1.0 / (2.0 * dx))
    return ComplexField(out_grid, spectrum)


def smf_coupling(field: ComplexField, smf_waist: float) -> float:
    """Power coupling of a unit-power field into a fundamental Gaussian mode.

    The fiber mode is the normalized Gaussian of waist ``smf_waist``
    evaluated in the same plane (same coordinates) as ``field``.

    Raises:
        ValueError: if the field is not unit power to within 1e-6, or the
            waist is not positive and finite.
    """
    if abs(field.power() - 1.0) > 1e-6:
        raise ValueError("smf_coupling expects a unit-power field")
    mode = gaussian_field(field.grid, smf_waist)
    inner = np.vdot(mode.amplitudes, field.amplitudes) * field.grid.dx**2
    return float(np.abs(inner) ** 2)


def overlap_probability(bra: ComplexField, ket: ComplexField) -> float:
    """|<bra|ket>|^2 between two fields on the same grid."""
    if bra.grid != ket.grid:
        raise ValueError("overlap requires a common grid")
    inner = np.vdot(bra.amplitudes, ket.amplitudes) * bra.grid.dx**2
    return float(np.abs(inner) ** 2)


def intensity_image(field: ComplexField) -> np.ndarray:
    """Pointwise |psi|^2 of a field."""
    return np.abs(field.amplitudes) ** 2


def on_axis_fraction(intensity: np.ndarray) -> float:
    """Fraction of total intensity in the central 3x3 pixel block.

    For odd rasters the block is symmetric about the axis; for even ones
    the axis sits between samples and the block is taken at n//2 - 1.
    """
    n = intensity.shape[0]
    mid = n // 2 if n % 2 == 1 else n // 2 - 1
    lo = max(mid - 1, 0)
    block = intensity[lo : mid + 2, lo : mid + 2]
    total = float(np.sum(intensity))
    if total == 0.0:
        return 0.0
    return float(np.sum(block)) / total


def far_field_image(
    field: ComplexField, f_halfwidth: float, npix: int = 321
) -> np.ndarray:
    """Far-field intensity rendered on a fine raster around the axis.

    Evaluates the lens-plane Fourier integral directly on ``npix`` x
    ``npix`` frequency samples spanning +/- ``f_halfwidth``, which is far
    finer near the axis than the FFT raster of :func:`far_field`. Odd
    ``npix`` puts one sample exactly on the axis. Returns intensity.
    """
    if npix < 3:
        raise ValueError("rendering raster needs at least 3 pixels per side")
    if f_halfwidth <= 0:
        raise ValueError("f_halfwidth must be positive")
    x = field.grid.axis()
    df = 2.0 * f_halfwidth / npix
    f = (np.arange(npix) - (npix - 1) / 2.0) * df
    kernel = np.exp(-2j * np.pi * np.outer(f, x))
    projected = kernel @ field.amplitudes @ kernel.T
    projected *= field.grid.dx**2
    return np.abs(projected) ** 2
