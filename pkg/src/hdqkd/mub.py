"""Two mutually unbiased qutrit bases built from orbital angular momentum.

Basis 1 holds the three pure-OAM states with winding numbers -1, 0, +1.
Basis 2 holds three equal-weight superpositions of them with cube-root-of-
unity phases, arranged so every cross-basis projection probability is
exactly 1/3. State names follow the conventional a, b, c / alpha, beta,
gamma labeling of the six states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ModeLabel",
    "MODE_LABELS",
    "mub_coefficients",
    "parse_label",
]

_MUB1_NAMES = ("a", "b", "c")
_MUB2_NAMES = ("alpha", "beta", "gamma")


@dataclass(frozen=True, order=True)
class ModeLabel:
    """One of the six encodable states: basis in {1, 2}, index in {0, 1, 2}."""

    basis: int
    index: int

    def __post_init__(self) -> None:
        if self.basis not in (1, 2):
            raise ValueError(f"basis must be 1 or 2, got {self.basis}")
        if self.index not in (0, 1, 2):
            raise ValueError(f"index must be 0, 1 or 2, got {self.index}")

    @property
    def name(self) -> str:
        names = _MUB1_NAMES if self.basis == 1 else _MUB2_NAMES
        return names[self.index]

    @property
    def oam(self) -> int:
        """Winding number for basis-1 states; undefined for basis 2."""
        if self.basis != 1:
            raise ValueError("only basis-1 states carry a single winding number")
        return self.index - 1


MODE_LABELS: tuple[ModeLabel, ...] = tuple(
    ModeLabel(basis, index) for basis in (1, 2) for index in (0, 1, 2)
)


def parse_label(name: str) -> ModeLabel:
    """Map a state name (a, b, c, alpha, beta, gamma) to its label."""
    key = name.strip().lower()
    for label in MODE_LABELS:
        if label.name == key:
            return label
    raise ValueError(f"unknown mode name {name!r}")


def mub_coefficients() -> np.ndarray:
    """Coefficients of the basis-2 states in the basis-1 states.

    Returns a unitary 3x3 complex matrix M with column j holding the
    basis-1 amplitudes of basis-2 state j; every entry has squared modulus
    1/3. Rows are ordered by winding number -1, 0, +1.
    """
    z = np.exp(2j * np.pi / 3.0)
    m = np.array(
        [
            [1.0, 1.0, 1.0],
            [1.0, z, z**2],
            [z**2, z, 1.0],
        ],
        dtype=np.complex128,
    )
    return m / np.sqrt(3.0)
