"""Secret-key-rate arithmetic for qudit prepare-and-measure protocols.

All rates are in bits per sifted photon. The generalized Shannon entropy
``h_d`` treats a symbol error as landing uniformly on one of the ``d - 1``
wrong symbols, which is the standard channel model for mutually unbiased
qudit bases.
"""

from __future__ import annotations

import math

__all__ = [
    "shannon_entropy",
    "secure_key_rate",
    "max_tolerated_error",
    "rate_curve",
]


def shannon_entropy(x: float, dim: int) -> float:
    """d-dimensional Shannon entropy h_d(x) of an error rate x.

    h_d(x) = -x*log2(x/(d-1)) - (1-x)*log2(1-x), with the x*log(x) -> 0
    convention at both endpoints.

    Args:
        x: symbol error rate, in [0, 1].
        dim: alphabet size d, at least 2.

    Raises:
        ValueError: if x is outside [0, 1] or dim < 2.
    """
    if dim < 2:
        raise ValueError(f"dimension must be >= 2, got {dim}")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"error rate must be in [0, 1], got {x}")
    acc = 0.0
    if x > 0.0:
        # log of the quotient, written as a difference so subnormal x
        # cannot underflow the argument to zero
        acc -= x * (math.log2(x) - math.log2(dim - 1))
    if x < 1.0:
        acc -= (1.0 - x) * math.log2(1.0 - x)
    return acc


def secure_key_rate(e1: float, e2: float, dim: int) -> float:
    """Asymptotic secure bits per sifted photon for a two-basis protocol.

    R = log2(d) - h_d(e1) - h_d(e2) where e1 and e2 are the error rates
    measured in the two bases. May be negative; a non-positive value means
    no secure key can be distilled.
    """
    return math.log2(dim) - shannon_entropy(e1, dim) - shannon_entropy(e2, dim)


def max_tolerated_error(dim: int, tol: float = 1e-6) -> float:
    """Largest symmetric error rate with a non-negative key rate.

    Root of log2(d) - 2*h_d(e) on (0, (d-1)/d), located by bisection to
    within ``tol``.
    """
    if dim < 2:
        raise ValueError(f"dimension must be >= 2, got {dim}")
    lo = 0.0
    hi = (dim - 1) / dim

    def gap(e: float) -> float:
        return math.log2(dim) - 2.0 * shannon_entropy(e, dim)

    # gap(lo) = log2(d) > 0 and gap(hi) = -log2(d) < 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if gap(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def rate_curve(
    dim: int, e_max: float = 0.2, n_points: int = 201
) -> list[tuple[float, float]]:
    """Sampled (e, R) curve with both bases at the same error rate e."""
    if n_points < 2:
        raise ValueError("need at least two curve points")
    step = e_max / (n_points - 1)
    return [
        (i * step, secure_key_rate(i * step, i * step, dim))
        for i in range(n_points)
    ]
