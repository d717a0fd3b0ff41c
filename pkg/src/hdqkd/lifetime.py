"""Arrival-time histograms and two-component exponential decay fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .source import PhotonEvents

__all__ = [
    "DecayCurve",
    "BiexpFit",
    "FitConvergenceError",
    "lifetime_histogram",
    "fit_biexponential",
]

# Bins below this count are too noisy for the log-space fit.
_MIN_BIN_COUNT = 5


@dataclass(frozen=True)
class DecayCurve:
    """Binned arrival-time histogram over one pulse period."""

    bin_centers: np.ndarray
    counts: np.ndarray
    bin_ns: float


@dataclass(frozen=True)
class BiexpFit:
    """Result of fitting A_fast*exp(-t/tau_fast) + A_slow*exp(-t/tau_slow).

    ``tau_fast < tau_slow`` by convention. ``degenerate`` flags fits where
    one amplitude collapses or the two lifetimes coincide, i.e. the data
    is effectively single-exponential.
    """

    amp_fast: float
    tau_fast: float
    amp_slow: float
    tau_slow: float
    residual_norm: float
    degenerate: bool


class FitConvergenceError(RuntimeError):
    """Fit did not converge; ``best`` carries the final iterate."""

    def __init__(self, message: str, best: BiexpFit):
        super().__init__(message)
        self.best = best


def lifetime_histogram(
    events: PhotonEvents, bin_ns: float, period_ns: float
) -> DecayCurve:
    """Histogram of arrival offsets over one pulse period."""
    if bin_ns <= 0:
        raise ValueError("bin width must be positive")
    n_bins = max(int(round(period_ns / bin_ns)), 1)
    counts, edges = np.histogram(
        events.t_offset, bins=n_bins, range=(0.0, n_bins * bin_ns)
    )
    centers = 0.5 * (edges[:-1] + edges[1:])
    return DecayCurve(bin_centers=centers, counts=counts.astype(np.int64), bin_ns=bin_ns)


def _log_linear(t: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Straight-line fit to log counts; returns (amplitude, lifetime)."""
    slope, intercept = np.polyfit(t, np.log(y), 1)
    lifetime = -1.0 / slope if slope < 0 else np.inf
    return float(np.exp(intercept)), float(lifetime)


def _initial_guess(t: np.ndarray, y: np.ndarray) -> tuple[float, float, float, float]:
    # two-segment log-linear start: the tail fixes the slow component,
    # the early-time excess over it fixes the fast one
    split = max(len(t) // 2, 2)
    amp_slow, tau_slow = _log_linear(t[split:], y[split:])
    if not np.isfinite(tau_slow) or tau_slow <= 0:
        amp_slow, tau_slow = y[-1], max(t[-1], 1.0)
    excess = y - amp_slow * np.exp(-t / tau_slow)
    early = excess[: max(len(t) // 4, 2)]
    early_t = t[: max(len(t) // 4, 2)]
    good = early > np.max(y) * 1e-3
    if good.sum() >= 2:
        amp_fast, tau_fast = _log_linear(early_t[good], early[good])
        if not np.isfinite(tau_fast) or tau_fast <= 0:
            amp_fast, tau_fast = amp_slow, tau_slow / 5.0
    else:
        amp_fast, tau_fast = amp_slow * 1e-2, tau_slow / 5.0
    return amp_fast, tau_fast, amp_slow, tau_slow


def fit_biexponential(curve: DecayCurve, max_nfev: int = 400) -> BiexpFit:
    """Least-squares two-exponential fit of a decay curve.

    Works on the log of the counts with Poisson weights (sqrt of counts),
    over bins holding at least five counts; parameters are fitted in log
    space to stay positive. Deterministic: the starting point comes from
    a fixed two-segment log-linear regression.

    Raises:
        ValueError: fewer than 20 usable bins.
        FitConvergenceError: optimizer exhausted ``max_nfev``; the error
            carries the best iterate.
    """
    usable = curve.counts >= _MIN_BIN_COUNT
    t = curve.bin_centers[usable].astype(float)
    y = curve.counts[usable].astype(float)
    if len(t) < 20:
        raise ValueError(f"need at least 20 usable bins, have {len(t)}")
    log_y = np.log(y)
    weights = np.sqrt(y)
    theta0 = np.log(_initial_guess(t, y))

    def residuals(theta: np.ndarray) -> np.ndarray:
        a1, tau1, a2, tau2 = np.exp(theta)
        model = a1 * np.exp(-t / tau1) + a2 * np.exp(-t / tau2)
        return (np.log(model) - log_y) * weights

    result = least_squares(residuals, theta0, method="lm", max_nfev=max_nfev)
    a1, tau1, a2, tau2 = np.exp(result.x)
    if tau1 > tau2:
        a1, tau1, a2, tau2 = a2, tau2, a1, tau1
    big, small = max(a1, a2), min(a1, a2)
    degenerate = (small / big < 1e-3) or (abs(tau2 / tau1 - 1.0) < 0.05)
    fit = BiexpFit(
        amp_fast=float(a1),
        tau_fast=float(tau1),
        amp_slow=float(a2),
        tau_slow=float(tau2),
        residual_norm=float(np.linalg.norm(result.fun)),
        degenerate=bool(degenerate),
    )
    if not result.success:
        raise FitConvergenceError(
            f"biexponential fit did not converge: {result.message}", best=fit
        )
    return fit
