import numpy as np
import pytest

from hdqkd.lifetime import (
    BiexpFit,
    DecayCurve,
    FitConvergenceError,
    fit_biexponential,
    lifetime_histogram,
)
from hdqkd.source import PhotonEvents, SourceParams, simulate_emission

PARAMS = SourceParams()


def synthetic_curve(a_fast, tau_fast, a_slow, tau_slow, t_max=400.0):
    t = np.arange(0.5, t_max, 1.0)
    model = a_fast * np.exp(-t / tau_fast) + a_slow * np.exp(-t / tau_slow)
    return DecayCurve(t, np.round(model).astype(np.int64), 1.0)


def test_histogram_of_empty_stream_is_empty():
    curve = lifetime_histogram(PhotonEvents.empty(), 1.0, 500.0)
    assert curve.counts.sum() == 0
    assert len(curve.counts) == 500


def test_histogram_validation():
    with pytest.raises(ValueError):
        lifetime_histogram(PhotonEvents.empty(), 0.0, 500.0)


def test_pure_exciton_slope_matches_lifetime():
    p = SourceParams(exciton_prob=1.0, biexciton_prob=0.0)
    ev = simulate_emission(p, 500_000, seed=31)
    curve = lifetime_histogram(ev, 1.0, p.period_ns)
    # independent log-linear regression over the well-populated range
    sel = (curve.counts > 100) & (curve.bin_centers < 100.0)
    slope, _ = np.polyfit(curve.bin_centers[sel], np.log(curve.counts[sel]), 1)
    assert -1.0 / slope == pytest.approx(25.0, rel=0.02)


def test_mixed_stream_is_sum_of_components():
    split = SourceParams(exciton_prob=1.0, biexciton_prob=0.0)
    bi = SourceParams(exciton_prob=0.0, biexciton_prob=1.0)
    both = SourceParams(exciton_prob=1.0, biexciton_prob=1.0)
    n = 300_000
    h_x = lifetime_histogram(simulate_emission(split, n, 32), 2.0, 500.0)
    h_b = lifetime_histogram(simulate_emission(bi, n, 33), 2.0, 500.0)
    h_both = lifetime_histogram(simulate_emission(both, n, 34), 2.0, 500.0)
    combined = h_x.counts + h_b.counts
    sel = combined > 200
    resid = (h_both.counts[sel] - combined[sel]) / np.sqrt(combined[sel] * 2.0)
    assert np.abs(resid).mean() < 3.0


def test_noiseless_fit_recovers_parameters():
    curve = synthetic_curve(2e5, 4.0, 5e4, 25.0)
    fit = fit_biexponential(curve)
    assert fit.tau_fast == pytest.approx(4.0, rel=0.01)
    assert fit.tau_slow == pytest.approx(25.0, rel=0.01)
    assert fit.amp_fast == pytest.approx(2e5, rel=0.02)
    assert not fit.degenerate


def test_fit_orders_lifetimes():
    curve = synthetic_curve(5e4, 25.0, 2e5, 4.0)  # components swapped
    fit = fit_biexponential(curve)
    assert fit.tau_fast < fit.tau_slow


def test_single_exponential_flags_degenerate():
    curve = synthetic_curve(0.0, 4.0, 1e6, 25.0)
    fit = fit_biexponential(curve)
    assert fit.degenerate


def test_monte_carlo_fit_recovers_lifetimes():
    ev = simulate_emission(PARAMS, 2_000_000, seed=35)
    curve = lifetime_histogram(ev, 1.0, PARAMS.period_ns)
    fit = fit_biexponential(curve)
    assert fit.tau_fast == pytest.approx(4.0, rel=0.05)
    assert fit.tau_slow == pytest.approx(25.0, rel=0.05)
    # amplitude ratio tracks the branch yields and decay speeds
    expected_ratio = (PARAMS.biexciton_prob / 4.0) / (PARAMS.exciton_prob / 25.0)
    assert fit.amp_fast / fit.amp_slow == pytest.approx(expected_ratio, rel=0.1)


def test_fit_requires_enough_bins():
    curve = synthetic_curve(2e5, 4.0, 5e4, 25.0, t_max=15.0)
    with pytest.raises(ValueError):
        fit_biexponential(curve)


def test_fit_convergence_error_carries_best_iterate():
    curve = synthetic_curve(2e5, 4.0, 5e4, 25.0)
    with pytest.raises(FitConvergenceError) as err:
        fit_biexponential(curve, max_nfev=2)
    assert isinstance(err.value.best, BiexpFit)
    assert err.value.best.tau_fast > 0


def test_fit_is_deterministic():
    ev = simulate_emission(PARAMS, 200_000, seed=36)
    curve = lifetime_histogram(ev, 1.0, PARAMS.period_ns)
    f1 = fit_biexponential(curve)
    f2 = fit_biexponential(curve)
    assert f1 == f2
