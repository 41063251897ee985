import math
import random

import numpy as np
import pytest

from rbmrelax.errors import ConfigError, ParameterError
from rbmrelax.measure_sim import (
    CURVE_HEADER,
    MeasurementPlan,
    RelaxationCurve,
    default_dark_times,
    expected_signal,
    fit_exponential,
    gaussian_summary,
    read_curve,
    separation_scores,
    simulate_curve,
    simulate_spot_ensemble,
    write_curve,
    write_fit_json,
)

T1_REF = 130.0e-6  # s
PLAN = MeasurementPlan(
    dark_times=default_dark_times(T1_REF),
    shots_per_point=200_000,
    detection_window=500e-9,
    photon_rate=1e5,
    contrast=0.2,
)


def synthetic_curve(t1, plan, stderr=1e-6):
    pts = [(tau, expected_signal(tau, t1, plan.contrast), stderr)
           for tau in plan.dark_times]
    return RelaxationCurve(points=tuple(pts))


def test_expected_signal_anchor():
    # 1 - C + C/e at tau = T1
    assert expected_signal(T1_REF, T1_REF, 0.2) == pytest.approx(
        0.87357588823428856, rel=1e-15)
    assert expected_signal(0.0, T1_REF, 0.2) == 1.0
    assert expected_signal(1e3 * T1_REF, T1_REF, 0.2) == pytest.approx(0.8)


def test_default_dark_times_geometry():
    taus = default_dark_times(T1_REF, n_points=12, tau_min=1e-6,
                              span_factor=5.0)
    assert len(taus) == 12
    assert taus[0] == pytest.approx(1e-6)
    assert taus[-1] == pytest.approx(5.0 * T1_REF)
    ratios = [b / a for a, b in zip(taus, taus[1:])]
    assert max(ratios) == pytest.approx(min(ratios), rel=1e-12)
    with pytest.raises(ParameterError):
        default_dark_times(T1_REF, n_points=3)
    with pytest.raises(ParameterError):
        default_dark_times(1e-9, tau_min=1e-6, span_factor=5.0)


def test_plan_validation():
    with pytest.raises(ParameterError):
        MeasurementPlan(dark_times=(0.0, 1e-6, 2e-6), shots_per_point=10,
                        detection_window=500e-9, photon_rate=1e5, contrast=0.2)
    with pytest.raises(ParameterError):
        MeasurementPlan(dark_times=(2e-6, 1e-6, 3e-6, 4e-6), shots_per_point=10,
                        detection_window=500e-9, photon_rate=1e5, contrast=0.2)
    with pytest.raises(ParameterError):
        MeasurementPlan(dark_times=(1e-6, 2e-6, 3e-6, 4e-6), shots_per_point=10,
                        detection_window=500e-9, photon_rate=1e5, contrast=1.5)


def test_simulate_deterministic_per_seed():
    a = simulate_curve(T1_REF, PLAN, seed=42)
    b = simulate_curve(T1_REF, PLAN, seed=42)
    c = simulate_curve(T1_REF, PLAN, seed=43)
    assert a.points == b.points
    assert a.points != c.points


def test_simulate_tracks_expected_signal():
    big = MeasurementPlan(dark_times=PLAN.dark_times,
                          shots_per_point=10_000_000,
                          detection_window=500e-9, photon_rate=1e5,
                          contrast=0.2)
    curve = simulate_curve(T1_REF, big, seed=7)
    for tau, y, err in curve.points:
        mu = expected_signal(tau, T1_REF, 0.2)
        assert y == pytest.approx(mu, abs=5e-3)
        assert err > 0.0
        assert abs(y - mu) < 5.0 * err


def test_simulate_single_shot_sentinel():
    one = MeasurementPlan(dark_times=PLAN.dark_times, shots_per_point=1,
                          detection_window=500e-9, photon_rate=1e5,
                          contrast=0.2)
    curve = simulate_curve(T1_REF, one, seed=1)
    assert all(e == 0.0 for _, _, e in curve.points)


def test_fit_recovers_noise_free_curve():
    curve = synthetic_curve(T1_REF, PLAN)
    fit = fit_exponential(curve)
    assert fit.converged
    assert fit.t1_hat == pytest.approx(T1_REF, rel=1e-10)
    assert fit.amplitude == pytest.approx(0.2, rel=1e-8)
    assert fit.baseline == pytest.approx(0.8, rel=1e-8)
    assert not fit.singular_curvature


def test_fit_order_invariant():
    curve = synthetic_curve(T1_REF, PLAN)
    pts = list(curve.points)
    random.Random(0).shuffle(pts)
    shuffled = RelaxationCurve(points=tuple(pts))
    a = fit_exponential(curve)
    b = fit_exponential(shuffled)
    assert b.t1_hat == a.t1_hat
    assert b.covariance == a.covariance


def test_fit_unweighted_on_zero_stderr():
    pts = [(tau, expected_signal(tau, T1_REF, 0.2), 0.0)
           for tau in PLAN.dark_times]
    fit = fit_exponential(RelaxationCurve(points=tuple(pts)))
    assert fit.converged
    assert fit.t1_hat == pytest.approx(T1_REF, rel=1e-8)


def test_fit_span_precondition():
    pts = [(t, 0.9, 1e-3) for t in (1.0e-6, 1.1e-6, 1.2e-6, 1.3e-6)]
    curve = RelaxationCurve(points=tuple(pts))
    with pytest.raises(ParameterError):
        fit_exponential(curve, initial_guess=(0.8, 0.2, 1e-3))


def test_fit_statistical_pull(tmp_path):
    curve = simulate_curve(T1_REF, PLAN, seed=99)
    fit = fit_exponential(curve)
    assert fit.converged
    assert abs(fit.t1_hat - T1_REF) < 5.0 * fit.t1_stderr
    # chi-square per dof should be order unity for a correct error model
    assert 0.2 < fit.reduced_chi_sq < 5.0
    out = tmp_path / "fit.json"
    write_fit_json(fit, out, plan=PLAN, seed=99, extra={"spot": 0})
    import json

    doc = json.loads(out.read_text())
    assert doc["t1_hat_s"] == fit.t1_hat
    assert doc["plan"]["shots_per_point"] == PLAN.shots_per_point
    assert doc["seed"] == 99 and doc["spot"] == 0


def test_curve_roundtrip(tmp_path):
    curve = simulate_curve(T1_REF, PLAN, seed=5)
    path = tmp_path / "curve.tsv"
    write_curve(curve, path)
    again = read_curve(path)
    assert again.points == curve.points


def test_read_curve_errors(tmp_path):
    bad_header = tmp_path / "h.tsv"
    bad_header.write_text("time signal err\n1e-6 0.9 1e-3\n")
    with pytest.raises(ConfigError, match=":1:"):
        read_curve(bad_header)

    bad_row = tmp_path / "r.tsv"
    bad_row.write_text("\t".join(CURVE_HEADER) + "\n1e-6 0.9\n")
    with pytest.raises(ConfigError, match=":2:"):
        read_curve(bad_row)

    not_num = tmp_path / "n.tsv"
    not_num.write_text("\t".join(CURVE_HEADER) + "\n1e-6 oops 1e-3\n")
    with pytest.raises(ConfigError, match="non-numeric"):
        read_curve(not_num)

    empty = tmp_path / "e.tsv"
    empty.write_text("\t".join(CURVE_HEADER) + "\n")
    with pytest.raises(ConfigError, match="no data rows"):
        read_curve(empty)


def test_gaussian_summary_matches_numpy():
    samples = [1.0, 2.0, 3.0, 4.0, 10.0]
    g = gaussian_summary(samples)
    assert g.mean == pytest.approx(4.0)
    assert g.sigma == pytest.approx(math.sqrt(10.0), rel=1e-15)
    assert g.n == 5
    with pytest.raises(ParameterError):
        gaussian_summary([1.0, 2.0, 3.0, 4.0])
    with pytest.raises(ParameterError):
        gaussian_summary([2.0] * 6)


def test_separation_scores_hand_values():
    from rbmrelax.measure_sim import GaussianSummary

    a = GaussianSummary(mean=10.0, sigma=2.0, n=20)
    b = GaussianSummary(mean=16.0, sigma=3.0, n=20)
    scores = separation_scores(a, b)
    assert scores["z_geometric"] == pytest.approx(6.0 / math.sqrt(6.0), rel=1e-15)
    assert scores["z_pooled"] == pytest.approx(6.0 / math.sqrt(6.5), rel=1e-15)
    assert separation_scores(b, a) == scores


def test_spot_ensemble_reproducible_and_accurate():
    plan = MeasurementPlan(dark_times=PLAN.dark_times,
                           shots_per_point=1_000_000_000,
                           detection_window=500e-9, photon_rate=1e5,
                           contrast=0.2)
    fits = simulate_spot_ensemble(lambda rng: T1_REF, n_spots=5, plan=plan,
                                  seed=2026)
    assert len(fits) == 5
    for fit in fits:
        assert fit.converged
        assert fit.t1_hat == pytest.approx(T1_REF, rel=1e-2)
        assert abs(fit.t1_hat - T1_REF) < 5.0 * fit.t1_stderr
    again = simulate_spot_ensemble(lambda rng: T1_REF, n_spots=5, plan=plan,
                                   seed=2026)
    assert [f.t1_hat for f in again] == [f.t1_hat for f in fits]
    with pytest.raises(ParameterError):
        simulate_spot_ensemble(lambda rng: T1_REF, n_spots=1, plan=plan, seed=1)


def test_spot_ensemble_flags_bad_sampler():
    fits = simulate_spot_ensemble(lambda rng: -1.0, n_spots=3, plan=PLAN,
                                  seed=1)
    assert all(not f.converged for f in fits)
    assert all(math.isnan(f.t1_hat) for f in fits)
