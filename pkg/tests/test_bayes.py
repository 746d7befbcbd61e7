import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lgdid.bayes import (
    InDefaultLGD,
    blend,
    blended_r_inf,
    forecast_lgd,
    forecast_recovery,
    raw_posterior_path,
    raw_posterior_r_inf,
    score_loan,
    score_series,
    segment_average_recovery,
)
from lgdid.cashflow import LoanRecord, SegmentConfig, discount_recoveries
from lgdid.conjugate import lgd_blend_weight
from lgdid.evaluation import generate_portfolio, preset
from lgdid.exceptions import ConfigurationError, ParameterError

from oracles import exponential_increments


def stream_loan(r_inf, T, months, lgd_wd=None):
    inc = exponential_increments(r_inf, T, months)
    return LoanRecord("s", 1.0, 0.0, tuple((n + 1, float(a)) for n, a in enumerate(inc)), lgd_wd)


class TestRawPosterior:
    def test_no_payments(self):
        s = discount_recoveries(LoanRecord("a", 100.0, 0.05, ((20, 10.0),)))
        assert raw_posterior_r_inf(s, 12.0, 10) == 0.0

    def test_single_payment(self):
        s = discount_recoveries(LoanRecord("a", 100.0, 0.0, ((1, 20.0),)))
        assert raw_posterior_r_inf(s, 12.0, 1) == pytest.approx(0.2 + 0.2 * 11, abs=1e-15)
        assert raw_posterior_r_inf(s, 12.0, 1) == pytest.approx(2.4, abs=1e-15)

    def test_undefined_at_zero(self):
        s = discount_recoveries(LoanRecord("a", 100.0, 0.0))
        with pytest.raises(ParameterError):
            raw_posterior_r_inf(s, 12.0, 0)

    def test_posterior_consistency(self):
        loan = stream_loan(0.4, 12.0, 1200)
        s = discount_recoveries(loan, SegmentConfig(1200))
        assert raw_posterior_r_inf(s, 12.0, 120) == pytest.approx(0.4, rel=0.01)
        assert raw_posterior_r_inf(s, 12.0, 1200) == pytest.approx(0.4, rel=0.001)

    def test_path_matches_scalar(self):
        loan = LoanRecord("a", 500.0, 0.2, ((2, 30.0), (3, 5.0), (17, 80.0), (40, 1.0)))
        s = discount_recoveries(loan, SegmentConfig(60))
        path = raw_posterior_path(s, 9.5, np.arange(61))
        assert path[0] == 0.0
        for t in range(1, 61):
            assert path[t] == pytest.approx(raw_posterior_r_inf(s, 9.5, t), rel=1e-12, abs=1e-15)

    def test_discrete_bias(self):
        # exponential increments: sum n * RR_n -> R_inf / (1 - exp(-1/T)) ~ R_inf (T + 1/2 + 1/(12 T))
        T, r_inf, t = 20.0, 0.5, 4000
        s = discount_recoveries(stream_loan(r_inf, T, t), SegmentConfig(t))
        expected = r_inf * (1 + (T - 1 / (1 - math.exp(-1 / T))) / t)
        assert raw_posterior_r_inf(s, T, t) == pytest.approx(expected, rel=1e-9)


class TestBlend:
    def test_prior_only_at_zero(self):
        loan = LoanRecord("a", 100.0, 0.0, ((1, 50.0),), lgd_wd=0.6)
        s = discount_recoveries(loan)
        assert blended_r_inf(loan, s, 12.0, 0) == 0.4

    def test_equal_weights_at_T(self):
        loan = LoanRecord("a", 100.0, 0.0, ((12, 60.0),), lgd_wd=0.6)
        s = discount_recoveries(loan)
        assert raw_posterior_r_inf(s, 12.0, 12) == pytest.approx(0.6)
        assert blended_r_inf(loan, s, 12.0, 12) == pytest.approx(0.5, abs=1e-15)
        assert blend(0.4, 0.6, 12.0, 12.0) == pytest.approx(0.5, abs=1e-15)

    def test_large_t_follows_data(self):
        T = 10.0
        loan = stream_loan(0.3, T, 20000, lgd_wd=0.1)
        s = discount_recoveries(loan, SegmentConfig(20000))
        assert blended_r_inf(loan, s, T, 20000) == pytest.approx(0.3, abs=2e-3)

    def test_clamped(self):
        assert blend(0.9, 2.4, 1.0, 12.0) == 1.0
        loan = LoanRecord("a", 100.0, 0.0, ((1, 20.0),), lgd_wd=0.0)
        assert blended_r_inf(loan, discount_recoveries(loan), 12.0, 1) == 1.0

    def test_missing_prior(self):
        loan = LoanRecord("a", 100.0, 0.0)
        with pytest.raises(ConfigurationError):
            blended_r_inf(loan, discount_recoveries(loan), 12.0, 3)
        assert blended_r_inf(loan, discount_recoveries(loan), 12.0, 0, fallback_lgd_wd=0.7) == pytest.approx(0.3)

    def test_weight_is_shared(self):
        assert lgd_blend_weight(0, 7.0) == 1.0
        assert lgd_blend_weight(7.0, 7.0) == 0.5
        assert lgd_blend_weight(21.0, 7.0) == 0.25
        with pytest.raises(ParameterError):
            lgd_blend_weight(1.0, 0.0)


class TestForecast:
    def test_recovery(self):
        assert forecast_recovery(0.5, 10.0, 0) == 0.0
        assert forecast_recovery(0.396, 23.47, 23.47) == pytest.approx(0.396 * (1 - math.exp(-1)), abs=1e-15)
        assert forecast_recovery(0.396, 23.47, 23.47) == pytest.approx(0.2503, abs=1e-4)
        assert forecast_recovery(0.396, 23.47, 1e6) == pytest.approx(0.396, abs=1e-15)

    def test_lgd(self):
        assert forecast_lgd(1.0, 0.3) == 0.0
        assert forecast_lgd(0.4, 0.0) == pytest.approx(0.6)
        assert forecast_lgd(0.4, 0.2503) == pytest.approx(0.6 / 0.7497, abs=1e-12)
        assert forecast_lgd(0.4, 0.2503) == pytest.approx(0.8003, abs=1e-4)
        assert forecast_lgd(0.99, 1.0) == 1.0

    def test_segment_average(self):
        assert segment_average_recovery(0.28, 23.47, 1e5) == pytest.approx(0.28, abs=1e-15)
        assert segment_average_recovery(0.132, 11.3, 0) == 0.0
        assert segment_average_recovery(0.28, 23.47, 23.47) == pytest.approx(0.28 * (1 - math.exp(-1)), abs=1e-15)
        assert segment_average_recovery(0.28, 23.47, 23.47) == pytest.approx(0.1770, abs=1e-4)

    def test_path_matches_scalar_chain(self):
        loan = LoanRecord("a", 1000.0, 0.1, ((3, 100.0), (9, 50.0), (40, 200.0)), lgd_wd=0.35)
        series = discount_recoveries(loan)
        f = score_series(loan, series, 15.0)
        for t in range(1, 125):
            b = blended_r_inf(loan, series, 15.0, t)
            r = forecast_recovery(b, 15.0, t)
            assert f.blended[t] == pytest.approx(b, rel=1e-12)
            assert f.forecast_recovery[t] == pytest.approx(r, rel=1e-12, abs=1e-300)
            assert f.forecast_lgd[t] == pytest.approx(forecast_lgd(b, r), rel=1e-12)


lgd_values = st.floats(0.0, 1.0)
pays = st.lists(st.tuples(st.integers(1, 124), st.floats(0.0, 0.3)), max_size=30)


@given(lgd_wd=lgd_values, pays=pays, T=st.floats(2.0, 60.0), rate=st.floats(0, 0.4))
def test_forecast_invariants(lgd_wd, pays, T, rate):
    loan = LoanRecord.from_payments("p", 1000.0, rate, [(m, a * 1000.0) for m, a in pays], lgd_wd)
    f = score_loan(loan, T)
    assert f.forecast_lgd[0] == lgd_wd
    assert np.all(f.forecast_recovery <= f.blended + 1e-15)
    for arr in (f.blended, f.forecast_recovery, f.forecast_lgd):
        assert np.all((arr >= 0) & (arr <= 1))
    # convex combination before clipping
    w = 1 / (1 + f.t[1:] / T)
    unclipped = w * (1 - lgd_wd) + (1 - w) * f.raw_posterior[1:]
    lo = np.minimum(1 - lgd_wd, f.raw_posterior[1:])
    hi = np.maximum(1 - lgd_wd, f.raw_posterior[1:])
    assert np.all((unclipped >= lo - 1e-12) & (unclipped <= hi + 1e-12))


@given(pays=st.lists(st.tuples(st.integers(1, 124), st.floats(0.0, 0.2), st.floats(0, 1)), max_size=20))
def test_split_payment_invariance(pays):
    whole = [(m, a * 1000.0) for m, a, _ in pays]
    split = [(m, a * 1000.0 * s) for m, a, s in pays] + [(m, a * 1000.0 * (1 - s)) for m, a, s in pays]
    f1 = score_loan(LoanRecord.from_payments("a", 1000.0, 0.1, whole, 0.5), 12.0)
    f2 = score_loan(LoanRecord.from_payments("a", 1000.0, 0.1, split, 0.5), 12.0)
    for a, b in [(f1.raw_posterior, f2.raw_posterior), (f1.blended, f2.blended),
                 (f1.forecast_recovery, f2.forecast_recovery), (f1.forecast_lgd, f2.forecast_lgd)]:
        np.testing.assert_allclose(a, b, atol=1e-12, rtol=0)


def test_long_run_limit():
    T = 12.0
    loan = LoanRecord("a", 100.0, 0.0, ((2, 10.0), (8, 15.0), (30, 5.0)), lgd_wd=0.2)
    series = discount_recoveries(loan)
    t = 50 * T
    b = blended_r_inf(loan, series, T, t)
    assert forecast_lgd(b, forecast_recovery(b, T, t)) == pytest.approx(1.0, abs=1e-3)


class TestEstimator:
    def test_fit_predict(self):
        loans = generate_portfolio(preset("mortgage", n_loans=80, r_inf_dispersion=0.15, payment_noise=0.05, seed=2))
        est = InDefaultLGD().fit(loans)
        assert est.recovery_time_ == pytest.approx(23.47, rel=0.05)
        pred = est.predict(loans)
        assert pred.shape == (80, 125)
        np.testing.assert_array_equal(pred[:, 0], [l.lgd_wd for l in loans])
        assert est.predict_recovery(loans[:3]).shape == (3, 125)

    def test_fixed_recovery_time_and_fallback(self):
        loans = [LoanRecord("a", 100.0, 0.0, ((3, 10.0),))]
        est = InDefaultLGD(recovery_time=10.0, lgd_wd=0.45, horizon_months=24).fit(loans)
        assert est.curve_fit_ is None
        assert est.predict(loans)[0, 0] == 0.45
        assert est.get_params()["recovery_time"] == 10.0
