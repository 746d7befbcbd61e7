import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from lgdid.cashflow import LoanRecord, SegmentConfig
from lgdid.curve import (
    SCHEMES,
    EmpiricalCurve,
    RecoveryCurveFit,
    RecoveryCurveFitter,
    _dispersion,
    aggregate_curve,
    fit,
    fit_all,
    fit_conservative,
    mad,
    scheme_weights,
    select_conservative,
    t_n_of_theta,
)
from lgdid.evaluation import generate_portfolio, preset
from lgdid.exceptions import DegeneratePointError, InsufficientDataError, LGDIDError, ParameterError

from oracles import sigma2_bruteforce

N = 124
MONTHS = np.arange(1, N + 1)


def model_curve(T, r_inf, horizon=N):
    n = np.arange(1, horizon + 1)
    return EmpiricalCurve(r_inf * (1.0 - np.exp(-n / T)))


def early_dip_curve():
    n = np.arange(1, 61)
    values = 0.4 * (1 - np.exp(-n / 15)) + np.where(n < 10, -0.01 * (10 - n) / 10, 0.0)
    return EmpiricalCurve(np.maximum.accumulate(values))


class TestWeights:
    @pytest.mark.parametrize("scheme", SCHEMES)
    @pytest.mark.parametrize("horizon", [1, 2, 7, 124])
    def test_sum_to_one(self, scheme, horizon):
        p = scheme_weights(scheme, horizon)
        assert p.sum() == pytest.approx(1.0, abs=1e-14)
        assert np.all(p >= 0)

    def test_shapes(self):
        assert np.all(np.diff(scheme_weights("front", 10)) < 0)
        assert scheme_weights("front", 10)[-1] == 0.0
        assert np.all(np.diff(scheme_weights("back", 10)) > 0)
        np.testing.assert_allclose(scheme_weights("back", 10), 2 * np.arange(1, 11) / 110)

    def test_unknown(self):
        with pytest.raises(ParameterError):
            scheme_weights("middle", 10)


class TestAggregate:
    def test_single_full_repayment(self):
        curve = aggregate_curve([LoanRecord("a", 50.0, 0.0, ((1, 50.0),))])
        assert np.all(curve.values == 1.0)

    def test_weighted_mean(self):
        loans = [
            LoanRecord("a", 100.0, 0.0, ((6, 40.0),)),
            LoanRecord("b", 300.0, 0.0, ((6, 60.0),)),
        ]
        curve = aggregate_curve(loans, SegmentConfig(12))
        assert curve.at(6) == pytest.approx(0.25, abs=1e-15)
        assert curve.at(5) == 0.0

    def test_follows_generator_law(self):
        loans = generate_portfolio(preset("consumer", n_loans=3000, payment_noise=0.05, seed=5))
        curve = aggregate_curve(loans)
        np.testing.assert_allclose(curve.values, 0.216 * (1 - np.exp(-MONTHS / 11.3)), atol=2e-3)

    def test_empty(self):
        with pytest.raises(LGDIDError):
            aggregate_curve([])


class TestImpliedTime:
    def test_inverts_law(self):
        curve = model_curve(23.47, 0.396)
        theta = (0.396 - curve.terminal) / (1 - curve.terminal)
        for n in (1, 10, 60, 124):
            assert t_n_of_theta(curve, n, theta) == pytest.approx(23.47, rel=1e-8)

    def test_half_life(self):
        # R(16) = R_inf / 2 -> T_16 = 16 / ln 2
        theta = 0.1
        r_n = 0.4
        r_inf = r_n + theta * (1 - r_n)
        values = np.linspace(0.01, r_n, 30)
        values[15] = 0.5 * r_inf
        values = np.maximum.accumulate(values)
        curve = EmpiricalCurve(values)
        assert t_n_of_theta(curve, 16, theta) == pytest.approx(16 / math.log(2), rel=1e-12)

    def test_degenerate(self):
        curve = EmpiricalCurve([0.0, 0.1, 0.2])
        with pytest.raises(DegeneratePointError):
            t_n_of_theta(curve, 1, 0.5)
        with pytest.raises(ParameterError):
            t_n_of_theta(curve, 2, 0.0)

    def test_tiny_theta_excludes_terminal_point(self):
        values = np.array([0.1, 0.2, 0.3])
        t_n, usable = _dispersion(values, np.arange(1.0, 4.0), np.full(3, 1 / 3), [1e-300])
        assert np.isfinite(t_n).all()


class TestFit:
    @pytest.mark.parametrize("T, r_inf", [(23.47, 0.396), (11.3, 0.216)])
    @pytest.mark.parametrize("scheme", SCHEMES)
    def test_exact_curve_recovered(self, T, r_inf, scheme):
        curve = model_curve(T, r_inf)
        f = fit(curve, scheme)
        assert f.T == pytest.approx(T, abs=1e-3)
        assert f.r_inf == pytest.approx(r_inf, abs=1e-6)
        assert f.sigma_T <= 1e-6
        assert f.mad <= 1e-12
        assert f.scheme == scheme

    def test_schemes_agree_on_noiseless_curve(self):
        fits = fit_all(model_curve(17.0, 0.55))
        Ts = [f.T for f in fits.values()]
        rs = [f.r_inf for f in fits.values()]
        assert max(Ts) - min(Ts) <= 1e-6
        assert max(rs) - min(rs) <= 1e-6

    def test_deterministic(self):
        curve = early_dip_curve()
        assert fit(curve, "back") == fit(curve, "back")

    @pytest.mark.parametrize("scheme", SCHEMES)
    def test_matches_bruteforce_scan(self, scheme):
        curve = early_dip_curve()
        f = fit(curve, scheme)
        values = list(curve.values)
        grid = np.arange(1e-4, 0.2, 1e-4)
        s2 = [sigma2_bruteforce(values, scheme, th)[0] for th in grid]
        best = float(grid[int(np.argmin(s2))])
        assert abs(f.theta_star - best) <= 1e-4
        # no grid point beats the refined optimum
        assert f.sigma_T ** 2 <= min(s2) * (1 + 1e-12)
        var_star, mean_star = sigma2_bruteforce(values, scheme, f.theta_star)
        assert f.T == pytest.approx(mean_star, rel=1e-12)
        assert f.sigma_T == pytest.approx(math.sqrt(var_star), rel=1e-9)

    def test_insufficient_data(self):
        with pytest.raises(InsufficientDataError):
            fit(EmpiricalCurve([0.0, 0.0, 0.3]))
        with pytest.raises(InsufficientDataError):
            fit(EmpiricalCurve([0.5, 1.0]))

    def test_invalid_curve(self):
        with pytest.raises(LGDIDError):
            EmpiricalCurve([0.3, 0.2])


class TestConservative:
    def test_noiseless_any_scheme(self):
        curve = model_curve(23.47, 0.396)
        f = fit_conservative(curve)
        assert f.T == pytest.approx(23.47, abs=1e-3)

    def test_perturbed_curve_picks_back_loaded(self):
        curve = early_dip_curve()
        values = list(curve.values)
        grid = np.arange(1e-5, 0.2, 1e-4)
        oracle = {}
        for scheme in SCHEMES:
            s2 = [sigma2_bruteforce(values, scheme, th)[0] for th in grid]
            th = grid[int(np.argmin(s2))]
            oracle[scheme] = values[-1] + th * (1 - values[-1])
        assert min(oracle, key=oracle.get) == "back"
        chosen = fit_conservative(curve)
        assert chosen.scheme == "back"
        assert chosen.r_inf == pytest.approx(oracle["back"], abs=1e-4)

    def test_argmin_and_tiebreak(self):
        mk = lambda r, T, s: RecoveryCurveFit(T, 0.0, r, 0.1, s, 0.0)
        fits = [mk(0.40, 10.0, "uniform"), mk(0.39, 12.0, "front"), mk(0.41, 9.0, "back")]
        assert select_conservative(fits).r_inf == 0.39
        tie = [mk(0.39, 12.0, "uniform"), mk(0.39, 11.0, "back")]
        assert select_conservative(tie).scheme == "back"

    def test_not_above_any_scheme(self):
        curve = early_dip_curve()
        fits = fit_all(curve)
        chosen = fit_conservative(curve)
        assert all(chosen.r_inf <= f.r_inf for f in fits.values())


class TestMAD:
    def test_exact_curve(self):
        curve = model_curve(30.0, 0.6)
        assert mad(curve, RecoveryCurveFit(30.0, 0.0, 0.6, 0.5, "uniform", 0.0)) <= 1e-12

    def test_hand_value(self):
        curve = EmpiricalCurve([0.1, 0.2])
        f = RecoveryCurveFit(1.0, 0.0, 0.2, 0.5, "uniform", 0.0)
        expected = (abs(0.1 - 0.2 * (1 - math.exp(-1))) + abs(0.2 - 0.2 * (1 - math.exp(-2)))) / 2
        assert mad(curve, f) == pytest.approx(expected, abs=1e-15)

    def test_mortgage_like_portfolio(self):
        loans = generate_portfolio(preset("mortgage", payment_noise=0.05, r_inf_dispersion=0.1, seed=11))
        f = fit_conservative(aggregate_curve(loans))
        assert f.mad < 0.01

    def test_consumer_like_portfolio(self):
        loans = generate_portfolio(preset("consumer", n_loans=10_000, payment_noise=0.05, r_inf_dispersion=0.05, seed=12))
        f = fit_conservative(aggregate_curve(loans))
        assert f.mad < 0.005

    def test_permutation_invariant(self, rng):
        loans = generate_portfolio(preset("mortgage", n_loans=60, payment_noise=0.1, r_inf_dispersion=0.1, seed=3))
        f = fit_conservative(aggregate_curve(loans))
        shuffled = [loans[i] for i in rng.permutation(len(loans))]
        curve2 = aggregate_curve(shuffled)
        assert mad(curve2, f) == pytest.approx(mad(aggregate_curve(loans), f), abs=1e-14)


@given(T=st.floats(8.0, 60.0), r_inf=st.floats(0.05, 0.95), horizon=st.integers(60, 160))
def test_exact_law_recovered_property(T, r_inf, horizon):
    # theta is clamped to [1e-9, 1 - 1e-9]; keep the true tail share resolvable
    assume(math.exp(-horizon / T) > 1e-6)
    curve = model_curve(T, r_inf, horizon)
    for f in fit_all(curve).values():
        assert f.r_inf >= curve.terminal
        assert f.r_inf <= 1.0
        assert abs(f.T - T) / T <= 1e-3
        assert f.sigma_T <= 1e-6


class TestEstimator:
    def test_fit_from_loans_and_curve(self):
        loans = generate_portfolio(preset("mortgage", n_loans=50, seed=1))
        est = RecoveryCurveFitter().fit(loans)
        assert est.recovery_time_ == pytest.approx(23.47, abs=1e-3)
        est2 = RecoveryCurveFitter(scheme="uniform").fit(est.curve_.values)
        assert est2.result_.scheme == "uniform"
        assert est2.r_inf_ == pytest.approx(0.396, abs=1e-6)
        np.testing.assert_allclose(est.predict([0, 23.47]), [0.0, 0.396 * (1 - math.exp(-1))], atol=1e-6)
        assert est.score() <= 0 and est.score() > -1e-12

    def test_get_set_params(self):
        est = RecoveryCurveFitter(scheme="back", horizon_months=60)
        assert est.get_params()["scheme"] == "back"
        est.set_params(scheme="front")
        assert est.scheme == "front"

    def test_not_fitted(self):
        from sklearn.exceptions import NotFittedError

        with pytest.raises(NotFittedError):
            RecoveryCurveFitter().predict([1, 2])
