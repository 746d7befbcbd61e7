"""Per-loan posterior recovery and forecast in-default LGD.

For a loan observed up to workout month ``t`` with discounted recoveries
``RR_k`` paid in months ``t_k``:

* raw posterior asymptote ``S(t) + (1/t) * sum RR_k (T - t_k)``, ``S(t) = sum RR_k``
* blended asymptote ``w * (1 - lgd_wd) + (1 - w) * raw``, ``w = 1 / (1 + t / T)``
* forecast recovery ``blended * (1 - exp(-t / T))``
* forecast LGD ``(1 - blended) / (1 - forecast recovery)``

``T`` is the segment mean recovery time from :mod:`lgdid.curve`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, List, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_loans, check_positive, parallel_map, resolve_lgd_wd
from .cashflow import DiscountedSeries, LoanRecord, SegmentConfig, discount_recoveries
from .conjugate import lgd_blend_weight
from .curve import RecoveryCurveFitter
from .exceptions import ParameterError


@dataclass(frozen=True)
class LoanForecast:
    """Forecast time series of one loan on the grid ``t = 0..N``.

    ``raw_posterior[0]`` is reported as 0 (both sums are empty at t = 0); the
    blend never uses it because the prior weight is 1 there.
    """

    loan_id: Hashable
    t: np.ndarray
    raw_posterior: np.ndarray
    blended: np.ndarray
    forecast_recovery: np.ndarray
    forecast_lgd: np.ndarray


def raw_posterior_r_inf(series: DiscountedSeries, T: float, t: float) -> float:
    """Posterior asymptotic recovery from the payments observed up to month ``t``.

    Can exceed 1 early in the workout; only clipped below at 0.
    """
    if t <= 0:
        raise ParameterError("raw posterior is undefined at t = 0")
    check_positive(T, "T")
    last = min(int(math.floor(t)), series.horizon)
    rr = series.fractions[1:last + 1]
    months = np.arange(1, last + 1)
    total = float(rr.sum())
    weighted = float(rr @ (T - months))
    return max(0.0, total + weighted / t)


def raw_posterior_path(series: DiscountedSeries, T: float, t: np.ndarray) -> np.ndarray:
    """Vectorised :func:`raw_posterior_r_inf` for integer months ``t >= 0``."""
    t = np.asarray(t, dtype=int)
    months = np.arange(series.horizon + 1)
    c_rr = np.cumsum(series.fractions)
    c_rr_time = np.cumsum(series.fractions * months)
    idx = np.minimum(t, series.horizon)
    total = c_rr[idx]
    weighted = T * total - c_rr_time[idx]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = total + weighted / t
    return np.where(t > 0, np.maximum(out, 0.0), 0.0)


def blend(prior_r_inf: float, raw: float, t: float, T: float) -> float:
    if t == 0:
        return prior_r_inf
    w = lgd_blend_weight(t, T)
    return min(1.0, max(0.0, w * prior_r_inf + (1.0 - w) * raw))


def blended_r_inf(
    loan: LoanRecord,
    series: DiscountedSeries,
    T: float,
    t: float,
    fallback_lgd_wd: Optional[float] = None,
) -> float:
    """Blend of the pre-default prior ``1 - lgd_wd`` and the raw posterior, clipped to [0, 1]."""
    prior = 1.0 - resolve_lgd_wd(loan, fallback_lgd_wd)
    if t == 0:
        return prior
    return blend(prior, raw_posterior_r_inf(series, T, t), t, T)


def forecast_recovery(blended_r_inf: float, T: float, t: float) -> float:
    return blended_r_inf * (0.0 - math.expm1(-t / T))


def forecast_lgd(blended_r_inf: float, forecast_recovery: float) -> float:
    """``(1 - R_inf) / (1 - R)``, or 0 once the blended asymptote reaches 1."""
    if blended_r_inf >= 1.0:
        return 0.0
    if forecast_recovery >= 1.0:
        return 1.0
    return min(1.0, max(0.0, (1.0 - blended_r_inf) / (1.0 - forecast_recovery)))


def segment_average_recovery(rr_bar: float, T: float, t) -> np.ndarray:
    """Covariate-free baseline ``rr_bar * (1 - exp(-t / T))``."""
    return rr_bar * (0.0 - np.expm1(-np.asarray(t, dtype=float) / T))


def average_lgd(rr_bar: float, average_recovery) -> np.ndarray:
    """Forecast-LGD structure with the segment average in place of the loan posterior."""
    average_recovery = np.asarray(average_recovery, dtype=float)
    if rr_bar >= 1.0:
        return np.zeros_like(average_recovery)
    return np.clip((1.0 - rr_bar) / (1.0 - average_recovery), 0.0, 1.0)


def score_series(
    loan: LoanRecord,
    series: DiscountedSeries,
    T: float,
    fallback_lgd_wd: Optional[float] = None,
) -> LoanForecast:
    """Full forecast of one loan on the grid ``0..N`` from its discounted series."""
    check_positive(T, "T")
    lgd_wd = resolve_lgd_wd(loan, fallback_lgd_wd)
    prior = 1.0 - lgd_wd
    t = np.arange(series.horizon + 1)
    raw = raw_posterior_path(series, T, t)
    w = 1.0 / (1.0 + t / T)
    blended = np.clip(w * prior + (1.0 - w) * raw, 0.0, 1.0)
    blended[0] = prior
    recovery = blended * (0.0 - np.expm1(-t / T))
    with np.errstate(divide="ignore", invalid="ignore"):
        lgd = (1.0 - blended) / (1.0 - recovery)
    lgd = np.where(recovery >= 1.0, 1.0, lgd)
    lgd = np.where(blended >= 1.0, 0.0, np.clip(lgd, 0.0, 1.0))
    # exact boundary value; (1 - (1 - x)) is not always x in floating point
    lgd[0] = lgd_wd
    return LoanForecast(loan.loan_id, t, raw, blended, recovery, lgd)


def score_loan(
    loan: LoanRecord,
    T: float,
    cfg: SegmentConfig = SegmentConfig(),
    fallback_lgd_wd: Optional[float] = None,
) -> LoanForecast:
    return score_series(loan, discount_recoveries(loan, cfg), T, fallback_lgd_wd)


def score_portfolio(
    loans: Sequence[LoanRecord],
    T: float,
    cfg: SegmentConfig = SegmentConfig(),
    fallback_lgd_wd: Optional[float] = None,
) -> List[LoanForecast]:
    loans = check_loans(loans)
    return parallel_map(lambda loan: score_loan(loan, T, cfg, fallback_lgd_wd), loans)


class InDefaultLGD(BaseEstimator):
    """Forecast LGD over the workout for defaulted loans.

    ``fit`` estimates the segment mean recovery time from the training loans
    (unless ``recovery_time`` is given); ``predict`` returns an
    ``(n_loans, N + 1)`` array of forecast LGD on months ``0..N``.

    Parameters
    ----------
    scheme : {"conservative", "uniform", "front", "back"}
    horizon_months : int
    cost_fraction : float
    lgd_wd : float or None
        Fallback pre-default LGD for loans without their own value.
    recovery_time : float or None
        Fixed mean recovery time; skips the curve fit.
    """

    def __init__(
        self,
        scheme: str = "conservative",
        horizon_months: int = 124,
        cost_fraction: float = 0.0,
        lgd_wd: Optional[float] = None,
        recovery_time: Optional[float] = None,
    ):
        self.scheme = scheme
        self.horizon_months = horizon_months
        self.cost_fraction = cost_fraction
        self.lgd_wd = lgd_wd
        self.recovery_time = recovery_time

    def _segment_config(self) -> SegmentConfig:
        return SegmentConfig(self.horizon_months, self.cost_fraction)

    def fit(self, X, y=None):
        loans = check_loans(X)
        if self.recovery_time is not None:
            self.recovery_time_ = check_positive(self.recovery_time, "recovery_time")
            self.curve_fit_ = None
        else:
            fitter = RecoveryCurveFitter(self.scheme, self.horizon_months, self.cost_fraction).fit(loans)
            self.curve_fit_ = fitter.result_
            self.recovery_time_ = fitter.recovery_time_
        return self

    def forecast(self, X) -> List[LoanForecast]:
        check_is_fitted(self, "recovery_time_")
        return score_portfolio(X, self.recovery_time_, self._segment_config(), self.lgd_wd)

    def predict(self, X) -> np.ndarray:
        return np.vstack([f.forecast_lgd for f in self.forecast(X)])

    def predict_recovery(self, X) -> np.ndarray:
        return np.vstack([f.forecast_recovery for f in self.forecast(X)])
