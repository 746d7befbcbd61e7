"""Segment-level fit of the exponential recovery law ``R(t) = R_inf * (1 - exp(-t / T))``.

The asymptote is parametrised by a tail share ``theta`` in (0, 1)::

    R_inf(theta) = R_N + theta * (1 - R_N)

Each month gives an implied recovery time ``T_n(theta) = -n / ln(1 - R_n / R_inf(theta))``.
The fit picks the ``theta`` that makes these implied times most alike, i.e. it
minimises their weighted variance. Three weightings are supported (uniform,
front-loaded, back-loaded); the conservative fit is the one with the smallest
``R_inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_curve_values, check_loans
from .cashflow import LoanRecord, SegmentConfig, discount_portfolio
from .exceptions import DegeneratePointError, InsufficientDataError, LGDIDError, ParameterError

SCHEMES = ("uniform", "front", "back")
SCHEME_ALIASES = {
    "uniform": "uniform",
    "front": "front",
    "front-loaded": "front",
    "back": "back",
    "back-loaded": "back",
}

THETA_MIN = 1e-9
THETA_MAX = 1.0 - 1e-9
GRID_STEP = 1e-4
# Noise-free curves have sigma^2(theta) ~ c * (theta - theta_true)^2 with
# c up to ~1e10, so a 1e-8 bracket still leaves sigma_T around 1e-5.
GOLDEN_TOL = 1e-13


def canonical_scheme(scheme: str) -> str:
    try:
        return SCHEME_ALIASES[str(scheme).lower()]
    except KeyError:
        raise ParameterError(f"unknown weight scheme {scheme!r}; expected one of {SCHEMES}") from None


def scheme_weights(scheme: str, horizon: int) -> np.ndarray:
    """Weights p_1..p_N of a scheme, normalised to sum to 1.

    The front-loaded formula ``2 (N - n) / (N (N + 1))`` sums to ``(N - 1) / (N + 1)``
    and is therefore renormalised; for ``N = 1`` it degenerates to all-zero
    weights and falls back to uniform.
    """
    scheme = canonical_scheme(scheme)
    n = np.arange(1, horizon + 1, dtype=float)
    denom = horizon * (horizon + 1.0)
    if scheme == "uniform":
        p = np.full(horizon, 1.0 / horizon)
    elif scheme == "front":
        p = 2.0 * (horizon - n) / denom
    else:
        p = 2.0 * n / denom
    total = p.sum()
    if total <= 0:
        return np.full(horizon, 1.0 / horizon)
    return p / total


@dataclass(frozen=True)
class EmpiricalCurve:
    """Segment cumulative discounted recovery ``R_hat(n)`` for months 1..N.

    ``values[n - 1]`` holds ``R_hat(n)``.
    """

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", check_curve_values(self.values))

    @property
    def horizon(self) -> int:
        return len(self.values)

    @property
    def months(self) -> np.ndarray:
        return np.arange(1, self.horizon + 1)

    @property
    def terminal(self) -> float:
        return float(self.values[-1])

    def at(self, n: int) -> float:
        if n == 0:
            return 0.0
        return float(self.values[n - 1])


@dataclass(frozen=True)
class RecoveryCurveFit:
    """Fitted recovery law of a segment."""

    T: float
    sigma_T: float
    r_inf: float
    theta_star: float
    scheme: str
    mad: float
    r_n: float = float("nan")

    def predict(self, t) -> np.ndarray:
        """Model recovery ``R_inf * (1 - exp(-t / T))``."""
        return self.r_inf * (1.0 - np.exp(-np.asarray(t, dtype=float) / self.T))

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "sigma_T": self.sigma_T,
            "r_inf": self.r_inf,
            "theta_star": self.theta_star,
            "scheme": self.scheme,
            "mad": self.mad,
            "r_n": self.r_n,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RecoveryCurveFit":
        return cls(
            T=float(d["T"]),
            sigma_T=float(d["sigma_T"]),
            r_inf=float(d["r_inf"]),
            theta_star=float(d["theta_star"]),
            scheme=canonical_scheme(d["scheme"]),
            mad=float(d["mad"]),
            r_n=float(d.get("r_n", float("nan"))),
        )


def aggregate_curve(loans: Sequence[LoanRecord], cfg: SegmentConfig = SegmentConfig()) -> EmpiricalCurve:
    """EAD-weighted mean of per-loan cumulative discounted recovery, month by month.

    Weights are the cost-loaded exposures.
    """
    loans = check_loans(loans)
    series, exposures = discount_portfolio(loans, cfg)
    stacked = np.vstack([s.cumulative[1:] for s in series])
    values = exposures @ stacked / exposures.sum()
    return EmpiricalCurve(np.minimum(values, 1.0))


def r_inf_of_theta(r_n: float, theta):
    return r_n + theta * (1.0 - r_n)


def t_n_of_theta(curve: EmpiricalCurve, n: int, theta: float) -> float:
    """Implied recovery time of month ``n`` for tail share ``theta``."""
    if not (0.0 < theta < 1.0):
        raise ParameterError(f"theta must lie in (0, 1), got {theta!r}")
    if not (1 <= n <= curve.horizon):
        raise ParameterError(f"month {n} outside 1..{curve.horizon}")
    r_inf = r_inf_of_theta(curve.terminal, theta)
    r_n = curve.at(n)
    if r_n <= 0.0 or r_n >= r_inf:
        raise DegeneratePointError(f"R_hat({n})={r_n!r} is not inside (0, R_inf={r_inf!r})")
    return -n / math.log1p(-r_n / r_inf)


def _implied_times(values: np.ndarray, months: np.ndarray, r_inf: np.ndarray):
    """``T_n`` for every (theta, n) pair; invalid points come back masked out."""
    ratio = values[None, :] / r_inf[:, None]
    usable = (values[None, :] > 0.0) & (ratio < 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_n = -months[None, :] / np.log1p(-np.where(usable, ratio, 0.5))
    usable &= np.isfinite(t_n) & (t_n > 0)
    return t_n, usable


def _dispersion(values, months, weights, thetas):
    """Weighted mean and variance of T_n(theta) for an array of thetas."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    r_inf = r_inf_of_theta(float(values[-1]), thetas)
    t_n, usable = _implied_times(values, months, r_inf)
    p = np.where(usable, weights[None, :], 0.0)
    total = p.sum(axis=1)
    ok = total > 0
    p = p / np.where(ok, total, 1.0)[:, None]
    t_n = np.where(usable, t_n, 0.0)
    mean = (p * t_n).sum(axis=1)
    var = (p * (t_n - mean[:, None]) ** 2).sum(axis=1)
    n_used = (p > 0).sum(axis=1)
    var = np.where(ok & (n_used >= 2), var, np.inf)
    return mean, var


def _golden_section(f, lo, hi, tol):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
        if c >= d:
            break
    return (c, fc) if fc <= fd else (d, fd)


def fit(
    curve: EmpiricalCurve,
    scheme: str = "uniform",
    grid_step: float = GRID_STEP,
    tol: float = GOLDEN_TOL,
) -> RecoveryCurveFit:
    """Fit ``(T, R_inf)`` to a segment curve under one weighting scheme.

    A dense scan over theta (step ``grid_step``) locates the basin, then
    golden-section search refines theta inside the neighbouring grid cells.
    Months where ``T_n`` is undefined (``R_hat(n) = 0`` or ``>= R_inf(theta)``)
    are excluded and the remaining weights renormalised.
    """
    scheme = canonical_scheme(scheme)
    values = curve.values
    r_n = curve.terminal
    if r_n >= 1.0:
        raise InsufficientDataError("terminal recovery is 100 %; nothing to extrapolate")
    if np.count_nonzero(values > 0) < 2:
        raise InsufficientDataError("fewer than 2 months with positive recovery")
    months = curve.months.astype(float)
    weights = scheme_weights(scheme, curve.horizon)
    if np.count_nonzero((values > 0) & (weights > 0)) < 2:
        raise InsufficientDataError(f"fewer than 2 usable months under the {scheme} scheme")

    grid = np.arange(grid_step, 1.0, grid_step)
    grid = np.unique(np.clip(np.concatenate([[THETA_MIN], grid, [THETA_MAX]]), THETA_MIN, THETA_MAX))
    _, var = _dispersion(values, months, weights, grid)
    if not np.isfinite(var).any():
        raise InsufficientDataError("sigma^2(theta) undefined on the whole theta grid")
    i = int(np.argmin(var))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]

    def objective(theta):
        return float(_dispersion(values, months, weights, theta)[1][0])

    theta, best = _golden_section(objective, lo, hi, tol)
    if not best <= var[i]:
        theta, best = float(grid[i]), float(var[i])
    mean, var_star = _dispersion(values, months, weights, theta)
    T = float(mean[0])
    result = RecoveryCurveFit(
        T=T,
        sigma_T=math.sqrt(max(float(var_star[0]), 0.0)),
        r_inf=float(r_inf_of_theta(r_n, theta)),
        theta_star=float(theta),
        scheme=scheme,
        mad=0.0,
        r_n=r_n,
    )
    return replace(result, mad=mad(curve, result))


def fit_all(curve: EmpiricalCurve, **kwargs) -> Dict[str, RecoveryCurveFit]:
    return {s: fit(curve, s, **kwargs) for s in SCHEMES}


def select_conservative(fits) -> RecoveryCurveFit:
    """Smallest ``r_inf`` wins; ties go to the shorter recovery time."""
    fits = list(fits.values()) if isinstance(fits, dict) else list(fits)
    if not fits:
        raise LGDIDError("no fits to choose from")
    return min(fits, key=lambda f: (f.r_inf, f.T))


def fit_conservative(curve: EmpiricalCurve, **kwargs) -> RecoveryCurveFit:
    return select_conservative(fit_all(curve, **kwargs))


def mad(curve: EmpiricalCurve, result: RecoveryCurveFit) -> float:
    """Mean absolute deviation between the empirical curve and the fitted law."""
    return float(np.mean(np.abs(curve.values - result.predict(curve.months))))


class RecoveryCurveFitter(BaseEstimator):
    """Estimator wrapper around :func:`fit` / :func:`fit_conservative`.

    Parameters
    ----------
    scheme : {"conservative", "uniform", "front", "back"}
    horizon_months : int
        Workout horizon N used when ``fit`` receives loans.
    cost_fraction : float
        Workout cost loading applied to each EAD.
    grid_step, tol : float
        Theta scan step and golden-section bracket width.

    ``fit`` accepts either a sequence of :class:`LoanRecord` (aggregated with
    EAD weights) or a 1-D array of ``R_hat(1..N)``.

    Attributes
    ----------
    curve_ : EmpiricalCurve
    fits_ : dict of scheme -> RecoveryCurveFit
    result_ : RecoveryCurveFit
        The selected fit.
    recovery_time_, sigma_T_, r_inf_, theta_star_, mad_ : float
    """

    def __init__(
        self,
        scheme: str = "conservative",
        horizon_months: int = 124,
        cost_fraction: float = 0.0,
        grid_step: float = GRID_STEP,
        tol: float = GOLDEN_TOL,
    ):
        self.scheme = scheme
        self.horizon_months = horizon_months
        self.cost_fraction = cost_fraction
        self.grid_step = grid_step
        self.tol = tol

    def _segment_config(self) -> SegmentConfig:
        return SegmentConfig(self.horizon_months, self.cost_fraction)

    def fit(self, X, y=None):
        if isinstance(X, EmpiricalCurve):
            curve = X
        elif len(X) and isinstance(X[0], LoanRecord):
            curve = aggregate_curve(X, self._segment_config())
        else:
            curve = EmpiricalCurve(X)
        fits = fit_all(curve, grid_step=self.grid_step, tol=self.tol)
        if self.scheme == "conservative":
            chosen = select_conservative(fits)
        else:
            chosen = fits[canonical_scheme(self.scheme)]
        self.curve_ = curve
        self.fits_ = fits
        self.result_ = chosen
        self.recovery_time_ = chosen.T
        self.sigma_T_ = chosen.sigma_T
        self.r_inf_ = chosen.r_inf
        self.theta_star_ = chosen.theta_star
        self.mad_ = chosen.mad
        return self

    def predict(self, X):
        """Model cumulative recovery at workout months ``X``."""
        check_is_fitted(self, "result_")
        return self.result_.predict(X)

    def score(self, X=None, y=None) -> float:
        """Negative MAD of the fit on its training curve, or on ``X`` if given."""
        check_is_fitted(self, "result_")
        curve = self.curve_ if X is None else (X if isinstance(X, EmpiricalCurve) else EmpiricalCurve(X))
        return -mad(curve, self.result_)


def fit_segment(
    loans: Sequence[LoanRecord],
    cfg: SegmentConfig = SegmentConfig(),
    scheme: Optional[str] = "conservative",
):
    """Aggregate, fit all schemes and select one. Returns ``(curve, fits, chosen)``."""
    curve = aggregate_curve(loans, cfg)
    fits = fit_all(curve)
    chosen = select_conservative(fits) if scheme in (None, "conservative") else fits[canonical_scheme(scheme)]
    return curve, fits, chosen
