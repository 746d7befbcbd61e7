"""Synthetic defaulted portfolios and exact-vs-forecast-vs-average evaluation."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ._validation import check_loans, parallel_map, resolve_lgd_wd
from .bayes import average_lgd, score_series, segment_average_recovery
from .cashflow import LoanRecord, SegmentConfig, discount_factors, discount_recoveries, lgd_path_from_series
from .curve import RecoveryCurveFit
from .exceptions import ParameterError


@dataclass(frozen=True)
class GeneratorSpec:
    """Parameters of a synthetic defaulted portfolio.

    Each loan gets its own asymptote ``R_inf`` drawn from a Beta distribution
    with mean ``r_inf_mean`` and standard deviation ``r_inf_dispersion`` (a
    constant when the dispersion is 0). Monthly discounted recoveries follow
    ``R_inf * (exp(-(n-1)/T) - exp(-n/T))`` times a mean-one lognormal jitter
    of log-scale ``payment_noise``. Cured loans follow the law with
    ``R_inf = 1`` and settle the remaining balance in a random month.
    Pre-default LGD is ``1 - R_inf * (1 + prior_bias)`` clipped to [0, 1].
    """

    n_loans: int = 1000
    T_true: float = 23.47
    r_inf_mean: float = 0.396
    r_inf_dispersion: float = 0.0
    ead_range: Tuple[float, float] = (1e3, 1e6)
    rate_range: Tuple[float, float] = (0.0, 0.2)
    horizon: int = 124
    payment_noise: float = 0.0
    cure_fraction: float = 0.0
    prior_bias: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "ead_range", tuple(float(v) for v in self.ead_range))
        object.__setattr__(self, "rate_range", tuple(float(v) for v in self.rate_range))
        if int(self.n_loans) != self.n_loans or self.n_loans <= 0:
            raise ParameterError("n_loans must be a positive integer")
        if not self.T_true > 0:
            raise ParameterError("T_true must be > 0")
        if not (0.0 < self.r_inf_mean <= 1.0):
            raise ParameterError("r_inf_mean must lie in (0, 1]")
        if self.r_inf_dispersion < 0:
            raise ParameterError("r_inf_dispersion must be >= 0")
        m = self.r_inf_mean
        if self.r_inf_dispersion > 0 and self.r_inf_dispersion ** 2 >= m * (1.0 - m):
            raise ParameterError("r_inf_dispersion too large for a Beta distribution with this mean")
        lo, hi = self.ead_range
        if not (0 < lo <= hi):
            raise ParameterError("ead_range must satisfy 0 < min <= max")
        lo, hi = self.rate_range
        if not (0 <= lo <= hi):
            raise ParameterError("rate_range must satisfy 0 <= min <= max")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ParameterError("horizon must be an integer >= 1")
        if self.payment_noise < 0:
            raise ParameterError("payment_noise must be >= 0")
        if not (0.0 <= self.cure_fraction < 1.0):
            raise ParameterError("cure_fraction must lie in [0, 1)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ead_range"] = list(self.ead_range)
        d["rate_range"] = list(self.rate_range)
        return d


PRESETS: Dict[str, dict] = {
    # mean recovery time and asymptote of the mortgage and consumer examples
    "mortgage": dict(n_loans=370, T_true=23.47, r_inf_mean=0.396, ead_range=(5e4, 5e6), rate_range=(0.05, 0.15)),
    "consumer": dict(n_loans=29500, T_true=11.3, r_inf_mean=0.216, ead_range=(1e3, 1e5), rate_range=(0.10, 0.35)),
}


def preset(name: str, **overrides) -> GeneratorSpec:
    try:
        base = dict(PRESETS[name])
    except KeyError:
        raise ParameterError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}") from None
    base.update(overrides)
    return GeneratorSpec(**base)


def _draw_r_inf(rng, spec):
    m, s = spec.r_inf_mean, spec.r_inf_dispersion
    if s == 0:
        rng.random()  # keep the stream layout independent of the dispersion
        return m
    kappa = m * (1.0 - m) / s ** 2 - 1.0
    return float(min(1.0, max(1e-12, rng.beta(m * kappa, (1.0 - m) * kappa))))


def _generate_loan(index: int, seed_seq: np.random.SeedSequence, spec: GeneratorSpec) -> LoanRecord:
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    horizon = spec.horizon
    ead = float(rng.uniform(*spec.ead_range))
    rate = float(rng.uniform(*spec.rate_range))
    cured = bool(rng.random() < spec.cure_fraction)
    r_inf = 1.0 if cured else _draw_r_inf(rng, spec)
    jitter = rng.standard_normal(horizon)
    cure_month = int(rng.integers(1, horizon + 1))

    n = np.arange(1, horizon + 1)
    decay = np.exp(-np.arange(horizon + 1) / spec.T_true)
    increments = r_inf * (decay[:-1] - decay[1:])
    if spec.payment_noise > 0:
        s = spec.payment_noise
        increments = increments * np.exp(s * jitter - 0.5 * s * s)
    if cured:
        increments[cure_month - 1] = 1.0 - increments[: cure_month - 1].sum()
        increments[cure_month:] = 0.0
    cumulative = np.cumsum(increments)
    over = np.flatnonzero(cumulative >= 1.0)
    if over.size:
        k = over[0]
        increments[k] = 1.0 - (cumulative[k - 1] if k > 0 else 0.0)
        increments[k + 1:] = 0.0

    amounts = increments * ead * discount_factors(rate, n)
    recoveries = tuple((int(m), float(a)) for m, a in zip(n, amounts) if a > 0)
    lgd_wd = float(min(1.0, max(0.0, 1.0 - r_inf * (1.0 + spec.prior_bias))))
    return LoanRecord(f"L{index:06d}", ead, rate, recoveries, lgd_wd)


def generate_portfolio(spec: GeneratorSpec) -> List[LoanRecord]:
    """Deterministic synthetic portfolio; loan ``i`` uses its own PCG64 substream."""
    children = np.random.SeedSequence(spec.seed).spawn(spec.n_loans)
    return [_generate_loan(i, ss, spec) for i, ss in enumerate(children)]


@dataclass
class EvaluationReport:
    """EAD-weighted portfolio curves on ``t = 0..N``."""

    t: np.ndarray
    lgd_exact_curve: np.ndarray
    lgd_forecast_curve: np.ndarray
    lgd_average_curve: np.ndarray
    r1_curve: np.ndarray
    r2_curve: np.ndarray
    monotonicity_violation_rate: float
    rr_bar: float
    recovery_time: float
    n_loans: int
    total_exposure: float
    extras: dict = field(default_factory=dict)

    def curves(self) -> Dict[str, np.ndarray]:
        return {
            "lgd_exact": self.lgd_exact_curve,
            "lgd_forecast": self.lgd_forecast_curve,
            "lgd_average": self.lgd_average_curve,
            "r1": self.r1_curve,
            "r2": self.r2_curve,
        }

    def summary(self) -> dict:
        T = self.recovery_time
        late = self.t >= T
        gap = np.abs(self.lgd_forecast_curve - self.lgd_exact_curve)
        after_2T = self.t >= 2 * T
        return {
            "n_loans": self.n_loans,
            "total_exposure": self.total_exposure,
            "recovery_time": T,
            "rr_bar": self.rr_bar,
            "monotonicity_violation_rate": self.monotonicity_violation_rate,
            "max_lgd_gap_after_T": float(gap[late].max()) if late.any() else 0.0,
            "mean_r1": float(self.r1_curve.mean()),
            "mean_r2": float(self.r2_curve.mean()),
            "r1_below_r2_after_2T": bool(np.all(self.r1_curve[after_2T] < self.r2_curve[after_2T])),
        }


def _loan_rows(loan, cfg, T, fallback_lgd_wd):
    series = discount_recoveries(loan, cfg)
    exact = lgd_path_from_series(series)
    forecast = score_series(loan, series, T, fallback_lgd_wd)
    return series, exact, forecast


def evaluate(
    loans: Sequence[LoanRecord],
    fit: RecoveryCurveFit,
    cfg: SegmentConfig = SegmentConfig(),
    fallback_lgd_wd=None,
) -> EvaluationReport:
    """Compare exact, forecast and segment-average LGD(t) and recovery errors.

    The average baseline uses ``rr_bar``, the EAD-weighted terminal recovery of
    the portfolio, in place of each loan's posterior asymptote.
    """
    loans = check_loans(loans)
    T = fit.T
    rows = parallel_map(lambda loan: _loan_rows(loan, cfg, T, fallback_lgd_wd), loans)
    weights = np.array([r[0].exposure for r in rows])
    weights = weights / weights.sum()
    recovered = np.vstack([r[0].cumulative for r in rows])
    exact = np.vstack([r[1] for r in rows])
    forecast_lgd = np.vstack([r[2].forecast_lgd for r in rows])
    forecast_rec = np.vstack([r[2].forecast_recovery for r in rows])

    t = np.arange(cfg.horizon_months + 1)
    rr_bar = float(np.clip(weights @ recovered[:, -1], 0.0, 1.0))
    avg_recovery = segment_average_recovery(rr_bar, T, t)
    avg_lgd = average_lgd(rr_bar, avg_recovery)

    r1 = np.abs(forecast_rec - recovered)
    r2 = np.abs(avg_recovery[None, :] - recovered)
    drops = np.diff(forecast_lgd, axis=1) < -1e-12
    return EvaluationReport(
        t=t,
        lgd_exact_curve=np.clip(weights @ exact, 0.0, 1.0),
        lgd_forecast_curve=np.clip(weights @ forecast_lgd, 0.0, 1.0),
        lgd_average_curve=avg_lgd,
        r1_curve=np.clip(weights @ r1, 0.0, 1.0),
        r2_curve=np.clip(weights @ r2, 0.0, 1.0),
        monotonicity_violation_rate=float(drops.mean()) if drops.size else 0.0,
        rr_bar=rr_bar,
        recovery_time=T,
        n_loans=len(loans),
        total_exposure=float(sum(r[0].exposure for r in rows)),
        extras={"mean_lgd_wd": float(weights @ np.array([resolve_lgd_wd(l, fallback_lgd_wd) for l in loans]))},
    )
