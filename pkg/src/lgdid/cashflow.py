"""Discounting of recovery cash flows and realized (exact) LGD per loan.

Conventions
-----------
* Months are integer offsets from the default date; a payment booked in month
  ``n`` is discounted with the kernel ``(1 + r) ** (n / 12)`` (annual rate,
  monthly buckets, end-of-month timing).
* A payment reported in month 0 is treated as month 1.
* Workout cost loading: ``E0_hat = ead * (1 + cost_fraction)``.
* Cumulative discounted recovery is capped at 100 % of ``E0_hat``; the payment
  that crosses the cap is truncated and later payments are ignored.

Arrays returned by this module are indexed by month on the grid ``0..N``.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Optional, Sequence, Tuple

import numpy as np

from .exceptions import InvalidLoanError, OutOfHorizonError, ParameterError

DEFAULT_HORIZON = 124
# discounted recoveries within this of E0_hat count as full repayment (absorbs rounding)
CURE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class LoanRecord:
    """One defaulted loan.

    ``recoveries`` is a tuple of ``(month, amount)`` pairs with strictly
    increasing months >= 1. Use :meth:`from_payments` to build a record from raw
    payment rows (it sums same-month payments and maps month 0 to month 1).
    """

    loan_id: Hashable
    ead: float
    annual_rate: float
    recoveries: Tuple[Tuple[int, float], ...] = ()
    lgd_wd: Optional[float] = None

    def __post_init__(self):
        if not np.isfinite(self.ead) or self.ead <= 0:
            raise InvalidLoanError(f"loan {self.loan_id!r}: ead must be > 0, got {self.ead!r}")
        if not np.isfinite(self.annual_rate) or self.annual_rate < 0:
            raise InvalidLoanError(
                f"loan {self.loan_id!r}: annual_rate must be >= 0, got {self.annual_rate!r}"
            )
        if self.lgd_wd is not None and not (0.0 <= self.lgd_wd <= 1.0):
            raise InvalidLoanError(f"loan {self.loan_id!r}: lgd_wd must lie in [0, 1], got {self.lgd_wd!r}")
        object.__setattr__(self, "recoveries", tuple((int(m), float(a)) for m, a in self.recoveries))
        previous = 0
        for month, amount in self.recoveries:
            if month < 1 or month <= previous:
                raise InvalidLoanError(
                    f"loan {self.loan_id!r}: recovery months must be >= 1 and strictly increasing"
                )
            if not np.isfinite(amount) or amount < 0:
                raise InvalidLoanError(f"loan {self.loan_id!r}: negative or non-finite amount in month {month}")
            previous = month

    @classmethod
    def from_payments(
        cls,
        loan_id: Hashable,
        ead: float,
        annual_rate: float,
        payments: Iterable[Tuple[int, float]] = (),
        lgd_wd: Optional[float] = None,
    ) -> "LoanRecord":
        """Build a record from unordered payment rows, summing same-month payments."""
        by_month = defaultdict(float)
        for month, amount in payments:
            month = int(month)
            if month < 0:
                raise InvalidLoanError(f"loan {loan_id!r}: negative recovery month {month}")
            if amount < 0:
                raise InvalidLoanError(f"loan {loan_id!r}: negative amount in month {month}")
            by_month[max(month, 1)] += float(amount)
        return cls(loan_id, float(ead), float(annual_rate), tuple(sorted(by_month.items())), lgd_wd)


@dataclass(frozen=True)
class SegmentConfig:
    """Segment-level settings shared by every loan of the segment."""

    horizon_months: int = DEFAULT_HORIZON
    cost_fraction: float = 0.0

    def __post_init__(self):
        if int(self.horizon_months) != self.horizon_months or self.horizon_months < 1:
            raise ParameterError(f"horizon_months must be an integer >= 1, got {self.horizon_months!r}")
        if not np.isfinite(self.cost_fraction) or self.cost_fraction < 0:
            raise ParameterError(f"cost_fraction must be >= 0, got {self.cost_fraction!r}")
        object.__setattr__(self, "horizon_months", int(self.horizon_months))


@dataclass(frozen=True)
class DiscountedSeries:
    """Discounted recoveries of one loan as fractions of the cost-loaded EAD.

    Attributes
    ----------
    fractions : ndarray, shape (N + 1,)
        ``fractions[n]`` is RR_n, the (capped) discounted recovery of month n;
        ``fractions[0]`` is always 0.
    cumulative : ndarray, shape (N + 1,)
        ``cumulative[t]`` is R(t) = sum of ``fractions[1..t]``, never above 1.
    exposure : float
        Cost-loaded exposure at default ``E0_hat``.
    annual_rate : float
        Discount rate carried over from the loan.
    uncapped_total : float
        Sum of discounted recoveries over months 1..N before capping, as a
        fraction of ``E0_hat``; decides the cured branch of the exact LGD.
    """

    fractions: np.ndarray
    cumulative: np.ndarray
    exposure: float
    annual_rate: float
    uncapped_total: float = field(default=0.0)

    @property
    def horizon(self) -> int:
        return len(self.fractions) - 1

    @property
    def cured(self) -> bool:
        return self.uncapped_total >= 1.0 - CURE_TOLERANCE


def discount_factors(annual_rate: float, months) -> np.ndarray:
    """``(1 + r) ** (n / 12)`` for each month ``n``."""
    return (1.0 + annual_rate) ** (np.asarray(months, dtype=float) / 12.0)


def discount_recoveries(loan: LoanRecord, cfg: SegmentConfig = SegmentConfig()) -> DiscountedSeries:
    """Discount a loan's recoveries to the default date, capped at 100 % of EAD.

    Recoveries after the horizon are dropped.

    >>> s = discount_recoveries(LoanRecord("a", 100.0, 0.0, ((1, 80.0), (2, 40.0))))
    >>> s.cumulative[1:3].tolist()
    [0.8, 1.0]
    """
    if loan.ead <= 0:
        raise InvalidLoanError(f"loan {loan.loan_id!r}: ead must be > 0")
    horizon = cfg.horizon_months
    exposure = loan.ead * (1.0 + cfg.cost_fraction)
    raw = np.zeros(horizon + 1)
    for month, amount in loan.recoveries:
        if amount < 0:
            raise InvalidLoanError(f"loan {loan.loan_id!r}: negative amount in month {month}")
        month = max(int(month), 1)
        if month <= horizon:
            raw[month] += amount
    months = np.arange(horizon + 1)
    raw = raw / exposure / discount_factors(loan.annual_rate, months)

    cumulative = np.cumsum(raw)
    uncapped_total = float(cumulative[-1])
    fractions = raw
    crossing = np.flatnonzero(cumulative >= 1.0 - CURE_TOLERANCE)
    if crossing.size:
        k = crossing[0]
        fractions = raw.copy()
        fractions[k] = 1.0 - (cumulative[k - 1] if k > 0 else 0.0)
        fractions[k + 1:] = 0.0
        cumulative = cumulative.copy()
        cumulative[k:] = 1.0
    return DiscountedSeries(fractions, cumulative, float(exposure), float(loan.annual_rate), uncapped_total)


def exact_lgd_at_default(series: DiscountedSeries) -> float:
    """Realized LGD at the default date: ``max(0, 1 - R(N))``."""
    return max(0.0, 1.0 - float(series.cumulative[-1]))


def outstanding_exposure(loan: LoanRecord, series: DiscountedSeries, t: int) -> float:
    """Outstanding debt at workout month ``t`` with interest accruing at the loan rate.

    Equals ``(1 + r) ** (t / 12) * (E0_hat - discounted recoveries up to t)``,
    floored at 0. ``loan`` is accepted for interface symmetry; the rate and the
    cost-loaded exposure are carried by ``series``.
    """
    if t < 0 or t > series.horizon:
        raise OutOfHorizonError(f"t={t} outside 0..{series.horizon}")
    remaining = series.exposure * (1.0 - float(series.cumulative[int(t)]))
    return max(0.0, float(discount_factors(series.annual_rate, t)) * remaining)


def lgd_path_from_series(series: DiscountedSeries) -> np.ndarray:
    """Exact LGD(t) on ``0..N`` from an already discounted series."""
    if series.cured:
        return np.zeros(series.horizon + 1)
    lgd0 = exact_lgd_at_default(series)
    with np.errstate(divide="ignore", invalid="ignore"):
        path = lgd0 / (1.0 - series.cumulative)
    path = np.where(np.isfinite(path), path, 1.0)
    return np.clip(path, 0.0, 1.0)


def exact_lgd_path(
    loan: LoanRecord,
    cfg: SegmentConfig = SegmentConfig(),
    extend_to: Optional[int] = None,
) -> np.ndarray:
    """Realized LGD(t) for ``t = 0..N`` (or ``0..extend_to`` when longer).

    ``LGD(t) = LGD(0) / (1 - R(t))``; the path is identically 0 for a loan whose
    discounted recoveries cover the cost-loaded EAD, and equals 1 beyond the
    horizon for every other loan.
    """
    path = lgd_path_from_series(discount_recoveries(loan, cfg))
    if extend_to is not None and extend_to > cfg.horizon_months:
        tail_value = path[-1] if path[-1] == 0.0 else 1.0
        path = np.concatenate([path, np.full(extend_to - cfg.horizon_months, tail_value)])
    return path


def discount_portfolio(loans: Sequence[LoanRecord], cfg: SegmentConfig = SegmentConfig()):
    """Discount every loan; returns ``(series_list, exposures)``."""
    series = [discount_recoveries(loan, cfg) for loan in loans]
    exposures = np.array([s.exposure for s in series], dtype=float)
    return series, exposures
