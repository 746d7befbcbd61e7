"""In-default loss given default (LGD) for portfolios of defaulted loans."""

__version__ = "0.1.0"

from .bayes import (
    InDefaultLGD,
    LoanForecast,
    blended_r_inf,
    forecast_lgd,
    forecast_recovery,
    raw_posterior_r_inf,
    score_loan,
    score_portfolio,
    segment_average_recovery,
)
from .cashflow import (
    DiscountedSeries,
    LoanRecord,
    SegmentConfig,
    discount_recoveries,
    exact_lgd_at_default,
    exact_lgd_path,
    outstanding_exposure,
)
from .conjugate import ConjugateModel, MeanDecomposition, lgd_blend_weight, mean_decomposition, posterior_update
from .curve import (
    EmpiricalCurve,
    RecoveryCurveFit,
    RecoveryCurveFitter,
    aggregate_curve,
    fit,
    fit_conservative,
    mad,
    t_n_of_theta,
)
from .evaluation import EvaluationReport, GeneratorSpec, evaluate, generate_portfolio
from .io import load_portfolio

__all__ = [
    "ConjugateModel",
    "DiscountedSeries",
    "EmpiricalCurve",
    "EvaluationReport",
    "GeneratorSpec",
    "InDefaultLGD",
    "LoanForecast",
    "LoanRecord",
    "MeanDecomposition",
    "RecoveryCurveFit",
    "RecoveryCurveFitter",
    "SegmentConfig",
    "aggregate_curve",
    "blended_r_inf",
    "discount_recoveries",
    "evaluate",
    "exact_lgd_at_default",
    "exact_lgd_path",
    "fit",
    "fit_conservative",
    "forecast_lgd",
    "forecast_recovery",
    "generate_portfolio",
    "lgd_blend_weight",
    "load_portfolio",
    "mad",
    "mean_decomposition",
    "outstanding_exposure",
    "posterior_update",
    "raw_posterior_r_inf",
    "score_loan",
    "score_portfolio",
    "segment_average_recovery",
    "t_n_of_theta",
]
