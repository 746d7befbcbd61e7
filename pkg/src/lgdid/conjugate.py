"""Conjugate prior families and the posterior-mean decomposition.

For every family the posterior mean is written as a blend of the prior mean
and a data estimate::

    posterior_mean = w * mu_0 + (1 - w) * mu_n,    w in (0, 1],  w = 1 with no data

========================  =====================  ====================  ========================
family                    w                       mu_0                  mu_n
========================  =====================  ====================  ========================
normal-known-variance     s2 / (s2 + n s0^2)      theta0                mean(x)
exponential-gamma         beta / (beta + sum x)   alpha / beta          1 / mean(x)
uniform-pareto            (a - 1) / (a - 1 + n)   a theta0 / (a - 1)    ((a + n) M - a theta0) / n
poisson-gamma             beta / (beta + n)       alpha / beta          mean(x)
binomial-beta             (a + b) / (a + b + nN)  a / (a + b)           mean(x) / N
negbinomial-beta          (a + b) / (a+b+sum x)   a / (a + b)           k / mean(x)
pareto-gamma              beta / (beta + n L)     alpha / beta          1 / L
========================  =====================  ====================  ========================

with ``M = max(theta0, x_1..x_n)`` and ``L = ln(geometric_mean(x) / x0)``.

Weights and data estimates were derived by equating the closed-form posterior
mean with the blend; the commonly printed forms of the exponential and negative
binomial rows (``w = 1 / (1 + n / beta)``, ``mu_n = k / (mean - k)``) do not
satisfy the identity and are not used. For the uniform likelihood no
data-only estimator keeps ``w`` inside (0, 1]; the estimator above tends to the
max statistic as ``n`` grows.

Sufficient statistics are accumulated exactly (as :class:`fractions.Fraction`)
so that updating with ``D1`` then ``D2`` gives bit-identical posteriors to one
update with ``D1 + D2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Mapping, Optional, Sequence

from .exceptions import DataError, ParameterError, ShapeError

FAMILIES = (
    "normal-known-variance",
    "exponential-gamma",
    "uniform-pareto",
    "poisson-gamma",
    "binomial-beta",
    "negbinomial-beta",
    "pareto-gamma",
)

# hyperparameters of the prior, and known constants of the sampling model
_PRIOR_KEYS = {
    "normal-known-variance": ("theta0", "sigma0_sq"),
    "exponential-gamma": ("alpha", "beta"),
    "uniform-pareto": ("alpha", "theta0"),
    "poisson-gamma": ("alpha", "beta"),
    "binomial-beta": ("a", "b"),
    "negbinomial-beta": ("a", "b"),
    "pareto-gamma": ("alpha", "beta"),
}
_LIKELIHOOD_KEYS = {
    "normal-known-variance": ("sigma_sq",),
    "binomial-beta": ("N",),
    "negbinomial-beta": ("k",),
    "pareto-gamma": ("x0",),
}


@dataclass(frozen=True)
class SufficientStats:
    """Exact running summary of the observations seen so far.

    ``total`` is the sum of x (or of ln x for the Pareto likelihood);
    ``maximum`` is only tracked for the uniform likelihood.
    """

    n: int = 0
    total: Fraction = Fraction(0)
    maximum: Optional[float] = None

    def __add__(self, other: "SufficientStats") -> "SufficientStats":
        if self.maximum is None:
            mx = other.maximum
        elif other.maximum is None:
            mx = self.maximum
        else:
            mx = max(self.maximum, other.maximum)
        return SufficientStats(self.n + other.n, self.total + other.total, mx)

    @property
    def mean(self) -> float:
        return float(self.total / self.n) if self.n else float("nan")


@dataclass(frozen=True)
class MeanDecomposition:
    w_n: float
    mu_0: float
    mu_n: float
    posterior_mean: float

    def blend(self) -> float:
        return self.w_n * self.mu_0 + (1.0 - self.w_n) * self.mu_n


@dataclass(frozen=True)
class ConjugateModel:
    """A conjugate prior for one sampling model.

    ``prior_params`` are the hyperparameters before any data in ``stats``;
    :attr:`params` gives the current (posterior) hyperparameters.
    """

    family: str
    prior_params: Mapping[str, float]
    likelihood_params: Mapping[str, float] = field(default_factory=dict)
    stats: SufficientStats = field(default_factory=SufficientStats)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown family {self.family!r}")
        prior = {k: float(self.prior_params[k]) for k in _PRIOR_KEYS[self.family]}
        lik = {k: float(self.likelihood_params[k]) for k in _LIKELIHOOD_KEYS.get(self.family, ())}
        object.__setattr__(self, "prior_params", prior)
        object.__setattr__(self, "likelihood_params", lik)
        _check_hyperparameters(self.family, prior, lik)

    @property
    def params(self) -> Dict[str, float]:
        return _posterior_params(self.family, self.prior_params, self.likelihood_params, self.stats)

    def mean(self) -> float:
        return _mean(self.family, self.params)

    def posterior_update(self, data: Sequence[float]) -> "ConjugateModel":
        return posterior_update(self, data)


def _check_hyperparameters(family, prior, lik):
    for k, v in prior.items():
        if k == "theta0" and family == "normal-known-variance":
            if not math.isfinite(v):
                raise ParameterError("theta0 must be finite")
        elif not (math.isfinite(v) and v > 0):
            raise ParameterError(f"{family}: {k} must be > 0, got {v!r}")
    for k, v in lik.items():
        if not (math.isfinite(v) and v > 0):
            raise ParameterError(f"{family}: {k} must be > 0, got {v!r}")
        if k in ("N", "k") and v != int(v):
            raise ParameterError(f"{family}: {k} must be an integer, got {v!r}")


def _summarise(model: ConjugateModel, data: Sequence[float]) -> SufficientStats:
    family = model.family
    xs = [float(x) for x in data]
    for x in xs:
        if not math.isfinite(x):
            raise DataError(f"non-finite observation {x!r}")
    if family in ("poisson-gamma", "binomial-beta", "negbinomial-beta"):
        for x in xs:
            if x != int(x):
                raise DataError(f"{family}: observation {x!r} is not an integer")
    if family in ("exponential-gamma", "uniform-pareto", "poisson-gamma", "binomial-beta"):
        if any(x < 0 for x in xs):
            raise DataError(f"{family}: negative observation")
    if family == "binomial-beta" and any(x > model.likelihood_params["N"] for x in xs):
        raise DataError("binomial-beta: observation exceeds N")
    if family == "negbinomial-beta" and any(x < model.likelihood_params["k"] for x in xs):
        raise DataError("negbinomial-beta: observation below k")
    if family == "pareto-gamma":
        x0 = model.likelihood_params["x0"]
        if any(x < x0 for x in xs):
            raise DataError("pareto-gamma: observation below x0")
        # ln(g / x0) accumulated as a sum of logs
        total = sum((Fraction(math.log(x / x0)) for x in xs), Fraction(0))
        return SufficientStats(len(xs), total)
    total = sum((Fraction(x) for x in xs), Fraction(0))
    maximum = max(xs) if (xs and family == "uniform-pareto") else None
    return SufficientStats(len(xs), total, maximum)


def _posterior_params(family, prior, lik, stats: SufficientStats) -> Dict[str, float]:
    n = stats.n
    s = stats.total
    if family == "normal-known-variance":
        sigma_sq, s0 = lik["sigma_sq"], prior["sigma0_sq"]
        if n == 0:
            return dict(prior)
        # precision-weighted form; equals (xbar + g theta0) / (1 + g), g = s2 / (n s0)
        denom = sigma_sq + n * s0
        theta = (sigma_sq * prior["theta0"] + s0 * float(s)) / denom
        return {"theta0": theta, "sigma0_sq": sigma_sq * s0 / denom}
    if family in ("exponential-gamma",):
        return {"alpha": prior["alpha"] + n, "beta": float(Fraction(prior["beta"]) + s)}
    if family == "pareto-gamma":
        return {"alpha": prior["alpha"] + n, "beta": float(Fraction(prior["beta"]) + s)}
    if family == "uniform-pareto":
        theta0 = prior["theta0"] if stats.maximum is None else max(prior["theta0"], stats.maximum)
        return {"alpha": prior["alpha"] + n, "theta0": theta0}
    if family == "poisson-gamma":
        return {"alpha": float(Fraction(prior["alpha"]) + s), "beta": prior["beta"] + n}
    if family == "binomial-beta":
        N = lik["N"]
        return {"a": float(Fraction(prior["a"]) + s), "b": float(Fraction(prior["b"]) + n * Fraction(N) - s)}
    if family == "negbinomial-beta":
        k = lik["k"]
        return {"a": prior["a"] + k * n, "b": float(Fraction(prior["b"]) + s - n * Fraction(k))}
    raise ParameterError(family)  # pragma: no cover


def _mean(family, params) -> float:
    if family == "normal-known-variance":
        return params["theta0"]
    if family in ("exponential-gamma", "poisson-gamma", "pareto-gamma"):
        return params["alpha"] / params["beta"]
    if family == "uniform-pareto":
        if params["alpha"] <= 1:
            raise ShapeError("Pareto mean requires alpha > 1")
        return params["alpha"] * params["theta0"] / (params["alpha"] - 1.0)
    return params["a"] / (params["a"] + params["b"])


def posterior_update(model: ConjugateModel, data: Sequence[float]) -> ConjugateModel:
    """Condition ``model`` on ``data``; the result is in the same family.

    >>> m = ConjugateModel("poisson-gamma", {"alpha": 2, "beta": 1})
    >>> posterior_update(m, [4, 4, 4]).params
    {'alpha': 14.0, 'beta': 4.0}
    """
    stats = _summarise(model, data)
    return ConjugateModel(model.family, model.prior_params, model.likelihood_params, model.stats + stats)


def mean_decomposition(model: ConjugateModel, data: Sequence[float]) -> MeanDecomposition:
    """Split the posterior mean after ``data`` into prior and data components.

    ``model`` acts as the prior (its current hyperparameters), so the call is
    valid on an already-updated model too.
    """
    family = model.family
    prior = model.params
    lik = model.likelihood_params
    stats = _summarise(model, data)
    posterior_mean = posterior_update(model, data).mean()
    mu_0 = _mean(family, prior)
    n = stats.n
    if n == 0:
        return MeanDecomposition(1.0, mu_0, mu_0, posterior_mean)
    xbar = stats.mean

    if family == "normal-known-variance":
        sigma_sq, s0 = lik["sigma_sq"], prior["sigma0_sq"]
        w, mu_n = sigma_sq / (sigma_sq + n * s0), xbar
    elif family == "exponential-gamma":
        if xbar <= 0:
            raise ShapeError("exponential-gamma: data estimate 1/mean undefined for all-zero data")
        w, mu_n = prior["beta"] / (prior["beta"] + float(stats.total)), 1.0 / xbar
    elif family == "uniform-pareto":
        alpha, theta0 = prior["alpha"], prior["theta0"]
        top = max(theta0, stats.maximum)
        w = (alpha - 1.0) / (alpha - 1.0 + n)
        mu_n = ((alpha + n) * top - alpha * theta0) / n
    elif family == "poisson-gamma":
        w, mu_n = prior["beta"] / (prior["beta"] + n), xbar
    elif family == "binomial-beta":
        a, b, N = prior["a"], prior["b"], lik["N"]
        w, mu_n = (a + b) / (a + b + n * N), xbar / N
    elif family == "negbinomial-beta":
        a, b, k = prior["a"], prior["b"], lik["k"]
        w, mu_n = (a + b) / (a + b + float(stats.total)), k / xbar
    else:  # pareto-gamma
        log_ratio = xbar  # mean of ln(x / x0) = ln(g / x0)
        if log_ratio <= 0:
            raise ShapeError("pareto-gamma: data estimate undefined when every x equals x0")
        w, mu_n = prior["beta"] / (prior["beta"] + n * log_ratio), 1.0 / log_ratio
    return MeanDecomposition(float(w), float(mu_0), float(mu_n), float(posterior_mean))


def lgd_blend_weight(t: float, T: float) -> float:
    """Prior weight ``1 / (1 + t / T)`` of the recovery blend.

    The normal-family weight with the elapsed workout time in units of the
    mean recovery time playing the role of the sample size.
    """
    if not (math.isfinite(T) and T > 0):
        raise ParameterError(f"T must be > 0, got {T!r}")
    if t < 0:
        raise ParameterError(f"t must be >= 0, got {t!r}")
    return 1.0 / (1.0 + t / T)
