"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`LGDIDError`,
which is itself a :class:`ValueError` so callers used to scikit-learn style
validation can keep catching ``ValueError``.
"""


class LGDIDError(ValueError):
    """Base class for all package errors."""


class InvalidLoanError(LGDIDError):
    """A loan record violates its invariants (EAD <= 0, negative payment, ...)."""


class OutOfHorizonError(LGDIDError):
    """A workout month lies beyond the configured horizon."""


class DegeneratePointError(LGDIDError):
    """T_n(theta) is undefined because the curve point reaches R_inf(theta)."""


class InsufficientDataError(LGDIDError):
    """Too few usable months to fit the recovery law."""


class ConfigurationError(LGDIDError):
    """Missing or invalid configuration (e.g. no pre-default LGD available)."""


class ParameterError(LGDIDError):
    """A numeric parameter is outside its admissible domain."""


class DataError(LGDIDError):
    """Observations fall outside the support of the sampling model."""


class ShapeError(LGDIDError):
    """A prior or posterior mean does not exist for the given hyperparameters."""


class PortfolioFileError(LGDIDError):
    """Input files could not be parsed into a valid portfolio.

    ``problems`` holds ``(file, row_number, reason)`` tuples; row numbers are
    1-based physical line numbers including the header.
    """

    def __init__(self, message, problems=()):
        self.problems = list(problems)
        if self.problems:
            shown = "; ".join(f"{f}:{row}: {why}" for f, row, why in self.problems[:10])
            more = len(self.problems) - 10
            if more > 0:
                shown += f"; ... {more} more"
            message = f"{message}: {shown}"
        super().__init__(message)
