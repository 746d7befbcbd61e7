"""Input validation helpers shared by the estimators and functions."""

from __future__ import annotations

import os

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import ConfigurationError, LGDIDError, ParameterError


def check_loans(loans):
    """Return ``loans`` as a list of :class:`LoanRecord`, rejecting empty input."""
    from .cashflow import LoanRecord

    if isinstance(loans, LoanRecord):
        loans = [loans]
    loans = list(loans)
    if not loans:
        raise LGDIDError("empty portfolio")
    for loan in loans:
        if not isinstance(loan, LoanRecord):
            raise TypeError(f"expected LoanRecord, got {type(loan).__name__}")
    return loans


def check_curve_values(values) -> np.ndarray:
    """Validate a 1-D non-decreasing cumulative recovery curve in [0, 1]."""
    arr = check_array(np.asarray(values, dtype=float).reshape(1, -1), ensure_2d=True, dtype=float)[0]
    if arr.size == 0:
        raise LGDIDError("empty recovery curve")
    if np.any(arr < 0) or np.any(arr > 1.0 + 1e-12):
        raise LGDIDError("recovery curve values must lie in [0, 1]")
    if np.any(np.diff(arr) < -1e-12):
        raise LGDIDError("recovery curve must be non-decreasing")
    return np.maximum.accumulate(np.clip(arr, 0.0, 1.0))


def check_positive(value, name):
    if not np.isfinite(value) or value <= 0:
        raise ParameterError(f"{name} must be > 0, got {value!r}")
    return float(value)


def resolve_lgd_wd(loan, fallback=None) -> float:
    """Per-loan pre-default LGD, falling back to a segment constant."""
    value = loan.lgd_wd if loan.lgd_wd is not None else fallback
    if value is None:
        raise ConfigurationError(f"loan {loan.loan_id!r} has no lgd_wd and no fallback is configured")
    value = float(value)
    if not (0.0 <= value <= 1.0):
        raise ConfigurationError(f"lgd_wd must lie in [0, 1], got {value!r}")
    return value


def thread_count() -> int:
    """Worker cap from ``LGDID_THREADS`` (default 1 = serial)."""
    raw = os.environ.get("LGDID_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"LGDID_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def parallel_map(func, items):
    """Order-preserving map honouring ``LGDID_THREADS``."""
    items = list(items)
    n = thread_count()
    if n == 1 or len(items) < 2:
        return [func(item) for item in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(func, items))
