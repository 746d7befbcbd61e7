"""CSV/JSON/TOML input and output.

Input schemas (UTF-8, header row required, ``.`` as decimal separator; lines
starting with ``#`` before the header are ignored)::

    loans:      loan_id,ead,annual_rate[,lgd_wd]
    recoveries: loan_id,month_after_default,amount

All outputs carry a schema tag and are written atomically (temporary file in
the target directory, then rename).
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
import tempfile
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .cashflow import DEFAULT_HORIZON, LoanRecord, SegmentConfig
from .exceptions import ConfigurationError, LGDIDError, PortfolioFileError

LOANS_SCHEMA = "lgdid.loans/1"
RECOVERIES_SCHEMA = "lgdid.recoveries/1"
FIT_SCHEMA = "lgdid.fit/1"
FORECAST_SCHEMA = "lgdid.forecast/1"
CURVES_SCHEMA = "lgdid.curves/1"
SUMMARY_SCHEMA = "lgdid.evaluation/1"

LOAN_COLUMNS = ("loan_id", "ead", "annual_rate", "lgd_wd")
RECOVERY_COLUMNS = ("loan_id", "month_after_default", "amount")


@dataclass(frozen=True)
class RunConfig:
    """Settings read from a config file."""

    segment: SegmentConfig = SegmentConfig()
    weight_scheme: str = "conservative"
    lgd_wd: Optional[float] = None


def load_config(path=None) -> RunConfig:
    """Read ``horizon_months``, ``cost_fraction``, ``weight_scheme`` and ``lgd_wd`` from TOML."""
    if path is None:
        return RunConfig()
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"cannot parse config {path}: {exc}") from None
    unknown = set(raw) - {"horizon_months", "cost_fraction", "weight_scheme", "lgd_wd"}
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    try:
        segment = SegmentConfig(
            int(raw.get("horizon_months", DEFAULT_HORIZON)), float(raw.get("cost_fraction", 0.0))
        )
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(str(exc)) from None
    scheme = str(raw.get("weight_scheme", "conservative"))
    if scheme not in ("uniform", "front", "back", "conservative"):
        raise ConfigurationError(f"weight_scheme must be uniform, front, back or conservative, got {scheme!r}")
    lgd_wd = raw.get("lgd_wd")
    if lgd_wd is not None:
        lgd_wd = float(lgd_wd)
        if not 0.0 <= lgd_wd <= 1.0:
            raise ConfigurationError("lgd_wd must lie in [0, 1]")
    return RunConfig(segment, scheme, lgd_wd)


@dataclass
class PortfolioFile:
    """Parsed portfolio plus diagnostics."""

    loans_path: str
    recoveries_path: str
    loans: List[LoanRecord] = field(default_factory=list)
    loan_rows: int = 0
    recovery_rows: int = 0
    beyond_horizon_rows: int = 0
    rejected: List[Tuple[str, int, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.rejected


def _rows(path, required):
    """Yield ``(line_number, row_dict)``; raises on a missing file or header."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise PortfolioFileError(f"file not found: {path}") from None
    with fh:
        lines = list(enumerate(fh, start=1))
    body = [(i, line) for i, line in lines if line.strip()]
    while body and body[0][1].lstrip().startswith("#"):
        body.pop(0)
    if not body:
        raise PortfolioFileError(f"{path}: missing header row")
    header_line, header_text = body[0]
    header = [h.strip() for h in next(csv.reader([header_text]))]
    missing = [c for c in required if c not in header]
    if missing:
        raise PortfolioFileError(f"{path}:{header_line}: header lacks columns {missing}")
    for i, text in body[1:]:
        values = next(csv.reader([text]))
        if len(values) != len(header):
            yield i, None
        else:
            yield i, {h: v.strip() for h, v in zip(header, values)}


def _finite(text):
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("not finite")
    return value


def read_portfolio(loans_path, recoveries_path, cfg: SegmentConfig = SegmentConfig()) -> PortfolioFile:
    """Parse both files, collecting every bad row instead of stopping at the first."""
    pf = PortfolioFile(str(loans_path), str(recoveries_path))
    lf, rf = Path(loans_path).name, Path(recoveries_path).name
    heads: Dict[str, tuple] = {}
    for line, row in _rows(loans_path, LOAN_COLUMNS[:3]):
        pf.loan_rows += 1
        if row is None:
            pf.rejected.append((lf, line, "wrong number of fields"))
            continue
        loan_id = row["loan_id"]
        if not loan_id:
            pf.rejected.append((lf, line, "empty loan_id"))
            continue
        if loan_id in heads:
            pf.rejected.append((lf, line, f"duplicate loan_id {loan_id!r}"))
            continue
        try:
            ead = _finite(row["ead"])
            rate = _finite(row["annual_rate"])
            lgd_text = row.get("lgd_wd", "")
            lgd_wd = _finite(lgd_text) if lgd_text else None
        except ValueError:
            pf.rejected.append((lf, line, "malformed number"))
            continue
        if ead <= 0:
            pf.rejected.append((lf, line, f"non-positive ead {ead!r}"))
            continue
        if rate < 0:
            pf.rejected.append((lf, line, f"negative annual_rate {rate!r}"))
            continue
        if lgd_wd is not None and not 0.0 <= lgd_wd <= 1.0:
            pf.rejected.append((lf, line, f"lgd_wd {lgd_wd!r} outside [0, 1]"))
            continue
        heads[loan_id] = (ead, rate, lgd_wd)

    payments = defaultdict(list)
    for line, row in _rows(recoveries_path, RECOVERY_COLUMNS):
        pf.recovery_rows += 1
        if row is None:
            pf.rejected.append((rf, line, "wrong number of fields"))
            continue
        loan_id = row["loan_id"]
        if loan_id not in heads:
            pf.rejected.append((rf, line, f"recovery for unknown loan_id {loan_id!r}"))
            continue
        try:
            month_value = _finite(row["month_after_default"])
            amount = _finite(row["amount"])
        except ValueError:
            pf.rejected.append((rf, line, "malformed number"))
            continue
        if month_value != int(month_value) or month_value < 0:
            pf.rejected.append((rf, line, "month_after_default must be a non-negative integer"))
            continue
        if amount < 0:
            pf.rejected.append((rf, line, f"negative amount {amount!r}"))
            continue
        month = int(month_value)
        if month > cfg.horizon_months:
            pf.beyond_horizon_rows += 1
            continue
        payments[loan_id].append((month, amount))

    for loan_id, (ead, rate, lgd_wd) in heads.items():
        pf.loans.append(LoanRecord.from_payments(loan_id, ead, rate, payments.get(loan_id, ()), lgd_wd))
    return pf


def load_portfolio(loans_path, recoveries_path, cfg: SegmentConfig = SegmentConfig()) -> List[LoanRecord]:
    """Validated loans; any rejected row raises :class:`PortfolioFileError` naming it."""
    pf = read_portfolio(loans_path, recoveries_path, cfg)
    if pf.rejected:
        raise PortfolioFileError(f"{len(pf.rejected)} invalid row(s)", pf.rejected)
    if not pf.loans:
        raise PortfolioFileError(f"{loans_path}: no loans")
    return pf.loans


# -- writers ---------------------------------------------------------------


def fmt(value) -> str:
    """Shortest round-trip text of a finite number."""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    value = float(value)
    if not math.isfinite(value):
        raise LGDIDError(f"refusing to serialise non-finite value {value!r}")
    return repr(value)


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def _csv_text(schema, header, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {schema}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def portfolio_csv(loans: Sequence[LoanRecord]) -> Tuple[str, str]:
    loan_rows = [
        (loan.loan_id, fmt(loan.ead), fmt(loan.annual_rate), "" if loan.lgd_wd is None else fmt(loan.lgd_wd))
        for loan in loans
    ]
    rec_rows = [(loan.loan_id, str(m), fmt(a)) for loan in loans for m, a in loan.recoveries]
    return (
        _csv_text(LOANS_SCHEMA, LOAN_COLUMNS, loan_rows),
        _csv_text(RECOVERIES_SCHEMA, RECOVERY_COLUMNS, rec_rows),
    )


def write_portfolio(loans: Sequence[LoanRecord], loans_path, recoveries_path) -> None:
    loans_text, rec_text = portfolio_csv(loans)
    atomic_write_text(loans_path, loans_text)
    atomic_write_text(recoveries_path, rec_text)


def json_text(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"


def forecasts_csv(forecasts) -> str:
    header = ("loan_id", "t", "raw_posterior", "blended", "forecast_recovery", "forecast_lgd")
    rows = (
        (f.loan_id, str(int(t)), fmt(a), fmt(b), fmt(c), fmt(d))
        for f in forecasts
        for t, a, b, c, d in zip(f.t, f.raw_posterior, f.blended, f.forecast_recovery, f.forecast_lgd)
    )
    return _csv_text(FORECAST_SCHEMA, header, rows)


def curves_csv(report) -> str:
    curves = report.curves()
    header = ("t",) + tuple(curves)
    rows = ((str(int(t)),) + tuple(fmt(c[i]) for c in curves.values()) for i, t in enumerate(report.t))
    return _csv_text(CURVES_SCHEMA, header, rows)


def read_fit_json(path):
    """The selected :class:`RecoveryCurveFit` from a ``fit`` output file."""
    from .curve import RecoveryCurveFit

    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"fit file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"cannot parse fit file {path}: {exc}") from None
    if payload.get("schema") != FIT_SCHEMA:
        raise ConfigurationError(f"{path}: expected schema {FIT_SCHEMA}, got {payload.get('schema')!r}")
    return RecoveryCurveFit.from_dict(payload["selected"])
