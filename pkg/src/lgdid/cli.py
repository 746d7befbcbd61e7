"""Command line entry point: ``lgdid fit|score|evaluate|simulate``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .bayes import score_portfolio
from .cashflow import SegmentConfig
from .curve import fit_segment
from .evaluation import PRESETS, evaluate, generate_portfolio, preset
from .exceptions import LGDIDError
from .io import (
    FIT_SCHEMA,
    SUMMARY_SCHEMA,
    atomic_write_text,
    curves_csv,
    forecasts_csv,
    json_text,
    load_config,
    load_portfolio,
    portfolio_csv,
    read_fit_json,
)

log = logging.getLogger("lgdid")


def _add_inputs(p):
    p.add_argument("--loans", required=True, help="loans CSV (loan_id,ead,annual_rate[,lgd_wd])")
    p.add_argument("--recoveries", required=True, help="recoveries CSV (loan_id,month_after_default,amount)")
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--scheme", choices=("uniform", "front", "back", "conservative"),
                   help="weighting scheme of the curve fit (overrides config)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lgdid", description="In-default LGD from recovery cash flows")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the segment recovery curve; writes JSON")
    _add_inputs(p)
    p.add_argument("--out", required=True, help="output JSON path")

    p = sub.add_parser("score", help="per-loan forecast time series; writes CSV")
    _add_inputs(p)
    p.add_argument("--fit", help="fit JSON to take T from (default: fit on the same loans)")
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("evaluate", help="exact vs forecast vs average curves; writes CSV + JSON")
    _add_inputs(p)
    p.add_argument("--fit", help="fit JSON to take T from (default: fit on the same loans)")
    p.add_argument("--out", required=True, help="output directory (curves.csv, summary.json)")

    p = sub.add_parser("simulate", help="write a synthetic portfolio in the input CSV schema")
    p.add_argument("--out", required=True, help="output directory (loans.csv, recoveries.csv)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="TOML config file (horizon_months)")
    p.add_argument("--preset", choices=sorted(PRESETS), default="mortgage")
    p.add_argument("--n-loans", type=int)
    p.add_argument("--recovery-time", type=float, dest="T_true")
    p.add_argument("--r-inf-mean", type=float)
    p.add_argument("--r-inf-dispersion", type=float)
    p.add_argument("--payment-noise", type=float)
    p.add_argument("--cure-fraction", type=float)
    p.add_argument("--prior-bias", type=float)
    return parser


def _setup(args):
    run = load_config(args.config)
    scheme = args.scheme or run.weight_scheme
    loans = load_portfolio(args.loans, args.recoveries, run.segment)
    log.info("loaded %d loans", len(loans))
    return run, scheme, loans


def _selected_fit(args, loans, segment: SegmentConfig, scheme):
    if getattr(args, "fit", None):
        return read_fit_json(args.fit)
    return fit_segment(loans, segment, scheme)[2]


def cmd_fit(args) -> None:
    run, scheme, loans = _setup(args)
    curve, fits, chosen = fit_segment(loans, run.segment, scheme)
    conservative = min(fits.values(), key=lambda f: (f.r_inf, f.T))
    payload = {
        "schema": FIT_SCHEMA,
        "horizon_months": run.segment.horizon_months,
        "cost_fraction": run.segment.cost_fraction,
        "n_loans": len(loans),
        "requested_scheme": scheme,
        "fits": {name: f.to_dict() for name, f in fits.items()},
        "conservative": conservative.to_dict(),
        "selected": chosen.to_dict(),
        "curve": [float(v) for v in curve.values],
    }
    atomic_write_text(args.out, json_text(payload))


def cmd_score(args) -> None:
    run, scheme, loans = _setup(args)
    chosen = _selected_fit(args, loans, run.segment, scheme)
    forecasts = score_portfolio(loans, chosen.T, run.segment, run.lgd_wd)
    atomic_write_text(args.out, forecasts_csv(forecasts))


def cmd_evaluate(args) -> None:
    run, scheme, loans = _setup(args)
    chosen = _selected_fit(args, loans, run.segment, scheme)
    report = evaluate(loans, chosen, run.segment, run.lgd_wd)
    summary = {"schema": SUMMARY_SCHEMA, "fit": chosen.to_dict(), **report.summary(), **report.extras}
    curves = curves_csv(report)
    summary_text = json_text(summary)
    out = Path(args.out)
    atomic_write_text(out / "curves.csv", curves)
    atomic_write_text(out / "summary.json", summary_text)


def cmd_simulate(args) -> None:
    run = load_config(args.config)
    overrides = {
        k: getattr(args, k)
        for k in ("n_loans", "T_true", "r_inf_mean", "r_inf_dispersion", "payment_noise", "cure_fraction", "prior_bias")
        if getattr(args, k) is not None
    }
    spec = preset(args.preset, seed=args.seed, horizon=run.segment.horizon_months, **overrides)
    loans = generate_portfolio(spec)
    loans_text, rec_text = portfolio_csv(loans)
    out = Path(args.out)
    atomic_write_text(out / "loans.csv", loans_text)
    atomic_write_text(out / "recoveries.csv", rec_text)
    atomic_write_text(out / "spec.json", json_text({"schema": "lgdid.generator/1", **spec.to_dict()}))


COMMANDS = {"fit": cmd_fit, "score": cmd_score, "evaluate": cmd_evaluate, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        COMMANDS[args.command](args)
    except (LGDIDError, OSError) as exc:
        print(f"lgdid {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
