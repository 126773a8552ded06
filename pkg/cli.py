#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Command-line entry point for spillnet.

Subcommands:
    stats     summary statistics of the return panel (plus the growth index for prices)
    fit       estimate a VAR (fixed p or selected by AIC/BIC/HQ), save the model
    granger   p-value matrix, edge list and network from a saved model
    fevd      connectedness tables for one or more horizons from a saved model
    network   Granger or FEVD network (DOT + JSON) from a saved model
    simulate  synthetic return panel from a JSON process spec
    mc        Monte Carlo rejection rate of a test under a JSON process spec
    run       the whole pipeline from a key = value configuration file

Errors are reported as "[stage] message" on stderr; the exit code
identifies the stage (see config.EXIT_CODES).
"""

import argparse
import dataclasses
import os
from typing import List, Optional

import pandas as pd

from config import (
    CRITERIA,
    DEFAULT_CRITERION,
    DEFAULT_GROUP,
    DEFAULT_HORIZON,
    DEFAULT_LEVELS,
    DEFAULT_PMAX,
    DEFAULT_THRESHOLDS,
    EXIT_CODES,
    EXIT_OK,
    MC_CACHE_DIR,
)
from data_ingest import MISSING_POLICIES, write_panel_csv
from errors import ConfigError, SpillnetError
from fevd import connectedness_table, gvd, sgvd
from granger import causal_network, pvalue_matrix
from netexport import threshold_network
from pipeline import (
    INPUT_KINDS,
    load_inputs,
    run_pipeline,
    validate_config,
    write_connectedness,
    write_granger,
    write_model,
    write_network,
    write_stats,
)
from simulate import load_dgp_spec, mc_rejection_rate, parse_test_descriptor, simulate_var
from utils import ArtifactWriter, logger, set_verbose
from var_core import fit_var, lag_order_table, load_model, select_lag


def _numbers(text: str, cast, flag: str) -> List:
    try:
        return [cast(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise ConfigError(f"{flag}: expected a comma-separated list of numbers, got '{text}'") from None


def _pairs(text: Optional[str]) -> Optional[dict]:
    if not text:
        return None
    pairs = {}
    for item in text.split(","):
        left, sep, right = item.strip().rpartition(":")
        if not sep:
            raise ConfigError(f"--columns: bad entry '{item.strip()}' (expected csvcol:NAME)")
        pairs[left.strip()] = right.strip()
    return pairs


def _inputs_from_args(args):
    return load_inputs(
        args.input,
        args.groups,
        columns=_pairs(args.columns),
        default_group=args.default_group,
        input_kind=args.input_kind,
        missing=args.missing,
    )


# --- Subcommand handlers ---


def cmd_stats(args) -> int:
    write_stats(ArtifactWriter(args.out_dir), _inputs_from_args(args))
    return EXIT_OK


def cmd_fit(args) -> int:
    panel = _inputs_from_args(args).returns
    writer = ArtifactWriter(args.out_dir)
    if args.lag is not None:
        p = args.lag
    else:
        writer.write_frame("lag_selection.csv", lag_order_table(panel, args.pmax))
        p = select_lag(panel, args.pmax, args.criterion)
    write_model(writer, fit_var(panel, p, robust=args.robust))
    return EXIT_OK


def cmd_granger(args) -> int:
    model = load_model(args.model)
    writer = ArtifactWriter(args.out_dir)
    graph = write_granger(writer, model, _numbers(args.levels, float, "--levels"))
    write_network(writer, graph, "granger_network")
    return EXIT_OK


def cmd_fevd(args) -> int:
    model = load_model(args.model)
    write_connectedness(ArtifactWriter(args.out_dir), model, args.horizon or [DEFAULT_HORIZON])
    return EXIT_OK


def cmd_network(args) -> int:
    model = load_model(args.model)
    if args.kind == "granger":
        graph = causal_network(pvalue_matrix(model), _numbers(args.levels, float, "--levels"))
    else:
        table = connectedness_table(sgvd(gvd(model, args.horizon)), model.partition)
        graph = threshold_network(table, _numbers(args.thresholds, float, "--thresholds"))
    out_dir, stem = os.path.split(args.out)
    write_network(ArtifactWriter(out_dir or "."), graph, stem)
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = load_dgp_spec(args.spec)
    overrides = {k: v for k, v in (("seed", args.seed), ("n", args.n)) if v is not None}
    if overrides:
        spec = dataclasses.replace(spec, **overrides)
    write_panel_csv(simulate_var(spec), args.out)
    logger.info("Simulated %d observations of %d variables into %s", spec.n, spec.K, args.out)
    return EXIT_OK


def cmd_mc(args) -> int:
    spec = load_dgp_spec(args.spec)
    test = parse_test_descriptor(args.test, p=args.p)
    result = mc_rejection_rate(
        spec,
        test,
        args.level,
        args.reps,
        workers=args.workers,
        progress=args.progress,
        cache_dir=args.cache_dir,
    )
    out_dir, name = os.path.split(args.out)
    ArtifactWriter(out_dir or ".").write_frame(name, pd.DataFrame([result.as_row()]), index=False)
    return EXIT_OK


def cmd_run(args) -> int:
    config, problems = validate_config(args.config)
    if config is None:
        for problem in problems:
            logger.error("[config] %s", problem)
        return EXIT_CODES["config"]
    return run_pipeline(config)


# --- Parser ---


def _add_input_args(parser):
    parser.add_argument("--input", action="append", required=True, help="Input CSV (repeat for several files).")
    parser.add_argument("--groups", default="", help='Group labels, e.g. "BTC:crypto, SP500:other".')
    parser.add_argument(
        "--default-group", default=DEFAULT_GROUP, help="Label for variables not named in --groups."
    )
    parser.add_argument("--columns", help='Column mapping "csvcol:NAME, ..." (default: all columns).')
    parser.add_argument("--input-kind", choices=INPUT_KINDS, default="prices", help="Prices or returns.")
    parser.add_argument("--missing", choices=MISSING_POLICIES, default="drop", help="Missing-data policy.")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spillnet",
        description="Granger-causality and variance-decomposition networks for groups of time series.",
    )
    parser.add_argument("--verbose", action="store_true", help="Enable debug logging.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="Summary statistics per series.")
    _add_input_args(p)
    p.add_argument("--out-dir", default=".", help="Directory for stats.csv, stats_display.csv and growth_index.csv.")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("fit", help="Estimate a VAR and save it.")
    _add_input_args(p)
    lag = p.add_mutually_exclusive_group()
    lag.add_argument("--lag", type=int, help="Fixed lag order p.")
    lag.add_argument("--select-lag", action="store_true", help="Select p by --criterion (the default).")
    p.add_argument("--criterion", choices=CRITERIA, default=DEFAULT_CRITERION, help="Information criterion.")
    p.add_argument("--pmax", type=int, default=DEFAULT_PMAX, help="Largest lag considered.")
    p.add_argument("--robust", action="store_true", help="HC0 coefficient covariance.")
    p.add_argument("--out-dir", default=".", help="Directory for model.txt and the coefficient CSVs.")
    p.set_defaults(func=cmd_fit)

    levels = ",".join(str(q) for q in DEFAULT_LEVELS)
    p = sub.add_parser("granger", help="Granger p-values and network from a saved model.")
    p.add_argument("--model", required=True, help="Model file written by 'fit'.")
    p.add_argument("--levels", default=levels, help="Increasing significance levels.")
    p.add_argument("--out-dir", default=".", help="Output directory.")
    p.set_defaults(func=cmd_granger)

    p = sub.add_parser("fevd", help="Connectedness tables from a saved model.")
    p.add_argument("--model", required=True, help="Model file written by 'fit'.")
    p.add_argument("--horizon", type=int, action="append", help="Forecast horizon (repeatable; default 10).")
    p.add_argument("--out-dir", default=".", help="Output directory.")
    p.set_defaults(func=cmd_fevd)

    p = sub.add_parser("network", help="Granger or FEVD network as DOT and JSON.")
    p.add_argument("--model", required=True, help="Model file written by 'fit'.")
    p.add_argument("--kind", choices=("granger", "fevd"), required=True, help="Network type.")
    p.add_argument("--levels", default=levels, help="Significance levels (granger).")
    p.add_argument(
        "--thresholds", default=",".join(f"{t:g}" for t in DEFAULT_THRESHOLDS), help="Percent thresholds (fevd)."
    )
    p.add_argument("--horizon", type=int, default=DEFAULT_HORIZON, help="Forecast horizon (fevd).")
    p.add_argument("--out", required=True, help="Output path stem; .dot and .json are appended.")
    p.set_defaults(func=cmd_network)

    p = sub.add_parser("simulate", help="Simulate a return panel from a JSON process spec.")
    p.add_argument("--spec", required=True, help="JSON process spec.")
    p.add_argument("--out", required=True, help="Output CSV.")
    p.add_argument("--seed", type=int, help="Override the spec seed.")
    p.add_argument("--n", type=int, help="Override the sample length.")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("mc", help="Monte Carlo rejection rate.")
    p.add_argument("--spec", required=True, help="JSON process spec.")
    p.add_argument("--test", required=True, help="granger:SRC->DST, jb:NAME or adf:NAME[:max_lag].")
    p.add_argument("--level", type=float, default=0.05, help="Nominal level.")
    p.add_argument("--reps", type=int, default=500, help="Replications.")
    p.add_argument("--p", type=int, default=1, help="VAR lag order for Granger tests.")
    p.add_argument("--workers", type=int, default=1, help="Worker processes.")
    p.add_argument("--cache-dir", default=None, help=f"Outcome cache directory (e.g. {MC_CACHE_DIR}).")
    p.add_argument("--progress", action="store_true", help="Show a progress bar.")
    p.add_argument("--out", default="mc.csv", help="One-row CSV summary.")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("run", help="Full pipeline from a configuration file.")
    p.add_argument("config", help="key = value configuration file.")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    set_verbose(args.verbose)
    try:
        return args.func(args)
    except SpillnetError as e:
        logger.error("[%s] %s", e.stage, e)
        return e.exit_code
    except OSError as e:
        logger.error("[export] %s", e)
        return EXIT_CODES["export"]


if __name__ == "__main__":
    raise SystemExit(main())
