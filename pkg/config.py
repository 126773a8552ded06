#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Central Configuration for spillnet.

This module stores shared constants and default settings used across the
analysis modules: critical values for the summary diagnostics, defaults for
lag selection, forecast horizons, significance levels and network
thresholds, numerical tolerances, exit codes of the command-line stages,
and the default DOT styling of the exported networks.

Centralizing these settings keeps the numbers in one place; the run
configuration file (see `pipeline.py`) overrides the defaults per run.
"""

TOOL_NAME = "spillnet"
TOOL_VERSION = "0.3.0"


# --- Diagnostics ---

# Dickey-Fuller, intercept-only regression, large-sample critical values.
ADF_CRITICAL_VALUES = {
    0.01: -3.44,
    0.05: -2.87,
    0.10: -2.60,
}

# Chi-square(2) upper points used when reporting Jarque-Bera decisions.
JB_CRITICAL_VALUES = {
    0.01: 9.21,
    0.05: 5.99,
    0.10: 4.61,
}

MIN_SERIES_LENGTH = 20
MIN_JB_LENGTH = 8

STATS_COLUMNS = [
    "Mean",
    "Std.",
    "Min",
    "Median",
    "Max",
    "JB Stat.",
    "Mean/Std.",
    "ADF Stat.",
]


# --- VAR estimation ---

CRITERIA = ("aic", "bic", "hq")
DEFAULT_CRITERION = "bic"
DEFAULT_PMAX = 10

# Relative tolerance on the smallest eigenvalue of the scaled moment matrix.
SINGULARITY_TOL = 1e-12


# --- Decompositions and networks ---

DEFAULT_HORIZON = 10
DEFAULT_HORIZONS = (10,)
DEFAULT_LEVELS = (0.05, 0.10)
DEFAULT_THRESHOLDS = (5.0, 15.0)
DEFAULT_GROUP = "all"

PVALUE_CORNER_LABEL = "Causality From →"
DISPLAY_DECIMALS = 2
PVALUE_DISPLAY_DECIMALS = 3


# --- Simulation ---

DEFAULT_BURN_IN = 1000
DEFAULT_SEED = 0
DEFAULT_ORACLE_SIMS = 10_000
ORACLE_BLOCK_SIZE = 10_000
MIN_ORACLE_SIMS = 1_000
MIN_MC_REPS = 100
MC_CACHE_DIR = ".spillnet_mc"


# --- Exit codes (per pipeline stage) ---

EXIT_OK = 0
EXIT_CODES = {
    "config": 10,
    "ingest": 20,
    "align": 20,
    "stats": 20,
    "fit": 30,
    "granger": 40,
    "fevd": 50,
    "export": 60,
    "simulate": 70,
}


# --- DOT styling ---
# Bands are ranked strongest first; rank 0 gets the first entry.

DOT_BAND_STYLES = [
    {"style": "bold", "color": "black", "penwidth": "2.0"},
    {"style": "solid", "color": "grey50", "penwidth": "1.0"},
    {"style": "dashed", "color": "grey70", "penwidth": "1.0"},
]

DOT_GROUP_COLORS = [
    "lightblue",
    "lightsalmon",
    "palegreen",
    "khaki",
    "plum",
    "lightgrey",
]

WEIGHT_SEMANTICS = {
    "granger": "p-value",
    "fevd": "percent share of forecast-error variance",
}
