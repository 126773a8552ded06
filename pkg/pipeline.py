#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
End-to-end run: ingestion -> diagnostics -> VAR fit -> Granger and FEVD
networks -> export, driven by a flat `key = value` configuration file.

Key Responsibilities:
- `RunConfig` and `validate_config`, which reports every problem in a
  configuration file at once instead of failing on the first.
- Stage helpers shared with the subcommands in `cli.py` (`load_inputs`,
  `write_stats`, `write_model`, `write_granger`, `write_connectedness`,
  `write_network`). For price inputs `write_stats` also writes the
  cumulative growth index.
- `run_pipeline`, which writes every artifact plus a manifest (config,
  input and artifact SHA-256 digests, tool version) and returns an exit
  code. Any stage failure removes the partial outputs and returns the
  stage's code from `config.EXIT_CODES`.

Configuration keys (`#` starts a comment):
    inputs        required, comma-separated CSV paths (relative to the file)
    groups        required, "NAME:label, NAME:label"
    output_dir    required
    columns       "csvcol:NAME, ..." (default: every column after date)
    default_group label for variables not listed in groups
    input_kind    prices | returns              (prices)
    missing       drop | ffill                  (drop)
    lag           auto | integer >= 1           (auto)
    criterion     aic | bic | hq                (bic)
    pmax          integer >= 1                  (10)
    horizons      comma list, first is primary  (10)
    levels        increasing values in (0, 1)   (0.05, 0.10)
    thresholds    increasing positive values    (5, 15)
    robust        true | false                  (false)
    seed          integer >= 0                  (0)
    oracle_sims   0 disables, else >= 1000      (10000)
"""

import dataclasses
import os
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import pandas as pd

from config import (
    CRITERIA,
    DEFAULT_CRITERION,
    DEFAULT_HORIZONS,
    DEFAULT_LEVELS,
    DEFAULT_ORACLE_SIMS,
    DEFAULT_PMAX,
    DEFAULT_SEED,
    DEFAULT_THRESHOLDS,
    DISPLAY_DECIMALS,
    EXIT_CODES,
    EXIT_OK,
    MIN_ORACLE_SIMS,
    PVALUE_DISPLAY_DECIMALS,
    TOOL_NAME,
    TOOL_VERSION,
)
from data_ingest import (
    MISSING_POLICIES,
    PanelSchema,
    PricePanel,
    ReturnPanel,
    align,
    align_returns,
    growth_frame,
    load_panel,
    load_returns,
    log_returns,
    parse_group_spec,
)
from diagnostics import stats_table
from errors import ConfigError, IngestError, SpillnetError
from fevd import (
    ConnectednessTable,
    connectedness_frame,
    connectedness_table,
    fev_check_frame,
    gvd,
    sgvd,
    spillover_frame,
)
from granger import causal_network, edge_table, pvalue_matrix, pvalue_table
from netexport import NetworkGraph, group_edge_counts, node_degrees, threshold_network, to_dot, to_json
from utils import ArtifactWriter, dump_json, file_digest, logger, read_file_content
from var_core import VarModel, coefficient_frame, fit_var, format_model, is_stable, select_lag, sigma_frame

INPUT_KINDS = ("prices", "returns")
REQUIRED_KEYS = ("inputs", "groups", "output_dir")
OPTIONAL_KEYS = (
    "columns",
    "default_group",
    "input_kind",
    "missing",
    "lag",
    "criterion",
    "pmax",
    "horizons",
    "levels",
    "thresholds",
    "robust",
    "seed",
    "oracle_sims",
)


def _fixed(decimals: int) -> str:
    return f"%.{decimals}f"


# --- Run configuration ---


def _semantic_problems(values: dict) -> List[str]:
    problems = []
    levels = list(values.get("levels", DEFAULT_LEVELS))
    if not levels or any(not 0.0 < q < 1.0 for q in levels):
        problems.append("levels must lie in (0, 1)")
    elif any(b <= a for a, b in zip(levels, levels[1:])):
        problems.append("levels must be increasing")
    thresholds = list(values.get("thresholds", DEFAULT_THRESHOLDS))
    if not thresholds or any(t <= 0 for t in thresholds):
        problems.append("thresholds must be positive")
    elif any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        problems.append("thresholds must be increasing")
    horizons = list(values.get("horizons", DEFAULT_HORIZONS))
    if not horizons or any(h < 1 for h in horizons):
        problems.append("horizons must be integers ≥ 1")
    elif len(set(horizons)) != len(horizons):
        problems.append("horizons must not repeat")
    lag = values.get("lag")
    if lag is not None and lag < 1:
        problems.append("lag order must be ≥ 1")
    if values.get("pmax", DEFAULT_PMAX) < 1:
        problems.append("pmax must be ≥ 1")
    if values.get("criterion", DEFAULT_CRITERION) not in CRITERIA:
        problems.append(f"criterion must be one of {', '.join(CRITERIA)}")
    if values.get("input_kind", "prices") not in INPUT_KINDS:
        problems.append(f"input_kind must be one of {', '.join(INPUT_KINDS)}")
    if values.get("missing", "drop") not in MISSING_POLICIES:
        problems.append(f"missing must be one of {', '.join(MISSING_POLICIES)}")
    if values.get("seed", DEFAULT_SEED) < 0:
        problems.append("seed must be ≥ 0")
    sims = values.get("oracle_sims", DEFAULT_ORACLE_SIMS)
    if sims != 0 and sims < MIN_ORACLE_SIMS:
        problems.append(f"oracle_sims must be 0 or ≥ {MIN_ORACLE_SIMS}")
    if "inputs" in values and not values["inputs"]:
        problems.append("inputs must list at least one file")
    return problems


@dataclass(frozen=True)
class RunConfig:
    inputs: Tuple[str, ...]
    groups: str
    output_dir: str
    columns: Optional[Dict[str, str]] = None
    default_group: Optional[str] = None
    input_kind: str = "prices"
    missing: str = "drop"
    lag: Optional[int] = None
    criterion: str = DEFAULT_CRITERION
    pmax: int = DEFAULT_PMAX
    horizons: Tuple[int, ...] = DEFAULT_HORIZONS
    levels: Tuple[float, ...] = DEFAULT_LEVELS
    thresholds: Tuple[float, ...] = DEFAULT_THRESHOLDS
    robust: bool = False
    seed: int = DEFAULT_SEED
    oracle_sims: int = DEFAULT_ORACLE_SIMS

    def __post_init__(self):
        for name in ("inputs", "horizons", "levels", "thresholds"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        problems = _semantic_problems(dataclasses.asdict(self))
        if problems:
            raise ConfigError(problems[0], problems)

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["lag"] = "auto" if self.lag is None else self.lag
        return data


def _split(value: str) -> List[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def _parse_pairs(value: str, key: str, problems: List[str]) -> Dict[str, str]:
    pairs = {}
    for item in _split(value):
        left, sep, right = item.rpartition(":")
        if not sep or not left.strip() or not right.strip():
            problems.append(f"{key}: bad entry '{item}' (expected a:b)")
            continue
        pairs[left.strip()] = right.strip()
    return pairs


def _parse_numbers(value: str, key: str, cast, problems: List[str]):
    try:
        return tuple(cast(item) for item in _split(value))
    except ValueError:
        problems.append(f"{key}: expected a comma-separated list of numbers, got '{value}'")
        return None


def _parse_int(value: str, key: str, problems: List[str]):
    try:
        return int(value)
    except ValueError:
        problems.append(f"{key}: expected an integer, got '{value}'")
        return None


def validate_config(path: str) -> Tuple[Optional[RunConfig], List[str]]:
    """Parses a run configuration; returns (config, []) or (None, every problem found)."""
    try:
        text = read_file_content(path)
    except (OSError, UnicodeDecodeError) as e:
        return None, [f"cannot read configuration {path}: {e}"]

    base = os.path.dirname(os.path.abspath(path))
    problems: List[str] = []
    raw: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            problems.append(f"line {lineno}: expected 'key = value'")
            continue
        if key not in REQUIRED_KEYS and key not in OPTIONAL_KEYS:
            problems.append(f"line {lineno}: unknown key '{key}'")
            continue
        if key in raw:
            problems.append(f"line {lineno}: duplicate key '{key}'")
            continue
        raw[key] = value

    for key in REQUIRED_KEYS:
        if not raw.get(key):
            problems.append(f"missing required key '{key}'")

    def resolve(p: str) -> str:
        return p if os.path.isabs(p) else os.path.normpath(os.path.join(base, p))

    values: dict = {}
    if raw.get("inputs"):
        values["inputs"] = tuple(resolve(p) for p in _split(raw["inputs"]))
    if raw.get("output_dir"):
        values["output_dir"] = resolve(raw["output_dir"])
    if raw.get("groups"):
        try:
            parse_group_spec(raw["groups"])
            values["groups"] = raw["groups"]
        except IngestError as e:
            problems.append(f"groups: {e}")
    if "columns" in raw:
        values["columns"] = _parse_pairs(raw["columns"], "columns", problems) or None
    if "default_group" in raw:
        values["default_group"] = raw["default_group"] or None
    for key in ("input_kind", "missing", "criterion"):
        if key in raw:
            values[key] = raw[key].lower()
    if "lag" in raw and raw["lag"].lower() != "auto":
        lag = _parse_int(raw["lag"], "lag", problems)
        if lag is not None:
            values["lag"] = lag
    for key in ("pmax", "seed", "oracle_sims"):
        if key in raw:
            number = _parse_int(raw[key], key, problems)
            if number is not None:
                values[key] = number
    if "horizons" in raw:
        horizons = _parse_numbers(raw["horizons"], "horizons", int, problems)
        if horizons is not None:
            values["horizons"] = horizons
    for key in ("levels", "thresholds"):
        if key in raw:
            numbers = _parse_numbers(raw[key], key, float, problems)
            if numbers is not None:
                values[key] = numbers
    if "robust" in raw:
        flag = raw["robust"].lower()
        if flag in ("true", "yes", "1"):
            values["robust"] = True
        elif flag in ("false", "no", "0"):
            values["robust"] = False
        else:
            problems.append(f"robust: expected true or false, got '{raw['robust']}'")

    problems.extend(_semantic_problems(values))
    if problems:
        return None, problems
    return RunConfig(**values), []


def load_config(path: str) -> RunConfig:
    config, problems = validate_config(path)
    if config is None:
        raise ConfigError(f"{len(problems)} problem(s) in {path}", problems)
    return config


# --- Stage helpers ---


class InputPanels(NamedTuple):
    returns: ReturnPanel
    prices: Optional[PricePanel] = None


def load_inputs(
    inputs: Sequence[str],
    groups: str,
    columns: Optional[Dict[str, str]] = None,
    default_group: Optional[str] = None,
    input_kind: str = "prices",
    missing: str = "drop",
) -> InputPanels:
    """Reads and aligns the input files; returns percent log-returns (or the returns as given) and the prices."""
    schema = PanelSchema(columns=columns, missing=missing)
    prices = None
    if input_kind == "prices":
        prices = align([load_panel(p, schema) for p in inputs], missing)
        partition = parse_group_spec(groups, prices.names, default_group)
        panel = log_returns(prices, partition)
    else:
        merged = align_returns([load_returns(p, schema) for p in inputs], missing)
        partition = parse_group_spec(groups, merged.names, default_group)
        panel = ReturnPanel(merged.dates, merged.names, merged.values, partition)
    logger.info("Return panel: %d observations x %d variables (%s)", panel.T, panel.K, ", ".join(panel.names))
    return InputPanels(panel, prices)


def write_stats(writer: ArtifactWriter, inputs: InputPanels):
    frame = stats_table(inputs.returns)
    writer.write_frame("stats.csv", frame)
    writer.write_frame("stats_display.csv", frame, float_format=_fixed(DISPLAY_DECIMALS))
    if inputs.prices is not None:
        writer.write_frame("growth_index.csv", growth_frame(inputs.prices))


def write_model(writer: ArtifactWriter, model: VarModel):
    writer.write("model.txt", format_model(model))
    writer.write_frame("coefficients.csv", coefficient_frame(model))
    writer.write_frame("sigma_u.csv", sigma_frame(model))


def write_granger(writer: ArtifactWriter, model: VarModel, levels: Sequence[float]) -> NetworkGraph:
    pm = pvalue_matrix(model)
    table = pvalue_table(pm)
    writer.write_frame("granger_pvalues.csv", table)
    writer.write_frame("granger_pvalues_display.csv", table, float_format=_fixed(PVALUE_DISPLAY_DECIMALS))
    graph = causal_network(pm, levels)
    writer.write_frame("granger_edges.csv", edge_table(graph), index=False)
    return graph


def write_connectedness(
    writer: ArtifactWriter, model: VarModel, horizons: Sequence[int]
) -> List[ConnectednessTable]:
    tables = []
    for h in horizons:
        table = connectedness_table(sgvd(gvd(model, h)), model.partition)
        frame = connectedness_frame(table)
        writer.write_frame(f"connectedness_h{h}.csv", frame)
        writer.write_frame(f"connectedness_h{h}_display.csv", frame, float_format=_fixed(DISPLAY_DECIMALS))
        writer.write_frame(f"spillovers_h{h}.csv", spillover_frame(table))
        logger.info("Total connectedness at h=%d: %.2f%%", h, table.total)
        tables.append(table)
    return tables


def write_network(writer: ArtifactWriter, graph: NetworkGraph, stem: str):
    writer.write(f"{stem}.dot", to_dot(graph))
    writer.write(f"{stem}.json", to_json(graph))


def network_summary(graphs: Sequence[NetworkGraph]) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Edge counts per group pair and band, and the degree ranking, stacked by kind."""
    counts, degrees = [], []
    for g in graphs:
        c = group_edge_counts(g)
        c.insert(0, "kind", g.kind)
        counts.append(c.rename(columns={b: f"band {b}" for b in g.bands}))
        d = node_degrees(g)
        d.insert(0, "kind", g.kind)
        degrees.append(d)
    return pd.concat(counts, ignore_index=True), pd.concat(degrees, ignore_index=True)


# --- Pipeline ---


def _run_stages(config: RunConfig, writer: ArtifactWriter) -> dict:
    inputs = load_inputs(
        config.inputs, config.groups, config.columns, config.default_group, config.input_kind, config.missing
    )
    write_stats(writer, inputs)
    panel = inputs.returns

    p = config.lag if config.lag is not None else select_lag(panel, config.pmax, config.criterion)
    model = fit_var(panel, p, robust=config.robust)
    stability = is_stable(model)
    logger.info("VAR(%d) fitted; max companion modulus %.4f (%s)", p, stability.max_modulus,
                "stable" if stability.stable else "unstable")
    write_model(writer, model)

    granger_graph = write_granger(writer, model, config.levels)
    tables = write_connectedness(writer, model, config.horizons)
    fevd_graph = threshold_network(tables[0], config.thresholds)
    writer.write_frame("fevd_edges.csv", edge_table(fevd_graph), index=False)

    write_network(writer, granger_graph, "granger_network")
    write_network(writer, fevd_graph, "fevd_network")
    counts, degrees = network_summary([granger_graph, fevd_graph])
    writer.write_frame("network_summary.csv", counts, index=False)
    writer.write_frame("network_degrees.csv", degrees, index=False)

    if config.oracle_sims > 0:
        if stability.stable:
            check = fev_check_frame(model, config.horizons[0], config.oracle_sims, config.seed)
            writer.write_frame("fev_check.csv", check)
        else:
            logger.warning("Skipping the Var(h) simulation check: fitted model is not stable")

    return {
        "lag": p,
        "stable": stability.stable,
        "max_modulus": stability.max_modulus,
        "nobs": model.nobs,
        "granger_edges": len(granger_graph.edges),
        "fevd_edges": len(fevd_graph.edges),
        "total_connectedness": {str(t.h): t.total for t in tables},
    }


def run_pipeline(config: RunConfig) -> int:
    """Runs every stage; returns 0 or the failing stage's exit code."""
    writer = ArtifactWriter(config.output_dir)
    try:
        summary = _run_stages(config, writer)
        manifest = {
            "tool": TOOL_NAME,
            "version": TOOL_VERSION,
            "config": config.to_dict(),
            "inputs": [{"path": p, "sha256": file_digest(p)} for p in config.inputs],
            "summary": summary,
            "artifacts": writer.digests(),
        }
        writer.write("manifest.json", dump_json(manifest))
    except SpillnetError as e:
        logger.error("[%s] %s", e.stage, e)
        writer.remove_all()
        return e.exit_code
    except OSError as e:
        logger.error("[export] %s", e)
        writer.remove_all()
        return EXIT_CODES["export"]
    logger.info("Wrote %d artifact(s) to %s", len(writer.written), config.output_dir)
    return EXIT_OK
