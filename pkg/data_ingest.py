#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Panel ingestion: CSV price panels, date alignment and return construction.

Key Responsibilities:
- `PricePanel`, `ReturnPanel` and `GroupPartition`, the immutable containers
  every later stage works on.
- Loading one CSV per panel (`load_panel`, `load_returns`): UTF-8, header
  row, first column "date" in ISO-8601, "." decimal mark. A `PanelSchema`
  maps CSV columns to variable names and selects the missing-data policy.
- Merging panels on their common dates (`align`), with an optional
  forward-fill policy for mixing 7-day and 5-day markets.
- Percent log-returns (`log_returns`) and the cumulative growth index
  ln(P_t / P_0) (`growth_index`).
"""

import datetime
import re
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config import DEFAULT_GROUP
from errors import AlignError, IngestError
from utils import format_float, logger, write_text

MISSING_POLICIES = ("drop", "ffill")
# "." decimal mark, optional sign and exponent; no separators, inf or nan
DECIMAL_RE = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


def _check_dates(dates: Sequence[datetime.date], what: str):
    for prev, cur in zip(dates, dates[1:]):
        if cur == prev:
            raise IngestError(f"{what}: duplicate dates ({cur.isoformat()})")
        if cur < prev:
            raise IngestError(f"{what}: dates are not increasing ({prev.isoformat()} > {cur.isoformat()})")


def _check_names(names: Sequence[str], what: str):
    if any(not isinstance(n, str) or not n for n in names):
        raise IngestError(f"{what}: variable names must be nonempty strings")
    if len(set(names)) != len(names):
        raise IngestError(f"{what}: variable names must be unique")


# --- Domain types ---


@dataclass(frozen=True)
class GroupPartition:
    """Assigns every variable exactly one group label."""

    group_of: Mapping[str, str]

    def __post_init__(self):
        if not self.group_of:
            raise IngestError("group partition is empty")
        if any(not label for label in self.group_of.values()):
            raise IngestError("group labels must be nonempty")
        object.__setattr__(self, "group_of", dict(self.group_of))

    @classmethod
    def single(cls, names: Sequence[str], label: str = DEFAULT_GROUP) -> "GroupPartition":
        return cls({name: label for name in names})

    def label(self, name: str) -> str:
        try:
            return self.group_of[name]
        except KeyError:
            raise IngestError(f"variable '{name}' has no group label") from None

    def check_covers(self, names: Sequence[str]):
        missing = [n for n in names if n not in self.group_of]
        if missing:
            raise IngestError(f"group partition does not cover: {', '.join(missing)}")

    def labels(self, names: Sequence[str]) -> List[str]:
        """Distinct labels in order of first appearance along `names`."""
        seen: List[str] = []
        for name in names:
            label = self.label(name)
            if label not in seen:
                seen.append(label)
        return seen

    def subset(self, names: Sequence[str]) -> "GroupPartition":
        return GroupPartition({n: self.label(n) for n in names})


@dataclass(frozen=True, eq=False)
class PricePanel:
    """T x K matrix of positive price or index levels on strictly increasing dates."""

    dates: Tuple[datetime.date, ...]
    names: Tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "names", tuple(self.names))
        values = _frozen(self.values)
        if values.ndim != 2 or values.shape != (len(self.dates), len(self.names)):
            raise IngestError(
                f"price matrix has shape {values.shape}, expected ({len(self.dates)}, {len(self.names)})"
            )
        _check_names(self.names, "price panel")
        _check_dates(self.dates, "price panel")
        if not np.all(np.isfinite(values)):
            raise IngestError("price panel contains non-finite values")
        if np.any(values <= 0):
            row, col = np.argwhere(values <= 0)[0]
            raise IngestError(
                f"non-positive price for {self.names[col]} on {self.dates[row].isoformat()}"
            )
        object.__setattr__(self, "values", values)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def K(self) -> int:
        return self.values.shape[1]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, index=pd.DatetimeIndex(self.dates), columns=list(self.names))


@dataclass(frozen=True, eq=False)
class ReturnPanel:
    """Matrix of percent returns with the group partition used by the margins."""

    dates: Tuple[datetime.date, ...]
    names: Tuple[str, ...]
    values: np.ndarray
    partition: GroupPartition = None

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "names", tuple(self.names))
        values = _frozen(self.values)
        if values.ndim != 2 or values.shape[1] != len(self.names):
            raise IngestError(f"return matrix has shape {values.shape}, expected {len(self.names)} columns")
        if values.shape[0] != len(self.dates):
            raise IngestError(f"return matrix has {values.shape[0]} rows but {len(self.dates)} dates")
        if not np.all(np.isfinite(values)):
            raise IngestError("return panel contains non-finite values")
        _check_names(self.names, "return panel")
        _check_dates(self.dates, "return panel")
        partition = self.partition or GroupPartition.single(self.names)
        partition.check_covers(self.names)
        object.__setattr__(self, "partition", partition.subset(self.names))
        object.__setattr__(self, "values", values)

    @classmethod
    def from_array(
        cls,
        values,
        names: Optional[Sequence[str]] = None,
        partition: Optional[GroupPartition] = None,
        start: datetime.date = datetime.date(2000, 1, 1),
    ) -> "ReturnPanel":
        """Wraps a plain matrix, stamping consecutive calendar dates from `start`."""
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if names is None:
            names = [f"y{k + 1}" for k in range(values.shape[1])]
        dates = [start + datetime.timedelta(days=t) for t in range(values.shape[0])]
        return cls(dates, names, values, partition)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def K(self) -> int:
        return self.values.shape[1]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, index=pd.DatetimeIndex(self.dates), columns=list(self.names))

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.names.index(name)]
        except ValueError:
            raise IngestError(f"unknown variable '{name}'") from None

    def select(self, names: Sequence[str]) -> "ReturnPanel":
        """Reorders / subsets the columns, keeping the dates."""
        idx = [self.names.index(n) for n in names]
        return ReturnPanel(self.dates, names, self.values[:, idx], self.partition.subset(names))


@dataclass(frozen=True)
class PanelSchema:
    """Column mapping for one CSV file.

    `columns` maps CSV header names to variable names; None keeps every
    column after "date" under its header name.
    """

    columns: Optional[Dict[str, str]] = None
    missing: str = "drop"
    date_column: str = "date"

    def __post_init__(self):
        if self.missing not in MISSING_POLICIES:
            raise IngestError(f"unknown missing-data policy '{self.missing}' (use drop or ffill)")


# --- Loading ---


def _parse_number(text: str) -> float:
    """Correctly rounded decimal parse; blanks and junk become NaN."""
    text = text.strip()
    if not DECIMAL_RE.fullmatch(text):
        return np.nan
    return float(text)


def _read_frame(path: str, schema: PanelSchema) -> pd.DataFrame:
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8", skipinitialspace=True)
    except (OSError, UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise IngestError(f"{path}: unreadable file ({e})") from e

    if raw.columns.empty or raw.columns[0].strip() != schema.date_column:
        raise IngestError(f"{path}: first column must be named '{schema.date_column}'")
    raw.columns = [c.strip() for c in raw.columns]

    if schema.columns is None:
        mapping = {c: c for c in raw.columns[1:]}
    else:
        mapping = {c: v for c, v in schema.columns.items() if c in raw.columns}
        if not mapping:
            raise IngestError(f"{path}: none of the mapped columns are present")
    if not mapping:
        raise IngestError(f"{path}: no data columns")

    dates = pd.to_datetime(raw[schema.date_column].str.strip(), format="%Y-%m-%d", errors="coerce")
    bad_dates = int(dates.isna().sum())
    if bad_dates:
        logger.warning("%s: skipping %d row(s) with unparseable dates", path, bad_dates)

    frame = pd.DataFrame(
        {var: raw[col].map(_parse_number).astype(float) for col, var in mapping.items()}
    )
    frame.index = dates
    frame = frame[~frame.index.isna()]
    if frame.empty:
        raise IngestError(f"{path}: no parseable rows")

    frame = frame.sort_index(kind="mergesort")
    if frame.index.has_duplicates:
        dup = frame.index[frame.index.duplicated()][0]
        raise IngestError(f"{path}: duplicate dates ({dup.date().isoformat()})")

    frame = frame.replace([np.inf, -np.inf], np.nan)
    before = len(frame)
    if schema.missing == "ffill":
        frame = frame.ffill()
    frame = frame.dropna(how="any")
    if len(frame) < before:
        logger.info("%s: %d row(s) removed by the %s policy", path, before - len(frame), schema.missing)
    if frame.empty:
        raise IngestError(f"{path}: no parseable rows")
    return frame


def load_panel(path: str, schema: Optional[PanelSchema] = None) -> PricePanel:
    """Reads one price CSV into a PricePanel sorted by date."""
    schema = schema or PanelSchema()
    frame = _read_frame(path, schema)
    if (frame.values <= 0).any():
        row, col = np.argwhere(frame.values <= 0)[0]
        raise IngestError(
            f"{path}: non-positive price for {frame.columns[col]} on {frame.index[row].date().isoformat()}"
        )
    logger.debug("Loaded %s: %d rows x %d columns", path, frame.shape[0], frame.shape[1])
    return PricePanel(tuple(d.date() for d in frame.index), tuple(frame.columns), frame.values)


def load_returns(
    path: str, schema: Optional[PanelSchema] = None, partition: Optional[GroupPartition] = None
) -> ReturnPanel:
    """Reads a CSV of pre-computed returns (no transformation applied)."""
    schema = schema or PanelSchema()
    frame = _read_frame(path, schema)
    return ReturnPanel(tuple(d.date() for d in frame.index), tuple(frame.columns), frame.values, partition)


def write_panel_csv(panel, path: str):
    """Writes a PricePanel or ReturnPanel in the ingestion CSV format."""
    lines = [",".join(["date", *panel.names])]
    for d, row in zip(panel.dates, panel.values):
        lines.append(",".join([d.isoformat(), *(format_float(v) for v in row)]))
    write_text(path, "\n".join(lines) + "\n")


def parse_group_spec(
    text: str, names: Optional[Sequence[str]] = None, default: Optional[str] = None
) -> GroupPartition:
    """Parses "NAME:label, NAME:label"; names not listed fall back to `default`."""
    group_of: Dict[str, str] = {}
    for item in (text or "").split(","):
        item = item.strip()
        if not item:
            continue
        name, sep, label = item.rpartition(":")
        name, label = name.strip(), label.strip()
        if not sep or not name or not label:
            raise IngestError(f"bad group entry '{item}' (expected NAME:label)")
        if name in group_of:
            raise IngestError(f"variable '{name}' listed in more than one group")
        group_of[name] = label
    if names is not None:
        unknown = [n for n in group_of if n not in names]
        if unknown:
            raise IngestError(f"groups name unknown variables: {', '.join(unknown)}")
        for name in names:
            if name not in group_of:
                if default is None:
                    raise IngestError(f"variable '{name}' has no group label")
                group_of[name] = default
    return GroupPartition(group_of)


# --- Transformations ---


def _merge_frames(panels, missing: str) -> pd.DataFrame:
    if not panels:
        raise AlignError("no panels to align")
    if missing not in MISSING_POLICIES:
        raise AlignError(f"unknown missing-data policy '{missing}'")
    names = [n for p in panels for n in p.names]
    if len(set(names)) != len(names):
        raise AlignError("variable names overlap across panels")

    frames = [p.to_frame() for p in panels]
    if missing == "drop":
        merged = pd.concat(frames, axis=1, join="inner")
    else:
        merged = pd.concat(frames, axis=1, join="outer").sort_index().ffill().dropna(how="any")
    merged = merged.sort_index()
    if merged.empty:
        raise AlignError("empty date intersection")
    logger.info("Aligned %d panel(s): %d dates x %d variables", len(panels), merged.shape[0], merged.shape[1])
    return merged


def align(panels: Sequence[PricePanel], missing: str = "drop") -> PricePanel:
    """Merges panels column-wise on their common dates (input column order kept)."""
    merged = _merge_frames(panels, missing)
    return PricePanel(tuple(d.date() for d in merged.index), tuple(merged.columns), merged.values)


def align_returns(
    panels: Sequence[ReturnPanel], missing: str = "drop", partition: Optional[GroupPartition] = None
) -> ReturnPanel:
    """`align` for pre-computed return panels."""
    merged = _merge_frames(panels, missing)
    return ReturnPanel(tuple(d.date() for d in merged.index), tuple(merged.columns), merged.values, partition)


def log_returns(panel: PricePanel, partition: Optional[GroupPartition] = None) -> ReturnPanel:
    """r_t = 100 * ln(P_t / P_{t-1}); one row fewer than the price panel."""
    if panel.T < 2:
        raise IngestError("log returns need at least two price rows")
    values = 100.0 * np.diff(np.log(panel.values), axis=0)
    return ReturnPanel(panel.dates[1:], panel.names, values, partition)


def growth_index(panel: PricePanel) -> np.ndarray:
    """g_t = ln(P_t / P_0); the first row is zero."""
    logs = np.log(panel.values)
    return logs - logs[0]


def growth_frame(panel: PricePanel) -> pd.DataFrame:
    """`growth_index` as a table indexed by ISO date."""
    return pd.DataFrame(
        growth_index(panel),
        index=pd.Index([d.isoformat() for d in panel.dates], name="date"),
        columns=list(panel.names),
    )
