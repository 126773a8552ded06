#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Per-series descriptive statistics and the two distributional hypothesis tests.

Key Responsibilities:
- Jarque-Bera normality test from moment-based (n-divisor) skewness and
  kurtosis, with a chi-square(2) upper-tail p-value.
- Augmented Dickey-Fuller unit-root test, intercept and no trend, with
  lag selection by AIC over 0..max_lag on a common sample. Only threshold
  decisions against the constant-only critical values are reported.
- `summary_stats` / `stats_table`: mean, std, min, median, max, JB,
  mean/std and ADF per return series, in panel column order.
"""

from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Union

import numpy as np
import pandas as pd
from scipy import stats

from config import ADF_CRITICAL_VALUES, MIN_JB_LENGTH, MIN_SERIES_LENGTH, STATS_COLUMNS
from data_ingest import ReturnPanel
from errors import DiagnosticsError
from utils import logger
from var_core import solve_least_squares


class JbResult(NamedTuple):
    stat: float
    pvalue: float
    skewness: float
    excess_kurtosis: float


class AdfResult(NamedTuple):
    stat: float
    lag_used: int
    nobs: int
    reject_at: Dict[str, bool]


@dataclass(frozen=True)
class SeriesStats:
    name: str
    mean: float
    std: float
    min: float
    median: float
    max: float
    jb_stat: float
    jb_pvalue: float
    mean_over_std: float
    adf_stat: float
    adf_lag: int

    def table_row(self) -> List[float]:
        return [
            self.mean,
            self.std,
            self.min,
            self.median,
            self.max,
            self.jb_stat,
            self.mean_over_std,
            self.adf_stat,
        ]


def level_label(level: float) -> str:
    return f"{level * 100:g}%"


# --- Jarque-Bera ---


def jarque_bera(x) -> JbResult:
    """JB = n (S^2/6 + (K-3)^2/24) with central-moment S and K."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < MIN_JB_LENGTH:
        raise DiagnosticsError(f"Jarque-Bera needs at least {MIN_JB_LENGTH} observations, got {n}")
    if np.ptp(x) == 0:
        raise DiagnosticsError("Jarque-Bera undefined for a zero-variance series")
    centered = x - x.mean()
    m2 = np.mean(centered ** 2)
    if m2 <= 0:
        raise DiagnosticsError("Jarque-Bera undefined for a zero-variance series")
    skew = np.mean(centered ** 3) / m2 ** 1.5
    kurt = np.mean(centered ** 4) / m2 ** 2
    stat = n * (skew ** 2 / 6.0 + (kurt - 3.0) ** 2 / 24.0)
    return JbResult(float(stat), float(stats.chi2.sf(stat, 2)), float(skew), float(kurt - 3.0))


# --- Augmented Dickey-Fuller ---


def schwert_max_lag(n: int) -> int:
    """floor(12 (n/100)^(1/4)), capped so that n >= max_lag + MIN_SERIES_LENGTH."""
    return max(0, min(int(np.floor(12.0 * (n / 100.0) ** 0.25)), n - MIN_SERIES_LENGTH))


def _adf_design(x: np.ndarray, lag: int, start: int):
    """Regression of dx_t on (1, x_{t-1}, dx_{t-1}..dx_{t-lag}) for dx rows start..end."""
    dx = np.diff(x)
    rows = np.arange(start, dx.size)
    cols = [np.ones(rows.size), x[rows]]
    for i in range(1, lag + 1):
        cols.append(dx[rows - i])
    return np.column_stack(cols), dx[rows]


def _adf_fit(x: np.ndarray, lag: int, start: int):
    Z, y = _adf_design(x, lag, start)
    beta, inv_zz = solve_least_squares(Z, y, error_cls=DiagnosticsError)
    resid = y - Z @ beta
    ssr = float(resid @ resid)
    return Z.shape[0], Z.shape[1], beta, inv_zz, ssr


def adf_test(x, max_lag: Union[int, str] = "auto", autolag: Optional[str] = "aic") -> AdfResult:
    """t-ratio on rho in dx_t = a + rho x_{t-1} + sum_i g_i dx_{t-i} + e_t.

    With autolag="aic" the lag is chosen over 0..max_lag on the sample shared
    by every candidate, then the regression is refit at that lag on its own
    sample. With autolag=None exactly max_lag lagged differences are used.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if max_lag == "auto":
        max_lag = schwert_max_lag(n)
    elif not isinstance(max_lag, (int, np.integer)) or max_lag < 0:
        raise DiagnosticsError(f"max_lag must be 'auto' or a count, got {max_lag!r}")
    if n < max_lag + MIN_SERIES_LENGTH:
        raise DiagnosticsError(f"ADF needs at least {max_lag + MIN_SERIES_LENGTH} observations, got {n}")
    if not np.all(np.isfinite(x)):
        raise DiagnosticsError("ADF input contains non-finite values")

    lag = int(max_lag)
    if autolag is not None:
        if autolag.lower() != "aic":
            raise DiagnosticsError(f"unknown autolag '{autolag}' (use 'aic' or None)")
        best_aic = np.inf
        for candidate in range(0, int(max_lag) + 1):
            nobs, k, _, _, ssr = _adf_fit(x, candidate, int(max_lag))
            if ssr <= 0:
                aic = -np.inf
            else:
                aic = nobs * np.log(ssr / nobs) + 2.0 * k
            if aic < best_aic:
                best_aic, lag = aic, candidate

    nobs, k, beta, inv_zz, ssr = _adf_fit(x, lag, lag)
    s2 = ssr / (nobs - k)
    se = np.sqrt(s2 * inv_zz[1, 1])
    if se == 0 or not np.isfinite(se):
        raise DiagnosticsError("ADF regression has a degenerate standard error")
    stat = float(beta[1] / se)
    reject = {level_label(level): bool(stat < crit) for level, crit in ADF_CRITICAL_VALUES.items()}
    return AdfResult(stat, lag, nobs, reject)


# --- Summary ---


def summary_stats(panel: ReturnPanel) -> List[SeriesStats]:
    """One SeriesStats per column, in panel order."""
    results = []
    for k, name in enumerate(panel.names):
        x = panel.values[:, k]
        if x.size < MIN_SERIES_LENGTH:
            raise DiagnosticsError(f"series '{name}' too short: {x.size} < {MIN_SERIES_LENGTH}")
        try:
            jb = jarque_bera(x)
            adf = adf_test(x)
        except DiagnosticsError as e:
            raise DiagnosticsError(f"series '{name}': {e}") from e
        std = float(np.std(x, ddof=1))
        results.append(
            SeriesStats(
                name=name,
                mean=float(np.mean(x)),
                std=std,
                min=float(np.min(x)),
                median=float(np.median(x)),
                max=float(np.max(x)),
                jb_stat=jb.stat,
                jb_pvalue=jb.pvalue,
                mean_over_std=float(np.mean(x)) / std,
                adf_stat=adf.stat,
                adf_lag=adf.lag_used,
            )
        )
        logger.debug("%s: JB=%.2f ADF=%.2f (lag %d)", name, jb.stat, adf.stat, adf.lag_used)
    return results


def stats_table(panel: ReturnPanel, decimals: Optional[int] = None) -> pd.DataFrame:
    """Summary table: one row per series."""
    rows = summary_stats(panel)
    frame = pd.DataFrame(
        [s.table_row() for s in rows],
        index=pd.Index([s.name for s in rows], name="Variable"),
        columns=STATS_COLUMNS,
    )
    return frame.round(decimals) if decimals is not None else frame
