#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Generalized forecast-error variance decompositions and connectedness tables.

Key Responsibilities:
- `gvd`: the order-invariant generalized decomposition
    GVD(i, j) = sigma_jj^-1 * sum_{l<h} (e_i' Theta_l Sigma_u e_j)^2 / Var_i(h)
  (sum of squares over horizons).
- `sgvd`: rows rescaled to sum to 100.
- `ConnectednessTable`: the percent matrix with From/To margins per group
  label, from-all/to-all/net spillovers and the total connectedness index.
- `connectedness_frame`: the tabular layout with "From <group>" columns and
  "To <group>" rows.
- `empirical_fev_oracle`: Monte Carlo h-step forecast-error variances used
  to cross-check Var(h).
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from config import MIN_ORACLE_SIMS, ORACLE_BLOCK_SIZE
from data_ingest import GroupPartition
from errors import FevdError
from utils import logger
from var_core import VarModel, forecast_error_variance, is_stable, ma_coefficients


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GvdMatrix:
    """Row i = receiving variable, column j = shock source."""

    names: Tuple[str, ...]
    h: int
    values: np.ndarray
    percent: bool = False

    def __post_init__(self):
        values = _frozen(self.values)
        K = len(self.names)
        if values.shape != (K, K):
            raise FevdError(f"decomposition matrix must be {K}x{K}, got {values.shape}")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise FevdError("decomposition entries must be finite and nonnegative")
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "values", values)


def gvd(model: VarModel, h: int) -> GvdMatrix:
    if h < 1:
        raise FevdError("horizon must be ≥ 1")
    sigma = model.sigma_u
    diag = np.diag(sigma)
    if np.any(diag <= 0):
        bad = [n for n, d in zip(model.names, diag) if d <= 0]
        raise FevdError(f"zero diagonal in sigma_u for {', '.join(bad)}")

    numerator = np.zeros((model.K, model.K))
    for theta in ma_coefficients(model, h).theta:
        numerator += (theta @ sigma) ** 2
    var_h = np.diag(forecast_error_variance(model, h))
    values = numerator / diag[None, :] / var_h[:, None]
    return GvdMatrix(model.names, h, values)


def sgvd(g: GvdMatrix) -> GvdMatrix:
    """100 * g(i, j) / sum_k g(i, k)."""
    totals = g.values.sum(axis=1)
    if np.any(totals <= 0):
        raise FevdError("decomposition row with zero sum")
    return GvdMatrix(g.names, g.h, 100.0 * g.values / totals[:, None], percent=True)


# --- Connectedness ---


@dataclass(frozen=True, eq=False)
class ConnectednessTable:
    """Percent decomposition plus group margins.

    from_group[i, g]: row i summed over columns j != i with group(j) = g.
    to_group[g, j]: column j summed over rows i != j with group(i) = g.
    """

    names: Tuple[str, ...]
    h: int
    sgvd: np.ndarray
    partition: GroupPartition
    groups: Tuple[str, ...]
    from_group: np.ndarray
    to_group: np.ndarray

    @property
    def K(self) -> int:
        return len(self.names)

    def _own_mask(self) -> np.ndarray:
        labels = [self.partition.label(n) for n in self.names]
        return np.array([[self.groups.index(lab) for lab in labels]]).T == np.arange(len(self.groups))

    @property
    def from_own_group(self) -> np.ndarray:
        return (self.from_group * self._own_mask()).sum(axis=1)

    @property
    def from_other_group(self) -> np.ndarray:
        return (self.from_group * ~self._own_mask()).sum(axis=1)

    @property
    def to_own_group(self) -> np.ndarray:
        return (self.to_group * self._own_mask().T).sum(axis=0)

    @property
    def to_other_group(self) -> np.ndarray:
        return (self.to_group * ~self._own_mask().T).sum(axis=0)

    @property
    def own(self) -> np.ndarray:
        return np.diag(self.sgvd).copy()

    @property
    def from_all(self) -> np.ndarray:
        return self.sgvd.sum(axis=1) - self.own

    @property
    def to_all(self) -> np.ndarray:
        return self.sgvd.sum(axis=0) - self.own

    @property
    def net(self) -> np.ndarray:
        return self.to_all - self.from_all

    @property
    def total(self) -> float:
        """Mean off-diagonal share per row (percent)."""
        return float(self.from_all.sum() / self.K)


def connectedness_table(s: GvdMatrix, partition: Optional[GroupPartition] = None) -> ConnectednessTable:
    if not s.percent:
        raise FevdError("connectedness table needs a percent-scaled decomposition")
    partition = partition or GroupPartition.single(s.names)
    partition.check_covers(s.names)
    groups = tuple(partition.labels(s.names))
    values = np.array(s.values)
    off = values.copy()
    np.fill_diagonal(off, 0.0)

    member = np.array([[partition.label(n) == g for g in groups] for n in s.names], dtype=float)
    from_group = off @ member
    to_group = member.T @ off
    return ConnectednessTable(
        names=s.names,
        h=s.h,
        sgvd=_frozen(values),
        partition=partition.subset(s.names),
        groups=groups,
        from_group=_frozen(from_group),
        to_group=_frozen(to_group),
    )


def connectedness_frame(table: ConnectednessTable, decimals: Optional[int] = None) -> pd.DataFrame:
    """K x K block, "From <group>" columns, "To <group>" rows."""
    names = list(table.names)
    from_cols = [f"From {g}" for g in table.groups]
    body = pd.DataFrame(np.array(table.sgvd), index=names, columns=names)
    for k, col in enumerate(from_cols):
        body[col] = table.from_group[:, k]
    to_rows = pd.DataFrame(table.to_group, index=[f"To {g}" for g in table.groups], columns=names)
    frame = pd.concat([body, to_rows], axis=0)
    frame = frame[names + from_cols]
    frame.index.name = f"h={table.h}"
    return frame.round(decimals) if decimals is not None else frame


def spillover_frame(table: ConnectednessTable) -> pd.DataFrame:
    """Directional summary: own share, from-all, to-all and net per variable."""
    return pd.DataFrame(
        {
            "own": table.own,
            "from_all": table.from_all,
            "to_all": table.to_all,
            "net": table.net,
        },
        index=pd.Index(table.names, name="variable"),
    )


# --- Simulation oracle ---


def _oracle_block(model: VarModel, h: int, size: int, seed: int, block: int, chol: np.ndarray) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([seed, block]))
    K, p = model.K, model.p
    history: List[np.ndarray] = [np.zeros((size, K)) for _ in range(p)]
    current = np.zeros((size, K))
    for _ in range(h):
        shocks = rng.standard_normal((size, K)) @ chol.T
        current = shocks.copy()
        for lag in range(1, p + 1):
            current += history[-lag] @ model.A[lag - 1].T
        history.append(current)
        history.pop(0)
    return (current ** 2).sum(axis=0)


def empirical_fev_oracle(model: VarModel, h: int, nsims: int, seed: int, workers: int = 1) -> np.ndarray:
    """Per-variable variance of the h-step-ahead error over nsims simulated paths.

    Paths are generated in fixed blocks of ORACLE_BLOCK_SIZE, block b seeded
    from (seed, b), so the result does not depend on `workers`.
    """
    if nsims < MIN_ORACLE_SIMS:
        raise FevdError(f"oracle needs at least {MIN_ORACLE_SIMS} simulations, got {nsims}")
    if h < 1:
        raise FevdError("horizon must be ≥ 1")
    stability = is_stable(model)
    if not stability.stable:
        raise FevdError(f"unstable model rejected (max modulus {stability.max_modulus:.4f})")
    try:
        chol = np.linalg.cholesky(model.sigma_u)
    except np.linalg.LinAlgError as e:
        raise FevdError(f"sigma_u is not positive definite ({e})") from e

    sizes = [ORACLE_BLOCK_SIZE] * (nsims // ORACLE_BLOCK_SIZE)
    if nsims % ORACLE_BLOCK_SIZE:
        sizes.append(nsims % ORACLE_BLOCK_SIZE)
    jobs = [(model, h, size, seed, block, chol) for block, size in enumerate(sizes)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sums = list(pool.map(lambda args: _oracle_block(*args), jobs))
    else:
        sums = [_oracle_block(*args) for args in jobs]

    total = np.zeros(model.K)
    for s in sums:
        total += s
    logger.debug("FEV oracle: %d paths in %d block(s), h=%d", nsims, len(sizes), h)
    return total / nsims


def fev_check_frame(model: VarModel, h: int, nsims: int, seed: int, workers: int = 1) -> pd.DataFrame:
    """Analytic Var(h) diagonal next to the simulation oracle."""
    analytic = np.diag(forecast_error_variance(model, h))
    empirical = empirical_fev_oracle(model, h, nsims, seed, workers)
    return pd.DataFrame(
        {
            "analytic": analytic,
            "empirical": empirical,
            "relative_error": np.abs(empirical - analytic) / analytic,
        },
        index=pd.Index(model.names, name="variable"),
    )
