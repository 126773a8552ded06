#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Pairwise Granger-noncausality Wald tests on a fitted VAR.

`wald_noncausality` tests A_{ij,l} = 0 for l = 1..p (source j, target i)
with the coefficient covariance stored on the model. `pvalue_matrix`
arranges every off-diagonal test with the source as column, and
`causal_network` keeps the pairs significant at the largest level, banded
by the smallest level each one passes (p-value <= level).
"""

from dataclasses import dataclass
from typing import FrozenSet, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import linalg, special

from config import DEFAULT_LEVELS, PVALUE_CORNER_LABEL, SINGULARITY_TOL
from data_ingest import GroupPartition
from diagnostics import level_label
from errors import GrangerError
from netexport import Edge, NetworkGraph, Node
from utils import logger
from var_core import VarModel


@dataclass(frozen=True)
class WaldResult:
    source: str
    target: str
    stat: float
    df: int
    pvalue: float


@dataclass(frozen=True, eq=False)
class PValueMatrix:
    """Entry (i, j): p-value of "column j Granger-causes row i"; diagonal NaN."""

    names: Tuple[str, ...]
    p: np.ndarray
    failed: FrozenSet[Tuple[str, str]] = frozenset()
    partition: Optional[GroupPartition] = None

    def __post_init__(self):
        values = np.array(self.p, dtype=float)
        K = len(self.names)
        if values.shape != (K, K):
            raise GrangerError(f"p-value matrix must be {K}x{K}")
        np.fill_diagonal(values, np.nan)
        off = values[~np.eye(K, dtype=bool)]
        off = off[np.isfinite(off)]
        if np.any((off < 0) | (off > 1)):
            raise GrangerError("p-values must lie in [0, 1]")
        values.setflags(write=False)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "p", values)
        object.__setattr__(self, "failed", frozenset(self.failed))
        object.__setattr__(self, "partition", (self.partition or GroupPartition.single(self.names)).subset(self.names))

    def pvalue(self, source: str, target: str) -> float:
        return float(self.p[self.names.index(target), self.names.index(source)])


def chi2_sf(stat: float, df: int) -> float:
    """Chi-square upper tail via the regularized upper incomplete gamma function."""
    return float(special.gammaincc(df / 2.0, max(stat, 0.0) / 2.0))


def restriction_indices(model: VarModel, source: int, target: int):
    """Positions of source's lag coefficients in target's equation."""
    m = model.m
    return [target * m + 1 + (lag - 1) * model.K + source for lag in range(1, model.p + 1)]


def wald_noncausality(model: VarModel, source: str, target: str) -> WaldResult:
    if source == target:
        raise GrangerError("source and target must differ")
    if model.coef_cov is None:
        raise GrangerError("model carries no coefficient covariance (population model?)")
    j, i = model.index(source), model.index(target)
    idx = restriction_indices(model, j, i)
    v = model.coef_vector[idx]
    V = model.coef_cov[np.ix_(idx, idx)]

    d = np.sqrt(np.diag(V))
    if np.any(d <= 0) or not np.all(np.isfinite(d)):
        raise GrangerError(f"singular restricted covariance block for {source} -> {target}")
    scaled = V / np.outer(d, d)
    eig = np.linalg.eigvalsh(scaled)
    if eig[0] <= SINGULARITY_TOL * eig[-1]:
        raise GrangerError(f"singular restricted covariance block for {source} -> {target}")
    try:
        factor = linalg.cho_factor(scaled, lower=True)
    except linalg.LinAlgError as e:
        raise GrangerError(f"singular restricted covariance block for {source} -> {target}") from e
    w = v / d
    stat = float(w @ linalg.cho_solve(factor, w))
    stat = max(stat, 0.0)
    return WaldResult(source, target, stat, model.p, chi2_sf(stat, model.p))


def pvalue_matrix(model: VarModel) -> PValueMatrix:
    """Every ordered pair; cells whose test fails are NaN and listed in `failed`."""
    K = model.K
    values = np.full((K, K), np.nan)
    failed = set()
    for i, target in enumerate(model.names):
        for j, source in enumerate(model.names):
            if i == j:
                continue
            try:
                values[i, j] = wald_noncausality(model, source, target).pvalue
            except GrangerError as e:
                logger.warning("Granger test %s -> %s failed: %s", source, target, e)
                failed.add((source, target))
    logger.info("Granger tests: %d pair(s), %d failed", K * (K - 1), len(failed))
    return PValueMatrix(model.names, values, frozenset(failed), model.partition)


def causal_network(pm: PValueMatrix, levels: Sequence[float] = DEFAULT_LEVELS) -> NetworkGraph:
    """Edge source -> target iff p-value <= max(levels); band = smallest level passed."""
    levels = [float(q) for q in levels]
    if not levels or any(not 0.0 < q < 1.0 for q in levels):
        raise GrangerError("significance levels must lie in (0, 1)")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise GrangerError("significance levels must be increasing")

    edges = []
    for i, target in enumerate(pm.names):
        for j, source in enumerate(pm.names):
            value = pm.p[i, j]
            if i == j or not np.isfinite(value):
                continue
            passed = [q for q in levels if value <= q]
            if passed:
                edges.append(Edge(source, target, float(value), level_label(passed[0])))
    nodes = tuple(Node(n, pm.partition.label(n)) for n in pm.names)
    graph = NetworkGraph("granger", nodes, tuple(edges), tuple(level_label(q) for q in levels), tuple(levels))
    logger.info("Granger network: %d edge(s) at levels %s", len(edges), [level_label(q) for q in levels])
    return graph


def pvalue_table(pm: PValueMatrix, decimals: Optional[int] = None) -> pd.DataFrame:
    """Rows = receiving variable, columns = causality source; blank diagonal."""
    frame = pd.DataFrame(pm.p, index=list(pm.names), columns=list(pm.names))
    frame.index.name = PVALUE_CORNER_LABEL
    return frame.round(decimals) if decimals is not None else frame


def edge_table(g: NetworkGraph) -> pd.DataFrame:
    weight = "pvalue" if g.kind == "granger" else "share"
    return pd.DataFrame(
        [(e.source, e.target, e.weight, e.band) for e in g.edges],
        columns=["source", "target", weight, "band"],
    )
