#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
VAR(p) estimation and the moving-average quantities built on it.

Key Responsibilities:
- Least-squares estimation of y_t = c + A_1 y_{t-1} + ... + A_p y_{t-p} + u_t
  with common regressors (intercept, lag-1 block, lag-2 block, ...), the
  degrees-of-freedom adjusted residual covariance and the covariance of the
  stacked coefficients used by the Wald tests.
- Lag-order selection by AIC, BIC or HQ on a common effective sample.
- Moving-average coefficients, h-step forecast-error variances and the
  companion-matrix stability check.
- A plain-text model format so later subcommands can reuse a fitted model.

Coefficient stacking (coef_cov and Wald selection vectors): equation i
occupies the block [i*m, (i+1)*m) with m = K*p + 1; inside a block the
order is intercept, then lag 1 of every variable, then lag 2, and so on.
The coefficient of lag l of variable j in equation i therefore sits at
i*m + 1 + (l-1)*K + j.
"""

from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import linalg

from config import CRITERIA, SINGULARITY_TOL
from data_ingest import GroupPartition, ReturnPanel
from errors import FitError
from utils import format_float, logger, read_file_content, write_text


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


# --- Least squares ---


def solve_least_squares(Z: np.ndarray, Y: np.ndarray, error_cls=FitError) -> Tuple[np.ndarray, np.ndarray]:
    """Solves the normal equations Z'Z B = Z'Y through a Cholesky factorization.

    The moment matrix is first scaled to unit diagonal; it is treated as
    singular when its smallest eigenvalue falls below SINGULARITY_TOL times
    the largest. Returns (B, inverse of Z'Z).
    """
    zz = Z.T @ Z
    d = np.sqrt(np.diag(zz))
    if np.any(d == 0) or not np.all(np.isfinite(d)):
        raise error_cls("singular regressor moment matrix (a regressor is identically zero)")
    scale = np.outer(d, d)
    scaled = zz / scale
    eig = np.linalg.eigvalsh(scaled)
    if eig[0] <= SINGULARITY_TOL * eig[-1]:
        raise error_cls(
            f"singular regressor moment matrix (eigenvalue ratio {eig[0] / eig[-1]:.3g})"
        )
    try:
        factor = linalg.cho_factor(scaled, lower=True, check_finite=False)
    except linalg.LinAlgError as e:
        raise error_cls(f"singular regressor moment matrix ({e})") from e
    rhs = (Z.T @ Y) / d.reshape(-1, *([1] * (np.ndim(Y) - 1)))
    beta = linalg.cho_solve(factor, rhs, check_finite=False)
    beta = beta / d.reshape(-1, *([1] * (np.ndim(Y) - 1)))
    inv_zz = linalg.cho_solve(factor, np.eye(len(d)), check_finite=False) / scale
    return beta, (inv_zz + inv_zz.T) / 2.0


def design_matrix(values: np.ndarray, p: int) -> Tuple[np.ndarray, np.ndarray]:
    """Builds (Z, Y): rows t = p..T-1, Z[t] = (1, y_{t-1}, ..., y_{t-p})."""
    values = np.asarray(values, dtype=float)
    T = values.shape[0]
    blocks = [np.ones((T - p, 1))]
    for lag in range(1, p + 1):
        blocks.append(values[p - lag:T - lag])
    return np.hstack(blocks), values[p:]


# --- Domain types ---


@dataclass(frozen=True, eq=False)
class VarModel:
    """An estimated (or population) VAR(p).

    residuals and coef_cov are None for models built from known coefficients.
    """

    names: Tuple[str, ...]
    p: int
    c: np.ndarray
    A: Tuple[np.ndarray, ...]
    sigma_u: np.ndarray
    residuals: Optional[np.ndarray] = None
    coef_cov: Optional[np.ndarray] = None
    nobs: int = 0
    dof: int = 0
    partition: Optional[GroupPartition] = None
    robust: bool = False

    def __post_init__(self):
        names = tuple(self.names)
        K = len(names)
        object.__setattr__(self, "names", names)
        if self.p < 1:
            raise FitError("lag order must be ≥ 1")
        if len(self.A) != self.p:
            raise FitError(f"expected {self.p} lag matrices, got {len(self.A)}")
        A = tuple(_frozen(a) for a in self.A)
        if any(a.shape != (K, K) for a in A):
            raise FitError(f"lag matrices must be {K}x{K}")
        c = _frozen(self.c).reshape(-1)
        sigma = _frozen(self.sigma_u)
        if c.shape != (K,) or sigma.shape != (K, K):
            raise FitError("intercept or sigma_u has the wrong shape")
        if not np.allclose(sigma, sigma.T, rtol=0.0, atol=1e-10 * max(1.0, np.abs(sigma).max())):
            raise FitError("sigma_u is not symmetric")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "sigma_u", sigma)
        if self.residuals is not None:
            object.__setattr__(self, "residuals", _frozen(self.residuals))
        if self.coef_cov is not None:
            object.__setattr__(self, "coef_cov", _frozen(self.coef_cov))
        partition = self.partition or GroupPartition.single(names)
        partition.check_covers(names)
        object.__setattr__(self, "partition", partition.subset(names))

    @classmethod
    def from_coefficients(
        cls,
        c,
        A: Sequence,
        sigma_u,
        names: Optional[Sequence[str]] = None,
        partition: Optional[GroupPartition] = None,
    ) -> "VarModel":
        """Population-coefficient model (no residuals, no coefficient covariance)."""
        A = [np.atleast_2d(np.asarray(a, dtype=float)) for a in A]
        K = A[0].shape[0] if A else 0
        if names is None:
            names = [f"y{k + 1}" for k in range(K)]
        c = np.zeros(K) if c is None else c
        return cls(tuple(names), len(A), c, tuple(A), np.atleast_2d(np.asarray(sigma_u, dtype=float)),
                   partition=partition)

    @property
    def K(self) -> int:
        return len(self.names)

    @property
    def m(self) -> int:
        """Regressors per equation."""
        return self.K * self.p + 1

    @property
    def beta(self) -> np.ndarray:
        """Coefficients as an m x K matrix, column i = equation i."""
        return np.vstack([self.c[None, :], *(a.T for a in self.A)])

    @property
    def coef_vector(self) -> np.ndarray:
        """Stacked coefficients (per-equation blocks)."""
        return self.beta.T.reshape(-1)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise FitError(f"unknown variable '{name}'") from None


class MaCoefficients(NamedTuple):
    """Theta_0 .. Theta_{h-1}; theta[0] is the identity."""

    theta: Tuple[np.ndarray, ...]


class Stability(NamedTuple):
    stable: bool
    max_modulus: float


# --- Estimation ---


def fit_var(panel: ReturnPanel, p: int, robust: bool = False) -> VarModel:
    """Least-squares VAR(p) on every row of the panel.

    sigma_u = U'U / (T - p - K*p - 1). coef_cov = sigma_u ⊗ (Z'Z)^{-1} in
    the per-equation stacking, or the HC0 sandwich when robust=True.
    """
    if p < 1:
        raise FitError("lag order must be ≥ 1")
    values = panel.values
    T, K = values.shape
    m = K * p + 1
    if T - p <= m:
        raise FitError(f"insufficient observations for VAR({p}): T={T}, K={K} needs T - p > {m}")

    Z, Y = design_matrix(values, p)
    beta, inv_zz = solve_least_squares(Z, Y)
    residuals = Y - Z @ beta
    n = T - p
    dof = n - m
    sigma_u = residuals.T @ residuals / dof
    sigma_u = (sigma_u + sigma_u.T) / 2.0

    if robust:
        scores = (residuals[:, :, None] * Z[:, None, :]).reshape(n, K * m)
        bread = np.kron(np.eye(K), inv_zz)
        coef_cov = bread @ (scores.T @ scores) @ bread
    else:
        coef_cov = np.kron(sigma_u, inv_zz)
    coef_cov = (coef_cov + coef_cov.T) / 2.0

    A = tuple(beta[1 + (lag - 1) * K:1 + lag * K].T for lag in range(1, p + 1))
    model = VarModel(
        names=panel.names,
        p=p,
        c=beta[0],
        A=A,
        sigma_u=sigma_u,
        residuals=residuals,
        coef_cov=coef_cov,
        nobs=n,
        dof=dof,
        partition=panel.partition,
        robust=robust,
    )
    logger.debug("Fitted VAR(%d) on %d observations, K=%d (robust=%s)", p, n, K, robust)
    return model


def fitted_values(model: VarModel, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Returns (fitted, regressand) for the rows the model can predict."""
    Z, Y = design_matrix(values, model.p)
    return Z @ model.beta, Y


def lag_order_table(panel: ReturnPanel, p_max: int) -> pd.DataFrame:
    """AIC / BIC / HQ for p = 1..p_max, all on regressand rows p_max..T-1."""
    if p_max < 1:
        raise FitError("p_max must be ≥ 1")
    values = panel.values
    T, K = values.shape
    n = T - p_max
    if n <= K * p_max + 1:
        raise FitError(f"insufficient observations to compare lags up to {p_max}: T={T}, K={K}")

    rows = []
    for p in range(1, p_max + 1):
        Z, Y = design_matrix(values, p)
        Z, Y = Z[p_max - p:], Y[p_max - p:]
        beta, _ = solve_least_squares(Z, Y)
        U = Y - Z @ beta
        sign, logdet = np.linalg.slogdet(U.T @ U / n)
        if sign <= 0:
            raise FitError(f"singular residual covariance at p={p}")
        m = K * (K * p + 1)
        rows.append(
            {
                "p": p,
                "aic": logdet + 2.0 * m / n,
                "bic": logdet + m * np.log(n) / n,
                "hq": logdet + 2.0 * m * np.log(np.log(n)) / n,
            }
        )
    return pd.DataFrame(rows).set_index("p")


def select_lag(panel: ReturnPanel, p_max: int, criterion: str = "bic") -> int:
    """Lag order minimizing the criterion (smallest p on ties)."""
    criterion = criterion.lower()
    if criterion not in CRITERIA:
        raise FitError(f"unknown criterion '{criterion}' (use one of {', '.join(CRITERIA)})")
    table = lag_order_table(panel, p_max)
    best = int(table[criterion].idxmin())
    logger.info("Selected VAR lag p=%d by %s (p_max=%d)", best, criterion.upper(), p_max)
    return best


# --- Moving-average representation ---


def ma_coefficients(model: VarModel, h: int) -> MaCoefficients:
    """Theta_l = sum_{m=1}^{min(l,p)} Theta_{l-m} A_m for l = 1..h-1."""
    if h < 1:
        raise FitError("horizon must be ≥ 1")
    theta: List[np.ndarray] = [np.eye(model.K)]
    for ell in range(1, h):
        acc = np.zeros((model.K, model.K))
        for lag in range(1, min(ell, model.p) + 1):
            acc += theta[ell - lag] @ model.A[lag - 1]
        theta.append(acc)
    return MaCoefficients(tuple(theta))


def forecast_error_variance(model: VarModel, h: int) -> np.ndarray:
    """Var(h) = sum_{l<h} Theta_l sigma_u Theta_l'."""
    theta = ma_coefficients(model, h).theta
    total = np.zeros((model.K, model.K))
    for th in theta:
        total += th @ model.sigma_u @ th.T
    return (total + total.T) / 2.0


def companion_matrix(model: VarModel) -> np.ndarray:
    K, p = model.K, model.p
    comp = np.zeros((K * p, K * p))
    comp[:K, :] = np.hstack(model.A)
    if p > 1:
        comp[K:, :-K] = np.eye(K * (p - 1))
    return comp


def is_stable(model: VarModel) -> Stability:
    """Stable iff every companion eigenvalue has modulus < 1."""
    moduli = np.abs(np.linalg.eigvals(companion_matrix(model)))
    max_modulus = float(moduli.max()) if moduli.size else 0.0
    return Stability(bool(max_modulus < 1.0), max_modulus)


# --- Tabular views ---


def regressor_labels(model: VarModel) -> List[str]:
    labels = ["const"]
    for lag in range(1, model.p + 1):
        labels.extend(f"L{lag}.{name}" for name in model.names)
    return labels


def coefficient_frame(model: VarModel) -> pd.DataFrame:
    """One row per equation, one column per regressor."""
    return pd.DataFrame(model.beta.T, index=pd.Index(model.names, name="equation"), columns=regressor_labels(model))


def sigma_frame(model: VarModel) -> pd.DataFrame:
    return pd.DataFrame(model.sigma_u, index=pd.Index(model.names, name="sigma_u"), columns=list(model.names))


# --- Model text format ---

MODEL_HEADER = "# spillnet VAR model"


def _matrix_lines(matrix) -> List[str]:
    return ["\t".join(format_float(v) for v in row) for row in np.atleast_2d(matrix)]


def format_model(model: VarModel) -> str:
    lines = [
        MODEL_HEADER,
        "\t".join(["names", *model.names]),
        "\t".join(["groups", *(model.partition.label(n) for n in model.names)]),
        f"p\t{model.p}",
        f"nobs\t{model.nobs}",
        f"dof\t{model.dof}",
        f"robust\t{'true' if model.robust else 'false'}",
        "[c]",
        "\t".join(format_float(v) for v in model.c),
    ]
    for lag, a in enumerate(model.A, start=1):
        lines.append(f"[A{lag}]")
        lines.extend(_matrix_lines(a))
    lines.append("[sigma_u]")
    lines.extend(_matrix_lines(model.sigma_u))
    if model.coef_cov is not None:
        lines.append("[coef_cov]")
        lines.extend(_matrix_lines(model.coef_cov))
    if model.residuals is not None:
        lines.append("[residuals]")
        lines.extend(_matrix_lines(model.residuals))
    return "\n".join(lines) + "\n"


def parse_model(text: str) -> VarModel:
    header = {}
    blocks = {}
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        if line.startswith("[") and line.rstrip().endswith("]"):
            current = line.strip()[1:-1]
            blocks[current] = []
            continue
        fields = line.split("\t")
        if current is None:
            header[fields[0]] = fields[1:]
            continue
        try:
            blocks[current].append([float(v) for v in fields])
        except ValueError:
            raise FitError(f"model file line {lineno}: non-numeric entry in [{current}]") from None

    try:
        names = tuple(header["names"])
        groups = header.get("groups", ["all"] * len(names))
        p = int(header["p"][0])
        nobs = int(header.get("nobs", ["0"])[0])
        dof = int(header.get("dof", ["0"])[0])
        robust = header.get("robust", ["false"])[0] == "true"
        c = np.array(blocks["c"][0])
        A = tuple(np.array(blocks[f"A{lag}"]) for lag in range(1, p + 1))
        sigma = np.array(blocks["sigma_u"])
    except (KeyError, IndexError, ValueError) as e:
        raise FitError(f"model file is incomplete or malformed ({e})") from None
    if len(groups) != len(names):
        raise FitError("model file: groups and names differ in length")

    coef_cov = np.array(blocks["coef_cov"]) if blocks.get("coef_cov") else None
    residuals = np.array(blocks["residuals"]) if blocks.get("residuals") else None
    return VarModel(
        names=names,
        p=p,
        c=c,
        A=A,
        sigma_u=sigma,
        residuals=residuals,
        coef_cov=coef_cov,
        nobs=nobs,
        dof=dof,
        partition=GroupPartition(dict(zip(names, groups))),
        robust=robust,
    )


def save_model(model: VarModel, path: str):
    write_text(path, format_model(model))


def load_model(path: str) -> VarModel:
    try:
        text = read_file_content(path)
    except (OSError, UnicodeDecodeError) as e:
        raise FitError(f"{path}: cannot read model file ({e})") from e
    return parse_model(text)
