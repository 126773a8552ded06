#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Synthetic panels from fully specified VAR processes and Monte Carlo studies.

Key Responsibilities:
- `DgpSpec`: intercept, lag matrices, shock covariance and distribution
  (gaussian, or Student-t scaled to unit variance), sample length, burn-in
  and seed. Specs can be read from JSON (`load_dgp_spec`).
- `simulate_var`: draws the process forward from a zero state with numpy's
  PCG64 generator and drops the burn-in.
- `mc_rejection_rate`: repeats simulate -> test, with replication r seeded
  from SeedSequence([seed, r]) so serial and parallel runs agree. Outcomes
  can be cached on disk with diskcache.
"""

import dataclasses
import hashlib
import sqlite3
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from diskcache import Cache
from tqdm import tqdm

from config import ADF_CRITICAL_VALUES, DEFAULT_BURN_IN, DEFAULT_SEED, MIN_MC_REPS
from data_ingest import GroupPartition, ReturnPanel
from diagnostics import adf_test, jarque_bera, level_label
from errors import SimulationError, SpillnetError
from granger import wald_noncausality
from utils import dump_json, logger, parse_json_content, read_file_content
from var_core import VarModel, fit_var, is_stable

SHOCKS = ("gaussian", "t")

SQLITE_ERRORS = (sqlite3.OperationalError, sqlite3.DatabaseError, OSError)


@dataclass(frozen=True, eq=False)
class DgpSpec:
    """A stable VAR(p) with positive-definite shock covariance."""

    A: Tuple[np.ndarray, ...]
    sigma_u: np.ndarray
    n: int
    c: Optional[np.ndarray] = None
    names: Optional[Tuple[str, ...]] = None
    shock: str = "gaussian"
    nu: float = 5.0
    burn_in: int = DEFAULT_BURN_IN
    seed: int = DEFAULT_SEED
    partition: Optional[GroupPartition] = None

    def __post_init__(self):
        A = tuple(np.atleast_2d(np.asarray(a, dtype=float)) for a in self.A)
        if not A:
            raise SimulationError("a VAR process needs at least one lag matrix")
        K = A[0].shape[0]
        sigma = np.atleast_2d(np.asarray(self.sigma_u, dtype=float))
        c = np.zeros(K) if self.c is None else np.asarray(self.c, dtype=float).reshape(-1)
        names = tuple(self.names) if self.names is not None else tuple(f"y{k + 1}" for k in range(K))
        if any(a.shape != (K, K) for a in A) or sigma.shape != (K, K) or c.shape != (K,) or len(names) != K:
            raise SimulationError(f"inconsistent dimensions for a K={K} process")
        if not np.allclose(sigma, sigma.T, rtol=0.0, atol=1e-12):
            raise SimulationError("sigma_u is not symmetric")
        try:
            np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError:
            raise SimulationError("sigma_u is not positive definite") from None
        if self.shock not in SHOCKS:
            raise SimulationError(f"unknown shock distribution '{self.shock}' (use gaussian or t)")
        if self.shock == "t" and not self.nu > 2:
            raise SimulationError("Student-t shocks need nu > 2")
        if self.n < 1 or self.burn_in < 0:
            raise SimulationError("n must be positive and burn_in nonnegative")
        if self.seed < 0:
            raise SimulationError("seed must be nonnegative")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "sigma_u", sigma)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "names", names)
        stability = is_stable(self.model)
        if not stability.stable:
            raise SimulationError(f"unstable process (max companion modulus {stability.max_modulus:.4f})")

    @property
    def K(self) -> int:
        return len(self.names)

    @property
    def p(self) -> int:
        return len(self.A)

    @property
    def model(self) -> VarModel:
        return VarModel.from_coefficients(self.c, self.A, self.sigma_u, self.names, self.partition)

    def to_dict(self) -> dict:
        data = {
            "names": list(self.names),
            "c": self.c.tolist(),
            "A": [a.tolist() for a in self.A],
            "sigma_u": self.sigma_u.tolist(),
            "shock": self.shock,
            "nu": self.nu,
            "n": self.n,
            "burn_in": self.burn_in,
            "seed": self.seed,
        }
        if self.partition is not None:
            data["groups"] = {n: self.partition.label(n) for n in self.names}
        return data

    def digest(self) -> str:
        return hashlib.sha256(dump_json(self.to_dict()).encode("utf-8")).hexdigest()


def load_dgp_spec(path: str) -> DgpSpec:
    """Reads a JSON spec: A (list of K x K matrices, or one matrix), sigma_u, n, optional rest."""
    try:
        data = parse_json_content(read_file_content(path))
    except (OSError, UnicodeDecodeError, ValueError) as e:
        raise SimulationError(f"{path}: cannot read spec ({e})") from e
    if not isinstance(data, dict):
        raise SimulationError(f"{path}: spec must be a JSON object")
    unknown = set(data) - {"names", "c", "A", "sigma_u", "shock", "nu", "n", "burn_in", "seed", "groups"}
    if unknown:
        raise SimulationError(f"{path}: unknown spec keys {sorted(unknown)}")
    try:
        A = np.asarray(data["A"], dtype=float)
        if A.ndim == 2:
            A = A[None, :, :]
        if A.ndim != 3:
            raise SimulationError(f"{path}: A must be a matrix or a list of matrices")
        groups = data.get("groups")
        return DgpSpec(
            A=tuple(A),
            sigma_u=np.asarray(data["sigma_u"], dtype=float),
            n=int(data["n"]),
            c=data.get("c"),
            names=data.get("names"),
            shock=data.get("shock", "gaussian"),
            nu=float(data.get("nu", 5.0)),
            burn_in=int(data.get("burn_in", DEFAULT_BURN_IN)),
            seed=int(data.get("seed", DEFAULT_SEED)),
            partition=GroupPartition(groups) if groups else None,
        )
    except KeyError as e:
        raise SimulationError(f"{path}: missing spec key {e}") from None
    except (TypeError, ValueError) as e:
        raise SimulationError(f"{path}: malformed spec ({e})") from e


def draw_shocks(spec: DgpSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    """size x K shocks with covariance sigma_u."""
    chol = np.linalg.cholesky(spec.sigma_u)
    z = rng.standard_normal((size, spec.K))
    if spec.shock == "t":
        chi = rng.chisquare(spec.nu, size=(size, 1))
        z = z / np.sqrt(chi / spec.nu) * np.sqrt((spec.nu - 2.0) / spec.nu)
    return z @ chol.T


def simulate_var(spec: DgpSpec) -> ReturnPanel:
    rng = np.random.default_rng(spec.seed)
    K, p = spec.K, spec.p
    total = spec.burn_in + spec.n
    shocks = draw_shocks(spec, rng, total)
    stacked = np.hstack(spec.A)
    y = np.zeros((total + p, K))
    for t in range(p, total + p):
        lagged = y[t - p:t][::-1].reshape(-1)
        y[t] = spec.c + stacked @ lagged + shocks[t - p]
    return ReturnPanel.from_array(y[p + spec.burn_in:], spec.names, spec.partition)


# --- Test descriptors ---


@dataclass(frozen=True)
class GrangerTest:
    source: str
    target: str
    p: int = 1
    robust: bool = False

    @property
    def key(self) -> str:
        return f"granger:{self.source}->{self.target}:p={self.p}:robust={self.robust}"

    def rejects(self, panel: ReturnPanel, level: float) -> bool:
        model = fit_var(panel, self.p, robust=self.robust)
        return wald_noncausality(model, self.source, self.target).pvalue <= level


@dataclass(frozen=True)
class JbTest:
    variable: str

    @property
    def key(self) -> str:
        return f"jb:{self.variable}"

    def rejects(self, panel: ReturnPanel, level: float) -> bool:
        return jarque_bera(panel.column(self.variable)).pvalue <= level


@dataclass(frozen=True)
class AdfTest:
    variable: str
    max_lag: Union[int, str] = "auto"
    autolag: Optional[str] = "aic"

    @property
    def key(self) -> str:
        return f"adf:{self.variable}:{self.max_lag}:{self.autolag}"

    def rejects(self, panel: ReturnPanel, level: float) -> bool:
        if level not in ADF_CRITICAL_VALUES:
            raise SimulationError(f"ADF decisions exist only at {sorted(ADF_CRITICAL_VALUES)}")
        result = adf_test(panel.column(self.variable), self.max_lag, self.autolag)
        return result.reject_at[level_label(level)]


TestDescriptor = Union[GrangerTest, JbTest, AdfTest]


def parse_test_descriptor(text: str, p: int = 1) -> TestDescriptor:
    """granger:SRC->DST, jb:NAME or adf:NAME[:max_lag]."""
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    rest = rest.strip()
    if kind == "granger" and "->" in rest:
        source, _, target = rest.partition("->")
        return GrangerTest(source.strip(), target.strip(), p)
    if kind == "jb" and rest:
        return JbTest(rest)
    if kind == "adf" and rest:
        name, _, max_lag = rest.partition(":")
        if not max_lag:
            return AdfTest(name.strip())
        try:
            return AdfTest(name.strip(), int(max_lag), None)
        except ValueError:
            raise SimulationError(f"bad ADF lag in '{text}'") from None
    raise SimulationError(f"cannot parse test descriptor '{text}'")


# --- Monte Carlo ---


@dataclass(frozen=True)
class McResult:
    test: str
    level: float
    reps: int
    completed: int
    excluded: int
    rejections: int
    rate: float

    def as_row(self) -> Dict[str, object]:
        return dataclasses.asdict(self)


def replication_seed(seed: int, rep: int) -> int:
    return int(np.random.SeedSequence([seed, rep]).generate_state(1)[0])


def _replication_outcome(spec: DgpSpec, test: TestDescriptor, level: float, rep: int) -> Optional[bool]:
    """True/False for reject/accept; None when the replication fails."""
    try:
        panel = simulate_var(dataclasses.replace(spec, seed=replication_seed(spec.seed, rep)))
        return bool(test.rejects(panel, level))
    except SpillnetError as e:
        logger.debug("Replication %d excluded: %s", rep, e)
        return None


class _OutcomeCache:
    """diskcache-backed store of replication outcomes; falls back to a dict on SQLite errors."""

    def __init__(self, cache_dir: Optional[str]):
        self.cache = {}
        if cache_dir:
            try:
                self.cache = Cache(cache_dir)
            except SQLITE_ERRORS as e:
                logger.warning("Monte Carlo cache unavailable at %s (%s); using memory", cache_dir, e)

    def get(self, key):
        try:
            return self.cache.get(key)
        except SQLITE_ERRORS as e:
            self._fallback(e)
            return None

    def set(self, key, value):
        try:
            self.cache[key] = value
        except SQLITE_ERRORS as e:
            self._fallback(e)
            self.cache[key] = value

    def _fallback(self, error):
        if not isinstance(self.cache, dict):
            logger.warning("Monte Carlo cache error (%s); continuing in memory", error)
            self.cache = {}

    def close(self):
        if not isinstance(self.cache, dict):
            self.cache.close()


def mc_rejection_rate(
    spec: DgpSpec,
    test: TestDescriptor,
    level: float,
    reps: int,
    workers: int = 1,
    progress: bool = False,
    cache_dir: Optional[str] = None,
) -> McResult:
    """Fraction of completed replications in which `test` rejects at `level`."""
    if reps < MIN_MC_REPS:
        raise SimulationError(f"at least {MIN_MC_REPS} replications required, got {reps}")
    if not 0.0 < level < 1.0:
        raise SimulationError("level must lie in (0, 1)")

    cache = _OutcomeCache(cache_dir)
    prefix = f"{spec.digest()}|{test.key}|{level!r}"
    outcomes: List[Optional[bool]] = [None] * reps
    pending: List[int] = []
    for rep in range(reps):
        cached = cache.get(f"{prefix}|{rep}")
        if cached is None:
            pending.append(rep)
        else:
            outcomes[rep] = None if cached == "excluded" else cached == "reject"

    with tqdm(total=reps, initial=reps - len(pending), disable=not progress, desc=test.key) as bar:
        if workers > 1 and pending:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                n = len(pending)
                results = pool.map(
                    _replication_outcome, [spec] * n, [test] * n, [level] * n, pending,
                    chunksize=max(1, n // (workers * 4)),
                )
                for rep, outcome in zip(pending, results):
                    outcomes[rep] = outcome
                    bar.update(1)
        else:
            for rep in pending:
                outcomes[rep] = _replication_outcome(spec, test, level, rep)
                bar.update(1)

    for rep in pending:
        outcome = outcomes[rep]
        cache.set(f"{prefix}|{rep}", "excluded" if outcome is None else ("reject" if outcome else "accept"))
    cache.close()

    completed = [o for o in outcomes if o is not None]
    if not completed:
        raise SimulationError(f"every replication of {test.key} failed")
    rejections = sum(completed)
    result = McResult(
        test=test.key,
        level=level,
        reps=reps,
        completed=len(completed),
        excluded=reps - len(completed),
        rejections=rejections,
        rate=rejections / len(completed),
    )
    logger.info(
        "%s at %s: rejection rate %.4f (%d/%d, %d excluded)",
        test.key, level_label(level), result.rate, rejections, len(completed), result.excluded,
    )
    return result
