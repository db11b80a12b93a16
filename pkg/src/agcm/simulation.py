"""Seeded data generation and Monte Carlo experiments.

Every replication draws from its own Philox stream derived from
``(seed, key..., replication index)``, so results do not depend on the order
(or the thread) in which replications run, and a run split into chunks
pools back to the full-run aggregates.
"""

from __future__ import annotations

import math
import os
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Any

import numpy as np
from numpy.typing import ArrayLike
from scipy import stats

from . import linalg as la
from .errors import ExperimentUnstable, InvalidCorrelation, NumericError, ShapeMismatch
from .estimation import fit
from .inference import (
    AsymptoticReport,
    Hypothesis,
    coeff_asymptotic_covariance,
    fourth_moment_covariance,
    gaussian_fourth_moment_covariance,
    standardized_statistic,
)
from .linalg import Matrix
from .model import (
    DesignBlock,
    ModelSpec,
    build_group_indicator,
    build_polynomial_profile,
    validate,
)

__all__ = [
    "ConsistencyRow",
    "McReport",
    "SerialCorrelation",
    "SimulationScenario",
    "aic_candidates",
    "consistency_sweep",
    "generate",
    "mc_aic",
    "normality_check",
    "null_hypothesis",
    "pool_reports",
    "replication_rng",
    "run_replications",
    "serial_sigma",
]

DEFAULT_TIMEPOINTS = (-1.0, -0.5, 0.5, 1.0)
LINEAR_MEAN = (4.0, 2.0)
CUBIC_MEAN = (3.0, 2.0, -3.0, 2.0)
CUBIC_ALT = (3.0, 2.0, 1.0, -1.0)
FAILURE_LIMIT = 0.01


def serial_sigma(rho: float, p: int) -> Matrix:
    """``p x p`` matrix with entries ``rho**|i-j|``."""
    if not (0.0 <= rho < 1.0):
        raise InvalidCorrelation(rho)
    idx = np.arange(p)
    return np.power(float(rho), np.abs(idx[:, None] - idx[None, :])).astype(np.float64)


@dataclass(frozen=True)
class SerialCorrelation:
    rho: float
    p: int

    def matrix(self) -> Matrix:
        return serial_sigma(self.rho, self.p)


@dataclass(frozen=True, eq=False)
class SimulationScenario:
    """Groups of i.i.d. rows, each group with its own polynomial mean.

    ``coefficients[g]`` holds the monomial coefficients of group ``g``'s
    mean curve, so its length fixes that group's degree. The defaults give
    the two-group linear/cubic design with means ``4 + 2t`` and
    ``3 + 2t - 3t^2 + 2t^3``; ``CUBIC_ALT`` is the milder cubic
    ``3 + 2t + t^2 - t^3``.
    """

    group_sizes: tuple[int, ...] = (20, 20)
    coefficients: tuple[tuple[float, ...], ...] = (LINEAR_MEAN, CUBIC_MEAN)
    timepoints: tuple[float, ...] = DEFAULT_TIMEPOINTS
    rho: float = 0.5
    sigma: Matrix | None = None
    errors: str = "gaussian"
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.group_sizes) != len(self.coefficients):
            raise ShapeMismatch("one coefficient vector per group is required")
        if self.errors not in ("gaussian", "uniform"):
            raise ValueError(f"unknown error law {self.errors!r}")

    @property
    def n(self) -> int:
        return sum(self.group_sizes)

    @property
    def p(self) -> int:
        return len(self.timepoints)

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(len(c) - 1 for c in self.coefficients)

    def covariance(self) -> Matrix:
        if self.sigma is not None:
            return la.as_matrix(self.sigma, "sigma")
        return serial_sigma(self.rho, self.p)

    def with_n(self, n: int) -> SimulationScenario:
        """Same scenario with ``n`` rows split equally among the groups."""
        k = len(self.group_sizes)
        if n % k:
            raise ShapeMismatch(f"n = {n} is not divisible by {k} groups")
        return replace(self, group_sizes=(n // k,) * k)

    def true_coefficients(self) -> list[Matrix]:
        return [np.asarray(c, dtype=np.float64)[None, :] for c in self.coefficients]

    def spec(self) -> ModelSpec:
        """The true additive model: one indicator block per group."""
        xs = build_group_indicator(self.group_sizes)
        return validate(
            [
                DesignBlock(x, build_polynomial_profile(self.timepoints, d), f"group{g + 1}")
                for g, (x, d) in enumerate(zip(xs, self.degrees))
            ]
        )

    def true_mean(self) -> Matrix:
        return self.spec().mean(self.true_coefficients())


def replication_rng(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for one replication, addressed by ``key``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=tuple(key))))


def _standard_errors(rng: np.random.Generator, shape: tuple[int, int], law: str) -> Matrix:
    if law == "gaussian":
        return rng.standard_normal(shape)
    # unit-variance uniform, symmetrized by an independent random sign
    magnitude = rng.uniform(0.0, math.sqrt(3.0), size=shape)
    sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    return sign * magnitude


def generate(
    scenario: SimulationScenario,
    rng: np.random.Generator | None = None,
    *,
    mean: Matrix | None = None,
    lower: Matrix | None = None,
) -> Matrix:
    """Draw one ``n x p`` observation matrix: ``mean + z @ L'`` with ``L L' = Sigma``.

    ``mean`` and ``lower`` can be passed to skip recomputing them in loops.
    """
    if rng is None:
        rng = replication_rng(scenario.seed)
    if mean is None:
        mean = scenario.true_mean()
    if lower is None:
        lower = la.spd_factor(scenario.covariance()).lower
    z = _standard_errors(rng, (scenario.n, scenario.p), scenario.errors)
    return mean + z @ lower.T


def _thread_count(threads: int | None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("AGCM_THREADS")
    return max(1, int(env)) if env else 1


def run_replications(
    task: Callable[[np.random.Generator, int], Any],
    seed: int,
    key: Sequence[int],
    count: int,
    *,
    start: int = 0,
    threads: int | None = None,
) -> tuple[list[Any], int]:
    """Run ``task(rng, index)`` for ``index in [start, start + count)``.

    Returns the successful results in index order and the number of
    replications that raised a numerical error (those are dropped).
    """

    def one(index: int):
        try:
            return task(replication_rng(seed, *key, index), index)
        except NumericError:
            return None

    indices = range(start, start + count)
    workers = _thread_count(threads)
    if workers == 1:
        results = [one(i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, indices))
    kept = [r for r in results if r is not None]
    return kept, count - len(kept)


def _check_failures(failures: int, total: int) -> None:
    if total and failures > FAILURE_LIMIT * total:
        raise ExperimentUnstable(failures, total)


def _fsum_mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values) if len(values) else float("nan")


# -- AIC comparison -----------------------------------------------------------


def aic_candidates(group_sizes: Sequence[int], timepoints: ArrayLike, degrees: Sequence[int]) -> dict[str, ModelSpec]:
    """Underfitted, overfitted and additive candidates for a grouped design.

    ``u``: every group gets the lowest degree; ``o``: every group gets the
    highest degree (both as one block with an ``n x k`` indicator design);
    ``a``: each group gets its own degree.
    """
    xs = build_group_indicator(group_sizes)
    x_all = np.hstack(xs)
    low = build_polynomial_profile(timepoints, min(degrees))
    high = build_polynomial_profile(timepoints, max(degrees))
    return {
        "u": validate([DesignBlock(x_all, low, "under")]),
        "o": validate([DesignBlock(x_all, high, "over")]),
        "a": validate(
            [
                DesignBlock(x, build_polynomial_profile(timepoints, d), f"group{g + 1}")
                for g, (x, d) in enumerate(zip(xs, degrees))
            ]
        ),
    }


@dataclass(eq=False)
class McReport:
    """Averaged AIC of each candidate model at one sample size."""

    n: int
    replications: int
    failures: int
    seed: int
    rho: float | None
    aic: dict[str, float]
    aic_sd: dict[str, float]
    n_params: dict[str, int]
    values: dict[str, np.ndarray] | None = None
    runtime_s: float = 0.0
    start: int = 0

    def gap(self, model: str, reference: str = "a") -> float:
        return self.aic[model] - self.aic[reference]


def mc_aic(
    scenario: SimulationScenario,
    n_grid: Sequence[int],
    N: int,
    *,
    seed: int | None = None,
    start: int = 0,
    retain: bool = False,
    threads: int | None = None,
) -> list[McReport]:
    """Average AIC of the ``u``/``o``/``a`` candidates over ``N`` replications per ``n``."""
    seed = scenario.seed if seed is None else seed
    reports = []
    for n in n_grid:
        sc = scenario.with_n(int(n))
        models = aic_candidates(sc.group_sizes, sc.timepoints, sc.degrees)
        mean = sc.true_mean()
        lower = la.spd_factor(sc.covariance()).lower

        def task(rng: np.random.Generator, _index: int, sc=sc, models=models, mean=mean, lower=lower):
            y = generate(sc, rng, mean=mean, lower=lower)
            return tuple(fit(y, models[name]).aic for name in ("u", "o", "a"))

        t0 = time.perf_counter()
        kept, failures = run_replications(task, seed, (int(n),), N, start=start, threads=threads)
        _check_failures(failures, N)
        arr = np.asarray(kept, dtype=np.float64).reshape(-1, 3)
        names = ("u", "o", "a")
        reports.append(
            McReport(
                n=int(n),
                replications=len(kept),
                failures=failures,
                seed=seed,
                rho=None if sc.sigma is not None else sc.rho,
                aic={m: _fsum_mean(arr[:, j]) for j, m in enumerate(names)},
                aic_sd={m: float(np.std(arr[:, j], ddof=1)) if len(arr) > 1 else 0.0 for j, m in enumerate(names)},
                n_params={m: models[m].n_params for m in names},
                values={m: arr[:, j].copy() for j, m in enumerate(names)} if retain else None,
                runtime_s=time.perf_counter() - t0,
                start=start,
            )
        )
    return reports


def pool_reports(parts: Sequence[McReport]) -> McReport:
    """Combine reports for the same ``n`` computed over disjoint replication ranges."""
    if not parts:
        raise ValueError("nothing to pool")
    total = sum(p.replications for p in parts)
    names = tuple(parts[0].aic)
    return McReport(
        n=parts[0].n,
        replications=total,
        failures=sum(p.failures for p in parts),
        seed=parts[0].seed,
        rho=parts[0].rho,
        aic={m: math.fsum(p.aic[m] * p.replications for p in parts) / total for m in names},
        aic_sd={m: float("nan") for m in names},
        n_params=dict(parts[0].n_params),
        runtime_s=sum(p.runtime_s for p in parts),
        start=min(p.start for p in parts),
    )


# -- consistency --------------------------------------------------------------


@dataclass(frozen=True)
class ConsistencyRow:
    n: int
    sigma_error: float
    theta_error: tuple[float, ...]
    replications: int
    failures: int


def consistency_sweep(
    scenario: SimulationScenario,
    n_grid: Sequence[int],
    N: int,
    *,
    seed: int | None = None,
    threads: int | None = None,
) -> list[ConsistencyRow]:
    """Mean max-entry errors of the covariance and coefficient estimates per ``n``."""
    seed = scenario.seed if seed is None else seed
    rows = []
    for n in n_grid:
        sc = scenario.with_n(int(n))
        spec = sc.spec()
        truth = sc.true_coefficients()
        sigma0 = sc.covariance()
        mean = spec.mean(truth)
        lower = la.spd_factor(sigma0).lower

        def task(rng: np.random.Generator, _index: int, sc=sc, spec=spec, truth=truth, sigma0=sigma0, mean=mean, lower=lower):
            res = fit(generate(sc, rng, mean=mean, lower=lower), spec)
            errs = [float(np.max(np.abs(res.covariance.sigma_hat - sigma0)))]
            errs += [float(np.max(np.abs(c - t))) for c, t in zip(res.coefficients, truth)]
            return tuple(errs)

        kept, failures = run_replications(task, seed, (int(n),), N, threads=threads)
        _check_failures(failures, N)
        arr = np.asarray(kept, dtype=np.float64)
        rows.append(
            ConsistencyRow(
                n=int(n),
                sigma_error=_fsum_mean(arr[:, 0]),
                theta_error=tuple(_fsum_mean(arr[:, j]) for j in range(1, arr.shape[1])),
                replications=len(kept),
                failures=failures,
            )
        )
    return rows


# -- asymptotic normality -----------------------------------------------------


def null_hypothesis(theta: ArrayLike, block: int) -> Hypothesis:
    """A hypothesis ``C Theta V' = 0`` that holds for the given coefficients.

    ``C`` is the identity and the rows of ``V`` span the orthogonal
    complement of the row space of ``theta``.
    """
    theta = la.as_matrix(np.atleast_2d(theta), "theta")
    m, q = theta.shape
    _, s, vt = np.linalg.svd(theta)
    rank = int(np.sum(s > max(m, q) * (s[0] if s.size else 0.0) * np.finfo(float).eps))
    if rank >= q:
        raise ValueError("coefficients have full row space; no nontrivial null contrast")
    return Hypothesis(block, np.eye(m), vt[rank:])


def _cross_cov(a: Matrix, b: Matrix) -> tuple[Matrix, Matrix]:
    """Sample cross-covariance of columns and its entrywise z-scores."""
    ac = a - a.mean(axis=0)
    bc = b - b.mean(axis=0)
    prods = ac[:, :, None] * bc[:, None, :]
    cov = prods.mean(axis=0) * len(a) / (len(a) - 1)
    se = prods.std(axis=0, ddof=1) / np.sqrt(len(a))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, cov / se, 0.0)
    return cov, z


def normality_check(
    scenario: SimulationScenario,
    n: int,
    N: int,
    i: int = 0,
    *,
    seed: int | None = None,
    hypothesis: Hypothesis | None = None,
    threads: int | None = None,
) -> AsymptoticReport:
    """Compare the sampling law of ``sqrt(n)(Theta_i_hat - Theta_i)`` with theory.

    The theoretical covariance uses the TRUE error covariance. Also reports
    cross-covariances with the other blocks and with the covariance
    estimate, marginal skewness/kurtosis, and the moments of the
    standardized statistic under a true null (``hypothesis`` defaults to
    :func:`null_hypothesis` for block ``i``).
    """
    seed = scenario.seed if seed is None else seed
    sc = scenario.with_n(int(n))
    spec = sc.spec()
    truth = sc.true_coefficients()
    sigma0 = sc.covariance()
    mean = spec.mean(truth)
    lower = la.spd_factor(sigma0).lower
    hyp = hypothesis if hypothesis is not None else null_hypothesis(truth[i], i)
    root_n = math.sqrt(n)

    def task(rng: np.random.Generator, _index: int):
        res = fit(generate(sc, rng, mean=mean, lower=lower), spec)
        devs = [root_n * la.vec(c - t).ravel() for c, t in zip(res.coefficients, truth)]
        sig = root_n * la.vec(res.covariance.sigma_hat - sigma0).ravel()
        stat = standardized_statistic(res, spec, hyp).ravel()
        phi = fourth_moment_covariance(res.residual)
        return devs, sig, stat, phi

    kept, failures = run_replications(task, seed, (int(n), 1), N, threads=threads)
    _check_failures(failures, N)
    devs = [np.array([k[0][b] for k in kept]) for b in range(spec.k)]
    sig = np.array([k[1] for k in kept])
    stat = np.array([k[2] for k in kept])
    phi_resid = np.mean([k[3] for k in kept], axis=0)

    row, col = coeff_asymptotic_covariance(spec, sigma0, i)
    theoretical = la.kron(row, col)
    empirical = np.cov(devs[i], rowvar=False).reshape(theoretical.shape)
    rel = float(np.max(np.abs(empirical - theoretical)) / np.max(np.abs(theoretical)))

    cross, cross_z = {}, {}
    for j in range(spec.k):
        if j != i:
            cross[j], cross_z[j] = _cross_cov(devs[i], devs[j])
    cross_sigma, cross_sigma_z = _cross_cov(devs[i], sig)

    sd = devs[i].std(axis=0, ddof=1)
    standardized = (devs[i] - devs[i].mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    return AsymptoticReport(
        block=i,
        n=int(n),
        replications=len(kept),
        row_factor=row,
        column_factor=col,
        theoretical=theoretical,
        empirical=empirical,
        relative_error=rel,
        cross_block=cross,
        cross_block_z=cross_z,
        cross_sigma=cross_sigma,
        cross_sigma_z=cross_sigma_z,
        phi2_empirical=np.cov(sig, rowvar=False),
        phi2_theoretical=gaussian_fourth_moment_covariance(sigma0) if sc.errors == "gaussian" else None,
        phi2_residual=phi_resid,
        marginal_skewness=stats.skew(standardized, axis=0),
        marginal_excess_kurtosis=stats.kurtosis(standardized, axis=0, fisher=True),
        statistic_mean=stat.mean(axis=0),
        statistic_variance=stat.var(axis=0, ddof=1),
        failures=failures,
    )
