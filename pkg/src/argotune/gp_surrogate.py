"""Gaussian-process surrogate and Expected Improvement over a discrete space.

Inputs are configurations normalized to [0, 1]^3; targets are epoch times,
standardized to zero mean and unit variance before fitting. The kernel is an
anisotropic Matern 5/2. Hyperparameters come from a bounded log-space grid
search on the log marginal likelihood, followed by coordinate refinement.
The signal variance is profiled out in closed form for each candidate.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import linalg, special
from scipy.linalg import lapack

from .config_space import Configuration, SearchSpace, normalize_array

logger = logging.getLogger(__name__)

NOISE_FLOOR = 1e-6
SIGNAL_FLOOR = 1e-6
JITTERS = (0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)
DEFAULT_XI = 0.01

LENGTHSCALE_GRID = np.geomspace(0.05, 2.0, 5)
NOISE_RATIO_GRID = np.array([1e-6, 1e-4, 1e-2])
LENGTHSCALE_BOUNDS = (0.05, 2.0)
NOISE_RATIO_BOUNDS = (1e-6, 1e-2)
FALLBACK_LENGTHSCALE = 0.3

_SQRT5 = np.sqrt(5.0)
_LOG_2PI = np.log(2 * np.pi)


class SurrogateFitError(RuntimeError):
    pass


class ExhaustedSpaceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Hyperparams:
    lengthscales: tuple[float, ...]
    signal_variance: float
    noise_variance: float

    def __post_init__(self):
        if min(self.lengthscales) <= 0 or self.signal_variance <= 0:
            raise ValueError("length-scales and signal variance must be positive")
        if self.noise_variance < NOISE_FLOOR:
            raise ValueError(f"noise variance must be >= {NOISE_FLOOR}")


@dataclass(frozen=True)
class HyperparamPolicy:
    """How :func:`fit` picks kernel hyperparameters.

    ``fixed`` short-circuits the search. Otherwise the grid search runs with
    ``refine_rounds`` sweeps of multiplicative coordinate refinement. When
    :func:`fit` gets a warm start, the grid is skipped and refinement starts
    from the warm-start point.
    """

    fixed: Optional[Hyperparams] = None
    refine_rounds: int = 2
    refine_factors: tuple[float, ...] = (0.5, 0.7, 1.4, 2.0)


@dataclass(frozen=True)
class Prediction:
    mean: float
    std: float


@dataclass(frozen=True, eq=False)
class GpSurrogate:
    training_inputs: np.ndarray
    training_targets: np.ndarray
    target_mean: float
    target_scale: float
    hyperparams: Hyperparams
    log_marginal_likelihood: float
    jitter: float
    _chol: np.ndarray = field(repr=False)
    _alpha: np.ndarray = field(repr=False)

    @property
    def noise_std(self) -> float:
        return float(np.sqrt(self.hyperparams.noise_variance))

    @property
    def signal_std(self) -> float:
        return float(np.sqrt(self.hyperparams.signal_variance))

    def predict_many(self, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and std (standardized units) of the latent function."""
        q = np.atleast_2d(np.asarray(queries, dtype=float))
        hp = self.hyperparams
        k_star = hp.signal_variance * matern52(q, self.training_inputs, hp.lengthscales)
        mean = k_star @ self._alpha
        v = linalg.solve_triangular(self._chol, k_star.T, lower=True, check_finite=False)
        var = hp.signal_variance - np.einsum("ij,ij->j", v, v)
        return mean, np.sqrt(np.maximum(var, 0.0))

    @property
    def warm_start(self) -> tuple[tuple[float, ...], float]:
        hp = self.hyperparams
        return hp.lengthscales, hp.noise_variance / hp.signal_variance

    def destandardize(self, mean, std):
        return mean * self.target_scale + self.target_mean, std * self.target_scale

    def standardize(self, value):
        return (np.asarray(value, dtype=float) - self.target_mean) / self.target_scale


def matern52(a: np.ndarray, b: np.ndarray, lengthscales: Sequence[float]) -> np.ndarray:
    """Unit-variance Matern 5/2 correlation between rows of ``a`` and ``b``."""
    ls = np.asarray(lengthscales, dtype=float)
    diff = (a[:, None, :] - b[None, :, :]) / ls
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    return _matern_from_r(r)


def _matern_from_r(r: np.ndarray) -> np.ndarray:
    sr = _SQRT5 * r
    return (1.0 + sr + sr * sr / 3.0) * np.exp(-sr)


def _standardize(targets: np.ndarray) -> tuple[np.ndarray, float, float]:
    mu = float(np.mean(targets))
    sd = float(np.std(targets))
    if not np.isfinite(sd) or sd <= 1e-12 * max(1.0, abs(mu)):
        sd = 1.0
    return (targets - mu) / sd, mu, sd


def _profiled_lml(y: np.ndarray, corr: np.ndarray, noise_ratio: float):
    """Cholesky + log marginal likelihood with the signal variance profiled out.

    The covariance is ``sigma2 * (corr + noise_ratio * I)``; the ML estimate of
    ``sigma2`` is ``y' R^-1 y / m``. Returns ``(lml, sigma2, jitter)`` or None
    when the factorization fails at every jitter level.
    """
    m = len(y)
    diag = np.arange(m)
    for jitter in JITTERS:
        a = corr.copy()
        a[diag, diag] += noise_ratio + jitter
        chol, info = lapack.dpotrf(a, lower=1, clean=0)
        if info != 0:
            continue
        z, _ = lapack.dtrtrs(chol, y, lower=1)
        quad = float(z @ z)
        sigma2 = max(quad / m, SIGNAL_FLOOR)
        logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
        lml = -0.5 * (quad / sigma2 + m * np.log(sigma2) + logdet + m * _LOG_2PI)
        return lml, sigma2, jitter
    return None


def _grid_search(x: np.ndarray, y: np.ndarray) -> Optional[tuple[float, np.ndarray, float]]:
    """Scan the 5x5x5x3 grid; returns (lml, lengthscales, noise_ratio) of the best point."""
    m, dim = x.shape
    grid = np.array(list(itertools.product(LENGTHSCALE_GRID, repeat=dim)))
    sq = ((x[:, None, :] - x[None, :, :]) ** 2).reshape(m * m, dim)
    r = np.sqrt(sq @ (1.0 / grid**2).T).T.reshape(len(grid), m, m)
    corr = _matern_from_r(r)
    best = None
    for gi in range(len(grid)):
        for ratio in NOISE_RATIO_GRID:
            res = _profiled_lml(y, corr[gi], float(ratio))
            if res is not None and (best is None or res[0] > best[0]):
                best = (res[0], grid[gi].copy(), float(ratio))
    return best


def _select_hyperparams(x, y, policy: HyperparamPolicy, warm_start=None) -> tuple[np.ndarray, float]:
    dim = x.shape[1]
    if warm_start is not None:
        ls0 = np.clip(np.asarray(warm_start[0], dtype=float), *LENGTHSCALE_BOUNDS)
        ratio0 = float(np.clip(warm_start[1], *NOISE_RATIO_BOUNDS))
        res = _profiled_lml(y, matern52(x, x, ls0), ratio0)
        found = None if res is None else (res[0], ls0, ratio0)
    else:
        found = _grid_search(x, y)
    if found is None:
        logger.warning("hyperparameter search failed; using fixed length-scale %s", FALLBACK_LENGTHSCALE)
        return np.full(dim, FALLBACK_LENGTHSCALE), float(NOISE_RATIO_GRID[0])

    best_lml, ls, ratio = found
    lo, hi = LENGTHSCALE_BOUNDS
    for _ in range(policy.refine_rounds):
        improved = False
        for coord in range(dim + 1):
            for factor in policy.refine_factors:
                cand_ls, cand_ratio = ls.copy(), ratio
                if coord < dim:
                    cand_ls[coord] = np.clip(ls[coord] * factor, lo, hi)
                    if cand_ls[coord] == ls[coord]:
                        continue
                else:
                    cand_ratio = float(np.clip(ratio * factor**4, *NOISE_RATIO_BOUNDS))
                    if cand_ratio == ratio:
                        continue
                res = _profiled_lml(y, matern52(x, x, cand_ls), cand_ratio)
                if res is not None and res[0] > best_lml + 1e-10:
                    best_lml, ls, ratio = res[0], cand_ls, cand_ratio
                    improved = True
        if not improved:
            break
    return ls, ratio


def fit(inputs, targets, policy: Optional[HyperparamPolicy] = None, warm_start=None) -> GpSurrogate:
    """Fit a GP to ``inputs`` (m, d) in [0, 1]^d and raw ``targets`` (m,).

    ``warm_start`` is an optional ``(lengthscales, noise_ratio)`` pair, usually
    :attr:`GpSurrogate.warm_start` of a previous fit on a subset of the data.
    """
    policy = policy or HyperparamPolicy()
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    raw = np.asarray(targets, dtype=float).ravel()
    if x.shape[0] != raw.shape[0]:
        raise ValueError("inputs and targets differ in length")
    if x.shape[0] < 2:
        raise ValueError("need at least two observations to fit")
    if not np.all(np.isfinite(raw)):
        raise ValueError("targets must be finite; drop failed observations first")
    if np.any(x < -1e-12) or np.any(x > 1 + 1e-12):
        raise ValueError("inputs must lie in the unit cube")

    y, mu, sd = _standardize(raw)
    m = len(y)

    if policy.fixed is not None:
        hp = policy.fixed
        corr = matern52(x, x, hp.lengthscales)
        cov = hp.signal_variance * corr + hp.noise_variance * np.eye(m)
        chol, jitter = _factor(cov)
        alpha = linalg.cho_solve((chol, True), y, check_finite=False)
        lml = -0.5 * (y @ alpha) - np.sum(np.log(np.diag(chol))) - 0.5 * m * _LOG_2PI
        return GpSurrogate(x, y, mu, sd, hp, float(lml), jitter, chol, alpha)

    ls, ratio = _select_hyperparams(x, y, policy, warm_start)
    corr = matern52(x, x, ls)
    res = _profiled_lml(y, corr, ratio)
    if res is None:
        raise SurrogateFitError("kernel matrix not positive definite even with jitter 1e-4")
    lml, sigma2, _ = res
    noise = max(ratio * sigma2, NOISE_FLOOR)
    hp = Hyperparams(tuple(float(v) for v in ls), sigma2, noise)
    chol, jitter = _factor(sigma2 * corr + noise * np.eye(m))
    alpha = linalg.cho_solve((chol, True), y, check_finite=False)
    return GpSurrogate(x, y, mu, sd, hp, float(lml), jitter, chol, alpha)


def _factor(cov: np.ndarray) -> tuple[np.ndarray, float]:
    scale = max(float(np.mean(np.diag(cov))), 1.0)
    for jitter in JITTERS:
        try:
            chol = linalg.cholesky(
                cov + jitter * scale * np.eye(len(cov)), lower=True, check_finite=False
            )
            return chol, jitter
        except linalg.LinAlgError:
            continue
    raise SurrogateFitError("kernel matrix not positive definite even with jitter 1e-4")


def predict(model: GpSurrogate, query) -> Prediction:
    mean, std = model.predict_many(np.asarray(query, dtype=float)[None, :])
    return Prediction(float(mean[0]), float(std[0]))


def expected_improvement_values(mean, std, best: float, xi: float = DEFAULT_XI) -> np.ndarray:
    """EI for minimization, vectorized over ``mean``/``std``."""
    mean, std = np.broadcast_arrays(np.asarray(mean, dtype=float), np.asarray(std, dtype=float))
    shape = mean.shape
    mean, std = mean.ravel(), std.ravel()
    improvement = best - mean - xi
    out = np.maximum(improvement, 0.0)
    pos = std > 0
    if np.any(pos):
        with np.errstate(over="ignore"):  # subnormal std: z saturates to +-inf
            z = improvement[pos] / std[pos]
            out[pos] = improvement[pos] * special.ndtr(z) + std[pos] * np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi)
    out = np.maximum(out, 0.0).reshape(shape)
    return out if shape else out[()]


def expected_improvement(model: GpSurrogate, query, best_observed: float, xi: float = DEFAULT_XI) -> float:
    """EI at one normalized point; ``best_observed`` is in standardized units."""
    p = predict(model, query)
    return float(expected_improvement_values(p.mean, p.std, best_observed, xi))


def score_candidates(
    model: GpSurrogate, space: SearchSpace, candidates: Sequence[Configuration], xi: float = DEFAULT_XI
) -> np.ndarray:
    pts = normalize_array(np.array([c.as_tuple() for c in candidates], dtype=float), space)
    mean, std = model.predict_many(pts)
    best = float(np.min(model.training_targets))
    return expected_improvement_values(mean, std, best, xi)


def suggest_next(
    model: GpSurrogate,
    space: SearchSpace,
    evaluated: Iterable[Configuration],
    xi: float = DEFAULT_XI,
) -> Configuration:
    """Unevaluated configuration with maximal EI; ties go to the lexicographically smaller one."""
    seen = set(evaluated)
    candidates = [c for c in space.configurations if c not in seen]
    if not candidates:
        raise ExhaustedSpaceError("every configuration has been evaluated")
    ei = score_candidates(model, space, candidates, xi)
    top = float(np.max(ei))
    tol = 1e-12 * max(abs(top), 1e-300)
    return candidates[int(np.flatnonzero(ei >= top - tol)[0])]
