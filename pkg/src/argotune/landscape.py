"""Synthetic epoch-time landscape over the configuration space.

Epoch time of configuration (n, s, t)::

    T = w(n) * max(S / (n * s**a), C / (n * t**b)) + kappa * n,   w(n) = 1 + gamma * (n - 1)

The max() term is the sampler/trainer pipeline bottleneck, ``w(n)`` the
workload inflation of splitting a batch over more processes, and
``kappa * n`` the gradient-synchronization cost.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, replace
from typing import Optional

import numpy as np

from .config_space import Configuration, SearchSpace

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LandscapeParams:
    sampling_work: float
    compute_work: float
    inflation: float = 0.0
    sync_cost: float = 0.0
    sampling_exponent: float = 1.0
    training_exponent: float = 1.0
    noise_std: float = 0.0
    seed: int = 0
    name: str = ""

    def __post_init__(self):
        if self.sampling_work <= 0 or self.compute_work <= 0:
            raise ValueError("work units must be positive")
        if self.inflation < 0 or self.sync_cost < 0 or self.noise_std < 0:
            raise ValueError("inflation, sync_cost and noise_std must be non-negative")
        for e in (self.sampling_exponent, self.training_exponent):
            if not 0 < e <= 1:
                raise ValueError("diminishing-returns exponents must lie in (0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "LandscapeParams":
        kwargs = {}
        for key, value in data.items():
            if key == "name":
                kwargs[key] = str(value)
            elif key == "seed":
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        return cls(**kwargs)


def write_params(params: LandscapeParams, path) -> None:
    """Save as ``key = value`` lines (the run-configuration file syntax)."""
    with open(path, "w") as fh:
        for key, value in params.to_dict().items():
            fh.write(f"{key} = {value!r}\n" if isinstance(value, float) else f"{key} = {value}\n")


def read_params(path) -> LandscapeParams:
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key] = value
    return LandscapeParams.from_dict(values)


def evaluate(params: LandscapeParams, cfg: Configuration, draw_index: int = 0) -> float:
    n, s, t = cfg.as_tuple()
    inflation = 1.0 + params.inflation * (n - 1)
    sampling = params.sampling_work / (n * s**params.sampling_exponent)
    training = params.compute_work / (n * t**params.training_exponent)
    value = inflation * max(sampling, training) + params.sync_cost * n
    if params.noise_std > 0:
        rng = np.random.default_rng([params.seed, n, s, t, draw_index])
        value += params.noise_std * float(np.clip(rng.standard_normal(), -3.0, 3.0))
        value = max(value, 1e-9)
    return float(value)


def evaluate_all(params: LandscapeParams, space: SearchSpace) -> np.ndarray:
    """Noise-free values over ``space`` in enumeration order."""
    arr = space.as_array().astype(float)
    n, s, t = arr.T
    sampling = params.sampling_work / (n * s**params.sampling_exponent)
    training = params.compute_work / (n * t**params.training_exponent)
    return (1.0 + params.inflation * (n - 1)) * np.maximum(sampling, training) + params.sync_cost * n


def optimum(params: LandscapeParams, space: SearchSpace) -> tuple[Configuration, float]:
    values = evaluate_all(replace(params, noise_std=0.0), space)
    i = int(np.argmin(values))
    return space.configurations[i], float(values[i])


class LandscapeTarget:
    """Callable evaluation target; each call advances the noise draw index."""

    def __init__(self, params: LandscapeParams):
        self.params = params
        self.calls = 0

    def __call__(self, cfg: Configuration) -> float:
        value = evaluate(self.params, cfg, self.calls)
        self.calls += 1
        return value


_BASE_PRESETS = [
    # sampling-heavy, cheap sync: many processes, all sampling cores
    LandscapeParams(400.0, 300.0, 0.03, 0.6, 0.85, 0.7, name="sampling-bound"),
    # compute-heavy, expensive sync: few processes, training cores dominate
    LandscapeParams(150.0, 900.0, 0.10, 12.0, 0.9, 0.8, name="compute-bound"),
    # balanced, strong inflation
    LandscapeParams(300.0, 400.0, 0.35, 1.0, 0.8, 0.75, name="inflation-heavy"),
    # sampler saturates quickly, trainer scales well
    LandscapeParams(120.0, 600.0, 0.04, 0.6, 0.35, 0.95, name="sampler-saturating"),
    # synchronization dominates beyond a few processes
    LandscapeParams(200.0, 500.0, 0.15, 6.0, 0.6, 0.9, name="sync-heavy"),
]


def preset_suite(space: Optional[SearchSpace] = None, max_retries: int = 20) -> list[LandscapeParams]:
    """Named landscape presets whose optima differ across the suite.

    Optima are checked on ``space`` (default: the capped 112-core space). A
    preset whose optimum coincides with an earlier one's is regenerated by
    scaling its synchronization cost until the optimum moves.
    """
    space = space or SearchSpace.capped(112)
    suite: list[LandscapeParams] = []
    optima: list[Configuration] = []
    for preset in _BASE_PRESETS:
        cand = preset
        for _ in range(max_retries):
            opt, _ = optimum(cand, space)
            if opt not in optima:
                break
            logger.info("preset %s duplicates optimum %s; regenerating", cand.name, opt)
            cand = replace(cand, sync_cost=cand.sync_cost * 1.5 + 0.1)
        else:
            raise RuntimeError(f"could not separate preset {preset.name} from the others")
        suite.append(cand)
        optima.append(opt)
    return suite
