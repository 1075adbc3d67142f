"""Discrete space of parallelization configurations.

A configuration is the triple (processes, sampling cores per process,
training cores per process). A :class:`SearchSpace` holds every triple that
fits on a machine with ``total_cores`` cores, optionally capped per dimension.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Optional

import numpy as np


class EmptySpaceError(ValueError):
    """Raised when a search space contains no valid configuration."""


class InvalidConfigurationError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Configuration:
    n_processes: int
    n_sampling_cores: int
    n_training_cores: int

    @property
    def cores_per_process(self) -> int:
        return self.n_sampling_cores + self.n_training_cores

    @property
    def total_cores_used(self) -> int:
        return self.n_processes * self.cores_per_process

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.n_processes, self.n_sampling_cores, self.n_training_cores)

    def __iter__(self) -> Iterator[int]:
        return iter(self.as_tuple())

    def __str__(self) -> str:
        return f"(n={self.n_processes}, s={self.n_sampling_cores}, t={self.n_training_cores})"


@dataclass(frozen=True)
class SearchSpace:
    """All (n, s, t) with n * (s + t) <= total_cores and n <= max_processes.

    ``max_sampling_cores`` / ``max_training_cores`` optionally cap the
    per-process core counts, which keeps the space at a size a surrogate
    can cover on many-core machines.
    """

    total_cores: int
    max_processes: int = 16
    max_sampling_cores: Optional[int] = None
    max_training_cores: Optional[int] = None

    def __post_init__(self):
        if self.total_cores < 1 or self.max_processes < 1:
            raise ValueError("total_cores and max_processes must be positive")
        for cap in (self.max_sampling_cores, self.max_training_cores):
            if cap is not None and cap < 1:
                raise ValueError("per-dimension caps must be positive")

    @classmethod
    def capped(cls, total_cores: int) -> "SearchSpace":
        """Server-scale space: at most 8 processes, 8 sampling and 16 training cores each."""
        return cls(total_cores, max_processes=8, max_sampling_cores=8, max_training_cores=16)

    def _cap(self, value: Optional[int]) -> int:
        return self.total_cores if value is None else value

    def contains(self, cfg: Configuration) -> bool:
        n, s, t = cfg.as_tuple()
        if not all(isinstance(v, (int, np.integer)) for v in (n, s, t)):
            return False
        if n < 1 or s < 1 or t < 1:
            return False
        if n > self.max_processes:
            return False
        if s > self._cap(self.max_sampling_cores) or t > self._cap(self.max_training_cores):
            return False
        return n * (s + t) <= self.total_cores

    def __contains__(self, cfg: object) -> bool:
        return isinstance(cfg, Configuration) and self.contains(cfg)

    @cached_property
    def configurations(self) -> tuple[Configuration, ...]:
        if self.total_cores < 2:
            raise EmptySpaceError(f"no configuration fits on {self.total_cores} core(s)")
        s_cap = self._cap(self.max_sampling_cores)
        t_cap = self._cap(self.max_training_cores)
        out = []
        for n in range(1, self.max_processes + 1):
            per_proc = self.total_cores // n
            if per_proc < 2:
                break
            for s in range(1, min(s_cap, per_proc - 1) + 1):
                for t in range(1, min(t_cap, per_proc - s) + 1):
                    out.append(Configuration(n, s, t))
        if not out:
            raise EmptySpaceError("per-dimension caps leave the space empty")
        return tuple(out)

    @cached_property
    def index(self) -> dict[Configuration, int]:
        return {cfg: i for i, cfg in enumerate(self.configurations)}

    @cached_property
    def bounds(self) -> np.ndarray:
        """(3, 2) array of per-dimension [min, max] over the enumerated space."""
        arr = self.as_array()
        return np.stack([arr.min(axis=0), arr.max(axis=0)], axis=1)

    def as_array(self) -> np.ndarray:
        return np.array([c.as_tuple() for c in self.configurations], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.configurations)

    def __iter__(self) -> Iterator[Configuration]:
        return iter(self.configurations)


def enumerate_space(space: SearchSpace) -> list[Configuration]:
    """Every valid configuration, lexicographic in (n, s, t)."""
    return list(space.configurations)


def validate(cfg: Configuration, space: SearchSpace) -> bool:
    return space.contains(cfg)


def normalize(cfg: Configuration, space: SearchSpace) -> np.ndarray:
    """Map ``cfg`` into [0, 1]^3 using the space's per-dimension range.

    A degenerate dimension (min == max) maps to 0.5.
    """
    if not space.contains(cfg):
        raise InvalidConfigurationError(f"{cfg} is not in the search space")
    return normalize_array(np.array([cfg.as_tuple()], dtype=float), space)[0]


def normalize_array(values: np.ndarray, space: SearchSpace) -> np.ndarray:
    """Vectorized :func:`normalize` for an (m, 3) array; no validity check."""
    lo = space.bounds[:, 0].astype(float)
    hi = space.bounds[:, 1].astype(float)
    span = hi - lo
    out = np.empty_like(values, dtype=float)
    degenerate = span == 0
    safe = np.where(degenerate, 1.0, span)
    out[:] = (values - lo) / safe
    out[:, degenerate] = 0.5
    return out


_MOVES = [(d, step) for d in range(3) for step in (-1, 1)]


def neighbor(cfg: Configuration, space: SearchSpace, rng: np.random.Generator) -> Configuration:
    """Propose a valid configuration one +-1 step away from ``cfg`` in one dimension.

    The dimension and direction are drawn uniformly and redrawn until the move
    lands inside the space. Returns ``cfg`` itself when it has no valid
    neighbor (e.g. a singleton space).
    """
    if not space.contains(cfg):
        raise InvalidConfigurationError(f"{cfg} is not in the search space")
    base = cfg.as_tuple()

    def moved(d: int, step: int) -> Configuration:
        v = list(base)
        v[d] += step
        return Configuration(*v)

    if not any(space.contains(moved(d, step)) for d, step in _MOVES):
        return cfg
    while True:
        d, step = _MOVES[int(rng.integers(len(_MOVES)))]
        cand = moved(d, step)
        if space.contains(cand):
            return cand
