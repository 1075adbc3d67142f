"""Online auto-tuning of the parallel configuration, plus baseline searches.

Every tuner drives an evaluation target: a callable mapping a
:class:`Configuration` to an epoch time in seconds. One call is one training
epoch at that configuration, so tuners are sequential control loops.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np

from . import gp_surrogate
from .config_space import Configuration, SearchSpace, neighbor, normalize_array

logger = logging.getLogger(__name__)

EvaluationTarget = Callable[[Configuration], float]

FAILED = math.inf
K_INIT = 4
SA_PROBES = 5
SA_COOLING = 0.9


class TuningError(RuntimeError):
    pass


@dataclass(frozen=True)
class TraceEntry:
    iteration: int
    config: Configuration
    epoch_time: float
    best_so_far: float
    phase: str

    @property
    def failed(self) -> bool:
        return not math.isfinite(self.epoch_time)


@dataclass
class ObservationTrace:
    entries: list[TraceEntry] = field(default_factory=list)

    def record(self, config: Configuration, epoch_time: float, phase: str) -> TraceEntry:
        prev = self.entries[-1].best_so_far if self.entries else math.inf
        entry = TraceEntry(len(self.entries), config, epoch_time, min(prev, epoch_time), phase)
        self.entries.append(entry)
        return entry

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[TraceEntry]:
        return iter(self.entries)

    def search_entries(self) -> list[TraceEntry]:
        return [e for e in self.entries if e.phase == "search"]

    def best(self) -> tuple[Configuration, float]:
        """Earliest entry with the minimal observed time."""
        ok = [e for e in self.entries if not e.failed]
        if not ok:
            raise TuningError("every evaluation failed")
        top = min(ok, key=lambda e: (e.epoch_time, e.iteration))
        return top.config, top.epoch_time


@dataclass(frozen=True)
class TunerBudget:
    num_searches: int
    total_epochs: int

    def __post_init__(self):
        if self.num_searches < 1:
            raise ValueError("num_searches must be positive")
        if self.total_epochs < self.num_searches:
            raise ValueError("total_epochs must be >= num_searches")

    @classmethod
    def default(cls, space: SearchSpace, total_epochs: Optional[int] = None, fraction: float = 0.05):
        n = max(5, math.ceil(fraction * len(space)))
        n = min(n, len(space))
        return cls(n, max(n, total_epochs or n))


def _evaluate(target: EvaluationTarget, cfg: Configuration) -> float:
    try:
        value = float(target(cfg))
    except Exception as exc:  # noqa: BLE001 - any target failure is an observation
        logger.warning("evaluation of %s failed: %s", cfg, exc)
        return FAILED
    if not math.isfinite(value) or value <= 0:
        logger.warning("evaluation of %s returned invalid time %r", cfg, value)
        return FAILED
    return value


def _reuse(trace: ObservationTrace, target, budget: TunerBudget) -> Configuration:
    best_cfg, _ = trace.best()
    while len(trace) < budget.total_epochs:
        trace.record(best_cfg, _evaluate(target, best_cfg), "reuse")
    return best_cfg


class BayesTuner:
    """Stateful form of the online tuner: alternate :meth:`ask` and :meth:`tell`.

    The first ``k_init`` suggestions are uniform draws without replacement;
    afterwards the GP surrogate is refitted on all successful observations and
    the unevaluated configuration with maximal Expected Improvement is proposed.

    The full hyperparameter grid runs on the first fit and whenever the number
    of observations has grown by ``regrid_growth`` since the last grid search;
    in between, fits refine the previous hyperparameters.
    """

    def __init__(self, space: SearchSpace, seed: int = 0, k_init: int = K_INIT,
                 xi: float = gp_surrogate.DEFAULT_XI, policy: Optional[gp_surrogate.HyperparamPolicy] = None,
                 regrid_growth: float = 1.5):
        self.space = space
        self.k_init = k_init
        self.xi = xi
        self.policy = policy
        self.regrid_growth = regrid_growth
        self._grid_size = 0
        order = np.random.default_rng(seed).permutation(len(space))
        self._random_order = [space.configurations[i] for i in order]
        self.observed: list[tuple[Configuration, float]] = []
        self._evaluated: set[Configuration] = set()
        self.last_model: Optional[gp_surrogate.GpSurrogate] = None

    def _next_random(self) -> Configuration:
        for cfg in self._random_order:
            if cfg not in self._evaluated:
                return cfg
        raise gp_surrogate.ExhaustedSpaceError("every configuration has been evaluated")

    def ask(self) -> Configuration:
        ok = [(c, y) for c, y in self.observed if math.isfinite(y)]
        if len(self.observed) < self.k_init or len(ok) < 2:
            return self._next_random()
        x = normalize_array(np.array([c.as_tuple() for c, _ in ok], dtype=float), self.space)
        y = np.array([v for _, v in ok])
        warm = None
        if self.last_model is not None and len(ok) < self.regrid_growth * self._grid_size:
            warm = self.last_model.warm_start
        else:
            self._grid_size = len(ok)
        self.last_model = gp_surrogate.fit(x, y, self.policy, warm_start=warm)
        return gp_surrogate.suggest_next(self.last_model, self.space, self._evaluated, self.xi)

    def tell(self, cfg: Configuration, epoch_time: float) -> None:
        self.observed.append((cfg, epoch_time))
        self._evaluated.add(cfg)

    @property
    def exhausted(self) -> bool:
        return len(self._evaluated) >= len(self.space)


def bayes_tune(space: SearchSpace, target: EvaluationTarget, budget: TunerBudget, seed: int = 0,
               **tuner_kwargs) -> tuple[Configuration, ObservationTrace]:
    tuner = BayesTuner(space, seed=seed, **tuner_kwargs)
    trace = ObservationTrace()
    for _ in range(budget.num_searches):
        if tuner.exhausted:
            break
        cfg = tuner.ask()
        value = _evaluate(target, cfg)
        tuner.tell(cfg, value)
        trace.record(cfg, value, "search")
    best_cfg = _reuse(trace, target, budget)
    return best_cfg, trace


def exhaustive_search(space: SearchSpace, target: EvaluationTarget) -> tuple[Configuration, ObservationTrace]:
    trace = ObservationTrace()
    for cfg in space.configurations:
        trace.record(cfg, _evaluate(target, cfg), "search")
    best_cfg, _ = trace.best()
    return best_cfg, trace


@dataclass(frozen=True)
class AnnealingSchedule:
    """Geometric cooling T_k = T0 * alpha**k.

    ``initial_temperature=None`` means: the standard deviation of the probe
    evaluations that open the search.
    """

    initial_temperature: Optional[float] = None
    cooling: float = SA_COOLING
    probes: int = SA_PROBES


def acceptance_probability(delta: float, temperature: float) -> float:
    """Metropolis rule for minimization."""
    if delta <= 0:
        return 1.0
    if temperature <= 0 or not math.isfinite(delta):
        return 0.0
    return math.exp(-delta / temperature)


def simulated_annealing(space: SearchSpace, target: EvaluationTarget, budget: TunerBudget, seed: int = 0,
                        schedule: Optional[AnnealingSchedule] = None) -> tuple[Configuration, ObservationTrace]:
    """Metropolis search with one-step neighbor moves; exactly ``num_searches`` evaluations.

    The first ``schedule.probes`` evaluations are distinct random
    configurations; the walk starts from the best of them.
    """
    schedule = schedule or AnnealingSchedule()
    rng = np.random.default_rng(seed)
    trace = ObservationTrace()

    n_probes = min(schedule.probes, budget.num_searches, len(space))
    probe_idx = rng.choice(len(space), size=n_probes, replace=False)
    for i in probe_idx:
        cfg = space.configurations[int(i)]
        trace.record(cfg, _evaluate(target, cfg), "search")

    finite = [e.epoch_time for e in trace if not e.failed]
    if schedule.initial_temperature is not None:
        temperature = schedule.initial_temperature
    else:
        temperature = float(np.std(finite)) if len(finite) > 1 else 0.0
        if temperature <= 0:
            temperature = 0.1 * finite[0] if finite else 1.0

    current = min(trace.entries, key=lambda e: (e.epoch_time, e.iteration))
    cur_cfg, cur_val = current.config, current.epoch_time
    while len(trace) < budget.num_searches:
        cand = neighbor(cur_cfg, space, rng)
        val = _evaluate(target, cand)
        trace.record(cand, val, "search")
        if not math.isfinite(cur_val) or rng.random() < acceptance_probability(val - cur_val, temperature):
            cur_cfg, cur_val = cand, val
        temperature *= schedule.cooling

    best_cfg = _reuse(trace, target, budget)
    return best_cfg, trace


def default_policy(space: SearchSpace) -> Configuration:
    """Single process: up to 4 sampling cores, the rest training, one core left for the main process.

    The reserved core is given back when the machine is too small to spare
    it, so 2 cores yield (1, 1, 1).
    """
    if space.total_cores < 2:
        raise ValueError("need at least 2 cores")
    s = min(4, space.total_cores - 1)
    if space.max_sampling_cores is not None:
        s = min(s, space.max_sampling_cores)
    t = max(1, space.total_cores - s - 1)
    if space.max_training_cores is not None:
        t = min(t, space.max_training_cores)
    return Configuration(1, s, t)
