"""Tuning target that trains real epochs through the engine."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..config_space import Configuration
from ..gnn.workload import GnnWorkload
from .runner import DETERMINISTIC, EpochResult, run_epoch


@dataclass
class EngineTarget:
    """Callable ``cfg -> epoch seconds``; each call trains one epoch on the shared workload."""

    workload: GnnWorkload
    total_cores: Optional[int] = None
    mode: str = DETERMINISTIC
    history: list = field(default_factory=list)

    def __call__(self, cfg: Configuration) -> float:
        result: EpochResult = run_epoch(cfg, self.workload, self.mode, total_cores=self.total_cores)
        self.history.append((cfg, result))
        return result.epoch_time
