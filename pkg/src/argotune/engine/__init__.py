"""Multi-process training engine."""
from .binding import APPLIED, DISABLE_ENV, UNSUPPORTED, bind_cores, core_map, physical_cores
from .plan import ConfigurationRejected, WorkerSpec, check_disjoint, partition_epoch, plan_workers, split_sizes
from .runner import DETERMINISTIC, STOCHASTIC, DeadlockError, EngineError, EpochResult, run_epoch
from .sync import ShapeMismatch, sync_gradients
from .target import EngineTarget
from .wire import WireError, decode, encode

__all__ = [
    "APPLIED", "DISABLE_ENV", "UNSUPPORTED", "bind_cores", "core_map", "physical_cores",
    "ConfigurationRejected", "WorkerSpec", "check_disjoint", "partition_epoch", "plan_workers", "split_sizes",
    "DETERMINISTIC", "STOCHASTIC", "DeadlockError", "EngineError", "EpochResult", "run_epoch",
    "ShapeMismatch", "sync_gradients", "EngineTarget", "WireError", "decode", "encode",
]
