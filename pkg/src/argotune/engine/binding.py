"""Core binding through the OS affinity interface."""
from __future__ import annotations

import logging
import os
from typing import Iterable, Optional, Sequence

logger = logging.getLogger(__name__)

DISABLE_ENV = "ARGO_DISABLE_BINDING"

APPLIED = "applied"
UNSUPPORTED = "unsupported"


def affinity_supported() -> bool:
    return hasattr(os, "sched_setaffinity") and hasattr(os, "sched_getaffinity")


def binding_disabled() -> bool:
    return os.environ.get(DISABLE_ENV, "") not in ("", "0")


def available_cpus() -> list[int]:
    if affinity_supported():
        return sorted(os.sched_getaffinity(0))
    return list(range(os.cpu_count() or 1))


def physical_cores() -> int:
    return len(available_cpus())


def core_map(total_cores: int) -> Optional[list[int]]:
    """Logical core index -> OS cpu id, or None when binding cannot be honoured.

    Binding is off when disabled by environment, unsupported by the OS, or
    when ``total_cores`` exceeds the cpus this process may run on (a
    simulated machine).
    """
    if binding_disabled() or not affinity_supported():
        return None
    cpus = available_cpus()
    if total_cores > len(cpus):
        return None
    return cpus[:total_cores]


def bind_current_thread(core_ids: Iterable[int], cpu_map: Optional[Sequence[int]]) -> str:
    """Restrict the calling thread to ``core_ids`` (logical); never raises.

    On Linux, pid 0 addresses the calling thread, so sampler and trainer
    threads of one worker can hold different masks.
    """
    if cpu_map is None:
        return UNSUPPORTED
    mask = {cpu_map[c] for c in core_ids}
    try:
        os.sched_setaffinity(0, mask)
    except (OSError, ValueError, IndexError) as exc:
        logger.warning("affinity call rejected (%s); running unbound", exc)
        return UNSUPPORTED
    return APPLIED


def current_mask() -> Optional[frozenset]:
    if not affinity_supported():
        return None
    return frozenset(os.sched_getaffinity(0))


def bind_cores(spec, cpu_map: Optional[Sequence[int]] = None, role: str = "training") -> str:
    """Bind the calling thread to the sampling or training cores of ``spec``.

    Without an explicit ``cpu_map``, the worker's logical ids are mapped onto
    the cpus this process may use.
    """
    if cpu_map is None:
        total = 1 + max(spec.core_ids) if spec.core_ids else 0
        cpu_map = core_map(total)
        if cpu_map is None:
            logger.warning("core binding unavailable on this host; worker %d runs unbound", spec.worker_id)
            return UNSUPPORTED
    ids = spec.sampling_core_ids if role == "sampling" else spec.training_core_ids
    return bind_current_thread(ids, cpu_map)
