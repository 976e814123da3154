"""squiresim: deterministic cycle-approximate simulator of the Squire accelerator."""

from .errors import SimulationFault, SimulationTimeout
from .machine import SquireConfig, SquireMachine, RunReport, host_execute
from .memory import SimMemory, CacheModel, mpki
from .syncmod import SyncModule, GlobalCounter, LocalCounters

__all__ = [
    "SimulationFault",
    "SimulationTimeout",
    "SquireConfig",
    "SquireMachine",
    "RunReport",
    "host_execute",
    "SimMemory",
    "CacheModel",
    "mpki",
    "SyncModule",
    "GlobalCounter",
    "LocalCounters",
]
