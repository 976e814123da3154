"""Fault types raised by the simulator."""


class SimulationFault(Exception):
    """Illegal machine usage: bad addresses, bad counter indices, protocol misuse."""


class SimulationTimeout(SimulationFault):
    """Cycle limit exceeded before the machine went idle.

    Carries a dump of every blocked context so the stuck condition can be
    diagnosed from the exception alone.
    """

    def __init__(self, limit, blocked_dump):
        self.limit = limit
        self.blocked_dump = blocked_dump
        super().__init__(f"cycle limit {limit} exceeded; blocked: {blocked_dump}")
