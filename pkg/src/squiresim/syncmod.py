"""Hardware synchronization module: one ordered global counter plus per-worker local counters.

The global counter commits increments in strict worker round-robin order.
A token names the worker whose increment commits next; increments arriving
out of turn are parked in a per-worker pending count and drained, in token
order, as soon as the token reaches them.  Local counters are plain monotone
counters, one per worker, with no ordering constraint.

All counters are 64-bit and cost one cycle to access; the timing side of
that is charged by the machine, not here.
"""

from .errors import SimulationFault


class GlobalCounter:
    """Ordered-increment global counter with token and pending queues.

    `committed_log` records the worker id of every committed increment in
    commit order.  It is diagnostic state only and never serialized.
    """

    def __init__(self, num_workers, max_pending=None):
        if num_workers < 1:
            raise SimulationFault("global counter needs at least one worker")
        self.num_workers = num_workers
        self.max_pending = max_pending
        self.value = 0
        self.token = 0
        self.pending = [0] * num_workers
        self.committed_log = []
        self.max_pending_seen = 0

    def reset(self):
        self.value = 0
        self.token = 0
        self.pending = [0] * self.num_workers
        self.committed_log = []
        self.max_pending_seen = 0

    def inc(self, worker):
        """Register one increment from `worker`; returns number of commits it caused."""
        if not 0 <= worker < self.num_workers:
            raise SimulationFault(f"inc_gcounter: worker {worker} out of range")
        if worker != self.token:
            self.pending[worker] += 1
            if self.max_pending is not None and self.pending[worker] > self.max_pending:
                raise SimulationFault(
                    f"global counter pending queue overflow on worker {worker}"
                )
            self.max_pending_seen = max(self.max_pending_seen, self.pending[worker])
            return 0
        commits = 1
        self._commit(worker)
        # Drain parked increments in token order until the next owner has none.
        while self.pending[self.token] > 0:
            self.pending[self.token] -= 1
            commits += 1
            self._commit(self.token)
        return commits

    def _commit(self, worker):
        self.value += 1
        self.committed_log.append(worker)
        self.token = (worker + 1) % self.num_workers

    def total_pending(self):
        return sum(self.pending)


class LocalCounters:
    """Array of monotone 64-bit counters, one per worker."""

    def __init__(self, num_workers):
        self.counters = [0] * num_workers

    def reset(self):
        self.counters = [0] * len(self.counters)

    def inc(self, index):
        if not 0 <= index < len(self.counters):
            raise SimulationFault(f"inc_lcounter: index {index} out of range")
        self.counters[index] += 1

    def get(self, index):
        if not 0 <= index < len(self.counters):
            raise SimulationFault(f"lcounter index {index} out of range")
        return self.counters[index]


class SyncModule:
    """The full synchronization block attached to one machine."""

    def __init__(self, num_workers, max_pending=None):
        self.gcounter = GlobalCounter(num_workers, max_pending=max_pending)
        self.lcounters = LocalCounters(num_workers)

    def reset(self):
        self.gcounter.reset()
        self.lcounters.reset()

    def g_satisfied(self, threshold):
        return self.gcounter.value >= threshold

    def l_satisfied(self, index, threshold):
        return self.lcounters.get(index) >= threshold
