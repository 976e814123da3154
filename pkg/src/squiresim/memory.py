"""Simulated flat address space and the set-associative L1 data cache model.

Functional kernel data lives in one numpy-backed byte buffer; caches are
timing-only tag stores.  Keeping data in a single place means coherence can
only ever affect latencies, never values.
"""

import numpy as np

from .errors import SimulationFault

_DTYPES = {
    "u8": np.uint8,
    "i64": np.int64,
    "u64": np.uint64,
    "f64": np.float64,
}


class SimMemory:
    """Named, line-aligned regions carved out of a flat byte buffer by a bump allocator.

    `alloc` returns (base_address, numpy_view); kernels operate on the views
    directly so functional work is vectorized, and surface timing actions
    with the plain addresses.
    """

    def __init__(self, size=1 << 26, line=64):
        self.size = size
        self.line = line
        self.buf = np.zeros(size, dtype=np.uint8)
        self.regions = {}  # name -> (start, size)
        self._next = 0

    def alloc(self, name, count, dtype="u64"):
        dt = np.dtype(_DTYPES[dtype])
        nbytes = count * dt.itemsize
        start = self._next
        self._next = -(-(start + nbytes) // self.line) * self.line
        if self._next > self.size:
            raise SimulationFault(f"out of simulated memory allocating region {name!r}")
        if name in self.regions:
            raise SimulationFault(f"region {name!r} already registered")
        self.regions[name] = (start, nbytes)
        view = self.buf[start:start + nbytes].view(dt)
        return start, view

    def release_all(self):
        """Drop every region; reused by consecutive kernel runs on one machine."""
        self.regions = {}
        self._next = 0

    def check_range(self, addr, nbytes):
        for start, size in self.regions.values():
            if start <= addr and addr + nbytes <= start + size:
                return
        raise SimulationFault(
            f"access [{addr}, {addr + nbytes}) outside registered regions "
            f"{ {n: r for n, r in self.regions.items()} }"
        )


class CacheModel:
    """Set-associative, LRU, timing-only cache (tags, no data).

    hits + misses always equals total lookups; invalidations arrive from
    peer writes under the snoop model.  When several caches share a snoop
    `directory` (line number -> set of cache ids holding it), writers can
    invalidate exactly the caches that hold the line instead of probing
    every peer.
    """

    def __init__(self, size, assoc, line, directory=None, cache_id=None):
        if size % (assoc * line) != 0:
            raise SimulationFault("cache size must be a multiple of assoc*line")
        self.size = size
        self.assoc = assoc
        self.line = line
        self.sets = size // (assoc * line)
        if self.sets & (self.sets - 1):
            raise SimulationFault("cache set count must be a power of two")
        self.tags = [[] for _ in range(self.sets)]  # MRU first
        self.directory = directory
        self.cache_id = cache_id
        self.hits = 0
        self.misses = 0
        self.evictions = 0
        self.invalidations = 0

    def _locate(self, addr):
        lineno = addr // self.line
        return lineno % self.sets, lineno // self.sets

    def _dir_add(self, lineno):
        if self.directory is not None:
            self.directory.setdefault(lineno, set()).add(self.cache_id)

    def _dir_drop(self, lineno):
        if self.directory is not None:
            owners = self.directory.get(lineno)
            if owners is not None:
                owners.discard(self.cache_id)
                if not owners:
                    del self.directory[lineno]

    def lookup(self, addr, allocate):
        """One lookup; returns True on hit. Installs the line on miss iff `allocate`."""
        lineno = addr // self.line
        idx = lineno % self.sets
        tag = lineno // self.sets
        ways = self.tags[idx]
        if tag in ways:
            ways.remove(tag)
            ways.insert(0, tag)
            self.hits += 1
            return True
        self.misses += 1
        if allocate:
            if len(ways) >= self.assoc:
                victim = ways.pop()
                self.evictions += 1
                self._dir_drop(victim * self.sets + idx)
            ways.insert(0, tag)
            self._dir_add(lineno)
        return False

    def contains(self, addr):
        idx, tag = self._locate(addr)
        return tag in self.tags[idx]

    def invalidate(self, addr):
        lineno = addr // self.line
        idx = lineno % self.sets
        tag = lineno // self.sets
        ways = self.tags[idx]
        if tag in ways:
            ways.remove(tag)
            self.invalidations += 1
            self._dir_drop(lineno)

    def flush(self):
        if self.directory is not None:
            for idx in range(self.sets):
                for tag in self.tags[idx]:
                    self._dir_drop(tag * self.sets + idx)
        self.tags = [[] for _ in range(self.sets)]

    def stats(self):
        return {
            "hits": self.hits,
            "misses": self.misses,
            "evictions": self.evictions,
            "invalidations": self.invalidations,
        }


def mpki(misses, instructions_retired):
    """Misses per kilo-instruction; None when no instructions were retired."""
    if instructions_retired <= 0:
        return None
    return 1000.0 * misses / instructions_retired


def replay_trace(trace, size, assoc, line, num_caches):
    """Replay a recorded access trace through fresh caches of the given geometry.

    `trace` is a sequence of (cache_index, addr, is_write, ...) tuples in
    global order; writes invalidate the line in every peer cache.  Returns
    the aggregate miss count.  Used by the cache-size sweep so every size
    sees the exact same interleaved access/invalidation stream.
    """
    caches = [CacheModel(size, assoc, line) for _ in range(num_caches)]
    for entry in trace:
        who, addr, is_write = entry[0], entry[1], entry[2]
        caches[who].lookup(addr, allocate=not is_write)
        if is_write:
            for i, c in enumerate(caches):
                if i != who:
                    c.invalidate(addr)
    return sum(c.misses for c in caches)
