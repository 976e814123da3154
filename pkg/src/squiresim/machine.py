"""The Squire machine: worker contexts, host context, arbiter, clock and reports.

The simulator is a deterministic discrete-event engine.  Programs are
resumable generators yielding costed actions (see `actions`); the engine
advances a single clock, serving at most one worker L2 request per cycle
through a round-robin arbiter and running the ordered-counter protocol of
the synchronization module.  Identical config + inputs + scheduler_seed
always produce bit-identical reports.

Timing approximations, by design:
  - runs of consecutive L1 hits inside one 'touch' action are processed
    atomically (a peer invalidation landing mid-run is seen by the next
    action, not mid-run);
  - write misses are posted: the worker pays one cycle and the write-through
    transaction drains through the arbiter in the background, stalling the
    worker only when its write buffer is full;
  - write hits do not consume arbiter slots (coalescing write-through
    buffer assumed).
"""

import heapq
import itertools
import math
import random
from dataclasses import dataclass, field, asdict
from collections import deque

from .errors import SimulationFault, SimulationTimeout
from .memory import SimMemory, CacheModel, mpki
from .syncmod import SyncModule

HW_COUNTERS = "hardware-counters"
SW_LOCK = "software-lock"

SCHEMA_VERSION = 1


def _is_pow2(x):
    return x > 0 and (x & (x - 1)) == 0


@dataclass
class SquireConfig:
    """Machine parameters; defaults model one 16-worker engine."""

    num_workers: int = 16
    worker_issue_width: int = 2
    host_ipc_factor: float = 3.0
    l1d_size: int = 8192
    l1d_assoc: int = 4
    line_bytes: int = 64
    host_l1d_size: int = 65536
    host_l1d_assoc: int = 4
    l2_latency_cycles: int = 4
    beyond_l2_latency_cycles: int = 40
    l2_miss_ratio: float = 0.0
    counter_access_cycles: int = 1  # fixed by the hardware model
    scheduler_seed: int = 0
    sync_backend: str = HW_COUNTERS
    lock_acquire_cycles: int = 30
    gcounter_queue_depth: int | None = None
    write_buffer_depth: int = 8
    mem_size: int = 1 << 26

    def validate(self):
        if not 1 <= self.num_workers <= 64:
            raise SimulationFault("num_workers must be in 1..64")
        if self.worker_issue_width < 1:
            raise SimulationFault("worker_issue_width must be >= 1")
        if self.host_ipc_factor <= 0:
            raise SimulationFault("host_ipc_factor must be positive")
        for size, assoc in ((self.l1d_size, self.l1d_assoc),
                            (self.host_l1d_size, self.host_l1d_assoc)):
            if not _is_pow2(size) or not _is_pow2(self.line_bytes):
                raise SimulationFault("cache and line sizes must be powers of two")
            if size % self.line_bytes:
                raise SimulationFault("line size must divide cache size")
            if size % (assoc * self.line_bytes):
                raise SimulationFault("cache size must be a multiple of assoc*line")
        if self.counter_access_cycles != 1:
            raise SimulationFault("counter_access_cycles is fixed at 1")
        if self.sync_backend not in (HW_COUNTERS, SW_LOCK):
            raise SimulationFault(f"unknown sync_backend {self.sync_backend!r}")
        if self.lock_acquire_cycles < 1:
            raise SimulationFault("lock_acquire_cycles must be >= 1")
        if not 0.0 <= self.l2_miss_ratio <= 1.0:
            raise SimulationFault("l2_miss_ratio must be in [0, 1]")
        return self

    def to_dict(self):
        return asdict(self)

    @property
    def host_ops_per_cycle(self):
        return max(1, round(self.worker_issue_width * self.host_ipc_factor))


class ProgramContext:
    """Handle passed to programs: identity, memory views, counter peeks.

    Peeks are free; programs account for counter accesses with 'cbatch'
    actions per the cost table.
    """

    def __init__(self, machine, cid):
        self._machine = machine
        self._cid = cid

    @property
    def is_host(self):
        return self._cid == self._machine.config.num_workers

    def id_worker(self):
        if self.is_host:
            raise SimulationFault("id_worker() called from the host context")
        return self._cid

    def num_workers(self):
        return self._machine.config.num_workers

    @property
    def mem(self):
        return self._machine.memory

    def gvalue(self):
        return self._machine.sync.gcounter.value

    def lvalue(self, w):
        return self._machine.sync.lcounters.get(w)

    def mark(self, tag, payload=None):
        if self._machine.marks is not None:
            self._machine.marks.append((self._machine.now, self._cid, tag, payload))


class _Ctx:
    __slots__ = (
        "cid", "is_host", "gen", "state", "ops_per_cycle",
        "current", "touch_idx", "seg_start", "finish_at", "phase",
        "blocked_on", "block_start", "resume_scheduled", "pending_bg_write",
        "run_start", "end_cycle", "cache", "api",
        "cyc_compute", "cyc_mem", "cyc_counter", "cyc_wait", "active_cycles",
        "l2_accesses", "instr_ops", "instr_mem", "instr_counter", "grants",
    )

    def __init__(self, cid, is_host, ops_per_cycle, cache, api):
        self.cid = cid
        self.is_host = is_host
        self.ops_per_cycle = ops_per_cycle
        self.cache = cache
        self.api = api
        self.gen = None
        self.state = "halted"
        self.current = None
        self.touch_idx = 0
        self.seg_start = 0
        self.finish_at = -1
        self.phase = None
        self.blocked_on = None
        self.block_start = 0
        self.resume_scheduled = False
        self.pending_bg_write = None
        self.run_start = 0
        self.end_cycle = 0
        self.cyc_compute = 0
        self.cyc_mem = 0
        self.cyc_counter = 0
        self.cyc_wait = 0
        self.active_cycles = 0
        self.l2_accesses = 0
        self.instr_ops = 0
        self.instr_mem = 0
        self.instr_counter = 0
        self.grants = 0

    def stats_dict(self):
        return {
            "compute": self.cyc_compute,
            "mem_stall": self.cyc_mem,
            "counter": self.cyc_counter,
            "wait": self.cyc_wait,
            "cycles": self.active_cycles,
            "l1_hits": self.cache.hits,
            "l1_misses": self.cache.misses,
            "l2_accesses": self.l2_accesses,
            "instructions": self.instr_ops + self.instr_mem + self.instr_counter,
        }


class SquireMachine:
    """One host core plus its Squire engine, driven by a deterministic event loop."""

    def __init__(self, config=None):
        self.config = (config or SquireConfig()).validate()
        cfg = self.config
        self.memory = SimMemory(cfg.mem_size, cfg.line_bytes)
        self.sync = SyncModule(cfg.num_workers, max_pending=cfg.gcounter_queue_depth)
        self.now = 0
        self._last_cycle = 0
        self._heap = []
        self._serial = itertools.count()
        self._snoop_dir = {}  # line number -> ids of caches holding it
        self.contexts = []
        for w in range(cfg.num_workers):
            cache = CacheModel(cfg.l1d_size, cfg.l1d_assoc, cfg.line_bytes,
                               directory=self._snoop_dir, cache_id=w)
            self.contexts.append(_Ctx(w, False, cfg.worker_issue_width, cache,
                                      ProgramContext(self, w)))
        host_cache = CacheModel(cfg.host_l1d_size, cfg.host_l1d_assoc, cfg.line_bytes,
                                directory=self._snoop_dir, cache_id=cfg.num_workers)
        self.host = _Ctx(cfg.num_workers, True, cfg.host_ops_per_cycle, host_cache,
                         ProgramContext(self, cfg.num_workers))
        self.contexts.append(self.host)
        rng = random.Random(cfg.scheduler_seed)
        self._prio = list(range(len(self.contexts)))
        rng.shuffle(self._prio)
        # arbiter
        self._arb_queues = [deque() for _ in range(cfg.num_workers)]
        self._arb_ptr = cfg.num_workers - 1
        self._arb_event_at = None
        self._arb_gen = 0
        self._arb_pending = 0
        self._last_grant = -1
        self.arbiter_grants = 0
        self._l2_ordinal = 0
        self._lock_free = 0
        self._blocked_count = 0
        # diagnostics
        self.gcommit_cycles = []
        self.stage_marks = []
        self.marks = None       # set to [] to record program marks
        self.mem_trace = None   # set to [] to record worker L1 accesses
        self.grant_log = None   # set to [] to record (cycle, worker)
        self.deadlock = None

    # ---------------------------------------------------------------- events

    def _push(self, cycle, kind, data):
        n = len(self.contexts)
        if kind == "arb":
            # after same-cycle context events; request visibility is enforced
            # by ready_at, and late arbitration lets the grant batch see every
            # same-cycle contender
            prio = n
        else:
            prio = (self._prio[data] + cycle) % n
        heapq.heappush(self._heap, (cycle, prio, next(self._serial), kind, data))

    def _schedule_ctx(self, ctx, cycle):
        if not ctx.resume_scheduled:
            ctx.resume_scheduled = True
            self._push(cycle, "ctx", ctx.cid)

    def _schedule_arb(self, cycle):
        # at most one live arbiter event; superseded events go stale by generation
        if self._arb_event_at is None or cycle < self._arb_event_at:
            self._arb_event_at = cycle
            self._arb_gen += 1
            self._push(cycle, "arb", self._arb_gen)

    # ---------------------------------------------------------------- control

    def load_host_program(self, gen):
        if self.host.state not in ("halted",):
            raise SimulationFault("host program loaded while host is active")
        self.host.gen = gen
        self.host.state = "running"
        self.host.run_start = self.now
        self._schedule_ctx(self.host, self.now)

    def start_squire(self, factory, args):
        """Reset counters and launch every worker on factory(ctx, args)."""
        self._start_workers(factory, args, self.now)

    def _start_workers(self, factory, args, cycle):
        for w in range(self.config.num_workers):
            if self.contexts[w].state != "halted":
                raise SimulationFault("start_squire while workers are active")
        self.sync.reset()
        for w in range(self.config.num_workers):
            ctx = self.contexts[w]
            ctx.gen = factory(ctx.api, args)
            ctx.state = "running"
            ctx.current = None
            ctx.run_start = cycle
            self._schedule_ctx(ctx, cycle)

    # ---------------------------------------------------------------- running

    def run_until_idle(self, limit=500_000_000):
        """Drain the event queue; returns a RunReport (deadlock reported, not raised)."""
        heap = self._heap
        while heap:
            cycle, _, _, kind, data = heapq.heappop(heap)
            if cycle > limit:
                raise SimulationTimeout(limit, self._blocked_dump())
            self.now = cycle
            self._last_cycle = cycle
            if kind == "arb":
                self._on_arb(cycle, data)
            else:
                self._on_ctx(self.contexts[data], cycle)
        blocked = self._blocked_dump()
        if blocked:
            self.deadlock = {
                "blocked": blocked,
                "gcounter": {
                    "value": self.sync.gcounter.value,
                    "token": self.sync.gcounter.token,
                    "pending": list(self.sync.gcounter.pending),
                },
                "lcounters": list(self.sync.lcounters.counters),
            }
        return self.build_report()

    def step_cycle(self):
        """Advance exactly one cycle; returns a small delta summary."""
        target = self.now
        processed = 0
        heap = self._heap
        while heap and heap[0][0] == target:
            cycle, _, _, kind, data = heapq.heappop(heap)
            self.now = cycle
            self._last_cycle = max(self._last_cycle, cycle)
            if kind == "arb":
                self._on_arb(cycle, data)
            else:
                self._on_ctx(self.contexts[data], cycle)
            processed += 1
        self.now = target + 1
        return {"cycle": target, "events": processed}

    def idle(self):
        return all(c.state == "halted" for c in self.contexts) and not self._heap

    def _blocked_dump(self):
        out = []
        for ctx in self.contexts:
            if ctx.state == "blocked" and ctx.blocked_on is not None:
                cond = ctx.blocked_on
                if cond[0] == "g":
                    cur = self.sync.gcounter.value
                    desc = {"context": self._ctx_name(ctx), "wait": "gcounter",
                            "threshold": cond[1], "current": cur}
                else:
                    cur = self.sync.lcounters.get(cond[1])
                    desc = {"context": self._ctx_name(ctx), "wait": f"lcounter[{cond[1]}]",
                            "threshold": cond[2], "current": cur}
                out.append(desc)
        return out

    def _ctx_name(self, ctx):
        return "host" if ctx.is_host else f"worker{ctx.cid}"

    # ---------------------------------------------------------------- arbiter

    # How far ahead of a request's ready cycle a grant may be pre-committed
    # without an arbitration event.  Bounds the ordering error between
    # requesters whose action spans overlap; heavier backlogs always go
    # through events and contend fairly.
    _INLINE_GRANT_HORIZON = 8

    def _enqueue_request(self, wid, entry):
        if self._arb_pending == 0 and self._arb_event_at is None \
                and self._last_grant - entry[1] <= self._INLINE_GRANT_HORIZON:
            self._grant(wid, entry, max(entry[1], self._last_grant + 1))
            return
        self._arb_queues[wid].append(entry)
        self._arb_pending += 1
        self._schedule_arb(max(self.now + 1, self._last_grant + 1))

    def _grant(self, wid, entry, cycle):
        self._arb_ptr = wid
        self._last_grant = cycle
        self.arbiter_grants += 1
        ctx = self.contexts[wid]
        ctx.grants += 1
        ctx.l2_accesses += 1
        if self.grant_log is not None:
            self.grant_log.append((cycle, wid))
        if entry[0] == "demand":
            lat = self._l2_latency()
            self._schedule_ctx(ctx, cycle + lat)
        else:  # background write drained
            if ctx.pending_bg_write is not None \
                    and self._bg_count(wid) < self.config.write_buffer_depth:
                addr = ctx.pending_bg_write
                ctx.pending_bg_write = None
                self._enqueue_request(wid, ("bg", cycle + 1, addr))
                self._schedule_ctx(ctx, cycle + 1)

    def _bg_count(self, wid):
        return sum(1 for e in self._arb_queues[wid] if e[0] == "bg")

    def _l2_latency(self):
        """Latency of one granted L2 access; the deterministic miss hook adds beyond-L2."""
        self._l2_ordinal += 1
        lat = self.config.l2_latency_cycles
        r = self.config.l2_miss_ratio
        if r > 0.0 and math.floor(self._l2_ordinal * r) > math.floor((self._l2_ordinal - 1) * r):
            lat += self.config.beyond_l2_latency_cycles
        return lat

    def _on_arb(self, cycle, gen):
        """Grant round-robin, batching consecutive cycles while no other event
        is due; one grant per cycle is preserved via last_grant."""
        if gen != self._arb_gen:
            return  # superseded
        self._arb_event_at = None
        nw = self.config.num_workers
        queues = self._arb_queues
        heap = self._heap
        g = max(cycle, self._last_grant + 1)
        while self._arb_pending:
            if heap and heap[0][0] <= g:
                # another event is due first and may add contenders
                self._schedule_arb(g)
                return
            chosen = None
            earliest = None
            for off in range(1, nw + 1):
                wid = (self._arb_ptr + off) % nw
                q = queues[wid]
                if q:
                    ready = q[0][1]
                    if ready <= g:
                        chosen = wid
                        break
                    if earliest is None or ready < earliest:
                        earliest = ready
            if chosen is None:
                g = earliest
                continue
            entry = queues[chosen].popleft()
            self._arb_pending -= 1
            self._grant(chosen, entry, g)
            g = self._last_grant + 1

    # ---------------------------------------------------------------- context engine

    def _on_ctx(self, ctx, cycle):
        ctx.resume_scheduled = False
        if ctx.state == "halted":
            return
        if ctx.state == "blocked":
            # wakes are only scheduled once the condition holds (monotone counters)
            ctx.cyc_wait += cycle - ctx.block_start
            ctx.blocked_on = None
            ctx.state = "running"
            if self.config.sync_backend == SW_LOCK and ctx.current and ctx.current[0].startswith("wait"):
                ctx.instr_counter += 1  # each recheck is another counter access
                self._sw_lock_round(ctx, cycle, recheck=True)
                return
            ctx.current = None  # hardware wait completes on wake
        elif ctx.state == "pending_mem":
            ctx.cyc_mem += cycle - ctx.seg_start
            ctx.state = "running"
            self._continue_touch(ctx, cycle)
            return
        elif ctx.state == "pending_bgroom":
            ctx.cyc_mem += cycle - ctx.seg_start
            ctx.state = "running"
            self._continue_touch(ctx, cycle)
            return
        elif ctx.phase == "lock_effect" and ctx.finish_at == cycle:
            ctx.phase = None
            act = ctx.current
            ctx.current = None
            if act[0] == "inc_g":
                self._commit_ginc(ctx, cycle)
            elif act[0] == "inc_l":
                self._apply_linc(act[1], cycle)
        elif ctx.phase == "lock_check" and ctx.finish_at == cycle:
            ctx.phase = None
            if self._wait_satisfied(ctx.current):
                ctx.current = None
            else:
                ctx.state = "blocked"
                ctx.blocked_on = self._wait_condition(ctx.current)
                ctx.block_start = cycle
                self._blocked_count += 1
                return
        elif ctx.current is not None and ctx.finish_at == cycle:
            ctx.current = None
        self._run(ctx, cycle)

    def _run(self, ctx, cycle):
        while True:
            if ctx.current is None:
                try:
                    act = ctx.gen.send(None)
                except StopIteration:
                    self._finish_ctx(ctx, cycle)
                    return
                ctx.current = act
                ctx.touch_idx = 0
            status = self._dispatch(ctx, ctx.current, cycle)
            if status is None:
                return
            if status == cycle:
                ctx.current = None  # zero-cost action; keep going this cycle
                continue
            ctx.finish_at = status
            self._schedule_ctx(ctx, status)
            return

    def _finish_ctx(self, ctx, cycle):
        ctx.state = "halted"
        ctx.gen = None
        ctx.current = None
        ctx.end_cycle = cycle
        ctx.active_cycles += cycle - ctx.run_start

    def _dispatch(self, ctx, act, cycle):
        """Process one action at `cycle`; returns its completion cycle, or None
        when the context blocked / awaits an arbiter grant."""
        kind = act[0]
        if kind == "compute":
            ops = act[1]
            if ops < 1:
                raise SimulationFault("compute op count must be >= 1")
            dur = -(-ops // ctx.ops_per_cycle)
            ctx.cyc_compute += dur
            ctx.instr_ops += ops
            return cycle + dur
        if kind == "touch":
            return self._touch_loop(ctx, cycle)
        if kind == "work":
            ops = act[1]
            start = cycle
            if ops > 0:
                dur = -(-ops // ctx.ops_per_cycle)
                ctx.cyc_compute += dur
                ctx.instr_ops += ops
                start += dur
            return self._touch_loop(ctx, start)
        if kind == "inc_g":
            if ctx.is_host:
                raise SimulationFault("inc_gcounter() is worker-only")
            ctx.instr_counter += 1
            if self.config.sync_backend == SW_LOCK:
                return self._sw_lock_effect(ctx, cycle)
            ctx.cyc_counter += 1
            self._commit_ginc(ctx, cycle)
            return cycle + 1
        if kind == "inc_l":
            if ctx.is_host:
                raise SimulationFault("inc_lcounter() is worker-only")
            ctx.instr_counter += 1
            if self.config.sync_backend == SW_LOCK:
                return self._sw_lock_effect(ctx, cycle)
            ctx.cyc_counter += 1
            self._apply_linc(act[1], cycle)
            return cycle + 1
        if kind in ("wait_g", "wait_l"):
            ctx.instr_counter += 1
            if self.config.sync_backend == SW_LOCK:
                self._sw_lock_round(ctx, cycle, recheck=False)
                return None
            if self._wait_satisfied(act):
                ctx.cyc_wait += 1
                return cycle + 1
            ctx.state = "blocked"
            ctx.blocked_on = self._wait_condition(act)
            ctx.block_start = cycle
            self._blocked_count += 1
            return None
        if kind == "cbatch" or kind == "cwork":
            n = act[1]
            ctx.instr_counter += n
            end = cycle
            if n > 0:
                if self.config.sync_backend == SW_LOCK:
                    for _ in range(n):
                        start = max(end, self._lock_free_at)
                        end = start + self.config.lock_acquire_cycles
                        self._lock_free_at = end
                else:
                    end = cycle + n
                ctx.cyc_counter += end - cycle
            if kind == "cwork" and act[2] > 0:
                dur = -(-act[2] // ctx.ops_per_cycle)
                ctx.cyc_compute += dur
                ctx.instr_ops += act[2]
                end += dur
            return end if end > cycle else cycle
        if kind == "halt":
            if ctx.is_host:
                raise SimulationFault("stop_worker() is worker-only; host programs return")
            ctx.cyc_counter += 1
            ctx.instr_counter += 1
            self._finish_ctx(ctx, cycle + 1)
            return None
        if kind == "start_squire":
            if not ctx.is_host:
                raise SimulationFault("start_squire() is host-only")
            ctx.cyc_counter += 1
            ctx.instr_counter += 1
            self._start_workers(act[1], act[2], cycle + 1)
            return cycle + 1
        if kind == "stage":
            self.stage_marks.append((cycle, act[1]))
            return cycle
        raise SimulationFault(f"unknown action {act!r}")

    # ----- synchronization helpers

    def _wait_satisfied(self, act):
        if act[0] == "wait_g":
            return self.sync.g_satisfied(act[1])
        return self.sync.l_satisfied(act[1], act[2])

    def _wait_condition(self, act):
        if act[0] == "wait_g":
            return ("g", act[1])
        return ("l", act[1], act[2])

    def _commit_ginc(self, ctx, cycle):
        commits = self.sync.gcounter.inc(ctx.cid)
        for _ in range(commits):
            self.gcommit_cycles.append(cycle)
        if commits:
            self._wake_waiters(cycle)

    def _apply_linc(self, index, cycle):
        self.sync.lcounters.inc(index)
        self._wake_waiters(cycle)

    def _wake_waiters(self, cycle):
        if self._blocked_count == 0:
            return
        for ctx in self.contexts:
            if ctx.state == "blocked" and not ctx.resume_scheduled:
                cond = ctx.blocked_on
                sat = (self.sync.g_satisfied(cond[1]) if cond[0] == "g"
                       else self.sync.l_satisfied(cond[1], cond[2]))
                if sat:
                    self._blocked_count -= 1
                    self._schedule_ctx(ctx, cycle + 1)

    # ----- software-lock backend

    @property
    def _lock_free_at(self):
        return self._lock_free

    @_lock_free_at.setter
    def _lock_free_at(self, v):
        self._lock_free = v

    def _sw_lock_effect(self, ctx, cycle):
        """inc under the software lock: effect applies when the lock round ends."""
        start = max(cycle, self._lock_free_at)
        end = start + self.config.lock_acquire_cycles
        self._lock_free_at = end
        ctx.cyc_counter += end - cycle
        ctx.phase = "lock_effect"
        ctx.finish_at = end
        self._schedule_ctx(ctx, end)
        return None

    def _sw_lock_round(self, ctx, cycle, recheck):
        """One lock-acquire/check/release round for a wait under the software lock."""
        start = max(cycle, self._lock_free_at)
        end = start + self.config.lock_acquire_cycles
        self._lock_free_at = end
        ctx.cyc_counter += end - cycle
        ctx.phase = "lock_check"
        ctx.finish_at = end
        self._schedule_ctx(ctx, end)

    # ----- memory

    def _continue_touch(self, ctx, cycle):
        end = self._touch_loop(ctx, cycle)
        if end is None:
            return
        if end == cycle:
            ctx.current = None
            self._run(ctx, cycle)
            return
        ctx.finish_at = end
        self._schedule_ctx(ctx, end)

    def _touch_loop(self, ctx, cycle):
        act = ctx.current
        accesses = act[1] if act[0] == "touch" else act[2]
        line = self.config.line_bytes
        bufdepth = self.config.write_buffer_depth
        t = cycle
        i = ctx.touch_idx
        n = len(accesses)
        mem_limit = self.memory._next
        trace = self.mem_trace if not ctx.is_host else None
        lookup = ctx.cache.lookup
        snoop = self._snoop_dir
        is_host = ctx.is_host
        cid = ctx.cid
        while i < n:
            addr, nbytes, is_write = accesses[i]
            if addr < 0 or addr + nbytes > mem_limit:
                self.memory.check_range(addr, nbytes)  # raises with the region map
            ctx.instr_mem += 1
            if trace is not None:
                trace.append((cid, addr - addr % line, is_write))
            if is_write:
                owners = snoop.get(addr // line)
                if owners and (len(owners) > 1 or cid not in owners):
                    for oid in sorted(owners - {cid}):
                        self.contexts[oid].cache.invalidate(addr)
                if not lookup(addr, False):
                    if is_host:
                        ctx.l2_accesses += 1
                    else:
                        if self._bg_count(cid) >= bufdepth:
                            ctx.cyc_mem += t + 1 - cycle
                            ctx.pending_bg_write = addr
                            ctx.state = "pending_bgroom"
                            ctx.seg_start = t + 1
                            ctx.touch_idx = i + 1
                            return None
                        self._enqueue_request(cid, ("bg", t + 1, addr))
                t += 1
            else:
                if lookup(addr, True):
                    t += 1
                elif is_host:
                    ctx.l2_accesses += 1
                    t += 1 + self._l2_latency()
                elif self._arb_pending == 0 and self._arb_event_at is None \
                        and self._last_grant - t <= self._INLINE_GRANT_HORIZON:
                    # near-idle bus: the round trip completes without an event
                    grant = max(t + 1, self._last_grant + 1)
                    self._arb_ptr = cid
                    self._last_grant = grant
                    self.arbiter_grants += 1
                    ctx.grants += 1
                    ctx.l2_accesses += 1
                    if self.grant_log is not None:
                        self.grant_log.append((grant, cid))
                    t = grant + self._l2_latency()
                else:
                    ctx.cyc_mem += t + 1 - cycle
                    ctx.state = "pending_mem"
                    ctx.seg_start = t + 1
                    ctx.touch_idx = i + 1
                    self._enqueue_request(cid, ("demand", t + 1))
                    return None
            i += 1
        ctx.touch_idx = i
        if t > cycle:
            ctx.cyc_mem += t - cycle
        return t

    # ---------------------------------------------------------------- report

    def build_report(self):
        cfg = self.config
        end = self._last_cycle
        for ctx in self.contexts:
            if ctx.state != "halted":
                end = max(end, self.now)
        cycles_total = max(end, max((c.end_cycle for c in self.contexts), default=0))
        workers = self.contexts[:cfg.num_workers]
        worker_instr = sum(c.instr_ops + c.instr_mem + c.instr_counter for c in workers)
        worker_misses = sum(c.cache.misses for c in workers)
        report = RunReport(
            config=cfg.to_dict(),
            cycles_total=cycles_total,
            stage_cycles=self._stage_cycles(cycles_total),
            per_worker=[c.stats_dict() for c in workers],
            host=self.host.stats_dict(),
            gcounter={
                "final": self.sync.gcounter.value,
                "token": self.sync.gcounter.token,
                "max_pending": self.sync.gcounter.max_pending_seen,
                "pending": list(self.sync.gcounter.pending),
            },
            lcounters=list(self.sync.lcounters.counters),
            arbiter={
                "grants": self.arbiter_grants,
                "per_worker": [c.grants for c in workers],
            },
            cache={
                "workers": {
                    "hits": sum(c.cache.hits for c in workers),
                    "misses": worker_misses,
                    "instructions": worker_instr,
                    "mpki": mpki(worker_misses, worker_instr),
                },
                "host": {
                    "hits": self.host.cache.hits,
                    "misses": self.host.cache.misses,
                    "instructions": self.host.instr_ops + self.host.instr_mem + self.host.instr_counter,
                    "mpki": mpki(self.host.cache.misses,
                                 self.host.instr_ops + self.host.instr_mem + self.host.instr_counter),
                },
            },
            deadlock=self.deadlock,
        )
        return report

    def _stage_cycles(self, cycles_total):
        if not self.stage_marks:
            return {}
        out = {}
        marks = list(self.stage_marks) + [(cycles_total, None)]
        for (c0, name), (c1, _) in zip(marks, marks[1:]):
            out[name] = out.get(name, 0) + (c1 - c0)
        return out


@dataclass
class RunReport:
    """Machine-readable account of one run; serializes to a flat JSON object."""

    config: dict
    cycles_total: int
    stage_cycles: dict
    per_worker: list
    host: dict
    gcounter: dict
    lcounters: list
    arbiter: dict
    cache: dict
    deadlock: dict | None
    schema_version: int = SCHEMA_VERSION

    def to_dict(self):
        return asdict(self)

    def crossfoot_ok(self):
        """Cycles charged to each context must tile its active span exactly."""
        for stats in self.per_worker + [self.host]:
            parts = stats["compute"] + stats["mem_stall"] + stats["counter"] + stats["wait"]
            if parts != stats["cycles"]:
                return False
        return True

    def worker_cycles(self):
        return sum(w["cycles"] for w in self.per_worker)


def host_execute(machine, program, limit=500_000_000):
    """Run a sequential program on the host context; baseline for speedups."""
    machine.load_host_program(program)
    return machine.run_until_idle(limit)
