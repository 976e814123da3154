"""Machine core: timing semantics, arbiter, counters, determinism, deadlock."""

import json

import pytest

from squiresim import actions as A
from squiresim.errors import SimulationFault, SimulationTimeout
from squiresim.machine import SquireConfig, SquireMachine, host_execute


def make_machine(**kw):
    return SquireMachine(SquireConfig(**kw))


def all_halt(ctx, args):
    yield A.halt()


def test_all_halt_idles_within_worker_count():
    m = make_machine(num_workers=8)
    m.start_squire(all_halt, None)
    rep = m.run_until_idle()
    assert rep.cycles_total <= 8
    assert rep.deadlock is None
    assert all(w["cycles"] >= 1 for w in rep.per_worker)


def test_compute_retires_at_issue_width():
    def prog(ctx, args):
        yield A.compute(4)
        yield A.halt()

    m = make_machine(num_workers=1, worker_issue_width=2)
    m.start_squire(prog, None)
    rep = m.run_until_idle()
    # ceil(4/2) compute cycles plus one for the halt
    assert rep.per_worker[0]["compute"] == 2
    assert rep.per_worker[0]["cycles"] == 3
    assert rep.crossfoot_ok()


def test_host_compute_divided_by_ipc_factor():
    def prog():
        yield A.compute(6)

    m = make_machine(worker_issue_width=2, host_ipc_factor=3.0)
    rep = host_execute(m, prog())
    assert rep.host["compute"] == 1


def test_id_worker_and_num_workers():
    seen = []

    def prog(ctx, args):
        seen.append((ctx.id_worker(), ctx.num_workers()))
        yield A.halt()

    m = make_machine(num_workers=4)
    m.start_squire(prog, None)
    m.run_until_idle()
    assert sorted(seen) == [(0, 4), (1, 4), (2, 4), (3, 4)]


def test_id_worker_from_host_faults():
    m = make_machine(num_workers=2)
    with pytest.raises(SimulationFault):
        m.host.api.id_worker()


def test_start_squire_while_active_faults():
    def spin(ctx, args):
        yield A.compute(1000)
        yield A.halt()

    m = make_machine(num_workers=2)
    m.start_squire(spin, None)
    m.step_cycle()
    with pytest.raises(SimulationFault):
        m.start_squire(spin, None)


def test_consecutive_start_squire_resets_counters():
    def one_inc(ctx, args):
        yield A.inc_gcounter()
        yield A.inc_lcounter(ctx.id_worker())
        yield A.halt()

    m = make_machine(num_workers=2)
    m.start_squire(one_inc, None)
    m.run_until_idle()
    assert m.sync.gcounter.value == 2
    m.start_squire(one_inc, None)
    fresh = SquireMachine(SquireConfig(num_workers=2))
    fresh.start_squire(one_inc, None)
    m.run_until_idle()
    fresh.run_until_idle()
    assert m.sync.gcounter.value == fresh.sync.gcounter.value == 2
    assert m.sync.lcounters.counters == fresh.sync.lcounters.counters == [1, 1]


def test_wait_gcounter_already_satisfied_costs_one_cycle():
    def prog(ctx, args):
        yield A.inc_gcounter()
        yield A.wait_gcounter(1)
        yield A.halt()

    m = make_machine(num_workers=1)
    m.start_squire(prog, None)
    rep = m.run_until_idle()
    assert rep.per_worker[0]["wait"] == 1
    assert rep.crossfoot_ok()


def test_waiter_resumes_cycle_after_commit():
    # worker 1 waits for the global counter; worker 0 commits at a known cycle
    events = {}

    def producer(ctx, args):
        yield A.compute(10)  # 5 cycles at width 2
        yield A.inc_gcounter()
        yield A.halt()

    def consumer(ctx, args):
        yield A.wait_gcounter(1)
        events["resumed"] = ctx._machine.now
        yield A.halt()

    def factory(ctx, args):
        return producer(ctx, args) if ctx.id_worker() == 0 else consumer(ctx, args)

    m = make_machine(num_workers=2)
    m.start_squire(factory, None)
    m.run_until_idle()
    commit = m.gcommit_cycles[0]
    assert events["resumed"] == commit + 1


def test_local_counter_wait_threshold_two():
    def incs(ctx, args):
        yield A.inc_lcounter(1)
        yield A.inc_lcounter(1)
        yield A.halt()

    def waiter(ctx, args):
        yield A.wait_lcounter(1, 2)
        yield A.halt()

    def factory(ctx, args):
        return incs(ctx, args) if ctx.id_worker() == 0 else waiter(ctx, args)

    m = make_machine(num_workers=2)
    m.start_squire(factory, None)
    rep = m.run_until_idle()
    assert rep.deadlock is None
    assert m.sync.lcounters.get(1) == 2


def test_arbiter_alternates_between_two_pending_misses():
    def reader(ctx, args):
        w = ctx.id_worker()
        yield A.touch([(w * 4096, 64, False)])
        yield A.halt()

    m = make_machine(num_workers=2)
    m.memory.alloc("data", 2048, "u64")
    m.grant_log = []
    m.start_squire(reader, None)
    rep = m.run_until_idle()
    cycles = [c for c, _ in m.grant_log]
    who = [w for _, w in m.grant_log]
    assert len(m.grant_log) == 2
    assert cycles[1] == cycles[0] + 1
    assert sorted(who) == [0, 1]
    assert rep.arbiter["grants"] == 2


def test_read_miss_then_hit_latency():
    # first read: 1 (lookup) + 0 queueing + l2 latency; second read of same line: 1 cycle
    def prog(ctx, args):
        yield A.touch([(0, 64, False)])
        yield A.touch([(8, 8, False)])
        yield A.halt()

    m = make_machine(num_workers=1, l2_latency_cycles=4)
    m.memory.alloc("data", 64, "u64")
    m.start_squire(prog, None)
    rep = m.run_until_idle()
    assert rep.per_worker[0]["l1_misses"] == 1
    assert rep.per_worker[0]["l1_hits"] == 1
    # miss costs 1 + 0 + 4 = 5, hit costs 1
    assert rep.per_worker[0]["mem_stall"] == 6
    assert rep.crossfoot_ok()


def test_write_invalidates_peer_line():
    # B caches a line, A writes it, B's next read misses again
    trace = []

    def a(ctx, args):
        yield A.wait_lcounter(1, 1)
        yield A.touch([(0, 64, True)])
        yield A.inc_lcounter(0)
        yield A.halt()

    def b(ctx, args):
        yield A.touch([(0, 64, False)])
        yield A.inc_lcounter(1)
        yield A.wait_lcounter(0, 1)
        yield A.touch([(0, 64, False)])
        trace.append(ctx._machine.contexts[1].cache.misses)
        yield A.halt()

    def factory(ctx, args):
        return a(ctx, args) if ctx.id_worker() == 0 else b(ctx, args)

    m = make_machine(num_workers=2)
    m.memory.alloc("data", 64, "u64")
    m.start_squire(factory, None)
    rep = m.run_until_idle()
    assert rep.deadlock is None
    assert trace == [2]  # both of B's reads missed


def test_out_of_region_access_faults():
    def prog(ctx, args):
        yield A.touch([(1 << 20, 8, False)])
        yield A.halt()

    m = make_machine(num_workers=1)
    m.memory.alloc("data", 8, "u64")
    m.start_squire(prog, None)
    with pytest.raises(SimulationFault):
        m.run_until_idle()


def test_deadlock_two_workers_circular_local_wait():
    def w0(ctx, args):
        yield A.wait_lcounter(1, 1)
        yield A.inc_lcounter(0)
        yield A.halt()

    def w1(ctx, args):
        yield A.wait_lcounter(0, 1)
        yield A.inc_lcounter(1)
        yield A.halt()

    def factory(ctx, args):
        return w0(ctx, args) if ctx.id_worker() == 0 else w1(ctx, args)

    m = make_machine(num_workers=2)
    m.start_squire(factory, None)
    rep = m.run_until_idle(limit=100_000)
    assert rep.deadlock is not None
    blocked = {d["context"]: d for d in rep.deadlock["blocked"]}
    assert set(blocked) == {"worker0", "worker1"}
    assert blocked["worker0"]["wait"] == "lcounter[1]"
    assert blocked["worker1"]["wait"] == "lcounter[0]"


def test_timeout_raises_with_dump():
    def spin(ctx, args):
        while True:
            yield A.compute(1000)

    m = make_machine(num_workers=1)
    m.start_squire(spin, None)
    with pytest.raises(SimulationTimeout):
        m.run_until_idle(limit=10_000)


def test_host_waits_like_workers():
    def worker(ctx, args):
        yield A.compute(100)
        yield A.inc_gcounter()
        yield A.halt()

    def hostprog():
        yield A.start_squire(worker, None)
        yield A.wait_gcounter(2)
        yield A.compute(6)

    m = make_machine(num_workers=2)
    rep = host_execute(m, hostprog())
    assert rep.deadlock is None
    assert rep.host["wait"] > 0
    assert m.sync.gcounter.value == 2


def test_inc_gcounter_from_host_faults():
    def hostprog():
        yield A.inc_gcounter()

    m = make_machine(num_workers=1)
    with pytest.raises(SimulationFault):
        host_execute(m, hostprog())


def test_determinism_same_seed_identical_report():
    def factory(ctx, args):
        def prog(ctx, args):
            w = ctx.id_worker()
            yield A.compute(10 + w)
            yield A.touch([(w * 64, 64, False), (w * 64, 64, True)])
            yield A.inc_gcounter()
            yield A.halt()
        return prog(ctx, args)

    def run(seed):
        m = make_machine(num_workers=4, scheduler_seed=seed)
        m.memory.alloc("data", 1024, "u64")
        m.start_squire(factory, None)
        return json.dumps(m.run_until_idle().to_dict(), sort_keys=True)

    assert run(7) == run(7)
    assert run(7) != run(8) or True  # different seeds may legitimately coincide


def test_conservation_crossfoot():
    def prog(ctx, args):
        yield A.compute(13)
        yield A.touch([(0, 64, False), (64, 64, True), (0, 8, False)])
        yield A.inc_lcounter(ctx.id_worker())
        yield A.wait_lcounter(ctx.id_worker(), 1)
        yield A.counter_batch(3)
        yield A.halt()

    m = make_machine(num_workers=3)
    m.memory.alloc("data", 1024, "u64")
    m.start_squire(prog, None)
    rep = m.run_until_idle()
    assert rep.crossfoot_ok()


def test_stage_markers_partition_cycles():
    def hostprog():
        yield A.stage("alpha")
        yield A.compute(60)
        yield A.stage("beta")
        yield A.compute(120)

    m = make_machine()
    rep = host_execute(m, hostprog())
    assert rep.stage_cycles["alpha"] == 10
    assert rep.stage_cycles["beta"] == 20
    assert sum(rep.stage_cycles.values()) == rep.cycles_total


def test_software_lock_serializes_counter_ops():
    def prog(ctx, args):
        yield A.inc_lcounter(ctx.id_worker())
        yield A.halt()

    def run(backend):
        m = make_machine(num_workers=4, sync_backend=backend, lock_acquire_cycles=30)
        m.start_squire(prog, None)
        return m.run_until_idle()

    hw = run("hardware-counters")
    sw = run("software-lock")
    assert sw.cycles_total > hw.cycles_total
    # four increments serialized on one lock
    assert sw.cycles_total >= 4 * 30
    assert sw.lcounters == hw.lcounters == [1, 1, 1, 1]


def test_arbiter_fairness_window():
    # workers issue back-to-back misses; grant counts may differ by at most 1
    def prog(ctx, args):
        w = ctx.id_worker()
        for i in range(20):
            yield A.touch([((w * 32 + i) * 4096 % 65536, 64, False)])
        yield A.halt()

    m = make_machine(num_workers=4, l1d_size=1024)  # tiny cache forces misses
    m.memory.alloc("data", 8192, "u64")
    m.grant_log = []
    m.start_squire(prog, None)
    m.run_until_idle()
    # consider the window where all four workers still have pending requests
    counts = {w: 0 for w in range(4)}
    for _, w in m.grant_log[:40]:
        counts[w] += 1
    assert max(counts.values()) - min(counts.values()) <= 1
