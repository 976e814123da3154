"""Ordered global counter protocol and local counter unit tests."""

import itertools

import pytest
from hypothesis import given, settings, strategies as st

from squiresim.errors import SimulationFault
from squiresim.syncmod import GlobalCounter, LocalCounters, SyncModule


def replay(num_workers, order):
    gc = GlobalCounter(num_workers)
    for w in order:
        gc.inc(w)
    return gc


def test_single_worker_identity():
    gc = replay(1, [0])
    assert gc.value == 1
    assert gc.token == 0
    assert gc.committed_log == [0]


def test_out_of_order_increments_park_then_drain():
    # W=3, token starts at 0: inc(1) and inc(2) park, inc(0) drains all three
    gc = GlobalCounter(3)
    gc.inc(1)
    assert gc.value == 0 and gc.pending[1] == 1
    gc.inc(2)
    assert gc.value == 0 and gc.pending[2] == 1
    gc.inc(0)
    assert gc.value == 3
    assert gc.token == 0
    assert gc.pending == [0, 0, 0]
    assert gc.committed_log == [0, 1, 2]


def test_token_initialized_to_zero():
    assert GlobalCounter(4).token == 0


def test_round_robin_log_two_rounds():
    gc = replay(2, [0, 1, 0, 1])
    assert gc.committed_log == [0, 1, 0, 1]
    assert gc.value == 4 and gc.token == 0


def test_uneven_counts_stall_at_token_owner():
    # worker 1 never increments, so worker 2's increment stays parked
    gc = replay(3, [0, 2])
    assert gc.value == 1
    assert gc.token == 1
    assert gc.pending == [0, 0, 1]


def test_out_of_range_worker_faults():
    gc = GlobalCounter(2)
    with pytest.raises(SimulationFault):
        gc.inc(2)


def test_pending_depth_limit():
    gc = GlobalCounter(2, max_pending=1)
    gc.inc(1)
    with pytest.raises(SimulationFault):
        gc.inc(1)


def _expected_final(num_workers, counts):
    """Commits drain round-robin from worker 0 until the token owner is dry."""
    remaining = list(counts)
    value = 0
    token = 0
    log = []
    while remaining[token] > 0:
        remaining[token] -= 1
        log.append(token)
        value += 1
        token = (token + 1) % num_workers
    return value, token, log


@pytest.mark.parametrize("num_workers", [1, 2, 3, 4])
@pytest.mark.parametrize("per_worker", [1, 2])
def test_all_interleavings_small(num_workers, per_worker):
    base = []
    for w in range(num_workers):
        base.extend([w] * per_worker)
    value, token, log = _expected_final(num_workers, [per_worker] * num_workers)
    seen = set()
    for order in itertools.permutations(base):
        if order in seen:
            continue
        seen.add(order)
        gc = replay(num_workers, order)
        assert gc.value == value
        assert gc.token == token
        assert gc.committed_log == log


@given(
    num_workers=st.integers(1, 4),
    counts=st.lists(st.integers(0, 3), min_size=4, max_size=4),
    seed=st.integers(0, 2**16),
)
@settings(max_examples=200, deadline=None)
def test_order_independence_random(num_workers, counts, seed):
    import random

    counts = counts[:num_workers]
    base = [w for w, c in enumerate(counts) for _ in range(c)]
    rng = random.Random(seed)
    order = base[:]
    rng.shuffle(order)
    gc = replay(num_workers, order)
    value, token, log = _expected_final(num_workers, counts)
    assert gc.value == value
    assert gc.token == token
    assert gc.committed_log == log
    assert sum(gc.pending) == len(base) - value


def test_committed_log_is_round_robin_prefix():
    gc = replay(4, [3, 2, 1, 0, 0, 1, 2, 3])
    assert gc.committed_log == [i % 4 for i in range(gc.value)]


def test_local_counters_monotone_and_indexed():
    lc = LocalCounters(4)
    lc.inc(2)
    assert lc.get(2) == 1
    lc.inc(2)
    assert lc.get(2) == 2
    with pytest.raises(SimulationFault):
        lc.inc(4)


def test_syncmodule_reset():
    sm = SyncModule(3)
    sm.gcounter.inc(0)
    sm.lcounters.inc(1)
    sm.reset()
    assert sm.gcounter.value == 0
    assert sm.gcounter.token == 0
    assert sm.lcounters.counters == [0, 0, 0]
    assert sm.g_satisfied(0) and not sm.g_satisfied(1)
