"""MSD radix sort on 64-bit keys: sequential reference and Squire offload.

The Squire version splits the array into equal contiguous chunks, one per
worker; each worker radix-sorts its chunk, increments the global counter
once and halts, and the host merges the sorted runs with a min-heap once
the counter reaches the worker count.  Arrays below the offload threshold
are sorted entirely on the host.
"""

import heapq

import numpy as np

from .. import actions as A
from .costs import DEFAULT_COSTS

RADIX_OFFLOAD_THRESHOLD = 10000
INSERTION_CUTOFF = 32
_TOP_SHIFT = 56  # first digit of a 64-bit key, 8 bits at a time

_MERGE_CHUNK = 8192  # elements per costed merge action


def _insertion(arr, lo, hi):
    """In-place insertion sort of arr[lo:hi]; returns compare/shift step count."""
    steps = 0
    for i in range(lo + 1, hi):
        key = arr[i]
        j = i - 1
        while j >= lo and arr[j] > key:
            arr[j + 1] = arr[j]
            j -= 1
            steps += 1
        arr[j + 1] = key
        steps += 1
    return steps


def _msd_sort(keys):
    """Sort a list of unsigned 64-bit ints; returns (list, segment trace).

    Trace entries: ('pass', offset, length) for a count+scatter level,
    ('insertion', offset, length, steps) for cutoff segments.  Offsets are
    relative to the array start so callers can derive memory traffic.
    """
    arr = list(keys)
    trace = []
    stack = [(0, len(arr), _TOP_SHIFT)]
    while stack:
        lo, hi, shift = stack.pop()
        n = hi - lo
        if n <= 1:
            continue
        if n < INSERTION_CUTOFF or shift < 0:
            steps = _insertion(arr, lo, hi)
            trace.append(("insertion", lo, n, steps))
            continue
        counts = [0] * 256
        for i in range(lo, hi):
            counts[(arr[i] >> shift) & 0xFF] += 1
        starts = [0] * 256
        acc = lo
        for d in range(256):
            starts[d] = acc
            acc += counts[d]
        out = arr[lo:hi]
        pos = starts[:]
        for v in out:
            d = (v >> shift) & 0xFF
            arr[pos[d]] = v
            pos[d] += 1
        trace.append(("pass", lo, n))
        for d in range(256):
            if counts[d] > 1:
                stack.append((starts[d], starts[d] + counts[d], shift - 8))
    return arr, trace


def radix_reference(keys):
    """MSD radix sort of fixed-width unsigned keys; returns a sorted list."""
    if len(keys) == 0:
        return []
    out, _ = _msd_sort([int(k) for k in keys])
    return out


def _sort_cost_actions(trace, base_addr, costs):
    """Yield compute/touch actions for a recorded sort of a chunk at base_addr."""
    for seg in trace:
        if seg[0] == "pass":
            _, off, n = seg
            yield A.compute(costs.radix_seg_overhead_ops
                            + n * (costs.radix_count_ops + costs.radix_scatter_ops))
            span = A.span_reads(base_addr + off * 8, n * 8) * 2  # count + scatter reads
            span += A.span_writes(base_addr + off * 8, n * 8)
            yield A.touch(span)
        else:
            _, off, n, steps = seg
            yield A.compute(max(1, steps * costs.radix_insertion_ops + n * 2))
            yield A.touch(A.span_reads(base_addr + off * 8, n * 8)
                          + A.span_writes(base_addr + off * 8, n * 8))


def _worker_program(ctx, args):
    base, view, n, costs = args["base"], args["view"], args["n"], args["costs"]
    w = ctx.id_worker()
    nw = ctx.num_workers()
    lo = w * n // nw
    hi = (w + 1) * n // nw
    yield A.compute(costs.prelude_ops)
    if hi > lo:
        chunk, trace = _msd_sort([int(v) for v in view[lo:hi]])
        view[lo:hi] = chunk
        for act in _sort_cost_actions(trace, base + lo * 8, costs):
            yield act
    yield A.inc_gcounter()
    yield A.halt()


def _merge_runs(view, bounds):
    runs = [view[lo:hi].tolist() for lo, hi in bounds if hi > lo]
    return list(heapq.merge(*runs))


def _merge_actions(base, n, k, costs):
    """Costed k-way heap merge over n elements: read every run, write the output."""
    levels = max(1, (k - 1).bit_length()) if k > 1 else 1
    per_elem = costs.merge_base_ops + costs.merge_level_ops * levels
    done = 0
    while done < n:
        m = min(_MERGE_CHUNK, n - done)
        yield A.compute(m * per_elem)
        span = A.span_reads(base + done * 8, m * 8) + A.span_writes(base + done * 8, m * 8)
        yield A.touch(span)
        done += m


def _host_sort_actions(view, base, costs):
    out, trace = _msd_sort([int(v) for v in view])
    view[:] = out
    yield from _sort_cost_actions(trace, base, costs)


def _squire_host_program(machine, args):
    base, view, n, costs, threshold = (
        args["base"], args["view"], args["n"], args["costs"], args["threshold"])
    yield A.stage(args["stage_name"])
    yield A.compute(2)  # threshold guard
    if n > threshold:
        nw = machine.config.num_workers
        yield A.start_squire(_worker_program, args)
        yield A.wait_gcounter(nw)
        bounds = [(w * n // nw, (w + 1) * n // nw) for w in range(nw)]
        merged = _merge_runs(view, bounds)
        view[:] = merged
        yield from _merge_actions(base, n, nw, costs)
    else:
        yield from _host_sort_actions(view, base, costs)


def _host_program(view, base, costs, stage_name):
    yield A.stage(stage_name)
    yield from _host_sort_actions(view, base, costs)


def _setup(machine, keys):
    n = len(keys)
    base, view = machine.memory.alloc("radix.keys", max(n, 1), "u64")
    view[:n] = np.asarray(keys, dtype=np.uint64)
    return base, view[:n], n


def run_radix_host(machine, keys, costs=DEFAULT_COSTS, limit=500_000_000,
                   stage_name="radix"):
    """Sequential host baseline; returns (sorted ndarray, RunReport)."""
    base, view, n = _setup(machine, keys)
    machine.load_host_program(_host_program(view, base, costs, stage_name))
    report = machine.run_until_idle(limit)
    return view.copy(), report


def run_radix_squire(machine, keys, costs=DEFAULT_COSTS,
                     threshold=RADIX_OFFLOAD_THRESHOLD, limit=500_000_000,
                     stage_name="radix"):
    """Offloaded sort; arrays of `threshold` or fewer elements stay on the host."""
    base, view, n = _setup(machine, keys)
    args = {"base": base, "view": view, "n": n, "costs": costs,
            "threshold": threshold, "stage_name": stage_name}
    machine.load_host_program(_squire_host_program(machine, args))
    report = machine.run_until_idle(limit)
    return view.copy(), report
