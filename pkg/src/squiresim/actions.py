"""Actions: the costed events a program yields to drive the timing model.

A program (worker or host) is a Python generator.  Functional work happens
natively in the generator body against the simulated memory's numpy views;
the generator yields actions so the machine can charge cycles, route memory
through the caches and arbiter, and run the synchronization protocol.

Actions are plain tuples with a string head:

    ('compute', ops)             ops retire at the context's issue width
    ('touch', accesses)          accesses = [(addr, nbytes, is_write), ...]
    ('inc_g',)                   ordered global-counter increment (workers only)
    ('inc_l', w)                 local-counter increment (workers only)
    ('wait_g', s)                block until global counter >= s
    ('wait_l', w, s)             block until local counter w >= s
    ('cbatch', n)                n counter accesses known to be satisfied
    ('halt',)                    stop_worker()
    ('start_squire', f, a)       host only: reset counters, launch workers on f(ctx, a)
    ('stage', name)              zero-cost stage marker for the report

'cbatch' exists so programs that peek a counter and find a run of wait
thresholds already met can charge the per-access cycles in one action
instead of thousands; the timing is identical to issuing the waits one by
one.
"""


def compute(ops):
    return ('compute', ops)


def touch(accesses):
    return ('touch', accesses)


def work(ops, accesses):
    """`ops` compute ops followed by the memory accesses, as one action."""
    return ('work', ops, accesses)


def inc_gcounter():
    return ('inc_g',)


def inc_lcounter(w):
    return ('inc_l', w)


def wait_gcounter(s):
    return ('wait_g', s)


def wait_lcounter(w, s):
    return ('wait_l', w, s)


def counter_batch(n):
    return ('cbatch', n)


def counter_work(n, ops):
    """n satisfied counter accesses interleaved with `ops` compute ops."""
    return ('cwork', n, ops)


def halt():
    return ('halt',)


def start_squire(factory, args):
    return ('start_squire', factory, args)


def stage(name):
    return ('stage', name)


def line_addrs(addr, nbytes, line=64):
    """Cache-line start addresses covering [addr, addr+nbytes)."""
    if nbytes <= 0:
        return []
    first = addr - addr % line
    last = (addr + nbytes - 1) - (addr + nbytes - 1) % line
    return list(range(first, last + 1, line))


def span_reads(addr, nbytes, line=64):
    return [(a, line, False) for a in line_addrs(addr, nbytes, line)]


def span_writes(addr, nbytes, line=64):
    return [(a, line, True) for a in line_addrs(addr, nbytes, line)]
