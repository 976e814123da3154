"""2D dynamic programming: dynamic time warping and Smith-Waterman.

Both kernels fill an n-by-m matrix whose cells depend on the left, top and
top-left neighbors.  The Squire versions assign each worker a contiguous
column block, filled row by row; a worker increments its local counter after
each row and its right neighbor waits on that counter before starting the
same row, which resolves the horizontal dependency at the block boundary.

Row interiors are computed with prefix-scan algebra instead of a cell loop:
the left-neighbor recurrence unrolls to a running min (DTW) or running max
(SW) over candidates, which numpy evaluates exactly.  Smith-Waterman is
integer-scored so block-parallel and sequential fills agree bit for bit;
DTW matches bit for bit whenever the cost values are exactly representable
(the bundled generators emit integer-valued samples for that reason).
"""

from dataclasses import dataclass

import numpy as np

from .. import actions as A
from .costs import DEFAULT_COSTS
from ..errors import SimulationFault

_INF = np.inf


@dataclass(frozen=True)
class SwScoring:
    match: int = 2
    mismatch: int = -1
    gap: int = -2


def _min_scan(base, costs, carry=None):
    """Resolve row[j] = min(base[j], row[j-1] + costs[j]) with optional left carry."""
    if carry is not None:
        base = np.concatenate(([carry], base))
        costs = np.concatenate(([0.0], costs))
    csum = np.cumsum(costs)
    row = np.minimum.accumulate(base - csum) + csum
    return row[1:] if carry is not None else row


def _max_scan(base, gap, carry=None):
    """Resolve row[j] = max(base[j], row[j-1] + gap) with optional left carry."""
    if carry is not None:
        base = np.concatenate(([carry], base))
    idx = np.arange(base.size, dtype=np.int64)
    ramp = gap * idx
    row = np.maximum.accumulate(base - ramp) + ramp
    return row[1:] if carry is not None else row


# --------------------------------------------------------------------- DTW

def _dtw_block_row(mat, s_sig, r_sig, i, lo, hi, first_block):
    """Fill mat[i, lo:hi]; boundary values left of the block must already exist."""
    cost = np.abs(s_sig[i] - r_sig[lo:hi])
    if i == 0:
        base = np.full(hi - lo, _INF)
        if first_block:
            base[0] = cost[0]
            mat[0, lo:hi] = _min_scan(base, cost)
        else:
            mat[0, lo:hi] = _min_scan(base, cost, carry=mat[0, lo - 1])
        return
    up = mat[i - 1, lo:hi]
    diag = np.empty(hi - lo)
    diag[1:] = mat[i - 1, lo:hi - 1]
    diag[0] = _INF if first_block else mat[i - 1, lo - 1]
    base = cost + np.minimum(up, diag)
    carry = None if first_block else mat[i, lo - 1]
    mat[i, lo:hi] = _min_scan(base, cost, carry=carry)


def dtw_reference(s_sig, r_sig):
    """Alignment cost matrix and distance; boundary row/column are cumulative."""
    s_sig = np.asarray(s_sig, dtype=np.float64)
    r_sig = np.asarray(r_sig, dtype=np.float64)
    if s_sig.size == 0 or r_sig.size == 0:
        raise SimulationFault("dtw inputs must be non-empty")
    n, m = s_sig.size, r_sig.size
    mat = np.empty((n, m))
    for i in range(n):
        _dtw_block_row(mat, s_sig, r_sig, i, 0, m, first_block=True)
    return mat, float(mat[n - 1, m - 1])


# --------------------------------------------------------------- Smith-Waterman

def sw_reference(a_seq, b_seq, scoring=SwScoring()):
    """Local alignment matrix (zero floor) and its best score."""
    a = np.asarray(a_seq, dtype=np.int64)
    b = np.asarray(b_seq, dtype=np.int64)
    if a.size == 0 or b.size == 0:
        raise SimulationFault("sw inputs must be non-empty")
    n, m = a.size, b.size
    mat = np.zeros((n, m), dtype=np.int64)
    for i in range(n):
        _sw_block_row(mat, a, b, scoring, i, 0, m, first_block=True)
    return mat, int(mat.max())


def _sw_block_row(mat, a, b, scoring, i, lo, hi, first_block):
    sub = np.where(a[i] == b[lo:hi], scoring.match, scoring.mismatch).astype(np.int64)
    if i == 0:
        up = np.zeros(hi - lo, dtype=np.int64)
        diag = np.zeros(hi - lo, dtype=np.int64)
    else:
        up = mat[i - 1, lo:hi]
        diag = np.empty(hi - lo, dtype=np.int64)
        diag[1:] = mat[i - 1, lo:hi - 1]
        diag[0] = 0 if first_block else mat[i - 1, lo - 1]
    base = np.maximum(0, np.maximum(diag + sub, up + scoring.gap))
    carry = None if first_block else int(mat[i, lo - 1])
    mat[i, lo:hi] = _max_scan(base, scoring.gap, carry=carry)


# ------------------------------------------------------------ worker programs

def _column_blocks(m, num_workers):
    eff = min(num_workers, m)
    bounds = [(w * m // eff, (w + 1) * m // eff) for w in range(eff)]
    return eff, bounds


def _dp_worker(ctx, args):
    """Shared column-block worker for both 2D kernels."""
    mat_view = args["mat_view"]
    fill_row = args["fill_row"]
    cell_ops = args["cell_ops"]
    mat_base = args["mat_base"]
    n, m = args["n"], args["m"]
    itemsize = mat_view.itemsize
    w = ctx.id_worker()
    eff, bounds = _column_blocks(m, ctx.num_workers())
    yield A.compute(args["costs"].prelude_ops)
    if w >= eff:
        yield A.halt()
        return
    lo, hi = bounds[w]
    width = hi - lo
    row_bytes = m * itemsize
    for i in range(n):
        if w != 0:
            yield A.wait_lcounter(w - 1, i + 1)
        fill_row(i, lo, hi, w == 0)
        # row-major fill touches the previous row (resident when the block fits),
        # then streams its own row: each line is read once right after the first
        # write to it (left-neighbor dependency), so it installs once and the
        # remaining writes coalesce as hits
        tl = []
        if w != 0:
            tl.append((mat_base + i * row_bytes + (lo - 1) * itemsize, itemsize, False))
        if i > 0:
            tl += A.span_reads(mat_base + (i - 1) * row_bytes + lo * itemsize,
                               width * itemsize)
        own = mat_base + i * row_bytes + lo * itemsize
        for line_addr in A.line_addrs(own, width * itemsize):
            tl.append((line_addr, itemsize, True))
            tl.append((line_addr, itemsize, False))
        yield A.work(max(1, width * cell_ops), tl)
        yield A.inc_lcounter(w)
    yield A.halt()


def _dp_host_program(stage_name, n, m, cell_ops, mat_base, itemsize, fill, costs,
                     extra_setup=()):
    yield A.stage(stage_name)
    for addr, nbytes in extra_setup:
        yield A.touch(A.span_reads(addr, nbytes))
    row_bytes = m * itemsize
    for i in range(n):
        fill(i)
        tl = []
        if i > 0:
            tl += A.span_reads(mat_base + (i - 1) * row_bytes, row_bytes)
        for line_addr in A.line_addrs(mat_base + i * row_bytes, row_bytes):
            tl.append((line_addr, itemsize, True))
            tl.append((line_addr, itemsize, False))
        yield A.work(max(1, m * cell_ops), tl)


def _dp_squire_host_program(machine, stage_name, worker_args, eff, n, costs):
    yield A.stage(stage_name)
    yield A.start_squire(_dp_worker, worker_args)
    yield A.wait_lcounter(eff - 1, n)


# ------------------------------------------------------------------- runners

def run_dtw_host(machine, s_sig, r_sig, costs=DEFAULT_COSTS, limit=500_000_000,
                 stage_name="dtw"):
    s_sig = np.asarray(s_sig, dtype=np.float64)
    r_sig = np.asarray(r_sig, dtype=np.float64)
    n, m = s_sig.size, r_sig.size
    mem = machine.memory
    sb, sv = mem.alloc("dtw.s", n, "f64")
    rb, rv = mem.alloc("dtw.r", m, "f64")
    mb, mv = mem.alloc("dtw.mat", n * m, "f64")
    sv[:], rv[:] = s_sig, r_sig
    mat = mv.reshape(n, m)

    def fill(i):
        _dtw_block_row(mat, sv, rv, i, 0, m, first_block=True)

    machine.load_host_program(_dp_host_program(
        stage_name, n, m, costs.dtw_cell_ops, mb, 8, fill, costs,
        extra_setup=[(sb, n * 8), (rb, m * 8)]))
    report = machine.run_until_idle(limit)
    return (mat.copy(), float(mat[n - 1, m - 1])), report


def run_dtw_squire(machine, s_sig, r_sig, costs=DEFAULT_COSTS, limit=500_000_000,
                   stage_name="dtw"):
    s_sig = np.asarray(s_sig, dtype=np.float64)
    r_sig = np.asarray(r_sig, dtype=np.float64)
    n, m = s_sig.size, r_sig.size
    if n == 0 or m == 0:
        raise SimulationFault("dtw inputs must be non-empty")
    mem = machine.memory
    _, sv = mem.alloc("dtw.s", n, "f64")
    _, rv = mem.alloc("dtw.r", m, "f64")
    mb, mv = mem.alloc("dtw.mat", n * m, "f64")
    sv[:], rv[:] = s_sig, r_sig
    mat = mv.reshape(n, m)

    def fill_row(i, lo, hi, first):
        _dtw_block_row(mat, sv, rv, i, lo, hi, first)

    eff, _ = _column_blocks(m, machine.config.num_workers)
    args = {"mat_view": mv, "fill_row": fill_row, "cell_ops": costs.dtw_cell_ops,
            "mat_base": mb, "n": n, "m": m, "costs": costs}
    machine.load_host_program(
        _dp_squire_host_program(machine, stage_name, args, eff, n, costs))
    report = machine.run_until_idle(limit)
    return (mat.copy(), float(mat[n - 1, m - 1])), report


def run_sw_host(machine, a_seq, b_seq, scoring=SwScoring(), costs=DEFAULT_COSTS,
                limit=500_000_000, stage_name="sw"):
    a = np.asarray(a_seq, dtype=np.int64)
    b = np.asarray(b_seq, dtype=np.int64)
    n, m = a.size, b.size
    mem = machine.memory
    ab, _ = mem.alloc("sw.a", n, "i64")
    bb, _ = mem.alloc("sw.b", m, "i64")
    mb, mv = mem.alloc("sw.mat", n * m, "i64")
    mat = mv.reshape(n, m)

    def fill(i):
        _sw_block_row(mat, a, b, scoring, i, 0, m, first_block=True)

    machine.load_host_program(_dp_host_program(
        stage_name, n, m, costs.sw_cell_ops, mb, 8, fill, costs,
        extra_setup=[(ab, n * 8), (bb, m * 8)]))
    report = machine.run_until_idle(limit)
    return (mat.copy(), int(mat.max())), report


def run_sw_squire(machine, a_seq, b_seq, scoring=SwScoring(), costs=DEFAULT_COSTS,
                  limit=500_000_000, stage_name="sw"):
    a = np.asarray(a_seq, dtype=np.int64)
    b = np.asarray(b_seq, dtype=np.int64)
    n, m = a.size, b.size
    if n == 0 or m == 0:
        raise SimulationFault("sw inputs must be non-empty")
    mem = machine.memory
    mem.alloc("sw.a", n, "i64")
    mem.alloc("sw.b", m, "i64")
    mb, mv = mem.alloc("sw.mat", n * m, "i64")
    mat = mv.reshape(n, m)

    def fill_row(i, lo, hi, first):
        _sw_block_row(mat, a, b, scoring, i, lo, hi, first)

    eff, _ = _column_blocks(m, machine.config.num_workers)
    args = {"mat_view": mv, "fill_row": fill_row, "cell_ops": costs.sw_cell_ops,
            "mat_base": mb, "n": n, "m": m, "costs": costs}
    machine.load_host_program(
        _dp_squire_host_program(machine, stage_name, args, eff, n, costs))
    report = machine.run_until_idle(limit)
    return (mat.copy(), int(mat.max())), report
