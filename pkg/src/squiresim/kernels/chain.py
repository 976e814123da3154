"""Anchor chaining: windowed 1D dynamic programming over sorted anchors.

Each anchor's score is the best predecessor score plus a proximity bonus
minus a gap penalty, looking back over a bounded window.  The sequential
reference scans the window directly; the Squire version owns anchors
round-robin per worker, computes all match-up terms without waiting, then
consumes predecessor scores guarded by ordered global-counter waits so a
skipped (sentinel) predecessor never forces a wait.

Score arithmetic is float64 and both routes evaluate the identical
elementwise expressions, so their outputs are bit-identical.
"""

from dataclasses import dataclass, field

import numpy as np

from .. import actions as A
from .costs import DEFAULT_COSTS
from ..errors import SimulationFault

NEG_INF = float("-inf")

SQUIRE_LOOKBACK = 64  # window depth used by the worker version
BASELINE_LOOKBACK = 5000


@dataclass
class ChainParams:
    kmer: int = 15
    lookback: int = BASELINE_LOOKBACK     # predecessors examined per anchor
    max_dist: int = 5000                  # positional span allowed between pair members
    max_gap: int = 5000                   # |reference delta - query delta| allowed
    gap_scale: float | None = None        # defaults to 0.12 * kmer
    gap_log_scale: float = 0.5
    min_chain_score: float = 40.0

    def resolved_gap_scale(self):
        return 0.12 * self.kmer if self.gap_scale is None else self.gap_scale


@dataclass
class ChainResult:
    scores: np.ndarray            # float64 score per anchor
    pred: np.ndarray              # int64 best-predecessor index, -1 = chain start
    chains: list = field(default_factory=list)  # index arrays, strictly decreasing

    def best_chain(self):
        return self.chains[0] if self.chains else None


def anchor_bonus_and_penalty(rpos, qpos, i, lo, params):
    """Match-up terms bonus-penalty for predecessors [lo, i) of anchor i.

    Invalid pairs (non-positive deltas, span or gap beyond the cutoffs) get
    the -inf sentinel, which also tells the worker loop to skip the wait.
    """
    dr = rpos[i] - rpos[lo:i]
    dq = qpos[i] - qpos[lo:i]
    gap = np.abs(dr - dq)
    valid = (dr > 0) & (dq > 0) & (dr <= params.max_dist) & (dq <= params.max_dist) \
        & (gap <= params.max_gap)
    bonus = np.minimum(np.minimum(dr, dq), params.kmer).astype(np.float64)
    penalty = (params.resolved_gap_scale() * gap
               + params.gap_log_scale * np.floor(np.log2(gap + 1)))
    return np.where(valid, bonus - penalty, NEG_INF)


def _pick_best(candidates, floor):
    """(score, offset) with ties to the smallest index; offset -1 when the floor wins."""
    if candidates.size == 0:
        return floor, -1
    j = int(np.argmax(candidates))  # first occurrence = smallest index on ties
    best = float(candidates[j])
    if best >= floor:
        return best, j
    return floor, -1


def _all_matchups(rpos, qpos, params, lookback):
    """Match-up terms for every (anchor, distance) pair, one shifted pass per distance.

    Row i holds the window of anchor i with predecessors in ascending order:
    column lookback-t is the term for predecessor i-t.  Elementwise identical
    to anchor_bonus_and_penalty, just batched.
    """
    n = rpos.size
    aux = np.full((n, lookback), NEG_INF)
    scale = params.resolved_gap_scale()
    for t in range(1, min(lookback, max(n - 1, 0)) + 1):
        dr = rpos[t:] - rpos[:-t]
        dq = qpos[t:] - qpos[:-t]
        gap = np.abs(dr - dq)
        valid = (dr > 0) & (dq > 0) & (dr <= params.max_dist) & (dq <= params.max_dist) \
            & (gap <= params.max_gap)
        bonus = np.minimum(np.minimum(dr, dq), params.kmer).astype(np.float64)
        penalty = scale * gap + params.gap_log_scale * np.floor(np.log2(gap + 1))
        aux[t:, lookback - t] = np.where(valid, bonus - penalty, NEG_INF)
    return aux


def _window_start(rpos, i, lookback, max_dist):
    lo = max(0, i - lookback)
    # predecessors further than max_dist in reference position are all invalid;
    # anchors are rpos-sorted so they form a prefix of the window
    cut = int(np.searchsorted(rpos[:i], rpos[i] - max_dist, side="left"))
    return max(lo, cut)


def backtrack(scores, pred, min_score):
    """Extract chains best-first; each anchor joins at most one chain."""
    n = scores.size
    used = np.zeros(n, dtype=bool)
    order = np.lexsort((np.arange(n), -scores))
    chains = []
    for start in order:
        if used[start] or scores[start] < min_score:
            continue
        path = []
        i = int(start)
        while i >= 0 and not used[i]:
            path.append(i)
            used[i] = True
            i = int(pred[i])
        chains.append(np.asarray(path, dtype=np.int64))
    return chains


def chain_reference(rpos, qpos, params=None):
    """Sequential windowed DP; returns the full ChainResult.

    Shallow windows use the batched match-up precompute (same elementwise
    arithmetic, so identical values); deep windows evaluate per anchor with
    the sorted-position clamp, which skips only provably-sentinel entries.
    """
    params = params or ChainParams()
    rpos = np.asarray(rpos, dtype=np.int64)
    qpos = np.asarray(qpos, dtype=np.int64)
    n = rpos.size
    scores = np.empty(n, dtype=np.float64)
    pred = np.empty(n, dtype=np.int64)
    floor = float(params.kmer)
    lookback = params.lookback
    if lookback <= 256:
        aux_all = _all_matchups(rpos, qpos, params, lookback)
        for i in range(n):
            lo = i - lookback if i > lookback else 0
            aux = aux_all[i, lookback - (i - lo):]
            best, off = _pick_best(aux + scores[lo:i], floor)
            scores[i] = best
            pred[i] = lo + off if off >= 0 else -1
    else:
        for i in range(n):
            lo = _window_start(rpos, i, lookback, params.max_dist)
            aux = anchor_bonus_and_penalty(rpos, qpos, i, lo, params)
            best, off = _pick_best(aux + scores[lo:i], floor)
            scores[i] = best
            pred[i] = lo + off if off >= 0 else -1
    chains = backtrack(scores, pred, params.min_chain_score)
    return ChainResult(scores, pred, chains)


def _consumable_offsets(aux_all, lookback):
    """Per-anchor arrays of non-sentinel predecessor indices, batched.

    Returns (flat ascending j-index array, row offsets): anchor i consumes
    flat[off[i]:off[i+1]].
    """
    rows, cols = np.nonzero(aux_all != NEG_INF)
    flat = rows - lookback + cols
    counts = np.bincount(rows, minlength=aux_all.shape[0])
    offsets = np.zeros(aux_all.shape[0] + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return flat, offsets


def _chain_worker(ctx, args):
    fview, pview = args["f_view"], args["p_view"]
    bases = args["bases"]  # dict of region base addresses
    params, costs = args["params"], args["costs"]
    aux_all = args["aux_all"]
    nz_flat, nz_off = args["nz_flat"], args["nz_off"]
    n = fview.size
    w = ctx.id_worker()
    nw = ctx.num_workers()
    lookback = params.lookback
    floor = float(params.kmer)
    b_rpos, b_qpos, b_f, b_pred = bases["rpos"], bases["qpos"], bases["f"], bases["pred"]
    matchup_ops = costs.matchup_ops
    scan_ops, add_ops, fin_ops = (costs.chain_scan_ops, costs.chain_add_ops,
                                  costs.chain_finalize_ops)
    yield A.compute(costs.prelude_ops)
    for i in range(w, n, nw):
        lo = i - lookback if i > lookback else 0
        width = i - lo
        # pass 1: all match-up terms plus the sentinel scan, no synchronization
        aux = aux_all[i, lookback - width:]
        yield A.compute(width * (matchup_ops + scan_ops) + costs.prelude_ops)
        # pass 2: consume predecessor scores in ascending order, waiting on the
        # ordered counter only for non-sentinel entries; each consumed score's
        # add rides with the next charged action
        nz = nz_flat[nz_off[i]:nz_off[i + 1]]
        p = 0
        pend = 0
        while p < nz.size:
            ready = int(np.searchsorted(nz, ctx.gvalue(), side="left"))
            if ready > p:
                yield A.counter_work(ready - p, (ready - p) * add_ops + pend)
                pend = 0
                p = ready
            if p < nz.size:
                yield A.wait_gcounter(int(nz[p]) + 1)
                pend += add_ops
                p += 1
        ctx.mark("chain_f", i)
        best, off = _pick_best(aux + fview[lo:i], floor)
        fview[i] = best
        pview[i] = lo + off if off >= 0 else -1
        yield A.work(fin_ops + pend,
                     [(b_rpos + lo * 8, 8, False), (b_rpos + i * 8, 8, False),
                      (b_qpos + i * 8, 8, False),
                      (b_f + lo * 8, 8, False), (b_f + (i - 1 if i else 0) * 8, 8, False),
                      (b_f + i * 8, 8, True), (b_pred + i * 8, 8, True)])
        yield A.inc_gcounter()
    yield A.halt()


def _alloc(machine, rpos, qpos):
    n = rpos.size
    mem = machine.memory
    rb, rv = mem.alloc("chain.rpos", max(n, 1), "i64")
    qb, qv = mem.alloc("chain.qpos", max(n, 1), "i64")
    fb, fv = mem.alloc("chain.f", max(n, 1), "f64")
    pb, pv = mem.alloc("chain.pred", max(n, 1), "i64")
    rv[:n] = rpos
    qv[:n] = qpos
    return {
        "rpos_view": rv[:n], "qpos_view": qv[:n], "f_view": fv[:n], "p_view": pv[:n],
        "bases": {"rpos": rb, "qpos": qb, "f": fb, "pred": pb},
        "n": n,
    }


def _host_program_chain(layout, params, costs, stage_name):
    rp, qp = layout["rpos_view"], layout["qpos_view"]
    fv, pv = layout["f_view"], layout["p_view"]
    bases = layout["bases"]
    n = layout["n"]
    floor = float(params.kmer)
    yield A.stage(stage_name)
    done = 0
    batch_ops = 0
    batch_touch = []
    for i in range(n):
        lo = _window_start(rp, i, params.lookback, params.max_dist)
        width = i - lo
        aux = anchor_bonus_and_penalty(rp, qp, i, lo, params)
        best, off = _pick_best(aux + fv[lo:i], floor)
        fv[i] = best
        pv[i] = lo + off if off >= 0 else -1
        batch_ops += max(1, width * (costs.matchup_ops + costs.chain_add_ops)
                         + costs.chain_finalize_ops)
        batch_touch.append((bases["f"] + lo * 8, 8, False))
        batch_touch.append((bases["f"] + max(i - 1, lo) * 8, 8, False))
        batch_touch.append((bases["f"] + i * 8, 8, True))
        done += 1
        if done % 64 == 0 or i == n - 1:
            yield A.compute(batch_ops)
            yield A.touch(batch_touch)
            batch_ops = 0
            batch_touch = []
    if batch_ops:
        yield A.compute(batch_ops)
    yield A.compute(max(1, n * costs.backtrack_ops_per_anchor))


def run_chain_host(machine, rpos, qpos, params=None, costs=DEFAULT_COSTS,
                   limit=500_000_000, stage_name="chain"):
    """Sequential chain DP on the host; returns (ChainResult, RunReport)."""
    params = params or ChainParams()
    rpos = np.asarray(rpos, dtype=np.int64)
    qpos = np.asarray(qpos, dtype=np.int64)
    layout = _alloc(machine, rpos, qpos)
    machine.load_host_program(_host_program_chain(layout, params, costs, stage_name))
    report = machine.run_until_idle(limit)
    chains = backtrack(layout["f_view"], layout["p_view"], params.min_chain_score)
    return ChainResult(layout["f_view"].copy(), layout["p_view"].copy(), chains), report


def run_chain_squire(machine, rpos, qpos, params=None, costs=DEFAULT_COSTS,
                     limit=500_000_000, stage_name="chain"):
    """Worker-parallel chain DP; lookback is pinned to the Squire window depth."""
    params = params or ChainParams()
    if params.lookback != SQUIRE_LOOKBACK:
        params = ChainParams(**{**params.__dict__, "lookback": SQUIRE_LOOKBACK})
    rpos = np.asarray(rpos, dtype=np.int64)
    qpos = np.asarray(qpos, dtype=np.int64)
    n = rpos.size
    layout = _alloc(machine, rpos, qpos)
    aux_all = _all_matchups(rpos, qpos, params, params.lookback)
    nz_flat, nz_off = _consumable_offsets(aux_all, params.lookback)
    args = {**layout, "params": params, "costs": costs, "aux_all": aux_all,
            "nz_flat": nz_flat, "nz_off": nz_off}

    def hostprog():
        yield A.stage(stage_name)
        yield A.start_squire(_chain_worker, args)
        yield A.wait_gcounter(n)
        yield A.compute(max(1, n * costs.backtrack_ops_per_anchor))

    machine.load_host_program(hostprog())
    report = machine.run_until_idle(limit)
    chains = backtrack(layout["f_view"], layout["p_view"], params.min_chain_score)
    return ChainResult(layout["f_view"].copy(), layout["p_view"].copy(), chains), report


def chain_divergence(rpos, qpos, params=None):
    """Fraction-style divergence between deep- and shallow-window best chains.

    Returns (diverged, details): whether the best chain's endpoint anchors
    differ between the baseline window depth and the Squire depth.  Reported
    per dataset by the harness, never asserted: real divergence rates are
    data-dependent.
    """
    params = params or ChainParams()
    deep = chain_reference(rpos, qpos, ChainParams(**{**params.__dict__,
                                                      "lookback": BASELINE_LOOKBACK}))
    shallow = chain_reference(rpos, qpos, ChainParams(**{**params.__dict__,
                                                         "lookback": SQUIRE_LOOKBACK}))
    d_best = deep.best_chain()
    s_best = shallow.best_chain()
    if d_best is None and s_best is None:
        return False, {"deep": None, "shallow": None}
    if (d_best is None) != (s_best is None):
        return True, {"deep": None if d_best is None else [int(d_best[0]), int(d_best[-1])],
                      "shallow": None if s_best is None else [int(s_best[0]), int(s_best[-1])]}
    d_ends = (int(d_best[0]), int(d_best[-1]))
    s_ends = (int(s_best[0]), int(s_best[-1]))
    return d_ends != s_ends, {"deep": list(d_ends), "shallow": list(s_ends)}
