"""Chain DP: naive oracle, reference, Squire equivalence, wait soundness."""

import math

import numpy as np
import pytest

from squiresim.kernels import inputs
from squiresim.kernels.chain import (
    NEG_INF, SQUIRE_LOOKBACK, ChainParams, anchor_bonus_and_penalty,
    chain_divergence, chain_reference, run_chain_host, run_chain_squire,
)
from squiresim.machine import SquireConfig, SquireMachine


def naive_matchup(ri, qi, rj, qj, p):
    dr, dq = ri - rj, qi - qj
    gap = abs(dr - dq)
    if dr <= 0 or dq <= 0 or dr > p.max_dist or dq > p.max_dist or gap > p.max_gap:
        return NEG_INF
    bonus = min(dr, dq, p.kmer)
    return bonus - (p.resolved_gap_scale() * gap
                    + p.gap_log_scale * math.floor(math.log2(gap + 1)))


def naive_chain(rpos, qpos, p):
    """Independent per-pair python re-implementation of the windowed DP."""
    n = len(rpos)
    f = [0.0] * n
    pred = [-1] * n
    for i in range(n):
        best, best_j = float(p.kmer), -1
        for j in range(max(0, i - p.lookback), i):
            cand = f[j] + naive_matchup(rpos[i], qpos[i], rpos[j], qpos[j], p)
            if cand >= float(p.kmer) and (best_j == -1 or cand > best):
                best, best_j = cand, j
        f[i] = best
        pred[i] = best_j
    return f, pred


def test_single_anchor_floor_and_no_pred():
    res = chain_reference([100], [10], ChainParams(kmer=15))
    assert res.scores.tolist() == [15.0]
    assert res.pred.tolist() == [-1]


def test_two_colinear_anchors_hand_value():
    # deltas (5,5), k=15: bonus 5, gap 0 -> f(1) = 15 + 5 - 0 = 20
    res = chain_reference([100, 105], [10, 15], ChainParams(kmer=15))
    assert res.scores.tolist() == [15.0, 20.0]
    assert res.pred.tolist() == [-1, 0]


def test_overlap_in_query_is_sentinel():
    p = ChainParams(kmer=15)
    aux = anchor_bonus_and_penalty(
        np.array([100, 105], dtype=np.int64), np.array([12, 10], dtype=np.int64), 1, 0, p)
    assert aux[0] == NEG_INF


def test_gap_beyond_cutoff_is_sentinel():
    p = ChainParams(kmer=15, max_gap=50)
    aux = anchor_bonus_and_penalty(
        np.array([100, 300], dtype=np.int64), np.array([10, 15], dtype=np.int64), 1, 0, p)
    assert aux[0] == NEG_INF


def test_direct_formula_evaluation():
    p = ChainParams(kmer=15)
    # deltas (7, 3): bonus 3, gap 4 -> penalty 1.8*4 + 0.5*floor(log2(5))
    aux = anchor_bonus_and_penalty(
        np.array([0, 7], dtype=np.int64), np.array([0, 3], dtype=np.int64), 1, 0, p)
    assert aux[0] == pytest.approx(3 - (1.8 * 4 + 0.5 * 2))


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_reference_matches_naive(seed):
    rpos, qpos = inputs.gen_anchors(150, seed, query_span=400, ref_span=1200)
    p = ChainParams(kmer=11, lookback=40, max_dist=300, max_gap=200)
    res = chain_reference(rpos, qpos, p)
    f, pred = naive_chain(rpos.tolist(), qpos.tolist(), p)
    assert res.scores.tolist() == pytest.approx(f)
    assert res.pred.tolist() == pred


def test_window_floor_property():
    rpos, qpos = inputs.gen_anchors(500, 9)
    p = ChainParams()
    res = chain_reference(rpos, qpos, p)
    assert np.all(res.scores >= p.kmer)
    assert np.all(res.pred < np.arange(res.pred.size))


def test_chains_strictly_decreasing_and_disjoint():
    rpos, qpos = inputs.gen_anchors(800, 4)
    res = chain_reference(rpos, qpos, ChainParams(lookback=64))
    seen = set()
    for ch in res.chains:
        assert all(a > b for a, b in zip(ch, ch[1:]))
        assert not (set(ch.tolist()) & seen)
        seen |= set(ch.tolist())


@pytest.mark.parametrize("workers", [1, 3, 8])
@pytest.mark.parametrize("seed", [0, 5])
def test_squire_equals_reference_t64(workers, seed):
    rpos, qpos = inputs.gen_anchors(600, seed, query_span=2000, ref_span=20000)
    expect = chain_reference(rpos, qpos, ChainParams(lookback=SQUIRE_LOOKBACK))
    m = SquireMachine(SquireConfig(num_workers=workers, scheduler_seed=seed))
    res, rep = run_chain_squire(m, rpos, qpos)
    assert rep.deadlock is None
    assert np.array_equal(res.scores, expect.scores)
    assert np.array_equal(res.pred, expect.pred)
    assert [c.tolist() for c in res.chains] == [c.tolist() for c in expect.chains]
    assert rep.crossfoot_ok()


def test_squire_output_independent_of_seed():
    rpos, qpos = inputs.gen_anchors(400, 12)
    outs = []
    for seed in range(4):
        m = SquireMachine(SquireConfig(num_workers=4, scheduler_seed=seed))
        res, _ = run_chain_squire(m, rpos, qpos)
        outs.append((res.scores.tobytes(), res.pred.tobytes()))
    assert len(set(outs)) == 1


def test_host_baseline_matches_reference_deep_window():
    rpos, qpos = inputs.gen_anchors(500, 2)
    p = ChainParams(lookback=5000)
    expect = chain_reference(rpos, qpos, p)
    m = SquireMachine(SquireConfig(num_workers=4))
    res, rep = run_chain_host(m, rpos, qpos, p)
    assert np.array_equal(res.scores, expect.scores)
    assert rep.worker_cycles() == 0


def test_wait_soundness_event_log():
    """No consumed predecessor score is read before its increment commits."""
    rpos, qpos = inputs.gen_anchors(300, 3)
    p = ChainParams(lookback=SQUIRE_LOOKBACK)
    m = SquireMachine(SquireConfig(num_workers=4, scheduler_seed=1))
    m.marks = []
    res, rep = run_chain_squire(m, rpos, qpos)
    commit = m.gcommit_cycles
    read_cycle = {payload: cyc for cyc, _, tag, payload in m.marks if tag == "chain_f"}
    checked = 0
    for i in range(rpos.size):
        lo = max(0, i - p.lookback)
        aux = anchor_bonus_and_penalty(rpos, qpos, i, lo, p)
        for off in np.flatnonzero(aux != NEG_INF):
            j = lo + int(off)
            assert read_cycle[i] >= commit[j], (i, j)
            checked += 1
    assert checked > 0


def test_divergence_counter_reports_endpoints():
    rpos, qpos = inputs.gen_anchors(2000, 8)
    diverged, details = chain_divergence(rpos, qpos)
    assert isinstance(diverged, bool)
    assert "deep" in details and "shallow" in details
