"""Minimizers, index, anchor extraction against brute-force oracles."""

import numpy as np
import pytest

from squiresim.errors import SimulationFault
from squiresim.kernels import inputs
from squiresim.kernels.seeding import (
    build_index, composite_keys, encode_bases, kmer_codes, minimizers,
    run_seed_host, run_seed_squire, seed_anchors, split_composite,
)
from squiresim.machine import SquireConfig, SquireMachine


def brute_minimizers(seq, k, w):
    """O(n*w) window-min oracle, leftmost tie, consecutive dedupe."""
    kmers = [seq[i:i + k] for i in range(len(seq) - k + 1)]
    if not kmers:
        return []
    w_eff = min(w, len(kmers))
    picks = []
    for t in range(len(kmers) - w_eff + 1):
        window = kmers[t:t + w_eff]
        best = min(range(w_eff), key=lambda j: (window[j], j))
        picks.append((window[best], t + best))
    out = []
    for p in picks:
        if not out or out[-1][0] != p[0]:
            out.append(p)
    return out


def test_all_equal_kmers_dedupe():
    codes, pos = minimizers("AAAA", k=2, w=2)
    assert pos.tolist() == [0]
    assert codes.tolist() == [0]  # "AA"


def test_hand_enumeration_acgt():
    codes, pos = minimizers("ACGT", k=2, w=2)
    # windows {AC,CG} -> AC@0, {CG,GT} -> CG@1
    assert pos.tolist() == [0, 1]
    assert codes.tolist() == [0b0001, 0b0110]


def test_too_short_sequence_empty():
    codes, pos = minimizers("AC", k=5, w=3)
    assert codes.size == 0 and pos.size == 0


def test_invalid_base_rejected():
    with pytest.raises(SimulationFault, match="position 2"):
        encode_bases("ACNGT")


def test_lowercase_accepted():
    assert encode_bases("acgt").tolist() == [0, 1, 2, 3]


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_minimizers_match_brute_force(seed):
    seq = inputs.gen_sequence(1000, seed)
    k, w = 7, 5
    codes, pos = minimizers(seq, k, w)
    expect = brute_minimizers(seq, k, w)
    assert pos.tolist() == [p for _, p in expect]
    got_kmers = [seq[p:p + k] for p in pos.tolist()]
    assert got_kmers == [s for s, _ in expect]


def test_kmer_codes_keep_lexicographic_order():
    seq = inputs.gen_sequence(300, 4)
    codes = kmer_codes(encode_bases(seq), 6)
    kmers = [seq[i:i + 6] for i in range(len(seq) - 5)]
    order_by_code = np.argsort(codes, kind="stable")
    order_by_str = sorted(range(len(kmers)), key=lambda i: (kmers[i], i))
    assert order_by_code.tolist() == order_by_str


def brute_anchors(query, ref, k, w):
    """All (qpos, rpos) with equal k-mers that are minimizers on both sides."""
    qm = brute_minimizers(query, k, w)
    rm = brute_minimizers(ref, k, w)
    from collections import defaultdict
    ref_map = defaultdict(list)
    for s, p in rm:
        ref_map[s].append(p)
    hits = []
    for s, qp in qm:
        for rp in sorted(ref_map.get(s, [])):
            hits.append((rp, qp))
    return sorted(hits)


def test_exact_substring_yields_diagonal_anchor():
    ref = inputs.gen_sequence(2000, 7)
    query = ref[500:900]
    index = build_index(ref, k=11, w=6)
    rpos, qpos = seed_anchors(query, index, k=11, w=6)
    assert rpos.size > 0
    assert np.any(rpos - qpos == 500)


def test_disjoint_alphabet_regions_zero_anchors():
    index = build_index("A" * 200, k=5, w=4)
    rpos, qpos = seed_anchors("C" * 100, index, k=5, w=4)
    assert rpos.size == 0


@pytest.mark.parametrize("seed", [3, 4])
def test_anchors_match_brute_force(seed):
    ref = inputs.gen_reference(3000, seed, motif_len=400, repeats=3)
    query, _ = inputs.gen_query_from_reference(ref, 500, seed + 10, accuracy=0.98)
    k, w = 9, 5
    index = build_index(ref, k, w)
    rpos, qpos = seed_anchors(query, index, k, w)
    assert sorted(zip(rpos.tolist(), qpos.tolist())) == brute_anchors(query, ref, k, w)


def test_composite_key_roundtrip():
    q = np.array([1, 2, 3], dtype=np.int64)
    r = np.array([7, 7, 9], dtype=np.int64)
    rr, qq = split_composite(composite_keys(q, r))
    assert rr.tolist() == r.tolist() and qq.tolist() == q.tolist()


def test_seed_runners_agree_and_offload():
    ref = inputs.gen_reference(60_000, 21, motif_len=2000, repeats=10)
    query, _ = inputs.gen_query_from_reference(ref, 4000, 22, accuracy=0.99)
    k, w = 13, 8
    index = build_index(ref, k, w)
    pure_r, pure_q = seed_anchors(query, index, k, w)

    mh = SquireMachine(SquireConfig(num_workers=4))
    (hr, hq), rep_h = run_seed_host(mh, query, index, k, w)
    ms = SquireMachine(SquireConfig(num_workers=4))
    (sr, sq), rep_s = run_seed_squire(ms, query, index, k, w, threshold=0)

    assert hr.tolist() == pure_r.tolist() and hq.tolist() == pure_q.tolist()
    assert sr.tolist() == pure_r.tolist() and sq.tolist() == pure_q.tolist()
    assert rep_h.worker_cycles() == 0
    assert rep_s.worker_cycles() > 0
    assert rep_s.stage_cycles["seed"] > 0 and rep_s.stage_cycles["radix"] > 0
