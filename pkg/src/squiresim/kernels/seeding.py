"""Minimizer seeding: window minima, reference index, anchor extraction.

Anchors are (query position, reference position) pairs for every query
minimizer k-mer that also occurs as a reference minimizer, sorted by the
composite key rpos<<32|qpos so downstream chaining can walk them in
reference order.  The sort is the expensive step and is what gets offloaded.
"""

import numpy as np

from .. import actions as A
from .costs import DEFAULT_COSTS
from .radix import run_radix_host, run_radix_squire, RADIX_OFFLOAD_THRESHOLD
from ..errors import SimulationFault

_BASE_CODE = np.full(256, -1, dtype=np.int64)
for _b, _c in zip(b"ACGT", range(4)):
    _BASE_CODE[_b] = _c
    _BASE_CODE[ord(chr(_b).lower())] = _c

DEFAULT_K = 15
DEFAULT_W = 10


def encode_bases(seq):
    """ACGT string/bytes -> int64 codes 0..3; rejects other characters."""
    raw = np.frombuffer(seq.encode() if isinstance(seq, str) else bytes(seq), dtype=np.uint8)
    codes = _BASE_CODE[raw]
    if codes.size and codes.min() < 0:
        bad = int(np.argmax(codes < 0))
        raise SimulationFault(f"invalid base {chr(raw[bad])!r} at position {bad}")
    return codes


def kmer_codes(bases, k):
    """Packed 2-bit k-mer codes; numeric order equals lexicographic order."""
    n = bases.size - k + 1
    if n <= 0:
        return np.empty(0, dtype=np.int64)
    out = np.zeros(n, dtype=np.int64)
    for t in range(k):
        out += bases[t:t + n] << (2 * (k - 1 - t))
    return out


def minimizers(seq, k=DEFAULT_K, w=DEFAULT_W):
    """(codes, positions) of window minima: smallest k-mer per window, leftmost on ties.

    Windows cover w consecutive k-mers (fewer when the sequence is short);
    consecutive duplicate picks are emitted once.
    """
    bases = seq if isinstance(seq, np.ndarray) else encode_bases(seq)
    codes = kmer_codes(bases, k)
    if codes.size == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    w_eff = min(w, codes.size)
    windows = np.lib.stride_tricks.sliding_window_view(codes, w_eff)
    offs = np.argmin(windows, axis=1)  # first occurrence: leftmost tie
    pos = np.arange(windows.shape[0], dtype=np.int64) + offs
    vals = codes[pos]
    keep = np.empty(pos.size, dtype=bool)
    keep[0] = True
    keep[1:] = vals[1:] != vals[:-1]  # consecutive picks of the same k-mer collapse
    return vals[keep], pos[keep]


def build_index(ref_seq, k=DEFAULT_K, w=DEFAULT_W):
    """Hash index of the reference: minimizer k-mer code -> sorted positions array."""
    codes, pos = minimizers(ref_seq, k, w)
    index = {}
    order = np.argsort(codes, kind="stable")
    codes, pos = codes[order], pos[order]
    if codes.size:
        cuts = np.flatnonzero(np.diff(codes)) + 1
        starts = np.concatenate(([0], cuts))
        ends = np.concatenate((cuts, [codes.size]))
        for s, e in zip(starts, ends):
            index[int(codes[s])] = np.sort(pos[s:e])
    return index


def composite_keys(qpos, rpos):
    return (np.asarray(rpos, dtype=np.uint64) << np.uint64(32)) | np.asarray(qpos, dtype=np.uint64)


def split_composite(keys):
    keys = np.asarray(keys, dtype=np.uint64)
    rpos = (keys >> np.uint64(32)).astype(np.int64)
    qpos = (keys & np.uint64(0xFFFFFFFF)).astype(np.int64)
    return rpos, qpos


def _raw_hits(query, index, k, w):
    """Unsorted composite keys for every query-minimizer hit in the index."""
    qcodes, qpos = minimizers(query, k, w)
    parts = []
    for code, qp in zip(qcodes.tolist(), qpos.tolist()):
        hits = index.get(code)
        if hits is not None:
            parts.append(composite_keys(np.full(hits.size, qp, dtype=np.int64), hits))
    if not parts:
        return np.empty(0, dtype=np.uint64), qcodes.size
    return np.concatenate(parts), qcodes.size


def seed_anchors(query, index, k=DEFAULT_K, w=DEFAULT_W):
    """(rpos, qpos) arrays sorted by reference position (query position on ties)."""
    keys, _ = _raw_hits(query, index, k, w)
    keys.sort()
    return split_composite(keys)


def _scan_actions(machine, query_len, n_minimizers, n_anchors, costs):
    """Costed minimizer scan + index lookups + anchor emission on the host."""
    qbase, _ = machine.memory.alloc("seed.query", max(query_len, 1), "u8")
    ibase, _ = machine.memory.alloc("seed.index", max(n_minimizers, 1), "u64")
    region = max(n_minimizers, 1) * 8
    yield A.compute(max(1, query_len * costs.minimizer_ops_per_base))
    yield A.touch(A.span_reads(qbase, max(query_len, 1)))
    if n_minimizers:
        yield A.compute(n_minimizers * costs.lookup_ops_per_minimizer)
        # one probe line per minimizer, spread pseudo-randomly across the index
        probes = [(ibase + (i * 64) % region // 8 * 8, 8, False)
                  for i in range(n_minimizers)]
        yield A.touch(probes)
    if n_anchors:
        yield A.compute(n_anchors * costs.anchor_emit_ops)


def run_seed_host(machine, query, index, k=DEFAULT_K, w=DEFAULT_W,
                  costs=DEFAULT_COSTS, limit=500_000_000,
                  stage_name="seed", sort_stage_name="radix"):
    """Whole seeding stage on the host; returns ((rpos, qpos), RunReport)."""
    keys, n_min = _raw_hits(query, index, k, w)

    def prog():
        yield A.stage(stage_name)
        yield from _scan_actions(machine, len(query), n_min, keys.size, costs)

    machine.load_host_program(prog())
    machine.run_until_idle(limit)
    srt, report = run_radix_host(machine, keys, costs=costs, limit=limit,
                                 stage_name=sort_stage_name)
    return split_composite(srt), report


def run_seed_squire(machine, query, index, k=DEFAULT_K, w=DEFAULT_W,
                    costs=DEFAULT_COSTS, threshold=RADIX_OFFLOAD_THRESHOLD,
                    limit=500_000_000, stage_name="seed", sort_stage_name="radix"):
    """Seeding with the anchor sort offloaded to the workers when large enough."""
    keys, n_min = _raw_hits(query, index, k, w)

    def prog():
        yield A.stage(stage_name)
        yield from _scan_actions(machine, len(query), n_min, keys.size, costs)

    machine.load_host_program(prog())
    machine.run_until_idle(limit)
    srt, report = run_radix_squire(machine, keys, costs=costs, threshold=threshold,
                                   limit=limit, stage_name=sort_stage_name)
    return split_composite(srt), report
