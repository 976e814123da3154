"""End-to-end read mapper: seed, chain, Smith-Waterman extension.

One machine maps a read set sequentially; per-stage cycles accumulate via
stage markers.  The host backend runs every stage on the host core; the
squire backend offloads the seeding sort (when large enough), the chain DP
and the alignment DP to the workers.  Both backends use the shallow chain
window so their functional outputs are identical read for read.

Synthetic read sets follow the sequencing-machine accuracy profiles
(nanopore-like 85%, long-read CLR-like 88%, high-fidelity 99.99%); read
lengths are scaled to desk size.
"""

from dataclasses import dataclass, field

import numpy as np

from . import actions as A
from .errors import SimulationFault
from .kernels.chain import ChainParams, SQUIRE_LOOKBACK, backtrack, chain_reference, \
    run_chain_host, run_chain_squire
from .kernels.costs import DEFAULT_COSTS
from .kernels.dp2d import SwScoring, run_sw_host, run_sw_squire, sw_reference
from .kernels.inputs import gen_bases, bases_to_str, rng_for
from .kernels.radix import RADIX_OFFLOAD_THRESHOLD
from .kernels.seeding import (DEFAULT_K, DEFAULT_W, build_index, encode_bases,
                              run_seed_host, run_seed_squire, seed_anchors)

SW_MARGIN = 64  # bases added around the best chain's bounding box


@dataclass(frozen=True)
class ReadProfile:
    name: str
    accuracy: float
    avg_len: int


# accuracies follow the sequencing technologies; lengths are ~1/10 desk scale
PROFILES = {
    "ont": ReadProfile("ont", 0.85, 1800),
    "pbclr": ReadProfile("pbclr", 0.88, 700),
    "pbhf": ReadProfile("pbhf", 0.9999, 1400),
}


@dataclass
class ReferenceGenome:
    name: str
    bases: str
    k: int = DEFAULT_K
    w: int = DEFAULT_W
    index: dict = field(default_factory=dict, repr=False)

    @classmethod
    def synthetic(cls, length, seed, name="synthetic", k=DEFAULT_K, w=DEFAULT_W):
        codes = gen_bases(length, seed)
        ref = cls(name, bases_to_str(codes), k, w)
        ref.index = build_index(ref.bases, k, w)
        return ref

    @classmethod
    def from_bases(cls, name, bases, k=DEFAULT_K, w=DEFAULT_W):
        ref = cls(name, bases, k, w)
        ref.index = build_index(bases, k, w)
        return ref

    def __len__(self):
        return len(self.bases)


@dataclass
class Read:
    rid: str
    seq: str
    true_start: int
    true_end: int


@dataclass
class ReadSet:
    reads: list
    accuracy: float
    seed: int
    error_events: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(self.reads)

    def __len__(self):
        return len(self.reads)


_WRONG = {b: [x for x in "ACGT" if x != b] for b in "ACGT"}


def generate_reads(reference, n, avg_len, accuracy, seed):
    """Sample reads uniformly with sub/ins/del errors split 1:1:1 at rate 1-accuracy."""
    if not 0.5 < accuracy <= 1.0:
        raise SimulationFault("accuracy must be in (0.5, 1.0]")
    if avg_len > len(reference):
        raise SimulationFault("avg_len exceeds reference length")
    ref = reference.bases if isinstance(reference, ReferenceGenome) else reference
    rng = rng_for(seed)
    err = 1.0 - accuracy
    reads = []
    totals = {"sub": 0, "ins": 0, "del": 0, "trials": 0}
    for ridx in range(n):
        length = max(50, int(rng.normal(avg_len, 0.15 * avg_len)))
        length = min(length, len(ref) - 1)
        template_cap = int(length * 1.25) + 8
        start = int(rng.integers(0, max(len(ref) - template_cap, 1)))
        out = []
        ti = start
        while len(out) < length and ti < start + template_cap and ti < len(ref):
            r = rng.random()
            totals["trials"] += 1
            if r < err / 3:
                out.append(_WRONG[ref[ti]][int(rng.integers(0, 3))])
                ti += 1
                totals["sub"] += 1
            elif r < 2 * err / 3:
                out.append("ACGT"[int(rng.integers(0, 4))])
                totals["ins"] += 1
            elif r < err:
                ti += 1
                totals["del"] += 1
            else:
                out.append(ref[ti])
                ti += 1
        reads.append(Read(f"read{ridx}", "".join(out), start, ti))
    return ReadSet(reads, accuracy, seed, totals)


def read_fasta(path):
    """Parse FASTA: '>'-headers and ACGT sequence lines; anything else faults."""
    entries = []
    name = None
    chunks = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith(">"):
                if name is not None:
                    entries.append((name, "".join(chunks)))
                name = line[1:].strip() or f"seq{len(entries)}"
                chunks = []
            else:
                if name is None:
                    raise SimulationFault(f"FASTA line {lineno}: sequence before header")
                up = line.upper()
                if any(c not in "ACGT" for c in up):
                    bad = next(c for c in up if c not in "ACGT")
                    raise SimulationFault(f"FASTA line {lineno}: invalid base {bad!r}")
                chunks.append(up)
    if name is not None:
        entries.append((name, "".join(chunks)))
    return entries


def select_longest(readset, n):
    """The n longest reads, the stand-in for the most time-consuming ones."""
    reads = sorted(readset.reads, key=lambda r: (-len(r.seq), r.rid))[:n]
    return ReadSet(reads, readset.accuracy, readset.seed, readset.error_events)


@dataclass
class MappingResult:
    rid: str
    mapped: bool
    interval: tuple | None
    chain_score: float
    align_score: int
    n_anchors: int

    def key(self):
        return (self.rid, self.mapped, self.interval, self.chain_score,
                self.align_score, self.n_anchors)


def _chain_box(rpos, qpos, chain_idx, k):
    idx = np.asarray(chain_idx)
    rlo = int(rpos[idx].min())
    rhi = int(rpos[idx].max()) + k
    qlo = int(qpos[idx].min())
    qhi = int(qpos[idx].max()) + k
    return rlo, rhi, qlo, qhi


def map_reads(machine, reference, readset, backend="host",
              chain_params=None, scoring=SwScoring(), costs=DEFAULT_COSTS,
              sort_threshold=RADIX_OFFLOAD_THRESHOLD, limit=500_000_000):
    """Map every read; returns (results, RunReport of the accumulated machine)."""
    if backend not in ("host", "squire"):
        raise SimulationFault(f"unknown backend {backend!r}")
    chain_params = chain_params or ChainParams(kmer=reference.k,
                                               lookback=SQUIRE_LOOKBACK)
    results = []
    report = None
    for read in readset:
        machine.memory.release_all()
        results.append(_map_one(machine, reference, read, backend, chain_params,
                                scoring, costs, sort_threshold, limit))
    report = machine.build_report()
    return results, report


def _map_one(machine, reference, read, backend, chain_params, scoring, costs,
             sort_threshold, limit):
    seed_fn = run_seed_squire if backend == "squire" else run_seed_host
    kwargs = {"stage_name": "seed", "sort_stage_name": "seed"}
    if backend == "squire":
        kwargs["threshold"] = sort_threshold
    (rpos, qpos), _ = seed_fn(machine, read.seq, reference.index,
                              reference.k, reference.w, costs=costs,
                              limit=limit, **kwargs)
    if rpos.size == 0:
        return MappingResult(read.rid, False, None, 0.0, 0, 0)

    if backend == "squire":
        chain_res, _ = run_chain_squire(machine, rpos, qpos, chain_params,
                                        costs=costs, limit=limit, stage_name="chain")
    else:
        chain_res, _ = run_chain_host(machine, rpos, qpos, chain_params,
                                      costs=costs, limit=limit, stage_name="chain")
    best = chain_res.best_chain()
    if best is None:
        return MappingResult(read.rid, False, None, 0.0, 0, int(rpos.size))

    rlo, rhi, qlo, qhi = _chain_box(rpos, qpos, best, reference.k)
    rlo = max(0, rlo - SW_MARGIN)
    rhi = min(len(reference), rhi + SW_MARGIN)
    qlo = max(0, qlo - SW_MARGIN)
    qhi = min(len(read.seq), qhi + SW_MARGIN)
    a = encode_bases(read.seq[qlo:qhi])
    b = encode_bases(reference.bases[rlo:rhi])
    sw_fn = run_sw_squire if backend == "squire" else run_sw_host
    (_, score), _ = sw_fn(machine, a, b, scoring, costs=costs, limit=limit,
                          stage_name="align")
    chain_score = float(chain_res.scores[best[0]])
    return MappingResult(read.rid, True, (rlo, rhi), chain_score, int(score),
                         int(rpos.size))


def map_reads_functional(reference, readset, chain_params=None, scoring=SwScoring()):
    """Pure mapping (no machine, no cycles) for functional cross-checks."""
    chain_params = chain_params or ChainParams(kmer=reference.k,
                                               lookback=SQUIRE_LOOKBACK)
    out = []
    for read in readset:
        rpos, qpos = seed_anchors(read.seq, reference.index, reference.k, reference.w)
        if rpos.size == 0:
            out.append(MappingResult(read.rid, False, None, 0.0, 0, 0))
            continue
        res = chain_reference(rpos, qpos, chain_params)
        best = res.best_chain()
        if best is None:
            out.append(MappingResult(read.rid, False, None, 0.0, 0, int(rpos.size)))
            continue
        rlo, rhi, qlo, qhi = _chain_box(rpos, qpos, best, reference.k)
        rlo = max(0, rlo - SW_MARGIN)
        rhi = min(len(reference), rhi + SW_MARGIN)
        qlo = max(0, qlo - SW_MARGIN)
        qhi = min(len(read.seq), qhi + SW_MARGIN)
        _, score = sw_reference(encode_bases(read.seq[qlo:qhi]),
                                encode_bases(reference.bases[rlo:rhi]), scoring)
        out.append(MappingResult(read.rid, True, (rlo, rhi),
                                 float(res.scores[best[0]]), int(score),
                                 int(rpos.size)))
    return out


STAGES = ("seed", "chain", "align")


def stage_breakdown(report):
    """Cycles per mapper stage; unmarked setup cycles fold into 'seed'."""
    cycles = dict(report.stage_cycles)
    out = {s: cycles.pop(s, 0) for s in STAGES}
    out["seed"] += sum(cycles.values())
    return out


def pipeline_speedup(report_host, report_squire):
    """Per-stage and total host/squire cycle ratios plus stage shares."""
    host = stage_breakdown(report_host)
    squire = stage_breakdown(report_squire)
    host_total = report_host.cycles_total
    squire_total = report_squire.cycles_total
    stages = {}
    for s in STAGES:
        stages[s] = {
            "host_cycles": host[s],
            "squire_cycles": squire[s],
            "speedup": (host[s] / squire[s]) if squire[s] else None,
        }
    return {
        "stages": stages,
        "total": {
            "host_cycles": host_total,
            "squire_cycles": squire_total,
            "speedup": host_total / squire_total if squire_total else None,
        },
        "stage_share": {
            "host": {s: host[s] / host_total if host_total else 0.0 for s in STAGES},
            "squire": {s: squire[s] / squire_total if squire_total else 0.0
                       for s in STAGES},
        },
    }


def mapping_accuracy(results, readset, min_overlap_frac=0.5):
    """Fraction of reads whose mapped interval overlaps truth by the given fraction."""
    by_id = {r.rid: r for r in readset}
    good = 0
    for res in results:
        read = by_id[res.rid]
        if not res.mapped:
            continue
        lo, hi = res.interval
        overlap = max(0, min(hi, read.true_end) - max(lo, read.true_start))
        if overlap >= min_overlap_frac * (read.true_end - read.true_start):
            good += 1
    return good / len(results) if results else 0.0
