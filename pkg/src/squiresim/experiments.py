"""Batch experiments behind the CLI: kernel sweeps, sync comparison, cache sweep,
pipeline runs.  Every experiment is a pure function of its resolved spec dict,
which is embedded in the output so any report can be reproduced byte for byte.
"""

import numpy as np

from .errors import SimulationFault
from .machine import SCHEMA_VERSION, SquireConfig, SquireMachine
from .memory import mpki as mpki_of, replay_trace
from .kernels import inputs
from .kernels.chain import (BASELINE_LOOKBACK, SQUIRE_LOOKBACK, ChainParams,
                            chain_divergence, chain_reference, run_chain_host,
                            run_chain_squire)
from .kernels.dp2d import (dtw_reference, run_dtw_host, run_dtw_squire,
                           run_sw_host, run_sw_squire, sw_reference)
from .kernels.radix import radix_reference, run_radix_host, run_radix_squire
from .kernels.seeding import build_index, seed_anchors, run_seed_host, run_seed_squire
from .pipeline import (PROFILES, ReferenceGenome, generate_reads, map_reads,
                       mapping_accuracy, pipeline_speedup, select_longest,
                       stage_breakdown)

KERNELS = ("radix", "seed", "chain", "sw", "dtw")
DEFAULT_WORKER_COUNTS = [4, 8, 16, 32]
DEFAULT_SIZES = {k: inputs.SCALES[k][0] for k in KERNELS}
CACHE_SWEEP_SIZES = [1024, 2048, 4096, 8192, 16384]
CACHE_SWEEP_SETS = 8  # fixed set count so LRU inclusion holds across the sweep


def make_config(spec, workers, extra=None):
    overrides = dict(spec.get("config", {}))
    overrides.update(extra or {})
    overrides["num_workers"] = workers
    overrides.setdefault("scheduler_seed", spec.get("seed", 0))
    return SquireConfig(**overrides)


def _report_summary(report):
    return {
        "cycles": report.cycles_total,
        "worker_cycles": report.worker_cycles(),
        "arbiter_grants": report.arbiter["grants"],
        "worker_mpki": report.cache["workers"]["mpki"],
        "gcounter_final": report.gcounter["final"],
        "deadlock": report.deadlock is not None,
    }


# --------------------------------------------------------------- kernel sweep

class _KernelCase:
    """One generated instance: functional input plus oracle expectations."""

    def __init__(self, kernel, size, seed):
        self.kernel = kernel
        self.size = size
        self.seed = seed
        if kernel == "radix":
            self.keys = inputs.gen_keys(size, seed)
        elif kernel == "dtw":
            self.sig = inputs.gen_signal_pair(size, seed)
        elif kernel == "sw":
            self.seqs = inputs.gen_seq_pair(size, seed)
        elif kernel == "chain":
            self.anchors = inputs.gen_anchors(size, seed)
        elif kernel == "seed":
            ref, positions = inputs.gen_repetitive_reference(
                1_000_000, seed, motif_len=4000, repeats=24)
            self.index = build_index(ref)
            rng = inputs.rng_for(seed + 7)
            at = positions[int(rng.integers(0, len(positions)))] if positions else 0
            start = max(0, min(at - int(rng.integers(0, 2000)), len(ref) - size))
            self.query = ref[start:start + size]
        else:
            raise SimulationFault(f"unknown kernel {kernel!r}")

    def run_host(self, machine):
        if self.kernel == "radix":
            return run_radix_host(machine, self.keys)
        if self.kernel == "dtw":
            return run_dtw_host(machine, *self.sig)
        if self.kernel == "sw":
            return run_sw_host(machine, *self.seqs)
        if self.kernel == "chain":
            return run_chain_host(machine, *self.anchors,
                                  ChainParams(lookback=BASELINE_LOOKBACK))
        return run_seed_host(machine, self.query, self.index)

    def run_squire(self, machine):
        if self.kernel == "radix":
            return run_radix_squire(machine, self.keys)
        if self.kernel == "dtw":
            return run_dtw_squire(machine, *self.sig)
        if self.kernel == "sw":
            return run_sw_squire(machine, *self.seqs)
        if self.kernel == "chain":
            return run_chain_squire(machine, *self.anchors)
        return run_seed_squire(machine, self.query, self.index)

    def check_squire_output(self, result):
        """Squire output must equal the sequential reference; faults otherwise."""
        if self.kernel == "radix":
            expect = radix_reference(self.keys)
            ok = result.tolist() == expect
        elif self.kernel == "dtw":
            mat, dist = dtw_reference(*self.sig)
            ok = np.array_equal(result[0], mat) and result[1] == dist
        elif self.kernel == "sw":
            mat, best = sw_reference(*self.seqs)
            ok = np.array_equal(result[0], mat) and result[1] == best
        elif self.kernel == "chain":
            expect = chain_reference(*self.anchors,
                                     ChainParams(lookback=SQUIRE_LOOKBACK))
            ok = (np.array_equal(result.scores, expect.scores)
                  and np.array_equal(result.pred, expect.pred))
        else:
            er, eq = seed_anchors(self.query, self.index)
            ok = (np.array_equal(result[0], er) and np.array_equal(result[1], eq))
        if not ok:
            raise SimulationFault(
                f"{self.kernel} squire output diverged from reference "
                f"(size={self.size}, seed={self.seed})")


def run_kernel_experiment(spec):
    p = spec["params"]
    kernel = p["kernel"]
    size = p["size"]
    worker_counts = p["workers"]
    reps = p["reps"]
    rows = []
    for rep in range(reps):
        case_seed = spec.get("seed", 0) + rep * 1009
        case = _KernelCase(kernel, size, case_seed)
        host_machine = SquireMachine(make_config(spec, workers=1,
                                                 extra={"scheduler_seed": case_seed}))
        _, host_rep = case.run_host(host_machine)
        if host_rep.deadlock:
            raise SimulationFault(f"host {kernel} run deadlocked")
        extras = {}
        if kernel == "chain":
            diverged, ends = chain_divergence(*case.anchors)
            extras["window_divergence"] = {"diverged": diverged, **ends}
        for workers in worker_counts:
            m = SquireMachine(make_config(spec, workers=workers,
                                          extra={"scheduler_seed": case_seed}))
            result, squire_rep = case.run_squire(m)
            case.check_squire_output(result)
            if squire_rep.deadlock:
                raise SimulationFault(f"squire {kernel} run deadlocked")
            rows.append({
                "kernel": kernel,
                "size": size,
                "rep": rep,
                "workers": workers,
                "host_cycles": host_rep.cycles_total,
                "squire_cycles": squire_rep.cycles_total,
                "speedup": host_rep.cycles_total / squire_rep.cycles_total,
                "l2_accesses_per_cycle": (squire_rep.arbiter["grants"]
                                          / squire_rep.cycles_total),
                "squire": _report_summary(squire_rep),
                **extras,
            })
    return rows


# ----------------------------------------------------------------- syncbench

def run_syncbench(spec):
    p = spec["params"]
    size = p["size"]
    rows = []
    seed = spec.get("seed", 0)
    sig = inputs.gen_signal_pair(size, seed)
    for lock_cost in p["lock_costs"]:
        for workers in p["workers"]:
            hw = SquireMachine(make_config(spec, workers=workers))
            (_, d_hw), rep_hw = run_dtw_squire(hw, *sig)
            sw = SquireMachine(make_config(
                spec, workers=workers,
                extra={"sync_backend": "software-lock",
                       "lock_acquire_cycles": lock_cost}))
            (_, d_sw), rep_sw = run_dtw_squire(sw, *sig)
            if d_hw != d_sw:
                raise SimulationFault("sync backend changed functional output")
            rows.append({
                "workers": workers,
                "lock_cost": lock_cost,
                "hw_cycles": rep_hw.cycles_total,
                "lock_cycles": rep_sw.cycles_total,
                "ratio": rep_sw.cycles_total / rep_hw.cycles_total,
            })
    return rows


# ---------------------------------------------------------------- cache sweep

def _sweep_geometry(size):
    assoc = size // (CACHE_SWEEP_SETS * 64)
    if assoc < 1:
        raise SimulationFault(f"cache size {size} too small for the sweep geometry")
    return assoc


def _pipeline_setup(spec):
    p = spec["params"]
    seed = spec.get("seed", 0)
    reference = ReferenceGenome.synthetic(p["ref_size"], seed=seed + 1)
    profile = PROFILES[p["profile"]]
    readset = generate_reads(reference, p["reads"], profile.avg_len,
                             profile.accuracy, seed=seed + 2)
    if p.get("top"):
        readset = select_longest(readset, p["top"])
    return reference, readset


def run_cachesweep(spec):
    p = spec["params"]
    reference, readset = _pipeline_setup(spec)
    rows = []
    trace = None
    instructions = None
    for size in p["sizes"]:
        assoc = _sweep_geometry(size)
        m = SquireMachine(make_config(spec, workers=p["workers"],
                                      extra={"l1d_size": size, "l1d_assoc": assoc}))
        if trace is None:
            m.mem_trace = []
        _, rep = map_reads(m, reference, readset, backend="squire",
                           sort_threshold=p["sort_threshold"])
        if rep.deadlock:
            raise SimulationFault("cache sweep pipeline run deadlocked")
        if trace is None:
            trace = m.mem_trace
            instructions = rep.cache["workers"]["instructions"]
        rows.append({"size_bytes": size, "assoc": assoc,
                     "cycles": rep.cycles_total})
    # MPKI from one fixed recorded trace so the LRU stack property holds exactly
    for row in rows:
        misses = replay_trace(trace, row["size_bytes"], row["assoc"], 64,
                              num_caches=p["workers"])
        row["mpki"] = mpki_of(misses, instructions)
    largest = rows[-1]["mpki"]
    knee = next((r["size_bytes"] for r in rows if r["mpki"] <= 1.1 * largest),
                rows[-1]["size_bytes"])
    return {"rows": rows, "knee_size_bytes": knee,
            "instructions": instructions, "trace_length": len(trace)}


# ------------------------------------------------------------------- pipeline

def run_pipeline_experiment(spec):
    p = spec["params"]
    reference, readset = _pipeline_setup(spec)
    out = {"profile": p["profile"], "reads": len(readset)}
    reports = {}
    results = {}
    for backend in p["backends"]:
        m = SquireMachine(make_config(spec, workers=p["workers"]))
        res, rep = map_reads(m, reference, readset, backend=backend,
                             sort_threshold=p["sort_threshold"])
        if rep.deadlock:
            raise SimulationFault(f"pipeline {backend} run deadlocked")
        reports[backend] = rep
        results[backend] = res
        out[backend] = {
            "stage_cycles": stage_breakdown(rep),
            "cycles_total": rep.cycles_total,
            "mapped": sum(1 for r in res if r.mapped),
            "accuracy": mapping_accuracy(res, readset),
        }
    if "host" in results and "squire" in results:
        if [r.key() for r in results["host"]] != [r.key() for r in results["squire"]]:
            raise SimulationFault("pipeline backends produced different mappings")
        out["speedup"] = pipeline_speedup(reports["host"], reports["squire"])
    out["per_read"] = [
        {"rid": r.rid, "mapped": r.mapped, "interval": list(r.interval) if r.interval else None,
         "chain_score": r.chain_score, "align_score": r.align_score,
         "n_anchors": r.n_anchors}
        for r in results[p["backends"][0]]
    ]
    return out


# ------------------------------------------------------------------ dispatch

_RUNNERS = {
    "kernel": run_kernel_experiment,
    "syncbench": run_syncbench,
    "cache-sweep": run_cachesweep,
    "pipeline": run_pipeline_experiment,
}


def run_from_spec(spec):
    """Execute an experiment spec; the result embeds the spec for reruns."""
    sub = spec["subcommand"]
    if sub not in _RUNNERS:
        raise SimulationFault(f"unknown subcommand {sub!r}")
    results = _RUNNERS[sub](spec)
    return {"schema_version": SCHEMA_VERSION, "spec": spec, "results": results}
