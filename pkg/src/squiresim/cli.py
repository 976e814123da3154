"""Command-line harness.

Subcommands: kernel | syncbench | cache-sweep | pipeline.  Every output file
embeds the fully resolved spec (defaults and seeds included), so rerunning
from the embedded spec reproduces the file byte for byte.  Exit status is 0
only when every simulation completed without faults or deadlocks.
"""

import argparse
import csv
import dataclasses
import io
import json
import os
import sys

from .errors import SimulationFault
from .experiments import (CACHE_SWEEP_SIZES, DEFAULT_SIZES, DEFAULT_WORKER_COUNTS,
                          KERNELS, run_from_spec)
from .machine import SquireConfig
from .pipeline import PROFILES

OUT_DIR_ENV = "SQUIRESIM_OUT_DIR"


def _parse_config_file(path):
    """key=value lines mapped onto SquireConfig fields with type coercion."""
    fields = {f.name: f.type for f in dataclasses.fields(SquireConfig)}
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SimulationFault(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in fields:
                raise SimulationFault(f"{path}:{lineno}: unknown config key {key!r}")
            out[key] = _coerce(key, value)
    return out


def _coerce(key, value):
    if key in ("host_ipc_factor", "l2_miss_ratio"):
        return float(value)
    if key == "sync_backend":
        return value
    if key == "gcounter_queue_depth":
        return None if value.lower() == "none" else int(value)
    return int(value)


def _int_list(text):
    return [int(x) for x in text.split(",") if x]


def build_parser():
    parser = argparse.ArgumentParser(
        prog="squiresim",
        description="Cycle-approximate Squire accelerator simulator harness")
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--out", default=None, help="output file path")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    parser.add_argument("--config", default=None,
                        help="machine config file with key=value overrides")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    k = sub.add_parser("kernel", help="baseline vs Squire runs for one kernel")
    k.add_argument("--kernel", choices=KERNELS, required=True)
    k.add_argument("--workers", type=_int_list, default=DEFAULT_WORKER_COUNTS,
                   help="comma-separated worker counts")
    k.add_argument("--size", type=int, default=None,
                   help="instance size (defaults to the evaluation-scale average)")
    k.add_argument("--reps", type=int, default=1)

    s = sub.add_parser("syncbench", help="hardware counters vs software lock on DTW")
    s.add_argument("--workers", type=_int_list, default=[4, 8, 16])
    s.add_argument("--size", type=int, default=DEFAULT_SIZES["dtw"])
    s.add_argument("--lock-costs", type=_int_list, default=[30],
                   help="software-lock acquire costs to sweep")

    c = sub.add_parser("cache-sweep", help="D-cache MPKI over the pipeline trace")
    c.add_argument("--sizes", type=_int_list, default=CACHE_SWEEP_SIZES)
    c.add_argument("--workers", type=int, default=16)
    c.add_argument("--profile", choices=sorted(PROFILES), default="ont")
    c.add_argument("--reads", type=int, default=6)
    c.add_argument("--top", type=int, default=None)
    c.add_argument("--ref-size", type=int, default=300_000)
    c.add_argument("--sort-threshold", type=int, default=10000)

    p = sub.add_parser("pipeline", help="end-to-end read mapping")
    p.add_argument("--profile", choices=sorted(PROFILES), default="ont")
    p.add_argument("--reads", type=int, default=24)
    p.add_argument("--top", type=int, default=18,
                   help="keep only the N longest reads (0 = all)")
    p.add_argument("--ref-size", type=int, default=1_000_000)
    p.add_argument("--workers", type=int, default=16)
    p.add_argument("--backend", choices=("host", "squire", "both"), default="both")
    p.add_argument("--sort-threshold", type=int, default=10000)
    return parser


def resolve_spec(args):
    config = _parse_config_file(args.config) if args.config else {}
    spec = {
        "subcommand": args.subcommand,
        "seed": args.seed,
        "config": config,
    }
    if args.subcommand == "kernel":
        spec["params"] = {
            "kernel": args.kernel,
            "size": args.size if args.size is not None else DEFAULT_SIZES[args.kernel],
            "workers": args.workers,
            "reps": args.reps,
        }
    elif args.subcommand == "syncbench":
        spec["params"] = {
            "size": args.size,
            "workers": args.workers,
            "lock_costs": args.lock_costs,
        }
    elif args.subcommand == "cache-sweep":
        spec["params"] = {
            "sizes": args.sizes,
            "workers": args.workers,
            "profile": args.profile,
            "reads": args.reads,
            "top": args.top,
            "ref_size": args.ref_size,
            "sort_threshold": args.sort_threshold,
        }
    else:
        backends = ["host", "squire"] if args.backend == "both" else [args.backend]
        spec["params"] = {
            "profile": args.profile,
            "reads": args.reads,
            "top": args.top or None,
            "ref_size": args.ref_size,
            "workers": args.workers,
            "backends": backends,
            "sort_threshold": args.sort_threshold,
        }
    return spec


def render_json(output):
    return json.dumps(output, sort_keys=True, indent=2) + "\n"


_CSV_COLUMNS = {
    "kernel": ["kernel", "size", "rep", "workers", "host_cycles", "squire_cycles",
               "speedup", "l2_accesses_per_cycle"],
    "syncbench": ["workers", "lock_cost", "hw_cycles", "lock_cycles", "ratio"],
    "cache-sweep": ["size_bytes", "assoc", "mpki", "cycles"],
}


def render_csv(output):
    sub = output["spec"]["subcommand"]
    if sub not in _CSV_COLUMNS:
        raise SimulationFault(f"{sub} has no CSV rendering; use --format json")
    columns = _CSV_COLUMNS[sub]
    rows = output["results"]["rows"] if sub == "cache-sweep" else output["results"]
    buf = io.StringIO()
    buf.write("# spec=" + json.dumps(output["spec"], sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([row[c] for c in columns])
    return buf.getvalue()


def default_out_path(spec, fmt):
    out_dir = os.environ.get(OUT_DIR_ENV, ".")
    return os.path.join(out_dir, f"{spec['subcommand']}.{fmt}")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    spec = resolve_spec(args)
    try:
        output = run_from_spec(spec)
    except SimulationFault as exc:
        print(f"simulation fault: {exc}", file=sys.stderr)
        return 2
    text = render_json(output) if args.format == "json" else render_csv(output)
    path = args.out or default_out_path(spec, args.format)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)
    print(f"wrote {path}")
    return 1 if _any_deadlock(output) else 0


def _any_deadlock(output):
    found = []

    def walk(node):
        if isinstance(node, dict):
            for key, value in node.items():
                if key == "deadlock" and value:
                    found.append(True)
                walk(value)
        elif isinstance(node, list):
            for item in node:
                walk(item)

    walk(output)
    return bool(found)


if __name__ == "__main__":
    sys.exit(main())
