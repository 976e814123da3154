"""Cost table: fixed op counts charged per kernel step.

Each constant counts the issue slots a dual-issue in-order core would spend
on one step of the reference code (arithmetic, compares, address math, loop
overhead; floating-point steps weigh more than integer ones).  They drive
only timing, never results, and are plain config so sensitivity runs can
override them.  The README documents the derivation per kernel.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class CostTable:
    # program prologue: id_worker/num_workers calls plus bounds arithmetic
    prelude_ops: int = 8

    # radix sort
    radix_count_ops: int = 4        # per element, histogram pass
    radix_scatter_ops: int = 6      # per element, scatter pass
    radix_insertion_ops: int = 4    # per compare-shift step in the cutoff sorter
    radix_seg_overhead_ops: int = 32  # per segment: bucket boundary setup
    merge_base_ops: int = 4         # per element popped from the k-way heap
    merge_level_ops: int = 2        # per element per log2(k) heap level

    # seeding
    minimizer_ops_per_base: int = 10   # rolling encode + window-min update
    lookup_ops_per_minimizer: int = 10  # hash + probe
    anchor_emit_ops: int = 4           # per anchor tuple written

    # chain
    matchup_ops: int = 12     # bonus/penalty evaluation for one predecessor
    chain_scan_ops: int = 1   # per window slot in the consume pass
    chain_add_ops: int = 3    # per consumed predecessor score
    chain_finalize_ops: int = 8  # max reduction + store + bookkeeping

    # 2D dynamic programming
    dtw_cell_ops: int = 40  # float abs-diff, 3-way min, add, addressing
    sw_cell_ops: int = 16   # int compare/select, 4-way max, addressing

    # pipeline glue
    backtrack_ops_per_anchor: int = 2


DEFAULT_COSTS = CostTable()
