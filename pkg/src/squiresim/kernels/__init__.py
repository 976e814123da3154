"""The five dependency-bound kernels: sequential references and Squire programs."""

from .costs import CostTable, DEFAULT_COSTS
from .radix import radix_reference, run_radix_host, run_radix_squire, RADIX_OFFLOAD_THRESHOLD
from .seeding import minimizers, build_index, seed_anchors, run_seed_host, run_seed_squire
from .chain import (
    ChainParams,
    ChainResult,
    anchor_bonus_and_penalty,
    chain_reference,
    run_chain_host,
    run_chain_squire,
    chain_divergence,
)
from .dp2d import (
    SwScoring,
    dtw_reference,
    sw_reference,
    run_dtw_host,
    run_dtw_squire,
    run_sw_host,
    run_sw_squire,
)
from . import inputs

__all__ = [
    "CostTable",
    "DEFAULT_COSTS",
    "radix_reference",
    "run_radix_host",
    "run_radix_squire",
    "RADIX_OFFLOAD_THRESHOLD",
    "minimizers",
    "build_index",
    "seed_anchors",
    "run_seed_host",
    "run_seed_squire",
    "ChainParams",
    "ChainResult",
    "anchor_bonus_and_penalty",
    "chain_reference",
    "run_chain_host",
    "run_chain_squire",
    "chain_divergence",
    "SwScoring",
    "dtw_reference",
    "sw_reference",
    "run_dtw_host",
    "run_dtw_squire",
    "run_sw_host",
    "run_sw_squire",
    "inputs",
]
