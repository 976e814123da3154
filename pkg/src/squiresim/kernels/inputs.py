"""Seeded input generators matched to the evaluation dataset scales.

Every generator is a pure function of its seed.  DTW signals are
integer-valued float64 samples so that distributed and sequential matrix
fills stay exactly representable (see dp2d module docstring).
"""

import numpy as np

_BASES = np.frombuffer(b"ACGT", dtype=np.uint8)

# kernel -> (average size, size stddev, floor, cap); averages/deviations follow
# the evaluation datasets, caps keep desk-scale runtimes bounded
SCALES = {
    "radix": (53536, 36886, 1024, 90000),
    "seed": (23014, 15075, 1000, 38089),
    "chain": (53536, 36886, 512, 90000),
    "sw": (1373, 2950, 64, 2500),
    "dtw": (221, 101, 16, 322),
}


def rng_for(seed):
    return np.random.default_rng(seed)


def sample_size(kernel, seed):
    avg, std, floor, cap = SCALES[kernel]
    val = int(rng_for(seed).normal(avg, std))
    return max(floor, min(val, cap))


def gen_keys(n, seed):
    """Random unsigned 64-bit sort keys."""
    return rng_for(seed).integers(0, 1 << 64, size=n, dtype=np.uint64)


def gen_signal(n, seed, levels=1024):
    """Integer-valued float64 signal: a smoothed random walk, quantized."""
    rng = rng_for(seed)
    steps = rng.integers(-8, 9, size=n)
    walk = np.cumsum(steps) + levels // 2
    return np.clip(walk, 0, levels - 1).astype(np.float64)


def gen_signal_pair(avg_len, seed):
    rng = rng_for(seed)
    n = max(8, int(rng.normal(avg_len, avg_len * 0.3)))
    m = max(8, int(rng.normal(avg_len, avg_len * 0.3)))
    return gen_signal(n, seed * 2 + 1), gen_signal(m, seed * 2 + 2)


def gen_bases(n, seed):
    """Random base codes 0..3."""
    return rng_for(seed).integers(0, 4, size=n).astype(np.int64)


def bases_to_str(codes):
    return bytes(_BASES[np.asarray(codes, dtype=np.int64)]).decode()


def gen_sequence(n, seed):
    return bases_to_str(gen_bases(n, seed))


def mutate_bases(codes, rate, seed):
    """Substitution-only mutation at the given per-base rate."""
    rng = rng_for(seed)
    codes = np.asarray(codes, dtype=np.int64).copy()
    hit = rng.random(codes.size) < rate
    codes[hit] = (codes[hit] + rng.integers(1, 4, size=int(hit.sum()))) % 4
    return codes


def gen_seq_pair(avg_len, seed, divergence=0.1):
    """A pair of related sequences for local alignment."""
    rng = rng_for(seed)
    n = max(16, int(rng.normal(avg_len, avg_len * 0.25)))
    m = max(16, int(rng.normal(avg_len, avg_len * 0.25)))
    a = gen_bases(n, seed * 2 + 1)
    b = mutate_bases(a, divergence, seed * 2 + 2)
    if m <= n:
        b = b[:m]
    else:
        b = np.concatenate([b, gen_bases(m - n, seed * 2 + 3)])
    return a, b


def gen_anchors(n, seed, query_span=23014, band_fraction=0.6, ref_span=None):
    """Synthetic sorted anchors: one colinear band plus uniform background.

    The band models the true mapping locus (reference delta tracks query
    delta); the background models spurious minimizer hits.  Returned sorted
    by reference position with query position tie-break.
    """
    rng = rng_for(seed)
    if ref_span is None:
        ref_span = max(2_000_000, n * 37)
    n_band = int(n * band_fraction)
    n_bg = n - n_band
    offset = int(rng.integers(0, max(ref_span - query_span, 1)))
    q_band = np.sort(rng.integers(0, query_span, size=n_band))
    r_band = offset + q_band + rng.integers(-40, 41, size=n_band)
    r_band = np.clip(r_band, 0, ref_span - 1)
    r_bg = rng.integers(0, ref_span, size=n_bg)
    q_bg = rng.integers(0, query_span, size=n_bg)
    rpos = np.concatenate([r_band, r_bg]).astype(np.int64)
    qpos = np.concatenate([q_band, q_bg]).astype(np.int64)
    order = np.lexsort((qpos, rpos))
    return rpos[order], qpos[order]


def gen_repetitive_reference(length, seed, motif_len=3000, repeats=12):
    """Synthetic reference with a repeated motif; returns (bases, copy positions).

    Repeats multiply minimizer hits, which is what makes the seeding sort
    large enough to offload.
    """
    rng = rng_for(seed)
    codes = gen_bases(length, seed)
    positions = []
    if motif_len and repeats and length > motif_len * 2:
        start = int(rng.integers(0, length - motif_len))
        motif = codes[start:start + motif_len].copy()
        positions.append(start)
        for _ in range(repeats):
            at = int(rng.integers(0, length - motif_len))
            codes[at:at + motif_len] = motif
            positions.append(at)
    return bases_to_str(codes), positions


def gen_reference(length, seed, motif_len=3000, repeats=12):
    return gen_repetitive_reference(length, seed, motif_len, repeats)[0]


def gen_query_from_reference(ref, length, seed, accuracy=0.95):
    """Sample a query window from the reference with substitution noise."""
    rng = rng_for(seed)
    length = min(length, len(ref))
    start = int(rng.integers(0, len(ref) - length + 1))
    from .seeding import encode_bases
    codes = encode_bases(ref[start:start + length])
    codes = mutate_bases(codes, 1.0 - accuracy, seed + 1)
    return bases_to_str(codes), start
