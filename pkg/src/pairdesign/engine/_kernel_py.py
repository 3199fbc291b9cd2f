"""Pure-NumPy replicate kernel, vectorized across a batch of replicates.

Produces draws bit-identical to the scalar path (``sample_allocation``
followed by per-subject response draws) and to the compiled kernel: every
replicate owns a counter-based stream, and each phase consumes a fixed
number of ticks, so the whole batch can be advanced one tick at a time
with array operations.
"""

from __future__ import annotations

import numpy as np

from ..rng import stream_block, stream_tick, uint64_to_unit


def simulate_batch(seeds, order, block_sizes, p_t, p_c,
                   pm_random: bool = False, need_wy: bool = False):
    """Run one batch of replicates; see the engine package docstring.

    Returns ``(s_t, s_c, W, Y)`` where ``s_t``/``s_c`` count successes in
    the treatment/control arm per replicate and ``W``/``Y`` are the
    allocation and response matrices (or ``None`` unless ``need_wy``).
    """
    seeds = np.ascontiguousarray(seeds, dtype=np.uint64)
    p_t = np.asarray(p_t, dtype=float)
    p_c = np.asarray(p_c, dtype=float)
    m = seeds.shape[0]
    nn = p_t.shape[0]
    rows = np.arange(m)
    tick = 0

    if pm_random:
        # Per-replicate uniform matching: Fisher-Yates over the identity,
        # then consecutive entries form the pairs.
        order_m = np.tile(np.arange(nn, dtype=np.int64), (m, 1))
        for i in range(nn - 1, 0, -1):
            tick += 1
            u = stream_tick(seeds, tick)
            j = (u % np.uint64(i + 1)).astype(np.int64)
            col_i = order_m[:, i].copy()
            vals_j = order_m[rows, j]
            order_m[rows, j] = col_i
            order_m[:, i] = vals_j
        sizes = [2] * (nn // 2)
    else:
        order_m = None
        order = np.ascontiguousarray(order, dtype=np.int64)
        sizes = [int(s) for s in block_sizes]

    # Balanced sign template per block, shuffled in place.
    template = np.empty((m, nn), dtype=np.int8)
    pos = 0
    for sz in sizes:
        half = sz // 2
        template[:, pos:pos + half] = 1
        template[:, pos + half:pos + sz] = -1
        for i in range(sz - 1, 0, -1):
            tick += 1
            u = stream_tick(seeds, tick)
            j = pos + (u % np.uint64(i + 1)).astype(np.int64)
            col_i = template[:, pos + i].copy()
            vals_j = template[rows, j]
            template[rows, j] = col_i
            template[:, pos + i] = vals_j
        pos += sz

    w = np.empty((m, nn), dtype=np.int8)
    if pm_random:
        w[rows[:, None], order_m] = template
    else:
        w[:, order] = template

    # One response draw per subject, in subject-index order.
    u = stream_block(seeds, tick + 1, nn)
    x = uint64_to_unit(u)
    p = np.where(w > 0, p_t[None, :], p_c[None, :])
    y = (x < p).astype(np.int8)

    hits = y == 1
    treated = w > 0
    s_t = np.sum(hits & treated, axis=1, dtype=np.int64)
    s_c = np.sum(hits & ~treated, axis=1, dtype=np.int64)
    if need_wy:
        return s_t, s_c, w, y
    return s_t, s_c, None, None
