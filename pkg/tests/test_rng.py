import numpy as np

from pairdesign.rng import (GOLDEN_GAMMA, MASK64, SplitMix64, derive_seed,
                            derive_seed_array, fnv1a64, mix64, mix64_array,
                            stream_block, stream_tick, uint64_to_unit)


def test_stream_definition():
    # output k is mix64(seed + k * GOLDEN_GAMMA)
    rng = SplitMix64(12345)
    outs = [rng.next_uint64() for _ in range(5)]
    expected = [mix64((12345 + k * GOLDEN_GAMMA) & MASK64) for k in range(1, 6)]
    assert outs == expected


def test_mix64_array_matches_scalar():
    vals = np.array([0, 1, 2**63, MASK64, 987654321], dtype=np.uint64)
    vec = mix64_array(vals)
    for v, out in zip(vals, vec):
        assert mix64(int(v)) == int(out)


def test_stream_block_and_tick_match_scalar():
    seeds = np.array([7, 8, 9], dtype=np.uint64)
    block = stream_block(seeds, 3, 4)
    for r, s in enumerate(seeds):
        rng = SplitMix64(int(s))
        rng.next_uint64()
        rng.next_uint64()
        for c in range(4):
            assert int(block[r, c]) == rng.next_uint64()
    tick5 = stream_tick(seeds, 5)
    for r, s in enumerate(seeds):
        rng = SplitMix64(int(s))
        vals = [rng.next_uint64() for _ in range(5)]
        assert int(tick5[r]) == vals[-1]


def test_next_double_unit_interval():
    rng = SplitMix64(5)
    xs = [rng.next_double() for _ in range(1000)]
    assert all(0.0 <= x < 1.0 for x in xs)
    assert 0.4 < float(np.mean(xs)) < 0.6


def test_uint64_to_unit_matches_next_double():
    rng1 = SplitMix64(99)
    u = stream_block(np.array([99], np.uint64), 1, 10)
    x = uint64_to_unit(u)[0]
    for k in range(10):
        assert x[k] == rng1.next_double()


def test_derive_seed_array_matches_scalar():
    reps = np.arange(20, dtype=np.uint64)
    vec = derive_seed_array(777, 42, indices=reps)
    for r in range(20):
        assert int(vec[r]) == derive_seed(777, 42, r)


def test_derive_seed_distinct():
    seen = {derive_seed(1, a, b) for a in range(20) for b in range(20)}
    assert len(seen) == 400


def test_fnv1a64_stable():
    assert fnv1a64("bcrd") == fnv1a64(b"bcrd")
    assert fnv1a64("bcrd") != fnv1a64("pm")


def test_shuffle_is_permutation_and_deterministic():
    rng = SplitMix64(4)
    items = list(range(10))
    rng.shuffle(items)
    assert sorted(items) == list(range(10))
    rng2 = SplitMix64(4)
    items2 = list(range(10))
    rng2.shuffle(items2)
    assert items == items2


def test_choose_without_replacement():
    rng = SplitMix64(11)
    counts = np.zeros(8)
    for _ in range(4000):
        picked = rng.choose_without_replacement(8, 4)
        assert picked == sorted(set(picked))
        counts[picked] += 1
    freq = counts / 4000
    assert np.all(np.abs(freq - 0.5) < 0.05)
