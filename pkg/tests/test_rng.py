"""Golden-value freeze of the PRNG stream contract.

Synthetic scenes and golden report fixtures depend on the exact draw
sequence, so any change to these values invalidates stored goldens.
"""

import math

import pytest

from chimptrack.rng import Xoshiro256

GOLDEN_U64_SEED42 = [
    1546998764402558742,
    6990951692964543102,
    12544586762248559009,
    17057574109182124193,
]
GOLDEN_U64_SEED0 = [11091344671253066420, 13793997310169335082]


def test_u64_golden_sequences():
    r = Xoshiro256(42)
    assert [r.next_u64() for _ in range(4)] == GOLDEN_U64_SEED42
    r = Xoshiro256(0)
    assert [r.next_u64() for _ in range(2)] == GOLDEN_U64_SEED0


def test_random_uses_top_53_bits():
    a = Xoshiro256(42)
    b = Xoshiro256(42)
    for _ in range(16):
        assert a.random() == (b.next_u64() >> 11) * 2.0**-53


def test_random_golden_values():
    r = Xoshiro256(42)
    got = [r.random() for _ in range(4)]
    want = [
        0.08386297105988216,
        0.3789802506626686,
        0.6800434110281394,
        0.9246929453253876,
    ]
    assert got == want


def test_uniform_is_affine_in_random():
    a = Xoshiro256(9)
    b = Xoshiro256(9)
    for _ in range(16):
        assert a.uniform(-3.0, 5.0) == -3.0 + 8.0 * b.random()


def test_gauss_golden_and_draw_count():
    r = Xoshiro256(42)
    got = [r.gauss() for _ in range(3)]
    want = [-1.6132237513849161, 0.7816920450573489, 0.015871293375984964]
    assert got == want
    # each call consumes exactly two uniforms
    a = Xoshiro256(7)
    a.gauss()
    a.gauss()
    b = Xoshiro256(7)
    for _ in range(4):
        b.random()
    assert a.next_u64() == b.next_u64()


def test_gauss_location_scale():
    a = Xoshiro256(15)
    b = Xoshiro256(15)
    for _ in range(8):
        z = a.gauss()
        assert b.gauss(10.0, 2.5) == pytest.approx(10.0 + 2.5 * z, rel=1e-12)


def test_poisson_golden_and_zero_rate_draws_nothing():
    r = Xoshiro256(42)
    assert [r.poisson(3.0) for _ in range(6)] == [1, 9, 7, 1, 3, 3]
    a = Xoshiro256(5)
    assert a.poisson(0.0) == 0
    assert a.next_u64() == Xoshiro256(5).next_u64()  # stream untouched
    with pytest.raises(ValueError):
        a.poisson(-0.1)


def test_randint_golden_bounds_and_validation():
    r = Xoshiro256(42)
    assert [r.randint(10) for _ in range(8)] == [2, 2, 9, 3, 6, 4, 4, 7]
    r = Xoshiro256(3)
    for _ in range(500):
        assert 0 <= r.randint(7) < 7
    with pytest.raises(ValueError):
        r.randint(0)


def test_shuffle_golden_and_degenerate_cases():
    r = Xoshiro256(42)
    xs = list(range(8))
    r.shuffle(xs)
    assert xs == [7, 2, 4, 0, 3, 5, 1, 6]
    assert sorted(xs) == list(range(8))
    empty: list = []
    r.shuffle(empty)
    assert empty == []
    one = [42]
    r.shuffle(one)
    assert one == [42]


def test_streams_deterministic_and_seed_sensitive():
    a = [Xoshiro256(1234).next_u64() for _ in range(8)]
    b = [Xoshiro256(1234).next_u64() for _ in range(8)]
    c = [Xoshiro256(1235).next_u64() for _ in range(8)]
    assert a == b
    assert a != c


def test_gauss_statistics_are_sane():
    r = Xoshiro256(99)
    n = 20000
    xs = [r.gauss() for _ in range(n)]
    mean = sum(xs) / n
    var = sum((x - mean) ** 2 for x in xs) / n
    assert abs(mean) < 0.03
    assert abs(var - 1.0) < 0.05
    assert abs(math.sqrt(var) - 1.0) < 0.03
