import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chi2

from shadowlab.errors import (
    IncomparablePointsError, InvalidRadiusError, InvalidWindowError, ResolutionError,
)
from shadowlab.symbolic import (
    SymbolPoint, agreement_radius, ball_sample, distance, random_bits, sample_point, shift, shift_by,
)

bits_st = st.lists(st.integers(0, 1), min_size=1, max_size=40)


def test_window_rejects_bad_symbols():
    with pytest.raises(InvalidWindowError):
        SymbolPoint(0, [0, 2])
    with pytest.raises(InvalidWindowError):
        SymbolPoint(0, [])


def test_reads_outside_window_are_errors():
    p = SymbolPoint(-1, [1, 0, 1])
    assert p[1] == 1 and p[0] == 0
    with pytest.raises(ResolutionError) as err:
        p[2]
    assert err.value.index == 2
    with pytest.raises(ResolutionError):
        p.window(-2, 0)


def test_sample_point_single_bit_is_fair(rng):
    ones = sum(sample_point(0, 0, rng)[0] for _ in range(20000))
    assert abs(ones / 20000 - 0.5) < 0.015
    big = random_bits(rng, 100_000)
    assert abs(big.mean() - 0.5) < 0.01


def test_sample_point_window():
    p = sample_point(-2, 3, np.random.default_rng(0))
    assert (p.lo, p.hi, p.bits.size) == (-2, 3, 6)
    with pytest.raises(InvalidWindowError):
        sample_point(1, 0, np.random.default_rng(0))


def test_sample_point_patterns_uniform():
    rng = np.random.default_rng(7)
    bits = random_bits(rng, (1_000_000, 5))
    idx = bits.astype(np.int64) @ (1 << np.arange(4, -1, -1))
    counts = np.bincount(idx, minlength=32)
    expected = 1_000_000 / 32
    stat = float(np.sum((counts - expected) ** 2 / expected))
    assert chi2.sf(stat, 31) > 1e-3


def test_shift_reindexes():
    p = SymbolPoint(-1, [1, 0, 1])
    q = shift(p)
    assert (q.lo, q.hi) == (-2, 0)
    assert [q[j] for j in (-2, -1, 0)] == [1, 0, 1]


@given(bits_st, st.integers(-10, 10), st.integers(0, 5))
def test_shift_composition(bits, lo, k):
    p = SymbolPoint(lo, bits)
    q = p
    for _ in range(k):
        q = shift(q)
    assert q == shift_by(p, k)
    for j in range(q.lo, q.hi + 1):
        assert q[j] == p[j + k]
    assert shift_by(q, -k) == p


def test_distance_examples():
    a = SymbolPoint(-3, [0, 0, 0, 0, 0, 0, 0])
    b = SymbolPoint(-3, [0, 1, 0, 0, 0, 0, 0])  # differs at -2
    assert distance(a, b) == (0.25, False)
    assert distance(a, a) == (0.0, True)
    c = SymbolPoint(-3, [0, 0, 0, 1, 0, 0, 0])
    assert distance(a, c) == (1.0, False)
    with pytest.raises(IncomparablePointsError):
        distance(SymbolPoint(1, [0]), a)


def _direct_distance(p, q):
    W = min(-p.lo, p.hi, -q.lo, q.hi)
    ks = [abs(j) for j in range(-W, W + 1) if p[j] != q[j]]
    return 2.0 ** -min(ks) if ks else 0.0


@settings(max_examples=200)
@given(st.integers(1, 6), st.data())
def test_distance_matches_direct_and_ultrametric(W, data):
    pts = [SymbolPoint(-W, data.draw(st.lists(st.integers(0, 1), min_size=2 * W + 1, max_size=2 * W + 1)))
           for _ in range(3)]
    p, q, r = pts
    assert distance(p, q)[0] == _direct_distance(p, q)
    assert distance(p, q) == distance(q, p)
    dpr, fpr = distance(p, r)
    dpq, fpq = distance(p, q)
    dqr, fqr = distance(q, r)
    if not (fpr or fpq or fqr):
        assert dpr <= max(dpq, dqr)


@settings(max_examples=100)
@given(st.integers(2, 6), st.data())
def test_distance_after_shift_recomputed(W, data):
    n = 2 * W + 3
    p = SymbolPoint(-W - 1, data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)))
    q = SymbolPoint(-W - 1, data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)))
    sp, sq = shift(p), shift(q)
    assert distance(sp, sq)[0] == _direct_distance(sp, sq)


@pytest.mark.parametrize("d, n", [(0.3, 1), (1.0, 0), (2.0 ** -5, 5), (0.5, 1), (0.51, 0), (2.0 ** -5 * 1.01, 4)])
def test_agreement_radius(d, n):
    assert agreement_radius(d) == n
    assert 2.0 ** -(n + 1) < d <= 2.0 ** -n


@pytest.mark.parametrize("d", [0.0, -0.1, 1.5, math.nan])
def test_agreement_radius_rejects(d):
    with pytest.raises(InvalidRadiusError):
        agreement_radius(d)


@given(st.floats(min_value=1e-300, max_value=1.0))
def test_agreement_radius_inequality(d):
    n = agreement_radius(d)
    assert math.ldexp(1.0, -(n + 1)) < d <= math.ldexp(1.0, -n)


def test_ball_sample_copies_and_randomizes(rng):
    center = sample_point(-4, 4, rng)
    ones = 0
    M = 20000
    for _ in range(M):
        s = ball_sample(center, 0.3, rng)
        assert all(s[j] == center[j] for j in (-1, 0, 1))
        assert distance(s, center)[0] < 0.3
        ones += s[2]
    assert abs(ones / M - 0.5) < 0.015


def test_ball_sample_d_one_copies_only_origin(rng):
    center = SymbolPoint(-3, [1] * 7)
    draws = np.array([ball_sample(center, 1.0, rng).bits for _ in range(2000)])
    assert np.all(draws[:, 3] == 1)
    assert abs(draws[:, [0, 1, 2, 4, 5, 6]].mean() - 0.5) < 0.03


def test_ball_sample_tiny_radius_copies_window(rng):
    center = sample_point(-3, 3, rng)
    assert ball_sample(center, 2.0 ** -3, rng) == center


def test_ball_sample_needs_resolution(rng):
    with pytest.raises(ResolutionError):
        ball_sample(SymbolPoint(-1, [0, 0, 0]), 0.1, rng, lo=-3, hi=3)
