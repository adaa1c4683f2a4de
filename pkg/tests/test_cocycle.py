import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shadowlab.cocycle import (
    BirkhoffSums, LambdaTable, SkewState, birkhoff_log_sums, eval_lambda, expected_log,
    oscillation, pattern_index, pattern_indices, skew_step, tilde_compress,
)
from shadowlab.errors import DepthTooSmallError, InvalidTableError, ResolutionError
from shadowlab.symbolic import SymbolPoint, sample_point, shift


def test_table_validation():
    with pytest.raises(InvalidTableError):
        LambdaTable(0, [1.0])
    with pytest.raises(InvalidTableError):
        LambdaTable(0, [1.0, 0.0])
    with pytest.raises(InvalidTableError):
        LambdaTable(0, [1.0, math.inf])
    with pytest.raises(InvalidTableError):
        LambdaTable(-1, [1.0])


def test_eval_lambda_lookup(table):
    assert eval_lambda(table, SymbolPoint(0, [0])) == 2.0
    assert eval_lambda(table, SymbolPoint(0, [1])) == 1.0 / 3.0
    const = LambdaTable(1, [0.7] * 8)
    assert eval_lambda(const, SymbolPoint(-1, [1, 0, 1])) == 0.7
    with pytest.raises(ResolutionError):
        eval_lambda(const, SymbolPoint(0, [1, 0]))


def test_pattern_order_msb_is_leftmost():
    t = LambdaTable(1, np.arange(1, 9, dtype=float))
    assert eval_lambda(t, SymbolPoint(-1, [1, 0, 0])) == 5.0
    assert eval_lambda(t, SymbolPoint(-1, [0, 0, 1])) == 2.0


def test_eval_after_shift_enumerated():
    rng = np.random.default_rng(3)
    t = LambdaTable(1, rng.uniform(0.5, 2.0, 8))
    for pat in itertools.product((0, 1), repeat=4):
        w = SymbolPoint(-1, pat)  # indices -1..2
        expect = t.values[int("".join(map(str, pat[1:])), 2)]
        assert eval_lambda(t, shift(w)) == expect


def test_expected_log_examples(table):
    assert expected_log(table) == pytest.approx((math.log(2) + math.log(1 / 3)) / 2, abs=1e-15)
    assert expected_log(table) == pytest.approx(-0.202733, abs=1e-6)
    assert expected_log(LambdaTable(1, [3.0] * 8)) == pytest.approx(math.log(3.0))
    assert expected_log(LambdaTable(0, [2.0, 0.5])) == 0.0


def test_skew_step_examples(rng, table):
    w = sample_point(-2, 40, rng)
    s = SkewState(w, 0.0)
    for _ in range(5):
        s = skew_step(table, s)
        assert s.x == 0.0
    c = LambdaTable(0, [1.5, 1.5])
    s = SkewState(w, 1.0)
    for _ in range(10):
        s = skew_step(c, s)
    assert s.x == pytest.approx(1.5 ** 10, rel=1e-15)


def test_skew_step_matches_sums(rng):
    t = LambdaTable(1, rng.uniform(0.3, 3.0, 8))
    w = sample_point(-1, 25, rng)
    s = SkewState(w, 1.0)
    ws = [w]
    for _ in range(20):
        s = skew_step(t, s)
        ws.append(s.w)
    A = birkhoff_log_sums(t, ws)
    assert math.log(abs(s.x)) == pytest.approx(A[20], rel=1e-12)


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_skew_step_linear(alpha, x):
    t = LambdaTable(0, [2.0, 1.0 / 3.0])
    w = SymbolPoint(0, [1, 0])
    lhs = skew_step(t, SkewState(w, alpha * x)).x
    rhs = alpha * skew_step(t, SkewState(w, x)).x
    assert lhs == pytest.approx(rhs, rel=1e-15, abs=1e-300)


def test_birkhoff_examples(rng):
    w = sample_point(0, 0, rng)
    assert list(birkhoff_log_sums(LambdaTable(0, [2.0, 3.0]), [w]).sums) == [0.0]
    c = LambdaTable(0, [1.7, 1.7])
    ws = [SymbolPoint(0, [b]) for b in random_bitlist(rng, 11)]
    A = birkhoff_log_sums(c, ws).sums
    assert np.allclose(A, np.arange(11) * math.log(1.7), rtol=1e-14)
    with pytest.raises(ResolutionError) as err:
        birkhoff_log_sums(LambdaTable(1, [1.0] * 8),
                          [SymbolPoint(-1, [0, 0, 0]), SymbolPoint(0, [0, 0]), SymbolPoint(0, [0])])
    assert err.value.index == 1


def random_bitlist(rng, n):
    return rng.integers(0, 2, n).tolist()


def test_birkhoff_increments_in_table_and_log_linear(rng):
    t = LambdaTable(1, rng.uniform(0.3, 3.0, 8))
    w = sample_point(-1, 101, rng)
    ws = [w]
    for _ in range(100):
        ws.append(shift(ws[-1]))
    A = birkhoff_log_sums(t, ws).sums
    inc = np.diff(A)
    assert all(np.any(np.isclose(v, t.logs, rtol=0, atol=1e-12)) for v in inc)
    prod = np.cumprod([eval_lambda(t, p) for p in ws[:-1]])
    assert np.allclose(np.exp(A[1:]), prod, rtol=1e-12)


def test_exact_orbit_means_converge(table):
    rng = np.random.default_rng(11)
    J = 10_000
    means = []
    for _ in range(100):
        bits = rng.integers(0, 2, J)
        means.append(table.logs[bits].sum() / J)
    assert abs(np.mean(means) - expected_log(table)) < 0.02


def test_birkhoff_sums_require_zero_start():
    with pytest.raises(ValueError):
        BirkhoffSums([1.0, 2.0])


def test_pattern_indices_vectorized(rng):
    t = 2
    bits = rng.integers(0, 2, (50, 9)).astype(np.uint8)
    idx = pattern_indices(bits, -4, t)
    tab = LambdaTable(t, np.arange(1, 33, dtype=float))
    for row, k in zip(bits, idx):
        assert k == pattern_index(tab, SymbolPoint(-4, row))


def test_tilde_compress_identity(table):
    assert tilde_compress(table, 0) is table


def test_tilde_compress_degenerate_dependence():
    # depth 1 source depending only on w[0]
    vals = [0.5 if (k >> 1) & 1 == 0 else 0.25 for k in range(8)]
    src = LambdaTable(1, vals)
    out = tilde_compress(src, 0)
    assert np.allclose(out.values, [0.5, 0.25], rtol=1e-15)


def test_tilde_compress_random_depth2():
    rng = np.random.default_rng(5)
    logs = -0.5 + 0.04 * rng.standard_normal(32)
    src = LambdaTable(2, np.exp(logs))
    out = tilde_compress(src, 1)
    assert expected_log(out) == pytest.approx(expected_log(src), rel=1e-14)
    osc = oscillation(src, 1)
    for k in range(32):
        inner = (k >> 1) & 0b111
        assert abs(src.logs[k] - out.logs[inner]) <= osc[inner] + 1e-15
    assert np.all(out.values >= src.values.min() * (1 - 1e-15))


def test_tilde_compress_errors():
    with pytest.raises(InvalidTableError):
        tilde_compress(LambdaTable(1, [2.0] * 8), 0)
    wild = LambdaTable(1, [0.01, 10.0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5])
    with pytest.raises(DepthTooSmallError) as err:
        tilde_compress(wild, 0)
    assert err.value.pattern in ("0", "1")


def test_table_roundtrip(tmp_path):
    t = LambdaTable(1, np.random.default_rng(1).uniform(0.1, 3, 8))
    assert LambdaTable.loads(t.dumps()) == t
    t.save(tmp_path / "t.json")
    back = LambdaTable.load(tmp_path / "t.json")
    assert np.array_equal(back.values, t.values)
    with pytest.raises(InvalidTableError):
        LambdaTable.from_dict({"depth": 0, "values": [1, 2], "extra": 1})


@settings(max_examples=50)
@given(st.lists(st.floats(1e-6, 1e6), min_size=2, max_size=2))
def test_table_roundtrip_bit_exact(vals):
    t = LambdaTable(0, vals)
    assert np.array_equal(LambdaTable.loads(t.dumps()).values, t.values)


def test_inverted(table):
    inv = table.inverted()
    assert np.allclose(inv.values * table.values, 1.0)
    assert expected_log(inv) == pytest.approx(-expected_log(table))
