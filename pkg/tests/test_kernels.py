import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shadowlab import _pure, kernels
from shadowlab.checks import check_backends

compiled = pytest.mark.skipif(len(kernels.available()) < 2, reason="compiled backend not built")


def test_backend_selection():
    assert kernels.BACKEND in kernels.available()
    assert kernels.get("pure") is _pure
    with pytest.raises(ValueError):
        kernels.get("fortran")


def test_pure_kernels_examples():
    assert np.array_equal(_pure.linear_recurrence([2.0, 2.0], [1.0, 0.0], 1.0), [1.0, 3.0, 6.0])
    fresh = np.array([[1, 0, 1], [0, 0, 0], [1, 1, 1]], dtype=np.uint8)
    out = _pure.carry_windows(fresh, 0, 1)
    assert out.tolist() == [[1, 0, 1], [0, 1, 0], [1, 0, 1]]
    p, q, y = _pure.chebyshev_pair(np.arange(3), np.ones(3), np.array([0.0, 1.0, 2.0]))
    assert (p, q, y) == (2, 0, 1.0)


@compiled
@settings(max_examples=80, deadline=None)
@given(st.integers(1, 200), st.integers(0, 2 ** 32 - 1))
def test_backends_agree_bitwise(J, seed):
    rng = np.random.default_rng(seed)
    core = kernels.get("cython")
    A = np.concatenate(([0.0], np.cumsum(rng.uniform(-1, 1, J))))
    r = rng.uniform(-1, 1, J)
    x = _pure.linear_recurrence(np.exp(np.diff(A)), r, 0.0)
    assert np.array_equal(core.linear_recurrence(np.exp(np.diff(A)), r, 0.0), x)
    s = np.exp(A - A.max())
    order = np.argsort(A, kind="stable")
    assert core.chebyshev_pair(order, s, x) == _pure.chebyshev_pair(order, s, x)
    fresh = rng.integers(0, 2, (J % 30 + 1, 12), dtype=np.uint8)
    lo, hi = sorted(rng.integers(0, 11, 2).tolist())
    assert np.array_equal(core.carry_windows(fresh, lo, hi), _pure.carry_windows(fresh, lo, hi))


def test_check_backends_suite():
    assert check_backends(instances=20).passed


def test_forced_pure_backend():
    env = dict(os.environ, SHADOWLAB_PURE="1")
    code = ("from shadowlab import kernels; from shadowlab.checks import check_minimax_identity;"
            "print(kernels.BACKEND, check_minimax_identity(instances=20).passed)")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["pure", "True"]
