"""Large-deviation constants for Birkhoff sums of a finite-window cocycle.

Coordinates of ``w`` at distance ``>= 2t+1`` apart are independent, so
``A_j`` splits into ``2t+1`` sums of i.i.d. copies of ``Y = log lambda(pattern)``
with the pattern uniform. Chernoff's bound with the Cramér transform of ``Y``,

    I(x) = sup_theta (theta x - log E e^{theta Y}),

gives certified finite-``j`` tails ``P(|S_m/m - a| >= eps) <= e^{-m I(a+eps)} + e^{-m I(a-eps)}``.
A quadratic minorant ``I >= k0 eps^2`` then yields constants ``(C, k)`` with
``P(|A_j/j - a| >= eps) <= C exp(-k eps^2 j)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp
from scipy.stats import norm

from .cocycle import LambdaTable, expected_log, pattern_indices
from .errors import InvalidParameterError
from .pseudo import copy_columns, window_plan
from .symbolic import random_bits


def _log_mgf(y, theta):
    return float(logsumexp(theta * y) - math.log(y.size))


def _tilted_mean(y, theta):
    w = np.exp(theta * y - np.max(theta * y))
    return float(np.dot(w, y) / w.sum())


def cramer_transform(table: LambdaTable, x: float) -> tuple[float, float]:
    """``(I(x), theta*)`` for ``Y = log lambda`` of a uniform pattern; ``I = inf`` off the support."""
    y = table.logs
    lo, hi = float(y.min()), float(y.max())
    mean = expected_log(table)
    if x > hi or x < lo:
        return math.inf, math.copysign(math.inf, x - mean)
    if lo == hi or x == mean:
        return 0.0, 0.0
    if x == hi or x == lo:
        hits = int(np.count_nonzero(y == x))
        return -math.log(hits / y.size), math.copysign(math.inf, x - mean)
    sign = 1.0 if x > mean else -1.0
    f = lambda th: _tilted_mean(y, th) - x
    a, b = 0.0, sign
    while (f(b) < 0) == (sign > 0) and abs(b) < 1e12:
        a, b = b, 2.0 * b
    theta = brentq(f, min(a, b), max(a, b), xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=500)
    return max(theta * x - _log_mgf(y, theta), 0.0), theta


def block_rate_function(table: LambdaTable, eps: float) -> float:
    """Two-sided rate ``min(I(a + eps), I(a - eps))`` of the block variable."""
    return _two_sided(table, eps)[0]


def _two_sided(table, eps):
    eps = abs(float(eps))
    if eps == 0.0:
        return 0.0, 0.0
    a = expected_log(table)
    up = cramer_transform(table, a + eps)
    down = cramer_transform(table, a - eps)
    return min(up, down, key=lambda r: r[0])


def gamma_threshold(k: float, a: float) -> float:
    """``1 - 1/(2 k a)``: the scaling exponents above it make ``p(eps/N^gamma, N, eps) -> 1``."""
    if not a < 0:
        raise InvalidParameterError(f"need a < 0, got {a!r}")
    if not k > 0:
        raise InvalidParameterError(f"need k > 0, got {k!r}")
    if math.isinf(k):
        return 1.0
    return 1.0 - 1.0 / (2.0 * k * a)


def default_eps_grid(a: float, eps_max: float | None = None, points: int = 64) -> np.ndarray:
    eps_max = abs(a) / 2.0 if eps_max is None else float(eps_max)
    return eps_max * np.arange(1, points + 1) / points


def _fit(table, eps_grid, rates, j_min):
    t = table.depth
    rates = np.asarray(rates, dtype=np.float64)
    eps_grid = np.asarray(eps_grid, dtype=np.float64)
    if table.is_constant() or np.all(np.isinf(rates)):
        return 1.0, math.inf, 1.0, math.inf
    k0 = float(np.min(rates / eps_grid ** 2))
    if not k0 > 0:
        raise InvalidParameterError(f"quadratic rate constant k0 = {k0!r} is not positive (is a = 0?)")
    a = expected_log(table)
    m = max(1, j_min // (2 * t + 1))
    C0 = 1.0
    for e, _ in zip(eps_grid, rates):
        up = cramer_transform(table, a + e)[0]
        down = cramer_transform(table, a - e)[0]
        # bound / (quadratic envelope) is nonincreasing in m, so m = m_min is the worst case
        ratio = math.exp(-m * (up - k0 * e * e)) + math.exp(-m * (down - k0 * e * e))
        C0 = max(C0, ratio)
    if t == 0:
        return C0, k0, C0, k0
    return (2 * t + 1) * C0, k0 / (4 * t + 2), C0, k0


def fit_quadratic_constants(table: LambdaTable, eps_max: float | None = None,
                            j_min: int = 10, grid_points: int = 64) -> tuple[float, float]:
    """``(C, k)`` with ``P(|A_j/j - a| >= eps) <= C e^{-k eps^2 j}`` on the grid, ``j >= j_min``."""
    a = expected_log(table)
    grid = default_eps_grid(a, eps_max, grid_points)
    rates = [block_rate_function(table, e) for e in grid]
    C, k, _, _ = _fit(table, grid, rates, j_min)
    return C, k


def _num(v: float) -> str:
    if math.isinf(v):
        return "Infinity" if v > 0 else "-Infinity"
    return "%.17g" % v


@dataclass(frozen=True)
class RateModel:
    a: float
    t: int
    theta_grid: tuple
    rate_samples: tuple
    C: float
    k: float
    gamma_min: float
    k0: float = math.nan
    C0: float = math.nan
    j_min: int = 10
    eps_max: float = math.nan
    table: LambdaTable | None = field(default=None, compare=False)

    def bound(self, eps, j):
        """``C exp(-k eps^2 j)``."""
        eps = np.asarray(eps, dtype=np.float64)
        if math.isinf(self.k):
            return np.where(eps > 0, 0.0, self.C)
        return self.C * np.exp(-self.k * eps ** 2 * j)

    def dumps(self) -> str:
        samples = ",\n    ".join(f"[{_num(e)}, {_num(r)}]" for e, r in self.rate_samples)
        thetas = ", ".join(_num(v) for v in self.theta_grid)
        return (
            "{\n"
            f'  "a": {_num(self.a)},\n'
            f'  "t": {int(self.t)},\n'
            f'  "C": {_num(self.C)},\n'
            f'  "k": {_num(self.k)},\n'
            f'  "gamma_min": {_num(self.gamma_min)},\n'
            f'  "k0": {_num(self.k0)},\n'
            f'  "C0": {_num(self.C0)},\n'
            f'  "j_min": {int(self.j_min)},\n'
            f'  "eps_max": {_num(self.eps_max)},\n'
            f'  "theta_grid": [{thetas}],\n'
            f'  "rate_samples": [\n    {samples}\n  ]\n'
            "}\n"
        )

    @classmethod
    def loads(cls, text: str) -> "RateModel":
        d = json.loads(text)
        required = {"a", "t", "C", "k", "gamma_min", "rate_samples"}
        missing = required - set(d)
        if missing:
            raise InvalidParameterError(f"rate model is missing fields {sorted(missing)}")
        return cls(
            a=float(d["a"]), t=int(d["t"]),
            theta_grid=tuple(float(v) for v in d.get("theta_grid", [])),
            rate_samples=tuple((float(e), float(r)) for e, r in d["rate_samples"]),
            C=float(d["C"]), k=float(d["k"]), gamma_min=float(d["gamma_min"]),
            k0=float(d.get("k0", math.nan)), C0=float(d.get("C0", math.nan)),
            j_min=int(d.get("j_min", 10)), eps_max=float(d.get("eps_max", math.nan)),
        )

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "RateModel":
        return cls.loads(Path(path).read_text())

    def to_dict(self) -> dict:
        return json.loads(self.dumps())


def build_rate_model(table: LambdaTable, eps_max: float | None = None,
                     grid_points: int = 64, j_min: int = 10) -> RateModel:
    """Sample the block rate on ``(0, eps_max]`` and fit ``(C, k)`` and ``gamma_min``.

    ``table`` is the finite-depth cocycle the bounds are about (the compressed
    one when the source is deeper).
    """
    a = expected_log(table)
    if not a < 0:
        raise InvalidParameterError(
            f"need a negative mean log (got a = {a!r}); invert the table when a > 0"
        )
    grid = default_eps_grid(a, eps_max, grid_points)
    pairs = [_two_sided(table, e) for e in grid]
    rates = [r for r, _ in pairs]
    C, k, C0, k0 = _fit(table, grid, rates, j_min)
    return RateModel(
        a=a, t=table.depth,
        theta_grid=tuple(float(th) for _, th in pairs),
        rate_samples=tuple((float(e), float(r)) for e, r in zip(grid, rates)),
        C=float(C), k=float(k), gamma_min=gamma_threshold(k, a),
        k0=float(k0), C0=float(C0), j_min=int(j_min), eps_max=float(grid[-1]),
        table=table,
    )


def wilson_interval(successes: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    if n <= 0:
        raise InvalidParameterError("need at least one trial")
    z = float(norm.ppf(0.5 + confidence / 2.0))
    p = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p + z2 / (2 * n)) / denom
    half = z / denom * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n))
    lo = max(0.0, min(p, center - half))
    hi = min(1.0, max(p, center + half))
    return lo, hi


@dataclass(frozen=True)
class DeviationEstimate:
    p_hat: float
    lo: float
    hi: float
    count: int
    M: int


def _estimate(count, M, confidence):
    lo, hi = wilson_interval(count, M, confidence)
    return DeviationEstimate(count / M, lo, hi, int(count), int(M))


def _deviates(A_over_j, a, eps):
    # ties at exactly eps count as deviations; a tiny slack keeps that true after rounding
    return np.abs(A_over_j - a) >= eps - 1e-12 * max(1.0, abs(a))


def exact_orbit_sums(table: LambdaTable, js, M: int, rng: np.random.Generator,
                     chunk: int = 4096) -> np.ndarray:
    """``A_j`` along exact orbits of ``M`` random points, shape ``(M, len(js))``."""
    js = [int(j) for j in js]
    t = table.depth
    J = max(js)
    out = np.empty((M, len(js)))
    for start in range(0, M, chunk):
        m = min(chunk, M - start)
        bits = random_bits(rng, (m, J + 2 * t))
        windows = np.lib.stride_tricks.sliding_window_view(bits, 2 * t + 1, axis=1)
        weights = 1 << np.arange(2 * t, -1, -1, dtype=np.int64)
        idx = windows.astype(np.int64) @ weights
        cums = np.cumsum(table.logs[idx], axis=1)
        out[start:start + m] = cums[:, [j - 1 for j in js]]
    return out


def pseudo_orbit_sums(table: LambdaTable, d: float, js, M: int, rng: np.random.Generator,
                      chunk: int = 20000) -> np.ndarray:
    """``sum_{p<j} log lambda(w_p)`` along ``M`` random symbolic ``d``-pseudotrajectories."""
    t = table.depth
    if not (0.0 < d < 2.0 ** -(t + 1)):
        raise InvalidParameterError(f"need 0 < d < 2**-(t+1) = {2.0 ** -(t + 1)}, got {d!r}")
    js = [int(j) for j in js]
    J = max(js)
    W = window_plan(t, d)
    lo, width = -W, 2 * W + 1
    copy_lo, copy_hi = copy_columns(lo, W, d, False)
    wanted = {j: col for col, j in enumerate(js)}
    out = np.empty((M, len(js)))
    for start in range(0, M, chunk):
        m = min(chunk, M - start)
        state = random_bits(rng, (m, width))
        acc = np.zeros(m)
        for p in range(J):
            acc = acc + table.logs[pattern_indices(state, lo, t)]
            if p + 1 in wanted:
                out[start:start + m, wanted[p + 1]] = acc
            nxt = random_bits(rng, (m, width))
            nxt[:, copy_lo:copy_hi + 1] = state[:, copy_lo + 1:copy_hi + 2]
            state = nxt
    return out


def empirical_deviation_exact(table: LambdaTable, j: int, eps: float, M: int,
                              rng: np.random.Generator, confidence: float = 0.95) -> DeviationEstimate:
    """Fraction of ``M`` exact orbits with ``|A_j/j - a| >= eps``, with a Wilson interval."""
    if M < 100:
        raise InvalidParameterError(f"need M >= 100 samples, got {M}")
    if j < 1:
        raise InvalidParameterError(f"need j >= 1, got {j}")
    A = exact_orbit_sums(table, [j], M, rng)[:, 0]
    count = int(np.count_nonzero(_deviates(A / j, expected_log(table), eps)))
    return _estimate(count, M, confidence)


def empirical_deviation_pseudo(table: LambdaTable, d: float, j: int, eps: float, M: int,
                               rng: np.random.Generator, confidence: float = 0.95) -> DeviationEstimate:
    """As :func:`empirical_deviation_exact`, along symbolic ``d``-pseudotrajectories."""
    if M < 100:
        raise InvalidParameterError(f"need M >= 100 samples, got {M}")
    if j < 1:
        raise InvalidParameterError(f"need j >= 1, got {j}")
    A = pseudo_orbit_sums(table, d, [j], M, rng)[:, 0]
    count = int(np.count_nonzero(_deviates(A / j, expected_log(table), eps)))
    return _estimate(count, M, confidence)


def deviation_counts(sums: np.ndarray, js, eps_grid, a: float) -> np.ndarray:
    """Counts of ``|A_j/j - a| >= eps`` for every ``(j, eps)``; shape ``(len(js), len(eps_grid))``."""
    js = np.asarray(js, dtype=np.float64)
    ratios = sums / js[None, :]
    return np.stack([
        np.count_nonzero(_deviates(ratios[:, i:i + 1], a, np.asarray(eps_grid)[None, :]), axis=0)
        for i in range(js.size)
    ])
