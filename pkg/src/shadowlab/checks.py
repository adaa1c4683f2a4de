"""Oracle and property suites shared by ``shadowlab verify`` and the test-suite.

Each check returns a :class:`CheckResult`; sizes default to quick settings and
accept the full sizes used by the acceptance tests.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.stats import chi2

from . import kernels
from .cocycle import BirkhoffSums, LambdaTable, SkewState, expected_log
from .ldp import build_rate_model, deviation_counts, pseudo_orbit_sums, wilson_interval
from .pseudo import PseudoTrajectory, generate_pseudo, generate_symbolic, normalize_start, residuals, window_plan
from .shadow import chebyshev_center, minimax_exhaustive, minimax_radius, shadow_attempt, splice_shadow_base, symbolic_gaps
from .symbolic import sample_point

REFERENCE_TABLE = LambdaTable(0, [2.0, 1.0 / 3.0])


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _timed(name, fn):
    t0 = time.perf_counter()
    passed, detail = fn()
    return CheckResult(name, bool(passed), detail, time.perf_counter() - t0)


# -- oracles ------------------------------------------------------------


def brute_force_min(A, x):
    """``min_y max_j |x_j - e^{A_j} y|`` by bisection on the envelope crossing, in long double.

    ``U(y) = max_j (e^{A_j} y - x_j)`` increases and ``D(y) = max_j (x_j - e^{A_j} y)``
    decreases, so the minimum sits where they cross.
    """
    A = np.asarray(A, dtype=np.longdouble)
    x = np.asarray(x, dtype=np.longdouble)
    s = np.exp(A - A.max())
    lo = -(np.max(np.abs(x)) / s.min()) - 1
    hi = -lo
    for _ in range(20000):
        mid = (lo + hi) / 2
        if mid == lo or mid == hi:
            break
        if np.max(s * mid - x) < np.max(x - s * mid):
            lo = mid
        else:
            hi = mid
    g = lambda y: np.max(np.abs(x - s * y))
    return float(min(g(lo), g(hi)))


def literal_pair_formula(A, x) -> float:
    """``max_{p<q} e^{A_p+A_q}/(e^{A_p}+e^{A_q}) |z_p - z_q|`` with ``z_j = e^{-A_j} x_j``, long double."""
    A = np.asarray(A, dtype=np.longdouble)
    x = np.asarray(x, dtype=np.longdouble)
    e = np.exp(A)
    z = x / e
    best = np.longdouble(0)
    for p in range(A.size - 1):
        B = e[p] * e[p + 1:] / (e[p] + e[p + 1:]) * np.abs(z[p] - z[p + 1:])
        best = max(best, B.max())
    return float(best)


def exact_binomial_tail(table: LambdaTable, j: int, eps: float) -> float:
    """``P(|A_j/j - a| >= eps)`` for a depth-0 table by exact binomial summation."""
    if table.depth != 0:
        raise ValueError("exact tail needs a depth-0 table")
    y0, y1 = (float(v) for v in table.logs)
    # A_j / j - a = (s/j - 1/2) (y1 - y0) for s ones among j fair bits
    gap = abs(y1 - y0)
    total = 0
    for s in range(j + 1):
        if abs(s / j - 0.5) * gap >= eps:
            total += math.comb(j, s)
    return float(Fraction(total, 2 ** j))


def random_instance(rng: np.random.Generator, J: int):
    """``A`` and normalized ``x`` (in units of ``d``) with log-uniform multipliers in ``[e^-1, e]``."""
    logs = rng.uniform(-1.0, 1.0, J)
    r = rng.uniform(-1.0, 1.0, J)
    x = kernels.linear_recurrence(np.exp(logs), r, 0.0)
    return BirkhoffSums.from_logs(logs).sums, x


# -- suites ---------------------------------------------------------------


def check_minimax_identity(instances: int = 1000, J_max: int = 200, seed: int = 1,
                           tol: float = 1e-8) -> CheckResult:
    def run():
        rng = np.random.default_rng(seed)
        worst_f = worst_pair = worst_y = 0.0
        for _ in range(instances):
            J = int(rng.integers(1, J_max + 1))
            A, x = random_instance(rng, J)
            ref = brute_force_min(A, x)
            F_pair, _ = minimax_exhaustive(A, x)
            F, _ = minimax_radius(A, x)
            y0 = chebyshev_center(A, x)
            A_l = np.asarray(A, dtype=np.longdouble)
            g = float(np.max(np.abs(np.asarray(x, dtype=np.longdouble) - np.exp(A_l) * np.longdouble(y0))))
            worst_f = max(worst_f, abs(F - ref))
            worst_pair = max(worst_pair, abs(F_pair - ref))
            worst_y = max(worst_y, (g - F) / (1.0 + F))
        ok = worst_f <= tol and worst_pair <= tol and worst_y <= 1e-9
        return ok, (f"{instances} instances: max |F - min g| = {worst_f:.2e}, pairwise {worst_pair:.2e}, "
                    f"max (g(y0) - F)/(1 + F) = {worst_y:.2e}")
    return _timed("minimax-identity", run)


def check_overflow(instances: int = 20, J: int = 10_000, seed: int = 2, tol: float = 1e-8,
                   table: LambdaTable = REFERENCE_TABLE) -> CheckResult:
    def run():
        rng = np.random.default_rng(seed)
        worst = 0.0
        overflowed = 0
        for _ in range(instances):
            logs = table.logs[rng.integers(0, 2, J)]
            r = rng.uniform(-1.0, 1.0, J)
            x = kernels.linear_recurrence(np.exp(logs), r, 0.0)
            A = BirkhoffSums.from_logs(logs).sums
            with np.errstate(over="ignore"):
                overflowed += int(not np.all(np.isfinite(np.exp(-A))))
            F, _ = minimax_radius(A, x)
            ref = literal_pair_formula(A, x)
            if not math.isfinite(F):
                return False, "non-finite F"
            worst = max(worst, abs(F - ref) / abs(ref))
        return worst <= tol, (f"{instances} instances of length {J}: max relative error {worst:.2e}; "
                              f"naive e^-A overflowed in {overflowed}")
    return _timed("overflow-safety", run)


def check_splice(trajectories: int = 100_000, N: int = 50, d: float = 0.1, seed: int = 3,
                 alpha: float = 1e-3) -> CheckResult:
    def run():
        rng = np.random.default_rng(seed)
        W = window_plan(0, d)
        zeros = np.zeros(N)
        ones = None
        pairs = None
        worst = 0.0
        for _ in range(trajectories):
            w0 = sample_point(-W, W, rng)
            traj = PseudoTrajectory(d, -W, generate_symbolic(w0, d, N, rng), zeros)
            w = splice_shadow_base(traj, d, rng)
            worst = max(worst, float(symbolic_gaps(traj, w).max()))
            b = w.bits.astype(np.int64)
            if ones is None:
                ones = np.zeros(b.size, dtype=np.int64)
                pairs = np.zeros((b.size - 1, 4), dtype=np.int64)
            ones += b
            code = 2 * b[:-1] + b[1:]
            pairs[np.arange(code.size), code] += 1
        M = trajectories
        stat1 = float(np.sum((2.0 * ones - M) ** 2 / M))
        p1 = float(chi2.sf(stat1, ones.size))
        # overlapping pairs are dependent; test disjoint pairs at even and odd offsets
        p2 = 1.0
        for start in (0, 1):
            sub = pairs[start::2]
            stat2 = float(np.sum((sub - M / 4.0) ** 2 / (M / 4.0)))
            p2 = min(p2, float(chi2.sf(stat2, 3 * sub.shape[0])))
        ok = worst < 2 * d and p1 > alpha and p2 > alpha
        return ok, (f"{M} trajectories: max gap {worst:.3g} < 2d = {2 * d}; "
                    f"coordinate chi2 p = {p1:.3g}, adjacent-pair chi2 p = {p2:.3g} (alpha {alpha})")
    return _timed("splice-distribution", run)


def check_ldp_bounds(M: int = 100_000, d: float = 0.1, js=(10, 100, 1000), points: int = 16,
                     seed: int = 4, table: LambdaTable = REFERENCE_TABLE) -> CheckResult:
    def run():
        model = build_rate_model(table)
        a = expected_log(table)
        grid = abs(a) / 2 * np.arange(1, points + 1) / points
        worst_exact = -math.inf
        for j in js:
            for e in grid:
                tail = exact_binomial_tail(table, j, float(e))
                worst_exact = max(worst_exact, tail - float(model.bound(e, j)))
        rng = np.random.default_rng(seed)
        sums = pseudo_orbit_sums(table, d, js, M, rng)
        counts = deviation_counts(sums, js, grid, a)
        worst_emp = -math.inf
        for i, j in enumerate(js):
            for k, e in enumerate(grid):
                lo, _ = wilson_interval(int(counts[i, k]), M, 0.99)
                worst_emp = max(worst_emp, lo - float(model.bound(e, j)))
        ok = worst_exact <= 0 and worst_emp <= 0
        return ok, (f"C = {model.C:.4g}, k = {model.k:.4g}: max(exact tail - bound) = {worst_exact:.3g}, "
                    f"max(Wilson99 low - bound) = {worst_emp:.3g} over {M} pseudo-orbits")
    return _timed("ldp-bounds", run)


def check_start_invariance(count: int = 1000, N: int = 100, d: float = 1e-3, eps: float = 0.1,
                           seed: int = 5, table: LambdaTable = REFERENCE_TABLE) -> CheckResult:
    def run():
        rng = np.random.default_rng(seed)
        W = window_plan(table.depth, d)
        mismatches = 0
        worst_r = 0.0
        for i in range(count):
            w0 = sample_point(-W, W, rng)
            x0 = float(rng.uniform(-1.0, 1.0))
            traj = generate_pseudo(table, SkewState(w0, x0), d, N, rng)
            norm = normalize_start(table, traj)
            # r_j is only as exact as the stored x allows, |dr| ~ ulp(|x|) / d
            lam = traj.lambdas(table)
            scale = 1.0 + np.maximum(np.abs(traj.x[1:]) + lam * np.abs(traj.x[:-1]),
                                     np.abs(norm.x[1:]) + lam * np.abs(norm.x[:-1])) / d
            dr = np.abs(residuals(table, traj) - residuals(table, norm)) / scale
            worst_r = max(worst_r, float(np.max(dr)))
            a = shadow_attempt(table, traj, eps, rng=np.random.default_rng([seed, i]))
            b = shadow_attempt(table, norm, eps, rng=np.random.default_rng([seed, i]))
            if a.F != b.F or a.verdict != b.verdict:
                mismatches += 1
        ok = mismatches == 0 and worst_r <= 1e-12
        return ok, f"{count} trajectories: {mismatches} F/verdict mismatches, max residual change {worst_r:.2e} (in units of 1 + |x|/d)"
    return _timed("start-invariance", run)


def check_backends(instances: int = 50, seed: int = 6) -> CheckResult:
    def run():
        names = kernels.available()
        if len(names) < 2:
            return True, f"only the {names[0]} backend is available"
        mods = [kernels.get(n) for n in names]
        rng = np.random.default_rng(seed)
        for _ in range(instances):
            J = int(rng.integers(1, 300))
            A, x = random_instance(rng, J)
            s = np.exp(A - A.max())
            order = np.argsort(A, kind="stable")
            outs = [m.chebyshev_pair(order, s, x) for m in mods]
            if any(o != outs[0] for o in outs[1:]):
                return False, f"chebyshev_pair differs between {names}"
            coef, f = np.exp(rng.uniform(-1, 1, J)), rng.uniform(-1, 1, J)
            rec = [m.linear_recurrence(coef, f, 0.3) for m in mods]
            if any(not np.array_equal(r, rec[0]) for r in rec[1:]):
                return False, f"linear_recurrence differs between {names}"
            fresh = rng.integers(0, 2, (20, 15), dtype=np.uint8)
            cw = [m.carry_windows(fresh, 3, 10) for m in mods]
            if any(not np.array_equal(c, cw[0]) for c in cw[1:]):
                return False, f"carry_windows differs between {names}"
        return True, f"{'/'.join(names)} agree bitwise on {instances} instances"
    return _timed("backend-equality", run)


QUICK = {
    "minimax-identity": lambda: check_minimax_identity(instances=200),
    "overflow-safety": lambda: check_overflow(instances=3, J=5000),
    "splice-distribution": lambda: check_splice(trajectories=5000),
    "ldp-bounds": lambda: check_ldp_bounds(M=5000),
    "start-invariance": lambda: check_start_invariance(count=200),
    "backend-equality": lambda: check_backends(),
}

FULL = {
    "minimax-identity": check_minimax_identity,
    "overflow-safety": check_overflow,
    "splice-distribution": check_splice,
    "ldp-bounds": check_ldp_bounds,
    "start-invariance": check_start_invariance,
    "backend-equality": check_backends,
}


def run_suites(full: bool = False, only=None) -> list[CheckResult]:
    suites = FULL if full else QUICK
    names = list(suites) if not only else list(only)
    unknown = [n for n in names if n not in suites]
    if unknown:
        raise ValueError(f"unknown suites {unknown}; choose from {sorted(suites)}")
    return [suites[n]() for n in names]
