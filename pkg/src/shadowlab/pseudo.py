"""Random d-pseudotrajectories of the skew product.

Each step picks the next point uniformly (for ``nu x Leb``) in the max-metric
ball of radius ``d`` around the image of the current point: the symbolic part
is a ball sample around ``T w_j``, the fiber part is ``lambda(w_j) x_j + d u``
with ``u`` uniform on the open interval (-1, 1).

All ``N`` symbolic windows share one window ``[lo, hi]`` and are stored as a
``(N, hi - lo + 1)`` uint8 array.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .cocycle import LambdaTable, SkewState, pattern_indices
from .errors import CorruptedTrajectoryError, InvalidParameterError, ResolutionError
from .symbolic import SymbolPoint, agreement_radius, random_bits, window_distances


def window_plan(t: int, d: float) -> int:
    """Half-width ``W`` of the stored windows ``[-W, W]`` for depth ``t`` and radius ``d``."""
    return max(t, agreement_radius(d)) + 1


@dataclass(frozen=True, eq=False)
class PseudoTrajectory:
    d: float
    lo: int
    bits: np.ndarray
    x: np.ndarray
    seed: int | None = None
    exact: bool = field(default=False)

    def __post_init__(self):
        bits = np.array(self.bits, dtype=np.uint8, copy=True)
        x = np.array(self.x, dtype=np.float64, copy=True).reshape(-1)
        if bits.ndim != 2 or bits.shape[0] != x.size or x.size == 0:
            raise ValueError(f"bits {bits.shape} and x {x.shape} disagree on the trajectory length")
        if not np.all(np.isfinite(x)):
            raise CorruptedTrajectoryError("fiber coordinates must be finite")
        bits.flags.writeable = False
        x.flags.writeable = False
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "d", float(self.d))
        object.__setattr__(self, "lo", int(self.lo))

    @property
    def N(self) -> int:
        return self.x.size

    @property
    def hi(self) -> int:
        return self.lo + self.bits.shape[1] - 1

    @property
    def n(self) -> int:
        return agreement_radius(self.d)

    def point(self, j: int) -> SymbolPoint:
        return SymbolPoint(self.lo, self.bits[j])

    @property
    def states(self) -> list[SkewState]:
        return [SkewState(self.point(j), float(self.x[j])) for j in range(self.N)]

    def lambdas(self, table: LambdaTable) -> np.ndarray:
        """``lambda(w_j)`` for ``j = 0..N-2``."""
        return table.values[pattern_indices(self.bits[:-1], self.lo, table.depth)]

    def log_lambdas(self, table: LambdaTable) -> np.ndarray:
        return table.logs[pattern_indices(self.bits[:-1], self.lo, table.depth)]

    def with_x(self, x) -> "PseudoTrajectory":
        return PseudoTrajectory(self.d, self.lo, self.bits, x, self.seed, self.exact)

    def check(self, table: LambdaTable) -> None:
        """Raise unless every step is within ``d`` of the image of the previous point."""
        if self.N == 1:
            return
        W = min(-self.lo, self.hi - 1)
        # image T w_j read on [-W, W] occupies columns shifted by one
        cols = slice(-W - self.lo, W - self.lo + 1)
        shifted = self.bits[:-1, -W - self.lo + 1:W - self.lo + 2]
        dist, below, _ = window_distances(self.bits[1:, cols], shifted, -W)
        if np.any(dist >= self.d):
            j = int(np.argmax(dist >= self.d))
            raise CorruptedTrajectoryError(f"step {j}: symbolic distance {dist[j]} is not below d = {self.d}")
        residuals(table, self)


def _open_uniform(rng: np.random.Generator, size: int) -> np.ndarray:
    u = rng.uniform(-1.0, 1.0, size)
    bad = u <= -1.0
    while np.any(bad):  # the generator's range is [-1, 1); redraw the closed end
        u[bad] = rng.uniform(-1.0, 1.0, int(bad.sum()))
        bad = u <= -1.0
    return u


def copy_columns(lo: int, hi: int, d: float, exact: bool) -> tuple[int, int]:
    if exact:
        return 0, hi - lo - 1
    n = agreement_radius(d)
    if lo > -n or hi < n + 1:
        raise ResolutionError(
            f"window [{lo}, {hi}] must cover [-{n}, {n + 1}] for d = {d}",
            index=-n if lo > -n else n + 1,
        )
    return -n - lo, n - lo


def generate_symbolic(w0: SymbolPoint, d: float, N: int, rng: np.random.Generator,
                      exact: bool = False) -> np.ndarray:
    """Symbolic component of the generator: a ``(N, width)`` window stack.

    Row ``j+1`` is a ball sample of radius ``d`` around ``T`` of row ``j``; with
    ``exact`` it is ``T`` of row ``j`` itself (a fresh bit enters at ``hi``).
    """
    if not 0.0 < d <= 1.0:
        raise InvalidParameterError(f"d must lie in (0, 1], got {d!r}")
    if N < 1:
        raise InvalidParameterError(f"N must be at least 1, got {N}")
    copy_lo, copy_hi = copy_columns(w0.lo, w0.hi, d, exact)
    fresh = np.empty((N, w0.bits.size), dtype=np.uint8)
    fresh[0] = w0.bits
    fresh[1:] = random_bits(rng, (N - 1, w0.bits.size))
    return kernels.carry_windows(fresh, copy_lo, copy_hi)


def generate_pseudo(table: LambdaTable, q0: SkewState, d: float, N: int,
                    rng: np.random.Generator, fiber_rng: np.random.Generator | None = None,
                    exact: bool = False, seed: int | None = None) -> PseudoTrajectory:
    """Draw a ``d``-pseudotrajectory of ``N`` points starting at ``q0``.

    ``fiber_rng`` (default ``rng``) supplies the fiber noise. ``exact`` turns
    off both perturbations, yielding an exact orbit segment.
    """
    t = table.depth
    if not (0.0 < d < 1.0 and d < 2.0 ** -(t + 1)):
        raise InvalidParameterError(f"d must satisfy 0 < d < 2**-(t+1) = {2.0 ** -(t + 1)}, got {d!r}")
    w0 = q0.w
    if not w0.covers(-t, t):
        raise ResolutionError(f"start window [{w0.lo}, {w0.hi}] does not cover [-{t}, {t}]", index=-t)
    bits = generate_symbolic(w0, d, N, rng, exact=exact)
    lam = table.values[pattern_indices(bits[:-1], w0.lo, t)]
    if exact:
        forcing = np.zeros(N - 1)
    else:
        forcing = d * _open_uniform(fiber_rng if fiber_rng is not None else rng, N - 1)
    x = kernels.linear_recurrence(lam, forcing, float(q0.x))
    return PseudoTrajectory(d, w0.lo, bits, x, seed=seed, exact=exact)


def residuals(table: LambdaTable, traj: PseudoTrajectory) -> np.ndarray:
    """``r_j = (x_j - lambda(w_{j-1}) x_{j-1}) / d`` for ``j = 1..N-1``."""
    x = traj.x
    r = (x[1:] - traj.lambdas(table) * x[:-1]) / traj.d
    bad = np.abs(r) >= 1.0
    if np.any(bad):
        j = int(np.argmax(bad)) + 1
        raise CorruptedTrajectoryError(f"residual r_{j} = {r[j - 1]!r} is not inside (-1, 1)")
    return r


def normalize_start(table: LambdaTable, traj: PseudoTrajectory) -> PseudoTrajectory:
    """Subtract the homogeneous solution through ``x_0``; keeps ``w_j`` and the residuals.

    Rebuilt from the forcing terms ``x_{j+1} - lambda_j x_j`` rather than as
    ``x_j - Phi_j x_0``, which would cancel catastrophically when ``Phi_j`` is large.
    """
    x0 = float(traj.x[0])
    if x0 == 0.0:
        return traj
    lam = traj.lambdas(table)
    forcing = traj.x[1:] - lam * traj.x[:-1]
    return traj.with_x(kernels.linear_recurrence(lam, forcing, 0.0))


def dump_trajectory(table: LambdaTable, traj: PseudoTrajectory, fh=None) -> str | None:
    """Write one comma-separated line per step: ``j,bits,origin,x,r``.

    ``bits`` is the stored window as a 0/1 string and ``origin`` the position
    of index 0 in that string; ``r`` is empty for ``j = 0``.
    """
    r = residuals(table, traj)
    out = fh if fh is not None else io.StringIO()
    out.write("j,bits,origin,x,r\n")
    origin = -traj.lo
    for j in range(traj.N):
        s = "".join("1" if b else "0" for b in traj.bits[j].tolist())
        rj = "" if j == 0 else repr(float(r[j - 1]))
        out.write(f"{j},{s},{origin},{float(traj.x[j])!r},{rj}\n")
    return out.getvalue() if fh is None else None
