"""Finite windows of the two-sided binary shift space.

A :class:`SymbolPoint` stores the coordinates ``w[lo..hi]`` of a point of
{0,1}^Z. Reading any other coordinate is an error; nothing is zero-filled.
The metric is ``2**-k`` with ``k`` the smallest ``|j|`` where two points
differ.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    IncomparablePointsError,
    InvalidRadiusError,
    InvalidWindowError,
    ResolutionError,
)


def random_bits(rng: np.random.Generator, shape) -> np.ndarray:
    """Independent fair bits as a uint8 array of the given shape."""
    shape = (shape,) if isinstance(shape, (int, np.integer)) else tuple(shape)
    size = int(np.prod(shape, dtype=np.int64))
    if size == 0:
        return np.zeros(shape, dtype=np.uint8)
    raw = rng.integers(0, 256, size=(size + 7) // 8, dtype=np.uint8)
    return np.unpackbits(raw)[:size].reshape(shape)


@dataclass(frozen=True, eq=False)
class SymbolPoint:
    lo: int
    bits: np.ndarray

    def __post_init__(self):
        bits = np.array(self.bits, dtype=np.uint8, copy=True).reshape(-1)
        if bits.size == 0:
            raise InvalidWindowError("a symbol window must be non-empty")
        if np.any(bits > 1):
            raise InvalidWindowError("symbols must be 0 or 1")
        bits.flags.writeable = False
        object.__setattr__(self, "lo", int(self.lo))
        object.__setattr__(self, "bits", bits)

    @property
    def hi(self) -> int:
        return self.lo + self.bits.size - 1

    def covers(self, lo: int, hi: int) -> bool:
        return self.lo <= lo and hi <= self.hi

    def require(self, lo: int, hi: int, what: str = "operation") -> None:
        if lo < self.lo:
            raise ResolutionError(f"{what} needs coordinate {lo}, window starts at {self.lo}", index=lo)
        if hi > self.hi:
            raise ResolutionError(f"{what} needs coordinate {hi}, window ends at {self.hi}", index=hi)

    def __getitem__(self, j: int) -> int:
        self.require(j, j, "read")
        return int(self.bits[j - self.lo])

    def window(self, lo: int, hi: int) -> np.ndarray:
        """Coordinates ``lo..hi`` as a read-only array."""
        self.require(lo, hi, "read")
        return self.bits[lo - self.lo:hi - self.lo + 1]

    def __eq__(self, other):
        if not isinstance(other, SymbolPoint):
            return NotImplemented
        return self.lo == other.lo and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash((self.lo, self.bits.tobytes()))

    def __repr__(self):
        s = "".join(map(str, self.bits.tolist()))
        return f"SymbolPoint(lo={self.lo}, bits='{s}')"


def sample_point(lo: int, hi: int, rng: np.random.Generator) -> SymbolPoint:
    """A point of the product measure restricted to the window ``[lo, hi]``."""
    if lo > hi:
        raise InvalidWindowError(f"empty window [{lo}, {hi}]")
    return SymbolPoint(lo, random_bits(rng, hi - lo + 1))


def shift(p: SymbolPoint) -> SymbolPoint:
    """Left shift: ``shift(p)[j] == p[j + 1]``; the window moves to ``[lo-1, hi-1]``."""
    return SymbolPoint(p.lo - 1, p.bits)


def shift_by(p: SymbolPoint, k: int) -> SymbolPoint:
    return SymbolPoint(p.lo - k, p.bits)


def _first_difference(a: np.ndarray, b: np.ndarray, lo: int):
    # rows of a and b share the window starting at lo; returns min |j| with a != b, or -1
    absidx = np.abs(np.arange(lo, lo + a.shape[-1]))
    big = np.iinfo(np.int64).max
    k = np.where(a != b, absidx, big).min(axis=-1)
    return np.where(k == big, -1, k)


def distance(p: SymbolPoint, q: SymbolPoint) -> tuple[float, bool]:
    """Return ``(value, below_resolution)``.

    ``value`` is ``2**-k`` for the first differing ``|j| <= W`` on the common
    symmetric window ``[-W, W]``. When the points agree there, ``(0.0, True)``:
    the true distance is only known to be below ``2**-W``.
    """
    W = min(-p.lo, p.hi, -q.lo, q.hi)
    if W < 0:
        raise IncomparablePointsError(
            f"windows [{p.lo}, {p.hi}] and [{q.lo}, {q.hi}] share no symmetric range around 0"
        )
    k = int(_first_difference(p.window(-W, W), q.window(-W, W), -W))
    if k < 0:
        return 0.0, True
    return math.ldexp(1.0, -k), False


def window_distances(a: np.ndarray, b: np.ndarray, lo: int):
    """Row-wise distances between two stacks of windows sharing ``[lo, lo+width)``.

    The window must contain a symmetric range ``[-W, W]``; only that range is
    compared. Returns ``(values, below_resolution, W)``.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    width = a.shape[-1]
    W = min(-lo, lo + width - 1)
    if W < 0:
        raise IncomparablePointsError(f"window starting at {lo} does not contain index 0")
    sl = slice(-W - lo, W - lo + 1)
    k = _first_difference(a[..., sl], b[..., sl], -W)
    flag = k < 0
    values = np.where(flag, 0.0, np.ldexp(1.0, -np.where(flag, 0, k)))
    return values, flag, W


def agreement_radius(d: float) -> int:
    """The ``n`` with ``2**-(n+1) < d <= 2**-n``.

    ``dist(p, q) < d`` holds exactly when p and q agree on every ``|j| <= n``.
    """
    if not (0.0 < d <= 1.0) or math.isnan(d):
        raise InvalidRadiusError(f"radius must lie in (0, 1], got {d!r}")
    m, e = math.frexp(d)  # d = m * 2**e with 0.5 <= m < 1
    return 1 - e if m == 0.5 else -e


def ball_sample(center: SymbolPoint, d: float, rng: np.random.Generator,
                lo: int | None = None, hi: int | None = None) -> SymbolPoint:
    """Sample the product measure conditioned on the open ball ``B(center, d)``.

    Coordinates ``|j| <= n`` (``n = agreement_radius(d)``) are copied from the
    center; every other coordinate of the output window ``[lo, hi]`` (default:
    the center's window) is a fresh fair bit.
    """
    n = agreement_radius(d)
    lo = center.lo if lo is None else lo
    hi = center.hi if hi is None else hi
    if lo > -n or hi < n:
        raise InvalidWindowError(f"output window [{lo}, {hi}] must contain [-{n}, {n}]")
    if not center.covers(-n, n):
        raise ResolutionError(
            f"center window [{center.lo}, {center.hi}] does not cover [-{n}, {n}]",
            index=-n if center.lo > -n else n,
        )
    fresh = random_bits(rng, hi - lo + 1)
    return _ball_from_fresh(center, n, fresh, lo)


def _ball_from_fresh(center: SymbolPoint, n: int, fresh: np.ndarray, lo: int) -> SymbolPoint:
    out = np.array(fresh, dtype=np.uint8, copy=True)
    out[-n - lo:n - lo + 1] = center.window(-n, n)
    return SymbolPoint(lo, out)
