"""Finite-window cocycles and the skew product ``f(w, x) = (T w, lambda(w) x)``.

A :class:`LambdaTable` of depth ``t`` holds one positive value per window
pattern ``(w[-t], ..., w[t])``, indexed by the pattern read as a binary number
with ``w[-t]`` most significant.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DepthTooSmallError, InvalidTableError, ResolutionError
from .symbolic import SymbolPoint, shift


@dataclass(frozen=True, eq=False)
class LambdaTable:
    depth: int
    values: np.ndarray

    def __post_init__(self):
        depth = int(self.depth)
        if depth < 0:
            raise InvalidTableError(f"depth must be nonnegative, got {depth}")
        values = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        if values.size != 2 ** (2 * depth + 1):
            raise InvalidTableError(
                f"depth {depth} needs {2 ** (2 * depth + 1)} values, got {values.size}"
            )
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise InvalidTableError("table values must be finite and strictly positive")
        logs = np.log(values)
        values.flags.writeable = False
        logs.flags.writeable = False
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "logs", logs)

    @property
    def width(self) -> int:
        return 2 * self.depth + 1

    def is_constant(self) -> bool:
        return bool(np.all(self.values == self.values[0]))

    def inverted(self) -> "LambdaTable":
        """Reciprocal table: the fiber action of the inverse skew product."""
        return LambdaTable(self.depth, 1.0 / self.values)

    def __eq__(self, other):
        if not isinstance(other, LambdaTable):
            return NotImplemented
        return self.depth == other.depth and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.depth, self.values.tobytes()))

    def __repr__(self):
        return f"LambdaTable(depth={self.depth}, values={self.values.tolist()})"

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {"depth": self.depth, "values": [float(v) for v in self.values]}

    @classmethod
    def from_dict(cls, data: dict) -> "LambdaTable":
        extra = set(data) - {"depth", "values"}
        if extra or "depth" not in data or "values" not in data:
            raise InvalidTableError(f"table needs exactly the fields depth and values, got {sorted(data)}")
        return cls(int(data["depth"]), [float(v) for v in data["values"]])

    def dumps(self) -> str:
        # json writes floats with repr, the shortest string that round-trips exactly
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def loads(cls, text: str) -> "LambdaTable":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "LambdaTable":
        return cls.loads(Path(path).read_text())


@dataclass(frozen=True)
class SkewState:
    w: SymbolPoint
    x: float

    def __post_init__(self):
        if not math.isfinite(self.x):
            raise ValueError(f"fiber coordinate must be finite, got {self.x!r}")


def pattern_index(table: LambdaTable, w: SymbolPoint) -> int:
    t = table.depth
    w.require(-t, t, "cocycle evaluation")
    idx = 0
    for b in w.window(-t, t).tolist():
        idx = 2 * idx + b
    return idx


def pattern_indices(bits: np.ndarray, lo: int, t: int) -> np.ndarray:
    """Pattern index of ``w[-t..t]`` for every row of a window stack starting at ``lo``."""
    bits = np.asarray(bits)
    width = bits.shape[-1]
    if -t < lo or t > lo + width - 1:
        raise ResolutionError(
            f"window [{lo}, {lo + width - 1}] does not cover [-{t}, {t}]",
            index=-t if -t < lo else t,
        )
    sub = bits[..., -t - lo:t - lo + 1].astype(np.int64)
    weights = 1 << np.arange(2 * t, -1, -1, dtype=np.int64)
    return sub @ weights


def orbit_pattern_indices(bits: np.ndarray, lo: int, t: int, count: int) -> np.ndarray:
    """Pattern indices of ``T^p w`` for ``p = 0..count-1`` along a single long window."""
    bits = np.asarray(bits).reshape(-1)
    hi = lo + bits.size - 1
    if count <= 0:
        return np.zeros(0, dtype=np.int64)
    if -t < lo or count - 1 + t > hi:
        raise ResolutionError(
            f"orbit of length {count} needs window [-{t}, {count - 1 + t}], have [{lo}, {hi}]",
            index=-t if -t < lo else count - 1 + t,
        )
    start = -t - lo
    windows = np.lib.stride_tricks.sliding_window_view(bits[start:start + count + 2 * t], 2 * t + 1)
    weights = 1 << np.arange(2 * t, -1, -1, dtype=np.int64)
    return windows.astype(np.int64) @ weights


def eval_lambda(table: LambdaTable, w: SymbolPoint) -> float:
    return float(table.values[pattern_index(table, w)])


def expected_log(table: LambdaTable) -> float:
    """Exact mean of ``log lambda`` under the uniform product measure."""
    return math.fsum(table.logs.tolist()) / table.values.size


def skew_step(table: LambdaTable, s: SkewState) -> SkewState:
    return SkewState(shift(s.w), eval_lambda(table, s.w) * s.x)


@dataclass(frozen=True, eq=False)
class BirkhoffSums:
    """``A_0 = 0`` and ``A_{j+1} = A_j + log lambda_j``; one entry per orbit point."""

    sums: np.ndarray

    def __post_init__(self):
        sums = np.array(self.sums, dtype=np.float64, copy=True).reshape(-1)
        if sums.size == 0 or sums[0] != 0.0:
            raise ValueError("Birkhoff sums must start with A_0 = 0")
        sums.flags.writeable = False
        object.__setattr__(self, "sums", sums)

    def __len__(self):
        return self.sums.size

    def __getitem__(self, j):
        return self.sums[j]

    def __array__(self, dtype=None, copy=None):
        return self.sums if dtype is None else self.sums.astype(dtype)

    @classmethod
    def from_logs(cls, logs) -> "BirkhoffSums":
        logs = np.asarray(logs, dtype=np.float64)
        return cls(np.concatenate(([0.0], np.cumsum(logs))))


def birkhoff_log_sums(table: LambdaTable, ws: Sequence[SymbolPoint]) -> BirkhoffSums:
    """Sums of ``log lambda`` along ``ws``; the last point's value is not used."""
    t = table.depth
    logs = []
    for j, w in enumerate(ws[:-1] if len(ws) else ws):
        if not w.covers(-t, t):
            raise ResolutionError(
                f"point {j} window [{w.lo}, {w.hi}] does not cover [-{t}, {t}]", index=j
            )
        logs.append(table.logs[pattern_index(table, w)])
    return BirkhoffSums.from_logs(logs)


def tilde_compress(source: LambdaTable, target_depth: int) -> LambdaTable:
    """Depth-``target_depth`` table whose log is the conditional mean of ``log source``.

    Preserves the mean of ``log lambda`` exactly and stays within the
    depth-``target_depth`` oscillation of ``log source``. Requires that
    oscillation to be below ``-a/2``, ``a`` the (negative) mean.
    """
    T, t = source.depth, int(target_depth)
    if t < 0:
        raise InvalidTableError(f"target depth must be nonnegative, got {t}")
    if t > T:
        raise InvalidTableError(f"target depth {t} exceeds source depth {T}")
    a = expected_log(source)
    if a >= 0:
        raise InvalidTableError(f"compression needs a negative mean log, got a = {a!r}")
    if t == T:
        return source
    osc = oscillation(source, t)
    worst = int(np.argmax(osc))
    if osc[worst] >= -a / 2:
        pattern = format(worst, f"0{2 * t + 1}b")
        raise DepthTooSmallError(
            f"depth {t} too small: log-oscillation {osc[worst]:.6g} over extensions of "
            f"pattern {pattern} is not below -a/2 = {-a / 2:.6g}",
            pattern=pattern,
        )
    outer = 2 ** (T - t)
    logs = source.logs.reshape(outer, 2 ** (2 * t + 1), outer)
    return LambdaTable(t, np.exp(logs.mean(axis=(0, 2))))


def oscillation(source: LambdaTable, target_depth: int) -> np.ndarray:
    """Max minus min of ``log source`` over the extensions of each depth-``target_depth`` pattern."""
    T, t = source.depth, int(target_depth)
    outer = 2 ** (T - t)
    logs = source.logs.reshape(outer, 2 ** (2 * t + 1), outer)
    return logs.max(axis=(0, 2)) - logs.min(axis=(0, 2))
