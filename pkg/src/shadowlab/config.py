"""Experiment configuration: a YAML document with a fixed set of keys.

Every validation error names the file and line of the offending key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import yaml

from .cocycle import LambdaTable, expected_log
from .errors import ConfigError, InvalidTableError

TOP_KEYS = {
    "table", "table_file", "tilde_depth", "invert", "epsilon", "gamma", "gamma_margin",
    "N_grid", "trials", "master_seed", "workers", "budget", "rate", "rate_model",
    "output", "timing", "d",
}
RATE_KEYS = {"eps_max", "grid_points", "j_min"}
OUTPUT_KEYS = {"csv", "json"}
TABLE_KEYS = {"depth", "values"}


class _Map(dict):
    line = 0
    lines: dict


class _Loader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node):
    loader.flatten_mapping(node)
    out = _Map()
    out.line = node.start_mark.line + 1
    out.lines = {}
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=True)
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", line=key_node.start_mark.line + 1)
        out[key] = loader.construct_object(value_node, deep=True)
        out.lines[key] = key_node.start_mark.line + 1
    return out


_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


@dataclass(frozen=True)
class ExperimentConfig:
    table: LambdaTable
    epsilon: float
    N_grid: tuple
    trials: int
    master_seed: int = 0
    gamma: float | str = "auto"
    gamma_margin: float = 1.1
    tilde_depth: int | None = None
    invert: bool = False
    workers: int = 1
    budget: float = 1e9
    rate_eps_max: float | None = None
    rate_grid_points: int = 64
    rate_j_min: int = 10
    rate_model: Path | None = None
    output_csv: Path | None = None
    output_json: Path | None = None
    timing: bool = False
    d: float | None = None
    source: str = "<config>"
    lines: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        self._check("epsilon", 0.0 < self.epsilon <= 1.0, f"epsilon must lie in (0, 1], got {self.epsilon!r}")
        self._check("N_grid", len(self.N_grid) > 0, "N_grid must not be empty")
        for N in self.N_grid:
            self._check("N_grid", N >= 2, f"every N must be at least 2, got {N}")
        self._check("trials", self.trials >= 100, f"trials must be at least 100, got {self.trials}")
        self._check("workers", self.workers >= 1, f"workers must be at least 1, got {self.workers}")
        self._check("budget", self.budget > 0, f"budget must be positive, got {self.budget!r}")
        self._check("gamma_margin", self.gamma_margin >= 1.0,
                    f"gamma_margin must be at least 1, got {self.gamma_margin!r}")
        if self.gamma != "auto":
            self._check("gamma", isinstance(self.gamma, float) and self.gamma > 1.0,
                        f"gamma must be 'auto' or a number above 1, got {self.gamma!r}")
        if self.d is not None:
            self._check("d", 0.0 < self.d < 1.0, f"d must lie in (0, 1), got {self.d!r}")
        a = expected_log(self.table)
        key = "table" if "table" in self.lines else "table_file"
        self._check(key, not a > 0.0,
                    f"mean log lambda is {a!r} > 0; set invert: true to study the reciprocal table")
        self._check(key, not a == 0.0, "mean log lambda is 0: the instance is not hyperbolic")

    def _check(self, key, ok, message):
        if not ok:
            raise ConfigError(message, path=self.source, line=self.lines.get(key))

    def error(self, key: str, message: str) -> ConfigError:
        return ConfigError(message, path=self.source, line=self.lines.get(key))

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


def _number(value, key, lines, source, kind=float):
    if isinstance(value, bool):
        raise ConfigError(f"{key} must be a number, got {value!r}", path=source, line=lines.get(key))
    if isinstance(value, str):
        try:
            value = float(Fraction(value.strip())) if "/" in value else float(value)
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"{key} must be a number, got {value!r}", path=source, line=lines.get(key))
    if kind is int:
        if isinstance(value, float):
            if not value.is_integer():
                raise ConfigError(f"{key} must be an integer, got {value!r}", path=source, line=lines.get(key))
            value = int(value)
        if not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer, got {value!r}", path=source, line=lines.get(key))
        return value
    if not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}", path=source, line=lines.get(key))
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{key} must be finite, got {value!r}", path=source, line=lines.get(key))
    return value


def _section(data, key, allowed, source):
    sub = data.get(key)
    if sub is None:
        return _Map()
    if not isinstance(sub, dict):
        raise ConfigError(f"{key} must be a mapping", path=source, line=data.lines.get(key))
    _unknown(sub, allowed, source, prefix=f"{key}.")
    return sub


def _unknown(data, allowed, source, prefix=""):
    for k in data:
        if k not in allowed:
            raise ConfigError(f"unknown key {prefix}{k}", path=source, line=getattr(data, "lines", {}).get(k))


def _table(data, base, source):
    if ("table" in data) == ("table_file" in data):
        raise ConfigError("give exactly one of table and table_file", path=source, line=data.line or 1)
    if "table_file" in data:
        path = base / str(data["table_file"])
        try:
            return LambdaTable.load(path)
        except OSError as exc:
            raise ConfigError(f"cannot read table file {path}: {exc.strerror}", path=source,
                              line=data.lines["table_file"])
        except (InvalidTableError, ValueError) as exc:
            raise ConfigError(f"table file {path}: {exc}", path=source, line=data.lines["table_file"])
    spec = data["table"]
    line = data.lines["table"]
    if not isinstance(spec, dict):
        raise ConfigError("table must be a mapping with depth and values", path=source, line=line)
    _unknown(spec, TABLE_KEYS, source, prefix="table.")
    if "depth" not in spec or "values" not in spec:
        raise ConfigError("table needs depth and values", path=source, line=line)
    if not isinstance(spec["values"], list):
        raise ConfigError("table.values must be a list", path=source, line=spec.lines.get("values", line))
    vals = [_number(v, "table.values", {"table.values": spec.lines.get("values", line)}, source)
            for v in spec["values"]]
    depth = _number(spec["depth"], "depth", spec.lines, source, kind=int)
    try:
        return LambdaTable(depth, vals)
    except InvalidTableError as exc:
        raise ConfigError(str(exc), path=source, line=line)


def parse_config(text: str, source: str = "<config>", base: Path | None = None) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from YAML text; relative paths resolve against ``base``."""
    base = Path(base) if base is not None else Path.cwd()
    try:
        data = yaml.load(text, Loader=_Loader)
    except ConfigError as exc:
        raise ConfigError(exc.message, path=source, line=exc.line)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None) or getattr(exc, "context_mark", None)
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"malformed YAML: {problem}", path=source,
                          line=mark.line + 1 if mark is not None else None)
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping", path=source, line=1)
    _unknown(data, TOP_KEYS, source)
    lines = data.lines
    for key in ("epsilon", "N_grid", "trials"):
        if key not in data:
            raise ConfigError(f"missing required key {key}", path=source, line=1)

    table = _table(data, base, source)
    invert = data.get("invert", False)
    if not isinstance(invert, bool):
        raise ConfigError("invert must be true or false", path=source, line=lines.get("invert"))
    if invert:
        table = table.inverted()

    grid = data["N_grid"]
    if isinstance(grid, (int, float, str)):
        grid = [grid]
    if not isinstance(grid, list):
        raise ConfigError("N_grid must be a list of integers", path=source, line=lines["N_grid"])
    N_grid = tuple(_number(N, "N_grid", lines, source, kind=int) for N in grid)

    gamma = data.get("gamma", "auto")
    if gamma != "auto":
        gamma = _number(gamma, "gamma", lines, source)

    rate = _section(data, "rate", RATE_KEYS, source)
    output = _section(data, "output", OUTPUT_KEYS, source)

    def opt(key, kind=float, section=data, default=None):
        v = section.get(key)
        if v is None:
            return default
        return _number(v, key, getattr(section, "lines", {}), source, kind=kind)

    def path(key, section=data):
        v = section.get(key)
        return None if v is None else base / str(v)

    timing = data.get("timing", False)
    if not isinstance(timing, bool):
        raise ConfigError("timing must be true or false", path=source, line=lines.get("timing"))

    return ExperimentConfig(
        table=table,
        epsilon=_number(data["epsilon"], "epsilon", lines, source),
        N_grid=N_grid,
        trials=_number(data["trials"], "trials", lines, source, kind=int),
        master_seed=opt("master_seed", int, default=0),
        gamma=gamma,
        gamma_margin=opt("gamma_margin", default=1.1),
        tilde_depth=opt("tilde_depth", int),
        invert=invert,
        workers=opt("workers", int, default=1),
        budget=opt("budget", default=1e9),
        rate_eps_max=opt("eps_max", section=rate),
        rate_grid_points=opt("grid_points", int, section=rate, default=64),
        rate_j_min=opt("j_min", int, section=rate, default=10),
        rate_model=path("rate_model"),
        output_csv=path("csv", output),
        output_json=path("json", output),
        timing=timing,
        d=opt("d"),
        source=source,
        lines=dict(lines),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path=str(path), line=None)
    return parse_config(text, source=str(path), base=path.parent)
