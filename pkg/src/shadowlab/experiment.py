"""Monte Carlo estimates of the shadowing probability and the ``d = eps / N^gamma`` sweep.

Each trial draws ``w_0 ~ nu``, starts at fiber 0, generates a pseudotrajectory,
and counts a success only when the shadow witness passes an independent
re-check. Trial ``i`` at length ``N`` owns the seed sequence
``SeedSequence(master_seed, spawn_key=(N, i))``, split into disjoint streams
for the start point, the ball samples, the fiber noise and the splice, so
results do not depend on the number of workers.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .cocycle import LambdaTable, SkewState, expected_log, tilde_compress
from .config import ExperimentConfig
from .errors import BudgetError, ConfigError, InvalidParameterError
from .ldp import RateModel, build_rate_model, wilson_interval
from .pseudo import PseudoTrajectory, generate_pseudo, window_plan
from .shadow import ShadowSolution, shadow_attempt
from .symbolic import sample_point

CSV_COLUMNS = (
    "N", "d", "epsilon", "gamma", "trials", "successes", "p_hat", "wilson_lo", "wilson_hi",
    "s1_rate", "s2_rate", "mean_F", "mean_fiber_gap", "mean_symbolic_gap", "seconds",
)


@dataclass(frozen=True)
class TrialRecord:
    N: int
    d: float
    index: int
    verdict: bool
    F: float
    max_fiber_gap: float
    max_symbolic_gap: float
    s1: bool
    s2: bool
    seconds: float = 0.0


@dataclass(frozen=True)
class Estimate:
    N: int
    d: float
    epsilon: float
    gamma: float
    trials: int
    successes: int
    p_hat: float
    wilson_lo: float
    wilson_hi: float
    s1_rate: float
    s2_rate: float
    mean_F: float
    mean_fiber_gap: float
    mean_symbolic_gap: float
    seconds: float | None = None
    records: tuple = field(default=(), compare=False, repr=False)

    def row(self) -> dict:
        return {k: getattr(self, k) for k in CSV_COLUMNS}


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    gamma: float
    rate_model: RateModel | None = None

    def csv(self) -> str:
        buf = io.StringIO()
        write_csv(buf, self.rows)
        return buf.getvalue()

    def json(self) -> str:
        return results_json(self.rows, self.gamma, self.rate_model)


def trial_streams(master_seed: int, N: int, index: int) -> list[np.random.Generator]:
    """``[start, ball, fiber, splice]`` generators for trial ``index`` at length ``N``."""
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(N), int(index)))
    return [np.random.default_rng(s) for s in seq.spawn(4)]


def certify(table: LambdaTable, traj: PseudoTrajectory, sol: ShadowSolution, eps: float) -> bool:
    """Re-check a witness with code independent of :func:`shadow_attempt`.

    The fiber orbit is rebuilt as ``z_0 * cumprod(lambda)`` from the spliced
    bits, and the symbolic gap is read off the first mismatch with the shifted
    base point.
    """
    w, t, N = sol.spliced, table.depth, traj.N
    off = traj.lo - w.lo
    width = traj.bits.shape[1]
    span = w.bits[off:off + N - 1 + width]
    if span.size < N - 1 + width:
        return False
    rows = np.lib.stride_tricks.sliding_window_view(span, width)
    diff = rows != traj.bits
    if diff.any():
        cols = np.nonzero(diff.any(axis=0))[0] + traj.lo
        sym = 2.0 ** -int(np.min(np.abs(cols)))
    else:
        sym = 2.0 ** -(min(-traj.lo, traj.hi) + 1)
    c = -t - w.lo
    pats = np.lib.stride_tricks.sliding_window_view(w.bits[c:c + N - 1 + 2 * t], 2 * t + 1)
    idx = np.zeros(N - 1, dtype=np.int64)
    for k in range(2 * t + 1):
        idx = 2 * idx + pats[:, k]
    z = sol.z0 * np.concatenate(([1.0], np.cumprod(table.values[idx])))
    fib = float(np.max(np.abs(traj.x - z)))
    return max(fib, sym) < eps


def run_trial(table: LambdaTable, d: float, N: int, eps: float, gamma: float,
              master_seed: int, index: int, exact: bool = False, timing: bool = False) -> TrialRecord:
    t0 = time.perf_counter() if timing else 0.0
    start, ball, fiber, splice = trial_streams(master_seed, N, index)
    W = window_plan(table.depth, d)
    w0 = sample_point(-W, W, start)
    traj = generate_pseudo(table, SkewState(w0, 0.0), d, N, ball, fiber_rng=fiber, exact=exact)
    sol = shadow_attempt(table, traj, eps, rng=splice)
    ok = sol.verdict and certify(table, traj, sol, eps)
    scale = float(N) ** gamma
    return TrialRecord(
        N=N, d=d, index=index, verdict=bool(ok), F=sol.F,
        max_fiber_gap=sol.max_fiber_gap, max_symbolic_gap=sol.max_symbolic_gap,
        s1=bool(sol.F <= scale), s2=bool(sol.s2_gap > d * scale),
        seconds=time.perf_counter() - t0 if timing else 0.0,
    )


def _run_chunk(args):
    table_dict, d, N, eps, gamma, seed, indices, exact, timing = args
    table = LambdaTable.from_dict(table_dict)
    return [run_trial(table, d, N, eps, gamma, seed, i, exact, timing) for i in indices]


def run_trials(table: LambdaTable, d: float, N: int, eps: float, gamma: float, M: int,
               seed: int, workers: int = 1, exact: bool = False,
               timing: bool = False) -> list[TrialRecord]:
    """All ``M`` trial records in index order."""
    if workers <= 1 or M < 2:
        return [run_trial(table, d, N, eps, gamma, seed, i, exact, timing) for i in range(M)]
    size = max(1, min(64, M // (4 * workers)))
    chunks = [range(s, min(M, s + size)) for s in range(0, M, size)]
    payload = [(table.to_dict(), d, N, eps, gamma, seed, list(c), exact, timing) for c in chunks]
    out: list[TrialRecord] = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(_run_chunk, payload):
            out.extend(part)
    return out


def _mean(values) -> float:
    values = list(values)
    return math.fsum(values) / len(values) if values else math.nan


def aggregate(records: Sequence[TrialRecord], N: int, d: float, eps: float, gamma: float,
              seconds: float | None = None, confidence: float = 0.95) -> Estimate:
    M = len(records)
    k = sum(r.verdict for r in records)
    lo, hi = wilson_interval(k, M, confidence)
    return Estimate(
        N=N, d=d, epsilon=eps, gamma=gamma, trials=M, successes=k, p_hat=k / M,
        wilson_lo=lo, wilson_hi=hi,
        s1_rate=sum(r.s1 for r in records) / M,
        s2_rate=sum(r.s2 for r in records) / M,
        mean_F=_mean(r.F for r in records),
        mean_fiber_gap=_mean(r.max_fiber_gap for r in records),
        mean_symbolic_gap=_mean(r.max_symbolic_gap for r in records),
        seconds=seconds, records=tuple(records),
    )


def estimate_p(table: LambdaTable, d: float, N: int, eps: float, M: int, seed: int,
               workers: int = 1, gamma: float | None = None, exact: bool = False,
               budget: float = 1e9, timing: bool = False, confidence: float = 0.95) -> Estimate:
    """Certified Monte Carlo estimate of ``p(d, N, eps)`` over ``M`` trials.

    ``gamma`` only enters the S1/S2 diagnostics; by default it is the exponent
    with ``d = eps / N^gamma``. ``exact`` switches off both perturbations.
    """
    t = table.depth
    if not (0.0 < d < 1.0 and d < 2.0 ** -(t + 1)):
        raise InvalidParameterError(f"d must satisfy 0 < d < min(1, 2**-(t+1)) = {2.0 ** -(t + 1)}, got {d!r}")
    if not eps > 0:
        raise InvalidParameterError(f"eps must be positive, got {eps!r}")
    if N < 2:
        raise InvalidParameterError(f"N must be at least 2, got {N}")
    if M < 1:
        raise InvalidParameterError(f"M must be positive, got {M}")
    if float(N) * M > budget:
        raise BudgetError(f"N * M = {N * M} exceeds the budget {budget:g}")
    if gamma is None:
        gamma = math.log(eps / d) / math.log(N)
    t0 = time.perf_counter()
    records = run_trials(table, d, N, eps, gamma, M, seed, workers, exact, timing)
    seconds = time.perf_counter() - t0 if timing else None
    return aggregate(records, N, d, eps, gamma, seconds, confidence)


# -- sweep --------------------------------------------------------------


def rate_table(config: ExperimentConfig) -> LambdaTable:
    """The finite-depth table the large-deviation constants are computed for."""
    if config.tilde_depth is None:
        return config.table
    try:
        return tilde_compress(config.table, config.tilde_depth)
    except ValueError as exc:
        raise config.error("tilde_depth", str(exc))


def rate_model_for(config: ExperimentConfig) -> RateModel:
    """Load ``config.rate_model`` when it exists, else build the model."""
    table = rate_table(config)
    if config.rate_model is not None and Path(config.rate_model).exists():
        model = RateModel.load(config.rate_model)
        if model.t != table.depth or not math.isclose(model.a, expected_log(table), rel_tol=1e-12, abs_tol=1e-15):
            raise config.error("rate_model", f"rate model {config.rate_model} was built for a different table")
        return model
    try:
        return build_rate_model(table, eps_max=config.rate_eps_max,
                                grid_points=config.rate_grid_points, j_min=config.rate_j_min)
    except InvalidParameterError as exc:
        raise config.error("rate", str(exc))


def resolve_gamma(config: ExperimentConfig) -> tuple[float, RateModel | None]:
    """``gamma`` and the rate model behind it (``None`` when ``gamma`` is explicit)."""
    if config.gamma != "auto":
        return float(config.gamma), None
    model = rate_model_for(config)
    return model.gamma_min * config.gamma_margin, model


def grid_radii(config: ExperimentConfig, gamma: float) -> list[float]:
    """``d = eps / N^gamma`` for every ``N``; raises unless each is below ``2^-(t+1)``."""
    t = config.table.depth
    radii = []
    for N in config.N_grid:
        d = config.epsilon / float(N) ** gamma
        if not (0.0 < d < 2.0 ** -(t + 1)):
            raise config.error("N_grid", f"N = {N} gives d = {d!r}, which is not in (0, 2**-(t+1)) "
                                         f"= (0, {2.0 ** -(t + 1)})")
        if float(N) * config.trials > config.budget:
            raise config.error("budget", f"N * trials = {N * config.trials} exceeds the budget {config.budget:g}")
        radii.append(d)
    return radii


def sweep_N(config: ExperimentConfig, workers: int | None = None,
            on_row: Callable[[Estimate], None] | None = None) -> SweepResult:
    """Run :func:`estimate_p` at ``d = eps / N^gamma`` for each ``N`` of the grid.

    ``on_row`` sees each row as soon as it is computed, so callers can flush
    partial results before an interrupt.
    """
    gamma, model = resolve_gamma(config)
    radii = grid_radii(config, gamma)
    workers = config.workers if workers is None else workers
    rows = []
    for N, d in zip(config.N_grid, radii):
        est = estimate_p(config.table, d, N, config.epsilon, config.trials, config.master_seed,
                         workers=workers, gamma=gamma, budget=config.budget, timing=config.timing)
        rows.append(est)
        if on_row is not None:
            on_row(est)
    return SweepResult(tuple(rows), gamma, model)


# -- output ---------------------------------------------------------------


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


class CsvSink:
    """Writes the header at once and each row as it arrives, flushing every time."""

    def __init__(self, fh):
        self.fh = fh
        self.writer = csv.writer(fh, lineterminator="\n")
        self.writer.writerow(CSV_COLUMNS)
        fh.flush()

    def __call__(self, est: Estimate) -> None:
        self.writer.writerow([_cell(v) for v in est.row().values()])
        self.fh.flush()


def write_csv(fh, rows: Sequence[Estimate]) -> None:
    sink = CsvSink(fh)
    for r in rows:
        sink(r)


def results_json(rows: Sequence[Estimate], gamma: float, model: RateModel | None) -> str:
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return None
        return v

    doc = {
        "gamma": gamma,
        "rows": [{k: clean(v) for k, v in r.row().items()} for r in rows],
        "rate_model": model.to_dict() if model is not None else None,
    }
    return json.dumps(doc, indent=2, allow_nan=True) + "\n"


def default_workers(requested: int | None) -> int:
    env = os.environ.get("SHADOWLAB_WORKERS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(f"SHADOWLAB_WORKERS must be an integer, got {env!r}")
        if value < 1:
            raise ConfigError(f"SHADOWLAB_WORKERS must be at least 1, got {value}")
        return value
    return 1 if requested is None else requested
