"""Command line entry point: ``shadowlab {simulate,sweep,rate,verify,splice-test}``.

Exit status is 0 on success, 1 on a validation error (bad config or
parameters) and 2 on a runtime failure, including failed verification suites.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import sys
from pathlib import Path

from . import checks, kernels
from .config import ExperimentConfig, load_config
from .errors import BudgetError, ShadowlabError
from .experiment import (
    CsvSink, default_workers, estimate_p, grid_radii, rate_model_for, resolve_gamma,
    results_json, sweep_N,
)

log = logging.getLogger("shadowlab")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="YAML experiment config")
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--workers", type=int, help="worker processes (SHADOWLAB_WORKERS overrides)")
    p.add_argument("--out", type=Path, help="output file (default: config outputs, else stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--timing", action="store_true", help="fill the seconds column")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="shadowlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common], help="estimate p(d, N, eps) once")
    sim.add_argument("--N", type=int, help="pseudotrajectory length (default: first of N_grid)")
    sim.add_argument("--d", type=float, help="radius (default: config d, else eps / N^gamma)")
    sim.add_argument("--trials", type=int, help="override trials")
    sim.add_argument("--exact", action="store_true", help="switch off both perturbations")

    sub.add_parser("sweep", parents=[common], help="run the d = eps / N^gamma sweep over N_grid")
    sub.add_parser("rate", parents=[common], help="build and write the large-deviation rate model")

    ver = sub.add_parser("verify", parents=[common], help="run the oracle and property suites")
    ver.add_argument("--full", action="store_true", help="use the full acceptance sizes")
    ver.add_argument("--suite", action="append", choices=sorted(checks.FULL), help="run only these")

    spl = sub.add_parser("splice-test", parents=[common], help="closeness and distribution of the splice")
    spl.add_argument("--trajectories", type=int, default=100_000)
    spl.add_argument("--N", type=int, default=50)
    spl.add_argument("--d", type=float, default=0.1)
    return parser


def _config(args) -> ExperimentConfig:
    if args.config is None:
        raise ShadowlabError("this command needs --config")
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.timing:
        changes["timing"] = True
    changes["workers"] = default_workers(args.workers if args.workers is not None else cfg.workers)
    return cfg.with_(**changes)


@contextlib.contextmanager
def _sink(path: Path | None):
    if path is None:
        yield sys.stdout
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        yield fh


def _target(args, cfg: ExperimentConfig | None) -> Path | None:
    if args.out is not None:
        return args.out
    if cfg is None:
        return None
    return cfg.output_csv if args.format == "csv" else cfg.output_json


def cmd_simulate(args) -> int:
    cfg = _config(args)
    N = args.N if args.N is not None else cfg.N_grid[0]
    trials = args.trials if args.trials is not None else cfg.trials
    model = None
    if args.d is not None or cfg.d is not None:
        d = args.d if args.d is not None else cfg.d
        gamma = None if cfg.gamma == "auto" else float(cfg.gamma)
    else:
        gamma, model = resolve_gamma(cfg)
        d = grid_radii(cfg.with_(N_grid=(N,)), gamma)[0]
    est = estimate_p(cfg.table, d, N, cfg.epsilon, trials, cfg.master_seed, workers=cfg.workers,
                     gamma=gamma, exact=args.exact, budget=cfg.budget, timing=cfg.timing)
    with _sink(_target(args, cfg)) as fh:
        if args.format == "csv":
            CsvSink(fh)(est)
        else:
            fh.write(results_json([est], est.gamma, model))
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    gamma, model = resolve_gamma(cfg)
    grid_radii(cfg, gamma)  # fail fast before any trial runs
    with _sink(_target(args, cfg)) as fh:
        if args.format == "csv":
            sink = CsvSink(fh)
            sweep_N(cfg, on_row=sink)
        else:
            rows = []
            try:
                sweep_N(cfg, on_row=rows.append)
            finally:
                fh.write(results_json(rows, gamma, model))
    return 0


def cmd_rate(args) -> int:
    cfg = _config(args)
    model = rate_model_for(cfg.with_(rate_model=None))
    target = args.out if args.out is not None else cfg.rate_model
    with _sink(target) as fh:
        fh.write(model.dumps())
    log.info("gamma_min = %r, gamma = %r", model.gamma_min, model.gamma_min * cfg.gamma_margin)
    return 0


def _report(results, args) -> int:
    lines = [r.line() for r in results]
    with _sink(args.out) as fh:
        for line in lines:
            fh.write(line + "\n")
    return 0 if all(r.passed for r in results) else 2


def cmd_verify(args) -> int:
    log.info("kernel backend: %s", kernels.BACKEND)
    return _report(checks.run_suites(full=args.full, only=args.suite), args)


def cmd_splice_test(args) -> int:
    seed = args.seed if args.seed is not None else 3
    return _report([checks.check_splice(args.trajectories, args.N, args.d, seed=seed)], args)


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "rate": cmd_rate,
    "verify": cmd_verify,
    "splice-test": cmd_splice_test,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except BudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ShadowlabError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("interrupted; rows written so far were flushed", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def run_cli(argv=None) -> int:
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
