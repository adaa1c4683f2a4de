import io
import json
import math
import textwrap

import numpy as np
import pytest

from shadowlab.cli import main
from shadowlab.cocycle import LambdaTable
from shadowlab.config import ExperimentConfig, load_config, parse_config
from shadowlab.errors import BudgetError, ConfigError, InvalidParameterError
from shadowlab.experiment import (
    CSV_COLUMNS, certify, default_workers, estimate_p, grid_radii, resolve_gamma, run_trial,
    sweep_N, trial_streams, write_csv,
)
from shadowlab.ldp import RateModel

BASE = """\
table: {depth: 0, values: [2, 1/3]}
epsilon: 0.1
N_grid: [20, 50]
trials: 100
master_seed: 11
"""


def cfg_file(tmp_path, text=BASE, name="c.yaml"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return p


# -- config ---------------------------------------------------------------


def test_parse_basic(table):
    cfg = parse_config(BASE)
    assert cfg.table == table
    assert cfg.N_grid == (20, 50) and cfg.gamma == "auto" and cfg.gamma_margin == 1.1
    assert cfg.workers == 1 and cfg.budget == 1e9 and not cfg.timing


@pytest.mark.parametrize("extra, line, needle", [
    ("bogus: 1\n", 6, "unknown key bogus"),
    ("rate: {wrong: 1}\n", 6, "unknown key rate.wrong"),
    ("gamma: 0.5\n", 6, "gamma"),
    ("workers: 0\n", 6, "workers"),
    ("d: 2\n", 6, "d must lie"),
    ("master_seed: 1\n", 6, "duplicate key"),
    ("timing: maybe\n", 6, "timing"),
])
def test_config_errors_are_line_anchored(extra, line, needle):
    with pytest.raises(ConfigError) as exc:
        parse_config(BASE + extra, source="c.yaml")
    assert exc.value.line == line
    assert str(exc.value).startswith(f"c.yaml:{line}:")
    assert needle in str(exc.value)


@pytest.mark.parametrize("text, line, needle", [
    (BASE.replace("epsilon: 0.1", "epsilon: 0"), 2, "epsilon"),
    (BASE.replace("epsilon: 0.1", "epsilon: 1.5"), 2, "epsilon"),
    (BASE.replace("trials: 100", "trials: 99"), 4, "trials"),
    (BASE.replace("[20, 50]", "[20, 1]"), 3, "at least 2"),
    (BASE.replace("[20, 50]", "[20, 2.5]"), 3, "integer"),
    (BASE.replace("[2, 1/3]", "[2, -1]"), 1, "table"),
    (BASE.replace("[2, 1/3]", "[2, 3]"), 1, "invert"),
    (BASE.replace("[2, 1/3]", "[2, 1/2]"), 1, "not hyperbolic"),
    (BASE.replace("epsilon: 0.1\n", ""), 1, "missing required key epsilon"),
    (BASE + "  : [\n", None, "malformed YAML"),
])
def test_config_validation(text, line, needle):
    with pytest.raises(ConfigError) as exc:
        parse_config(text, source="c.yaml")
    if line is not None:
        assert exc.value.line == line
    assert needle in str(exc.value)


def test_config_invert_and_files(tmp_path, table):
    cfg = parse_config(BASE.replace("[2, 1/3]", "[0.5, 3]") + "invert: true\n")
    assert np.allclose(cfg.table.values, [2.0, 1 / 3])
    table.save(tmp_path / "t.json")
    p = cfg_file(tmp_path, BASE.replace("table: {depth: 0, values: [2, 1/3]}", "table_file: t.json")
                 + "output: {csv: out/r.csv}\nrate_model: m.json\n")
    cfg = load_config(p)
    assert cfg.table == table
    assert cfg.output_csv == tmp_path / "out" / "r.csv"
    assert cfg.rate_model == tmp_path / "m.json"
    with pytest.raises(ConfigError, match="cannot read table file"):
        parse_config(BASE.replace("table: {depth: 0, values: [2, 1/3]}", "table_file: nope.json"),
                     base=tmp_path)
    with pytest.raises(ConfigError, match="exactly one"):
        parse_config(BASE + "table_file: t.json\n", base=tmp_path)
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.yaml")


# -- estimate_p -------------------------------------------------------------


def test_trial_streams_are_disjoint_and_reproducible():
    a = [g.random() for g in trial_streams(5, 100, 3)]
    b = [g.random() for g in trial_streams(5, 100, 3)]
    c = [g.random() for g in trial_streams(5, 100, 4)]
    assert a == b and a != c and len(set(a)) == 4


def test_eps_below_d_never_succeeds(table):
    est = estimate_p(table, 1e-3, 100, 5e-4, 1000, seed=3)
    assert est.successes == 0 and est.p_hat == 0.0


def test_exact_mode_always_succeeds(table):
    est = estimate_p(table, 1e-3, 100, 0.1, 200, seed=3, exact=True)
    assert est.p_hat == 1.0 and est.mean_fiber_gap == 0.0


def test_frozen_reference_estimate(table):
    # observed on the first certified run; the Wilson band keeps the fixture honest
    est = estimate_p(table, 1e-4, 100, 0.1, 200, seed=7)
    assert est.successes == 185
    assert est.gamma == pytest.approx(1.5)
    assert est.wilson_lo <= 0.928 <= est.wilson_hi


def test_deterministic_table_always_shadows():
    t = LambdaTable(0, [0.5, 0.5])
    est = estimate_p(t, 1e-3, 200, 0.1, 100, seed=1)
    assert est.p_hat == 1.0
    cfg = parse_config(BASE.replace("[2, 1/3]", "[0.5, 0.5]"))
    gamma, model = resolve_gamma(cfg)
    assert model.k == math.inf and gamma == pytest.approx(1.1)
    assert all(r.p_hat == 1.0 for r in sweep_N(cfg).rows)


def test_estimate_p_errors(table):
    with pytest.raises(InvalidParameterError):
        estimate_p(table, 0.5, 10, 0.1, 100, seed=0)
    with pytest.raises(InvalidParameterError):
        estimate_p(table, 0.1, 1, 0.1, 100, seed=0)
    with pytest.raises(InvalidParameterError):
        estimate_p(table, 0.1, 10, 0.0, 100, seed=0)
    with pytest.raises(BudgetError):
        estimate_p(table, 0.1, 1000, 0.1, 100, seed=0, budget=1e4)


def test_workers_do_not_change_results(table):
    a = estimate_p(table, 1e-3, 60, 0.1, 120, seed=9, workers=1)
    b = estimate_p(table, 1e-3, 60, 0.1, 120, seed=9, workers=3)
    assert a == b and a.records == b.records


def test_s1_s2_bookkeeping(table):
    # whenever 2 d N^gamma <= eps, success needs S1 and not S2 ... and the converse holds
    N, eps = 50, 0.1
    for gamma in (1.5, 2.5, 4.0):
        d = eps / N ** gamma / 2
        for i in range(200):
            rec = run_trial(table, d, N, eps, gamma, master_seed=13, index=i)
            if rec.s1 and not rec.s2:
                assert rec.verdict
    assert 0.0 <= rec.max_symbolic_gap < 2 * d


def test_certify_rejects_tampered_witness(table):
    from dataclasses import replace
    from shadowlab.pseudo import generate_pseudo, window_plan
    from shadowlab.shadow import shadow_attempt
    from shadowlab.cocycle import SkewState
    from shadowlab.symbolic import sample_point
    rng = np.random.default_rng(0)
    d = 1e-3
    W = window_plan(0, d)
    tr = generate_pseudo(table, SkewState(sample_point(-W, W, rng), 0.0), d, 60, rng)
    sol = shadow_attempt(table, tr, 0.1, rng=rng)
    assert sol.verdict and certify(table, tr, sol, 0.1)
    assert not certify(table, tr, replace(sol, z0=sol.z0 + 1.0), 0.1)
    bits = sol.spliced.bits.copy()
    bits[-sol.spliced.lo] ^= 1
    from shadowlab.symbolic import SymbolPoint
    assert not certify(table, tr, replace(sol, spliced=SymbolPoint(sol.spliced.lo, bits)), 0.1)


def test_wilson_band_shrinks_like_root_M(table):
    widths = []
    for M in (100, 1000, 10000):
        est = estimate_p(table, 1e-3, 20, 0.005, M, seed=17)
        assert 0.2 < est.p_hat < 0.8
        widths.append((est.wilson_hi - est.wilson_lo) * math.sqrt(M))
    assert max(widths) / min(widths) < 1.15


# -- sweep ------------------------------------------------------------------


def test_single_N_sweep_matches_estimate_p(table):
    cfg = parse_config(BASE.replace("[20, 50]", "[40]") + "gamma: 2.0\n")
    (row,) = sweep_N(cfg).rows
    est = estimate_p(table, 0.1 / 40 ** 2.0, 40, 0.1, 100, seed=11, gamma=2.0)
    assert row == est and row.records == est.records


def test_sweep_rows_and_csv(table):
    cfg = parse_config(BASE)
    res = sweep_N(cfg)
    assert [r.N for r in res.rows] == [20, 50]
    assert res.gamma == pytest.approx(res.rate_model.gamma_min * 1.1)
    for r in res.rows:
        assert 0 <= r.wilson_lo <= r.p_hat <= r.wilson_hi <= 1
        assert r.d == pytest.approx(0.1 / r.N ** res.gamma)
    lines = res.csv().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert lines[1].endswith(",") and len(lines) == 3
    doc = json.loads(res.json())
    assert doc["gamma"] == res.gamma and doc["rate_model"]["t"] == 0
    assert [r["N"] for r in doc["rows"]] == [20, 50]


def test_grid_radii_checks():
    cfg = parse_config(BASE + "gamma: 1.01\n")
    deep = cfg.with_(table=LambdaTable(1, [0.5] * 8), epsilon=1.0, N_grid=(2,))
    with pytest.raises(ConfigError, match="N = 2 gives d") as exc:
        grid_radii(deep, 1.01)
    assert exc.value.line == 3
    with pytest.raises(ConfigError, match="budget"):
        grid_radii(cfg.with_(budget=1000.0), 1.01)


def test_default_workers(monkeypatch):
    monkeypatch.delenv("SHADOWLAB_WORKERS", raising=False)
    assert default_workers(None) == 1 and default_workers(3) == 3
    monkeypatch.setenv("SHADOWLAB_WORKERS", "2")
    assert default_workers(5) == 2
    monkeypatch.setenv("SHADOWLAB_WORKERS", "x")
    with pytest.raises(ConfigError):
        default_workers(1)


# -- cli ----------------------------------------------------------------------


def test_cli_rate_then_sweep_matches_explicit_gamma(tmp_path):
    p = cfg_file(tmp_path, BASE + "rate_model: model.json\n")
    assert main(["rate", "--config", str(p)]) == 0
    model = RateModel.load(tmp_path / "model.json")
    gamma = model.gamma_min * 1.1
    assert main(["sweep", "--config", str(p), "--out", str(tmp_path / "a.csv")]) == 0
    q = cfg_file(tmp_path, BASE + f"gamma: {gamma!r}\n", name="e.yaml")
    assert main(["sweep", "--config", str(q), "--out", str(tmp_path / "b.csv")]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_cli_simulate_deterministic_across_workers(tmp_path, monkeypatch):
    monkeypatch.delenv("SHADOWLAB_WORKERS", raising=False)
    p = cfg_file(tmp_path)
    outs = []
    for w in ("1", "2"):
        out = tmp_path / f"s{w}.csv"
        assert main(["simulate", "--config", str(p), "--workers", w, "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    header, row = outs[0].decode().splitlines()
    assert header == ",".join(CSV_COLUMNS) and row.startswith("20,")


def test_cli_json_and_stdout(tmp_path, capsys):
    p = cfg_file(tmp_path)
    assert main(["simulate", "--config", str(p), "--format", "json", "--N", "30", "--d", "0.001"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["rows"][0]["N"] == 30 and doc["rows"][0]["d"] == 0.001
    assert doc["rows"][0]["seconds"] is None
    assert main(["simulate", "--config", str(p), "--timing", "--trials", "100"]) == 0
    row = capsys.readouterr().out.splitlines()[1]
    assert float(row.split(",")[-1]) > 0


def test_cli_exit_codes(tmp_path, capsys):
    bad = cfg_file(tmp_path, BASE + "oops: 1\n", name="bad.yaml")
    assert main(["sweep", "--config", str(bad)]) == 1
    assert f"{bad}:6:" in capsys.readouterr().err
    assert main(["sweep"]) == 1
    heavy = cfg_file(tmp_path, BASE + "budget: 1000\n", name="heavy.yaml")
    assert main(["sweep", "--config", str(heavy)]) == 1
    assert main(["simulate", "--config", str(heavy), "--N", "50", "--d", "0.01"]) == 2
    assert "budget" in capsys.readouterr().err


def test_cli_verify_and_splice(tmp_path, capsys):
    assert main(["verify", "--suite", "backend-equality", "--suite", "minimax-identity"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 2 and all(line.startswith("PASS") for line in out)
    assert main(["splice-test", "--trajectories", "500", "--N", "20"]) == 0
    assert capsys.readouterr().out.startswith("PASS splice-distribution")
    assert main(["splice-test", "--trajectories", "200", "--d", "0.01", "--N", "5",
                 "--out", str(tmp_path / "r.txt")]) == 0
    assert (tmp_path / "r.txt").read_text().startswith("PASS")


def test_write_csv_round_trip(table):
    est = estimate_p(table, 1e-3, 20, 0.1, 100, seed=2)
    buf = io.StringIO()
    write_csv(buf, [est])
    import csv
    (row,) = list(csv.DictReader(io.StringIO(buf.getvalue())))
    assert float(row["mean_F"]) == est.mean_F and row["seconds"] == ""
    assert int(row["successes"]) == est.successes
