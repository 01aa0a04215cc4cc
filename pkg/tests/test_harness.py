import math

import numpy as np
import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from rcdlmc.harness import cli
from rcdlmc.harness.config import ConfigError, dump_config, parse_config, preset_spec
from rcdlmc.harness.csvio import COLUMNS, SchemaError, emit_csv, read_csv
from rcdlmc.harness.experiment import bounds_table, build_target, importance_moment, reference_moment, run_experiment
from rcdlmc.metrics import test_function
from rcdlmc.theory import BoundParams

MINIMAL = """
algorithm: OLMC
target: {kind: gaussian, d: 5}
h: 0.1
N: 100
"""


# -- config ----------------------------------------------------------------


def test_minimal_config_gets_defaults():
    spec = parse_config(MINIMAL)
    assert spec.preset == "custom" and spec.algorithms == ("OLMC",)
    assert spec.target == {"kind": "gaussian", "d": 5, "params": {"center": 0.0}}
    assert spec.h_list == (0.1,) and spec.N == 100 and spec.seed == 0
    assert spec.phi == "x1_squared" and spec.gamma is None and spec.tau is None
    assert spec.steps_for(0.1) == 200


def test_svrg_tau_defaults_to_dimension():
    spec = parse_config("algorithm: SVRG_O\ntarget: {kind: glm, d: 100}\nh: 1e-4\nN: 10\n")
    assert spec.tau == 100


def test_underdamped_gamma_defaults_to_inverse_lipschitz():
    spec = parse_config("algorithm: ULMC\ntarget: {kind: gaussian, d: 3}\nh: 0.1\nN: 10\n")
    assert spec.gamma == 1.0
    with pytest.raises(ConfigError, match="gamma"):
        parse_config("algorithm: ULMC\ntarget: {kind: mixture, d: 3}\nh: 0.1\nN: 10\n")


def test_errors_are_aggregated():
    text = "algorithm: OLMC\ntarget: {kind: gaussian, d: 5}\nh: fast\nN: 1.5\nbogus: 1\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    msg = str(info.value)
    for part in ("h:", "N:", "bogus"):
        assert part in msg


def test_missing_keys_listed_together():
    with pytest.raises(ConfigError) as info:
        parse_config("seed: 3\n")
    msg = str(info.value)
    assert "algorithm" in msg and "target" in msg and "N" in msg and "h or h_list" in msg


@pytest.mark.parametrize(
    "text",
    [
        "[1, 2]",
        "algorithm: OLMC\ntarget: {kind: gaussian, d: 5}\nh: 0.1\nh_list: [0.1]\nN: 1\n",
        "algorithm: OLMC\ntarget: {kind: banana, d: 5}\nh: 0.1\nN: 1\n",
        "algorithm: OLMC\ntarget: {kind: gaussian, d: 5, params: {offset: 1}}\nh: 0.1\nN: 1\n",
        "algorithm: OLMC\ntarget: {kind: gaussian, d: 2}\nh: 0.1\nN: 1\nselection: [0.3, 0.3]\n",
        "algorithm: OLMC\ntarget: {kind: gaussian, d: 2}\nh: -0.1\nN: 1\n",
        "algorithm: OLMC\ntarget: {kind: gaussian, d: 2}\nh: 0.1\nN: 1\nphi: x9\n",
        "algorithm: OLMC\ntarget: {kind: gaussian, d: 2}\nh: 0.1\nN: 1\ninit: {x_std: -1}\n",
        "algorithm: [OLMC, NEWTON]\ntarget: {kind: gaussian, d: 2}\nh: 0.1\nN: 1\n",
        "preset: example9\n",
        "a: [unclosed\n",
    ],
)
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_presets():
    e1 = preset_spec("example1")
    assert e1.d == 50 and e1.N == 200_000 and e1.h_list == (0.32, 0.16, 0.08, 0.04, 0.02)
    assert len(e1.algorithms) == 6 and e1.tau == 50 and e1.init.x_mean == 0.5
    assert preset_spec("example1", "paper").d == 1000
    e3 = preset_spec("example3_gaussian")
    assert e3.d == 100 and e3.target["params"]["count"] == 100 and e3.phi == "first10_squared"
    assert preset_spec("counterexample").gamma == 1.0
    assert preset_spec("example1", N=10).N == 10


@pytest.mark.parametrize("name", ["example1", "example2", "example3_cosine", "counterexample"])
def test_config_round_trip(name):
    spec = preset_spec(name, stride=7, M=11)
    assert parse_config(dump_config(spec)) == spec


@settings(max_examples=40, deadline=None)
@given(
    d=st.integers(1, 50),
    h=st.lists(st.floats(1e-6, 1.0), min_size=1, max_size=4),
    N=st.integers(1, 10**6),
    seed=st.integers(0, 2**63),
    alg=st.sampled_from(["OLMC", "ULMC", "RCD_O", "SVRG_U", "RCAD_U"]),
)
def test_round_trip_property(d, h, N, seed, alg):
    doc = {"algorithm": alg, "target": {"kind": "gaussian", "d": d}, "h_list": h, "N": N, "seed": seed}
    spec = parse_config(yaml.safe_dump(doc))
    assert parse_config(dump_config(spec)) == spec


# -- CSV ------------------------------------------------------------------


def test_empty_rows_give_header_only(tmp_path):
    path = tmp_path / "x.csv"
    emit_csv([], path)
    assert path.read_text() == ",".join(COLUMNS) + "\n"
    assert read_csv(path) == []


def _row(**kw):
    base = dict.fromkeys(COLUMNS[1:])
    base.update(preset="custom", algorithm="OLMC", status="ok", weak_error=0.1 + 0.2, wall_ms=3)
    base.update(kw)
    return base


def test_append_and_schema_checks(tmp_path):
    path = tmp_path / "x.csv"
    emit_csv([_row()], path)
    emit_csv([_row(algorithm="ULMC")], path, append=True)
    rows = read_csv(path)
    assert [r["algorithm"] for r in rows] == ["OLMC", "ULMC"]
    assert float(rows[0]["weak_error"]) == 0.1 + 0.2
    assert rows[0]["tau"] == ""
    bad = tmp_path / "bad.csv"
    bad.write_text("schema,algorithm\n1,OLMC\n")
    with pytest.raises(SchemaError):
        emit_csv([_row()], bad, append=True)
    with pytest.raises(SchemaError):
        read_csv(bad)
    old = tmp_path / "old.csv"
    old.write_text(path.read_text().replace("\n1,", "\n0,", 1))
    with pytest.raises(SchemaError):
        read_csv(old)
    with pytest.raises(ValueError):
        emit_csv([_row(colour="red")], tmp_path / "y.csv")


def test_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        emit_csv([], tmp_path / "missing" / "x.csv")


# -- experiments ---------------------------------------------------------------


def small_spec(**kw):
    doc = {
        "algorithm": ["RCD_O", "SVRG_U", "RCAD_O"],
        "target": {"kind": "gaussian", "d": 6},
        "h_list": [0.08, 0.04],
        "N": 300,
        "M": 60,
        "seed": 5,
        "init": {"x_mean": 0.5},
    }
    doc.update(kw)
    return parse_config(yaml.safe_dump(doc))


def test_rows_one_per_algorithm_and_step():
    rows = run_experiment(small_spec(), workers=1)
    assert [(r["algorithm"], r["h"]) for r in rows] == [
        (a, h) for a in ("RCD_O", "SVRG_U", "RCAD_O") for h in (0.08, 0.04)
    ]
    assert all(r["status"] == "ok" and r["cost_partials"] > 0 for r in rows)
    assert rows[0]["cost_partials"] == 300 * 60


def test_zero_steps_give_initial_bias():
    spec = small_spec(M=0, algorithm="OLMC", h_list=[0.1], N=5000)
    row = run_experiment(spec)[0]
    # x ~ N(0.5, 1): E x_1^2 = 1.25 against the target value 1
    assert abs(row["weak_error"] - 0.25) < 4 * row["mc_stderr"]
    assert row["cost_partials"] == 0


def test_divergent_rows_are_marked():
    rows = run_experiment(small_spec(algorithm="OLMC", h_list=[3.0], M=2000, N=10))
    assert rows[0]["status"] == "diverged" and rows[0]["weak_error"] is None


def test_identical_runs_identical_files(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_csv(run_experiment(small_spec(), workers=1), a)
    emit_csv(run_experiment(small_spec(), workers=2), b)
    ra, rb = read_csv(a), read_csv(b)
    for x, y in zip(ra, rb):
        x.pop("wall_ms"), y.pop("wall_ms")
    assert ra == rb


def test_glm_reference_moments(tmp_path, monkeypatch):
    monkeypatch.setenv("RCDLMC_CACHE", str(tmp_path))
    spec = preset_spec("example3_gaussian")
    p = build_target(spec.target)
    mean, cov = p.posterior_gaussian()
    want = float(np.sum(mean[:10] ** 2) + np.trace(cov[:10, :10]))
    assert reference_moment(spec, p) == pytest.approx(want, rel=1e-12)
    # importance sampling agrees with the closed form on the Gaussian model
    est, se, ess = importance_moment(p, test_function("first10_squared"), draws=100_000)
    assert abs(est - want) < 5 * se and ess > 1000


def test_cosine_reference_moment_is_cached(tmp_path, monkeypatch):
    monkeypatch.setenv("RCDLMC_CACHE", str(tmp_path))
    spec = preset_spec("example3_cosine")
    p = build_target(spec.target)
    first = reference_moment(spec, p)
    assert len(list(tmp_path.iterdir())) == 1
    assert reference_moment(spec, p) == first
    assert math.isfinite(first) and first > 0


def test_bounds_table_lists_scalings():
    text = bounds_table(BoundParams(mu=1.0, lip_grad=1.0, d=1000, lip_hess=1.0, tau=1000), eps=0.1)
    lines = text.splitlines()
    assert len(lines) == 2 + 8
    row = {ln.split()[0]: ln.split() for ln in lines[2:]}
    assert float(row["OLMC"][-2]) == pytest.approx(1e4, rel=1e-2)
    assert float(row["OLMC"][-1]) == pytest.approx(1e7, rel=1e-2)
    assert float(row["RCD_O"][-1]) == pytest.approx(1e8, rel=1e-2)
    assert float(row["ULMC"][-1]) == pytest.approx(1000**1.5 / 0.1, rel=1e-2)


def test_bounds_table_without_hessian():
    text = bounds_table(BoundParams(mu=1.0, lip_grad=2.0, d=10))
    assert "n/a" in text


# -- CLI --------------------------------------------------------------------


def test_cli_run_and_echo(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(MINIMAL + "M: 5\n")
    out = tmp_path / "r.csv"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 1 and rows[0]["status"] == "ok"
    assert (tmp_path / "r.saturation.tsv").exists()
    assert cli.main(["run", "--config", str(cfg), "--out", str(out), "--append"]) == 0
    assert len(read_csv(out)) == 2
    capsys.readouterr()
    assert cli.main(["run", "--config", str(cfg), "--echo"]) == 0
    assert parse_config(capsys.readouterr().out) == parse_config(MINIMAL + "M: 5\n")


def test_cli_reports_bad_config(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("algorithm: OLMC\n")
    assert cli.main(["run", "--config", str(cfg)]) == 2
    assert "missing required keys" in capsys.readouterr().err
    assert cli.main(["run", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_cli_sweep(tmp_path):
    out = tmp_path / "s.csv"
    argv = ["sweep", "--preset", "counterexample", "--N", "50", "--M", "20", "--out", str(out)]
    assert cli.main(argv) == 0
    rows = read_csv(out)
    assert [r["algorithm"] for r in rows] == ["RCD_U"] and rows[0]["N"] == "50"


def test_cli_bounds(capsys):
    assert cli.main(["bounds", "--d", "100", "--H", "1", "--tau", "100"]) == 0
    out = capsys.readouterr().out
    assert "RCAD_U" in out and "h_cap" in out


def test_relaxation_rate():
    from rcdlmc.harness.experiment import relaxation_rate

    assert relaxation_rate(2.0) == 2.0
    assert relaxation_rate(1.0, 1.0) == 1.0
    # slow root of s^2 + 2s + g
    for g in (1e-6, 1e-3, 0.5):
        s = -1 + math.sqrt(1 - g)
        assert s * s + 2 * s + g == pytest.approx(0.0, abs=1e-15)
        assert relaxation_rate(1.0, g) == pytest.approx(-s, rel=1e-12)


def test_underdamped_horizon_follows_relaxation_rate():
    spec = small_spec(algorithm=["ULMC", "OLMC"], h_list=[0.1], M=None, N=10, gamma=0.19)
    rows = run_experiment(spec)
    assert rows[1]["M"] == 200
    assert rows[0]["M"] == math.ceil(20 / (0.1 * (1 - math.sqrt(0.81))) - 1e-9)
