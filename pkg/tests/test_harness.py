from __future__ import annotations

import json

import numpy as np
import pytest

from jcasmeta import harness
from jcasmeta.cli import main
from jcasmeta.harness import ConfigError, config_from_dict, parse_config, read_csv
from jcasmeta.montecarlo import EstimatorMode


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return p


def test_empty_file_gives_defaults(tmp_path):
    cfg = parse_config(write(tmp_path, ""))
    p = cfg.params
    assert (p.lambda_b, p.lambda_u, p.lambda_s) == (1e-4, 1e-3, 1e-3)
    assert p.channel.alpha_los == 2.0 and p.channel.alpha_nlos == 3.2
    assert p.channel.beta == pytest.approx(1 / 140)
    assert cfg.thresholds[0].theta_c_db == pytest.approx(-10.0)
    assert cfg.sim.n_realizations == 100 and cfg.sim.n_fading_draws == 1000
    np.testing.assert_allclose(cfg.x_grid, np.arange(1, 100) / 100)


def test_db_gain_conversion():
    assert config_from_dict({"k_los_db": -75.96}).params.channel.k_los == pytest.approx(2.5351e-8, rel=1e-4)


@pytest.mark.parametrize(
    "raw, key",
    [
        ({"lambda_b": -1}, "lambda_b"),
        ({"lamda_b": 1e-4}, "lamda_b"),
        ({"x_grid": [0.5, 0.4]}, "x_grid"),
        ({"x_grid": [0.0, 0.4]}, "x_grid"),
        ({"n_realizations": 0}, "n_realizations"),
        ({"estimator_mode": "exact"}, "estimator_mode"),
        ({"quadrature": {"rel_tol": -1}}, "quadrature"),
        ({"quadrature": {"reltol": 1}}, "quadrature.reltol"),
        ({"beta": "fast"}, "beta"),
        ({"theta_c_db": [1, 2], "theta_s_db": [1, 2, 3]}, "theta_s_db"),
    ],
)
def test_errors_name_the_key(raw, key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        config_from_dict(raw)


def test_threshold_lists_broadcast():
    cfg = config_from_dict({"theta_s_db": [-15, -10, -5], "theta_c_db": 0})
    assert [round(t.theta_s_db, 9) for t in cfg.thresholds] == [-15, -10, -5]
    assert all(round(t.theta_c_db, 9) == 0 for t in cfg.thresholds)
    assert config_from_dict({"estimator_mode": "fading_draws"}).sim.estimator_mode is EstimatorMode.FADING_DRAWS


def test_coverage_csv_schema_and_identity(tmp_path):
    cfg = config_from_dict({"outputs": str(tmp_path), "lambda_u": 3e-3})
    files, ok = harness.cmd_coverage(cfg, [-10.0, 0.0, 10.0])
    assert ok
    rows = read_csv(files[0])
    assert list(rows[0]) == harness.COVERAGE_COLUMNS
    for r in rows:
        c, s, j = float(r["m1_comm"]), float(r["m1_sens"]), float(r["m1_jcas"])
        assert j == pytest.approx(0.75 * c + 0.25 * s, rel=1e-11)
    comm = [float(r["m1_comm"]) for r in rows]
    assert comm == sorted(comm, reverse=True)


def test_simulate_is_deterministic(tmp_path):
    raw = {"n_realizations": 15, "base_seed": 99, "x_grid": [0.1, 0.5, 0.9]}
    outs = []
    for d in ("a", "b"):
        cfg = config_from_dict({**raw, "outputs": str(tmp_path / d)})
        files, ok = harness.cmd_simulate(cfg, threads=2 if d == "b" else 1)
        assert ok
        outs.append([f.read_bytes() for f in files])
    assert outs[0] == outs[1]
    rows = read_csv(tmp_path / "a" / "meta_empirical.csv")
    assert list(rows[0]) == harness.EMPIRICAL_COLUMNS
    assert {r["n_realizations"] for r in rows} == {"15"}
    for fam in ("comm", "sensing", "jcas"):
        f = [float(r["fraction"]) for r in rows if r["family"] == fam]
        assert f == sorted(f, reverse=True)
    samples = read_csv(tmp_path / "a" / "samples.csv")
    assert list(samples[0]) == harness.SAMPLES_COLUMNS and len(samples) == 15


def test_twelve_significant_digits(tmp_path):
    path = harness.write_csv(tmp_path / "t.csv", ["v"], [{"v": 1 / 3}])
    assert path.read_text().splitlines()[1] == "0.333333333333"


def test_compare_halves_run_independently(tmp_path):
    raw = {"families": ["sensing"], "x_grid": [0.05, 0.2], "n_realizations": 10}
    cfg = config_from_dict({**raw, "outputs": str(tmp_path / "sim")})
    reports, files, ok = harness.cmd_compare(cfg, analytic=False)
    assert {f.name for f in files} == {"meta_empirical.csv", "samples.csv", "report.json"}
    cfg = config_from_dict({**raw, "outputs": str(tmp_path / "ana")})
    reports, files, ok = harness.cmd_compare(cfg, simulate=False)
    assert ok and {f.name for f in files} == {"meta_analytic.csv", "report.json"}
    rows = read_csv(files[0])
    assert list(rows[0]) == harness.META_COLUMNS
    report = json.loads((tmp_path / "ana" / "report.json").read_text())
    assert report["comparisons"][0]["family"] == "sensing"


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["meta", "--config", str(write(tmp_path, {"lambda_b": -1}))]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 1
    bad_quad = {"quadrature": {"max_subdivisions": 1}, "orders": [1.0], "families": ["sensing"], "outputs": str(tmp_path / "m")}
    assert main(["moments", "--config", str(write(tmp_path, bad_quad, "q.json"))]) == 2
    ok = {"orders": [0.0, 1.0], "families": ["comm"], "outputs": str(tmp_path / "ok")}
    assert main(["moments", "--config", str(write(tmp_path, ok, "ok.json"))]) == 0
    rows = read_csv(tmp_path / "ok" / "moments.csv")
    assert list(rows[0]) == harness.MOMENT_COLUMNS
    assert float(rows[0]["value_re"]) == pytest.approx(1.0, abs=1e-9)


def test_cli_compare_failure_exit_code(tmp_path):
    # one fading draw per realization makes every conditional coverage 0 or 1
    raw = {"families": ["comm"], "x_grid": [0.5, 0.9, 0.99], "n_realizations": 200,
           "estimator_mode": "fading_draws", "n_fading_draws": 1}
    code = main(["compare", "--config", str(write(tmp_path, raw)), "--out", str(tmp_path / "c"), "--seed", "5"])
    assert code == 3
    report = json.loads((tmp_path / "c" / "report.json").read_text())
    assert report["pass"] is False
