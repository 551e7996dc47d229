import filecmp

import numpy as np
import pytest
import yaml

from patient_exchange import cli, config, reports


def _run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = cli.main([*argv, "--out", str(out), "--no-plots"])
    return code, out


def test_defaults_build_reference_market():
    cfg = config.load()
    m = config.market_from_dict(cfg)
    assert m.n_ticks == 50 and m.lam == 3.0 and m.mu == 12.0
    assert m.patience.delta_bar == 160.0


def test_override_and_unknown_key():
    cfg = config.load(overrides=["market.lambda=2.5", "solver.tol=1e-9"])
    assert cfg["market"]["lambda"] == 2.5
    assert config.market_from_dict(cfg).lam == 2.5
    with pytest.raises(config.ConfigError):
        config.load(overrides=["market.nope=1"])
    with pytest.raises(config.ConfigError):
        config.load(overrides=["market.lambda"])


def test_yaml_file_merges(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(yaml.safe_dump({"market": {"n_ticks": 3, "demand": {"beta": [1.0, 0.5, 0.25]}}}))
    m = config.market_from_dict(config.load(p))
    assert np.array_equal(m.beta, [1.0, 0.5, 0.25])
    bad = tmp_path / "bad.yaml"
    bad.write_text("market: {bogus: 1}\n")
    with pytest.raises(config.ConfigError):
        config.load(bad)


def test_hash_changes_with_config():
    a = config.config_hash(config.load())
    assert a == config.config_hash(config.load())
    assert a != config.config_hash(config.load(overrides=["seed=1"]))


def test_csv_roundtrip(tmp_path):
    p = reports.write_columns(tmp_path / "x.csv", {"a": np.array([0.1, np.inf, 1 / 3]), "k": np.array([1, 2, 3])}, "c")
    text = p.read_text().splitlines()
    assert text[0] == "# c" and text[1] == "a,k"
    assert text[3].startswith("inf,")
    back = reports.read_csv(p)
    assert back["a"][2] == 1 / 3 and np.isinf(back["a"][1])


def test_read_alpha_plain_list(tmp_path):
    p = tmp_path / "a.txt"
    p.write_text("0.25 0.25\n0.5\n")
    assert np.array_equal(reports.read_alpha(p), [0.25, 0.25, 0.5])


def test_analyze_single_tick(tmp_path):
    code, out = _run(tmp_path, "analyze", "--set", "market.n_ticks=1", "--set", "market.demand.beta=[1]", "--alpha", "1")
    assert code == 0
    cols = reports.read_csv(out / "analytics.csv")
    assert cols["exec_time"][0] == pytest.approx(1 / 9, abs=1e-15)
    assert (out / "analytics.csv").read_text().startswith("# config_hash=")


def test_analyze_unstable_writes_inf(tmp_path):
    code, out = _run(
        tmp_path, "analyze", "--set", "market.n_ticks=2", "--set", "market.demand.beta=[1,1]",
        "--set", "market.lambda=30", "--alpha", "1,0",
    )
    assert code == 0
    assert "inf" in (out / "analytics.csv").read_text().splitlines()[2].split(",")[3]


def test_analyze_bad_config_exit_1(tmp_path, capsys):
    code, _ = _run(tmp_path, "analyze", "--set", "market.lambda=-1", "--alpha", ",".join(["0.02"] * 50))
    assert code == 1
    assert "lambda" in capsys.readouterr().err
    code, _ = _run(tmp_path, "analyze")
    assert code == 1


def test_equilibrate_roundtrip_and_determinism(tmp_path):
    argv = ["equilibrate", "--set", "solver.n_restarts=3"]
    code, out = _run(tmp_path, *argv, name="a")
    assert code == 0
    code, out2 = _run(tmp_path, *argv, name="b")
    for f in ("equilibrium.csv", "partition.csv", "summary.txt"):
        assert filecmp.cmp(out / f, out2 / f, shallow=False)
    code, an = _run(tmp_path, "analyze", "--alpha", str(out / "equilibrium.csv"), name="c")
    assert code == 0
    eq = reports.read_csv(out / "equilibrium.csv")
    got = reports.read_csv(an / "analytics.csv")
    for col in ("exec_time", "inventory", "tail"):
        assert np.array_equal(eq[col], got[col])
    summary = (out / "summary.txt").read_text()
    assert "status: converged" in summary and "alpha_mean: 12.7" in summary


def test_equilibrate_single_tick(tmp_path):
    code, out = _run(tmp_path, "equilibrate", "--set", "market.n_ticks=1", "--set", "market.demand.beta=[1]")
    assert code == 0
    assert reports.read_csv(out / "equilibrium.csv")["alpha_star"][0] == 1.0


def test_equilibrate_failure_exit_2(tmp_path):
    code, out = _run(
        tmp_path, "equilibrate", "--set", "solver.tol=1e-300", "--set", "solver.max_iter=10", "--set", "solver.n_restarts=1"
    )
    assert code == 2
    assert "FAILED" in (out / "equilibrium.csv").read_text().splitlines()[0]
    assert "status: FAILED" in (out / "summary.txt").read_text()


def test_simulate_mm1(tmp_path):
    code, out = _run(
        tmp_path, "simulate", "--set", "market.n_ticks=1", "--set", "market.demand.beta=[1]",
        "--set", "simulation.horizon=200000", "--alpha-from", "1",
    )
    assert code == 0
    comp = reports.read_csv(out / "comparison.csv")
    assert comp["status"][0] == "pass"
    assert (out / "sim.csv").exists()


def test_simulate_zero_horizon_exit_1(tmp_path):
    code, _ = _run(tmp_path, "simulate", "--set", "simulation.horizon=0", "--alpha-from", ",".join(["0.02"] * 50))
    assert code == 1


def test_inelastic_outputs(tmp_path):
    code, out = _run(tmp_path, "inelastic", "--set", "inelastic.n_points=401")
    assert code == 0
    curves = reports.read_csv(out / "curves.csv")
    assert list(curves) == ["p", "F", "Q", "D"]
    assert curves["F"][0] == 0.0
    check = (out / "ode_check.txt").read_text()
    assert "support_end: 13.33333" in check
    cond = reports.read_csv(out / "conditional.csv")
    assert set(cond["s"]) == {0.0, 1.0, 2.0, 5.0}


def test_inelastic_power_tail_slope(tmp_path):
    code, out = _run(tmp_path, "inelastic", "--set", "inelastic.rho=1", "--set", "inelastic.gamma=0.75",
                     "--set", "inelastic.n_points=201")
    assert code == 0
    line = [ln for ln in (out / "ode_check.txt").read_text().splitlines() if ln.startswith("tail_slope")][0]
    assert float(line.split(":")[1]) == pytest.approx(-1.5, abs=0.01)


def test_inelastic_bad_gamma_exit_1(tmp_path):
    code, _ = _run(tmp_path, "inelastic", "--set", "inelastic.gamma=0.4")
    assert code == 1


def test_two_price(tmp_path, capsys):
    code, out = _run(tmp_path, "two-price")
    assert code == 0
    text = (out / "two_price.txt").read_text()
    assert "alpha2: 0.54858377035486" in text
    code, _ = _run(tmp_path, "two-price", "--set", "two_price.p2=0.5")
    assert code == 1


def test_plots_written(tmp_path):
    out = tmp_path / "plots"
    assert cli.main(["inelastic", "--out", str(out), "--set", "inelastic.rho=1", "--set", "inelastic.n_points=101"]) == 0
    for f in ("curves.png", "conditional.png", "tail_loglog.png"):
        assert (out / f).stat().st_size > 1000
    out2 = tmp_path / "plots2"
    cli.main(["inelastic", "--out", str(out2), "--set", "inelastic.rho=1", "--set", "inelastic.n_points=101"])
    assert filecmp.cmp(out / "curves.png", out2 / "curves.png", shallow=False)


def test_unknown_command_exit_1():
    assert cli.main(["bogus"]) == 1
