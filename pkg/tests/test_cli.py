import json

import numpy as np
import pytest

from infhs.cli import build_parser, load_dataset, main, parse_scenarios, read_matrix
from infhs.errors import BadFlag
from infhs.model import STATE_FIELDS


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def sim(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert run("simulate", "--n", 50, "--p", 500, "--p0", 30, "--scenario", "main_G3",
               "--seed", 1, "--out", out) == 0
    return out


def test_simulate_files(sim):
    assert read_matrix(sim / "y.csv").shape == (50, 1)
    X = read_matrix(sim / "X.csv")
    assert X.shape == (50, 501) and np.all(X[:, 0] == 1)
    assert read_matrix(sim / "Z_1.csv").shape == (500, 1)
    truth = json.loads((sim / "truth.json").read_text())
    assert truth["support"] == list(range(1, 31)) and len(truth["beta"]) == 501
    assert not (sim / "Z_2.csv").exists()


def test_simulate_rerun_is_byte_identical(sim, tmp_path):
    run("simulate", "--n", 50, "--p", 500, "--p0", 30, "--scenario", "main_G3",
        "--seed", 1, "--out", tmp_path)
    for f in ("y.csv", "X.csv", "Z_1.csv", "truth.json"):
        assert (tmp_path / f).read_bytes() == (sim / f).read_bytes()


def test_simulate_bad_flags(tmp_path, capsys):
    assert run("simulate", "--n", 50, "--p", 500, "--p0", 600, "--out", tmp_path) == 2
    assert "BadFlag" in capsys.readouterr().err
    assert run("simulate", "--n", 50, "--p", 50, "--p0", 3, "--scenario", "G9", "--out", tmp_path) == 2
    with pytest.raises(SystemExit) as e:
        run("simulate", "--n", "abc", "--p", 5, "--p0", 1, "--out", tmp_path)
    assert e.value.code == 2


def test_fit_vb_round_trip(sim, tmp_path):
    assert run("fit", "--data", sim, "--out", tmp_path, "--engine", "vb", "--max-iter", 50,
               "--no-strict") == 0
    fit = json.loads((tmp_path / "fit.json").read_text())
    assert len(fit["beta_mean"]) == 501 and len(fit["inclusion"]) == 500
    assert fit["engine"] == "vb" and (tmp_path / "elbo.csv").exists()


@pytest.fixture(scope="module")
def small(tmp_path_factory):
    out = tmp_path_factory.mktemp("small")
    assert run("simulate", "--n", 40, "--p", 40, "--p0", 25, "--scenario", "appendix_G2",
               "--seed", 3, "--out", out) == 0
    return out


def test_fit_gibbs_draws(small, tmp_path):
    assert run("fit", "--data", small, "--out", tmp_path, "--engine", "gibbs", "--B", 60,
               "--bn", 20, "--seed", 5, "--save-draws") == 0
    fit = json.loads((tmp_path / "fit.json").read_text())
    assert fit["n_draws"] == 40
    D = read_matrix(tmp_path / "draws.csv")
    # beta(41) sigma tau zeta lambda0 psi0 lam(40) phi(40) gamma(2) kappa(1)
    assert D.shape == (40, 41 + 5 + 40 + 40 + 2 + 1)
    assert STATE_FIELDS[0] == "beta"


def test_fit_paper_run_lengths(small, tmp_path):
    assert run("fit", "--data", small, "--out", tmp_path, "--engine", "gibbs",
               "--B", 5000, "--bn", 2500) == 0
    assert json.loads((tmp_path / "fit.json").read_text())["n_draws"] == 2500


def test_fit_errors(small, tmp_path, capsys):
    assert run("fit", "--data", small, "--out", tmp_path, "--engine", "gibbs", "--task", "probit") == 2
    assert "UnsupportedCombination" in capsys.readouterr().err
    assert run("fit", "--data", tmp_path / "missing", "--out", tmp_path) == 4
    bad = tmp_path / "bad"
    bad.mkdir()
    (bad / "y.csv").write_text("1\nx\n")
    (bad / "X.csv").write_text("1,2\n1,3\n")
    assert run("fit", "--data", bad, "--out", tmp_path) == 2
    # continuous y with the probit task
    assert run("fit", "--data", small, "--out", tmp_path, "--task", "probit") == 2
    assert run("fit", "--data", small, "--out", tmp_path, "--B", 10, "--bn", 10) == 2


def test_config_file_and_override(small, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"B": 30, "bn": 10, "q": 5.0}))
    run("fit", "--data", small, "--out", tmp_path / "a", "--engine", "gibbs", "--config", cfg,
        "--bn", 20)
    assert json.loads((tmp_path / "a" / "fit.json").read_text())["n_draws"] == 10
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run("fit", "--data", small, "--out", tmp_path, "--config", cfg) == 2
    cfg.write_text("{not json")
    assert run("fit", "--data", small, "--out", tmp_path, "--config", cfg) == 2


def test_numerical_failure_exit_code(tmp_path, capsys):
    # the bound with the truncation term falls on this instance; strict mode aborts
    run("simulate", "--n", 30, "--p", 8, "--p0", 2, "--scenario", "appendix_G3", "--seed", 500,
        "--out", tmp_path / "d")
    args = ["fit", "--data", tmp_path / "d", "--out", tmp_path, "--eps", 1e-10, "--max-iter", 300]
    assert run(*args, "--truncation-term") == 3
    assert "ElboDecrease" in capsys.readouterr().err
    assert run(*args) == 0


def test_select_threshold_and_dss(small, tmp_path):
    run("fit", "--data", small, "--out", tmp_path, "--max-iter", 100, "--no-strict")
    assert run("select", "--fit", tmp_path / "fit.json", "--out", tmp_path / "t") == 0
    sel = json.loads((tmp_path / "t" / "selection.json").read_text())
    fit = json.loads((tmp_path / "fit.json").read_text())
    assert sel["selected"] == [j + 1 for j, s in enumerate(fit["inclusion"]) if s > 0.5]
    assert run("select", "--fit", tmp_path / "fit.json", "--data", small, "--out", tmp_path / "d",
               "--method", "dss", "--grid", 0.05) == 0
    assert json.loads((tmp_path / "d" / "selection.json").read_text())["dss_lambda"] == 0.05
    assert run("select", "--fit", tmp_path / "none.json", "--out", tmp_path) == 4
    assert run("select", "--fit", tmp_path / "fit.json", "--out", tmp_path, "--method", "dss") == 2


def test_scenario_ranges():
    assert parse_scenarios("main_G0..main_G4") == [f"main_G{k}" for k in range(5)]
    assert parse_scenarios("appendix_G1, main_G2") == ["appendix_G1", "main_G2"]
    for bad in ("main_G3..main_G1", "main_G0..appendix_G2", "", "nope"):
        with pytest.raises(BadFlag):
            parse_scenarios(bad)


def test_benchmark_shapes_and_replicates(tmp_path, monkeypatch):
    monkeypatch.setenv("INFHS_THREADS", "1")
    assert run("benchmark", "--scenarios", "main_G0..main_G4", "--n", 20, "--p", 120, "--p0", 30,
               "--replicates", 5, "--max-iter", 5, "--no-strict", "--out", tmp_path) == 0
    lines = (tmp_path / "auc_by_scenario.csv").read_text().splitlines()
    assert lines[0] == "scenario,replicate,auc_vb" and len(lines) == 26
    assert len((tmp_path / "sd_comparison.csv").read_text().splitlines()) == 26
    assert run("benchmark", "--replicates", 0, "--out", tmp_path) == 2
    assert run("benchmark", "--engines", "vb,mcmc", "--out", tmp_path) == 2
    monkeypatch.setenv("INFHS_THREADS", "zero")
    assert run("benchmark", "--n", 20, "--p", 40, "--replicates", 1, "--out", tmp_path) == 2


def test_benchmark_both_engines(tmp_path, monkeypatch):
    monkeypatch.setenv("INFHS_THREADS", "2")
    assert run("benchmark", "--scenarios", "appendix_G0,appendix_G3", "--n", 20, "--p", 30,
               "--p0", 10, "--replicates", 2, "--engines", "vb,gibbs", "--B", 40, "--bn", 20,
               "--max-iter", 20, "--no-strict", "--out", tmp_path) == 0
    mse = (tmp_path / "gs_vs_vb_mse.csv").read_text().splitlines()
    assert mse[0] == "scenario,replicate,mse" and len(mse) == 5
    assert (tmp_path / "sd_comparison.csv").read_text().splitlines()[0] == \
        "scenario,replicate,mean_sd_vb,mean_sd_gibbs"


def test_parser_lists_commands():
    text = build_parser().format_help()
    for c in ("simulate", "fit", "select", "benchmark"):
        assert c in text


def test_load_dataset_shapes(small):
    d = load_dataset(small)
    assert (d.n, d.p, d.M) == (40, 40, 2)
