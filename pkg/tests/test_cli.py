import json

import numpy as np
import pytest
from click.testing import CliRunner

from commglasso import io
from commglasso.cli import main

runner = CliRunner()


def _write_config(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def _simulate(tmp_path, n=160, seed=3, family="grouped_latent"):
    out = tmp_path / "sim"
    cfg = _write_config(
        tmp_path / "sim.json",
        {"sim": {"family": family, "n": n, "seed": seed}, "out_dir": str(out)},
    )
    result = runner.invoke(main, ["simulate", "-c", cfg])
    assert result.exit_code == 0, result.output
    return out


def test_simulate_writes_files_and_shapes(tmp_path):
    out = _simulate(tmp_path, n=120)
    X = io.matrix_from_csv(out / "X.csv")
    C = io.matrix_from_csv(out / "C.csv")
    assert X.shape == (120, 45) and C.shape == (120, 2)
    truth = io.read_json(out / "truth.json")
    assert truth["sign_mode"] == "minus"
    assert truth["rank"] == 3
    assert io.matrix_from_obj(truth["L_star"]).shape == (45, 45)


def test_simulate_deterministic(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    out1 = _simulate(tmp_path / "a", n=80, seed=11)
    out2 = _simulate(tmp_path / "b", n=80, seed=11)
    assert (out1 / "X.csv").read_bytes() == (out2 / "X.csv").read_bytes()
    assert (out1 / "truth.json").read_bytes() == (out2 / "truth.json").read_bytes()


def test_simulate_invalid_scenario_exits_2(tmp_path):
    cfg = _write_config(
        tmp_path / "bad.json",
        {"sim": {"family": "grouped_latent", "n": 50, "scenario": 9}},
    )
    result = runner.invoke(main, ["simulate", "-c", cfg])
    assert result.exit_code == 2
    err = json.loads(result.stderr.strip().splitlines()[-1])
    assert err["error"] == "ConfigError"


def test_simulate_unknown_key_exits_2(tmp_path):
    cfg = _write_config(tmp_path / "bad.json", {"sim": {"family": "grouped_latent", "n": 50}, "typo": 1})
    result = runner.invoke(main, ["simulate", "-c", cfg])
    assert result.exit_code == 2


def test_simulate_set_override(tmp_path):
    out = tmp_path / "o"
    cfg = _write_config(
        tmp_path / "sim.json",
        {"sim": {"family": "latent_community", "n": 50, "seed": 1}, "out_dir": str(out)},
    )
    result = runner.invoke(main, ["simulate", "-c", cfg, "--set", "sim.n=60"])
    assert result.exit_code == 0, result.output
    assert io.matrix_from_csv(out / "X.csv").shape == (60, 45)


FIT_SOLVER = {"eps": 1e-8, "max_iter": 3000}


def test_fit_fixed_penalties_deterministic(tmp_path):
    out = _simulate(tmp_path, n=200, seed=5)
    res_dir = tmp_path / "fit"
    cfg = _write_config(
        tmp_path / "fit.json",
        {
            "x_csv": str(out / "X.csv"),
            "c_csv": str(out / "C.csv"),
            "method": "proposed",
            "sign_mode": "minus",
            "fixed": {"gamma": 0.05, "delta": 0.1, "tau": 1e-4},
            "solver": FIT_SOLVER,
            "out_dir": str(res_dir),
        },
    )
    result = runner.invoke(main, ["fit", "-c", cfg])
    assert result.exit_code == 0, result.output
    first = (res_dir / "results.json").read_bytes()
    results = json.loads(first)
    assert results["method"] == "proposed"
    assert results["xi"] == {"gamma": 0.05, "delta": 0.1, "tau": 1e-4}
    assert io.matrix_from_obj(results["S_hat"]).shape == (45, 45)
    assert io.matrix_from_obj(results["B_hat"]).shape == (2, 45)
    assert results["diagnostics"]["converged"] is True

    result = runner.invoke(main, ["fit", "-c", cfg])
    assert result.exit_code == 0
    assert (res_dir / "results.json").read_bytes() == first


@pytest.mark.parametrize("method", ["lvggm", "ht-lvggm", "nonapmle"])
def test_fit_method_selection(tmp_path, method):
    out = _simulate(tmp_path, n=150, seed=2)
    res_dir = tmp_path / ("fit_" + method)
    cfg = _write_config(
        tmp_path / f"fit_{method}.json",
        {
            "x_csv": str(out / "X.csv"),
            "c_csv": str(out / "C.csv"),
            "method": method,
            "sign_mode": "minus",
            "fixed": {"gamma": 0.05, "delta": 0.1, "tau": 1e-4},
            "solver": FIT_SOLVER,
            "out_dir": str(res_dir),
        },
    )
    result = runner.invoke(main, ["fit", "-c", cfg])
    assert result.exit_code == 0, result.output
    results = json.loads((res_dir / "results.json").read_text())
    assert results["method"] == method
    if method == "ht-lvggm":
        assert results["ht_threshold"] == pytest.approx(1 / np.sqrt(150))


def test_fit_cv_grid_writes_cv_table(tmp_path):
    out = _simulate(tmp_path, n=150, seed=8)
    res_dir = tmp_path / "fitcv"
    cfg = _write_config(
        tmp_path / "fitcv.json",
        {
            "x_csv": str(out / "X.csv"),
            "c_csv": str(out / "C.csv"),
            "method": "nonapmle",
            "sign_mode": "minus",
            "grid": {"gammas": [0.05], "deltas": [0.1], "taus": [1e-4], "folds": 2, "seed": 0},
            "solver": FIT_SOLVER,
            "out_dir": str(res_dir),
        },
    )
    result = runner.invoke(main, ["fit", "-c", cfg])
    assert result.exit_code == 0, result.output
    lines = (res_dir / "cv_table.csv").read_text().strip().splitlines()
    assert lines[0] == "gamma,delta,tau,fold,score"
    assert len(lines) == 4  # 2 folds + aggregate + header


def test_fit_missing_covariates_exits_2(tmp_path):
    out = _simulate(tmp_path, n=100, seed=1)
    cfg = _write_config(
        tmp_path / "fit.json",
        {
            "x_csv": str(out / "X.csv"),
            "c_csv": str(out / "nope.csv"),
            "fixed": {"gamma": 0.05, "delta": 0.1},
            "out_dir": str(tmp_path),
        },
    )
    result = runner.invoke(main, ["fit", "-c", cfg])
    assert result.exit_code in (1, 2)
    err = json.loads(result.stderr.strip().splitlines()[-1])
    assert "error" in err


def test_fit_with_clustering_labels(tmp_path):
    out = _simulate(tmp_path, n=300, seed=4)
    res_dir = tmp_path / "fitc"
    cfg = _write_config(
        tmp_path / "fitc.json",
        {
            "x_csv": str(out / "X.csv"),
            "c_csv": str(out / "C.csv"),
            "method": "proposed",
            "sign_mode": "minus",
            "fixed": {"gamma": 0.04, "delta": 0.1, "tau": 1e-4},
            "solver": FIT_SOLVER,
            "cluster": {"m": 3, "mode": "corabs", "seed": 0},
            "out_dir": str(res_dir),
        },
    )
    result = runner.invoke(main, ["fit", "-c", cfg])
    assert result.exit_code == 0, result.output
    results = json.loads((res_dir / "results.json").read_text())
    labels = results["labels"]
    assert len(labels) == 45
    assert set(labels) <= {0, 1, 2, 3}


def test_cluster_command_from_csv_with_zero_rows(tmp_path):
    rng = np.random.default_rng(0)
    u = 1 + 0.1 * rng.normal(size=4)
    v = 1 + 0.1 * rng.normal(size=3)
    L = np.zeros((8, 8))
    L[:4, :4] = 5 * np.outer(u, u)
    L[5:, 5:] = 2 * np.outer(v, v)  # node 4 stays an exact zero row
    io.matrix_to_csv(tmp_path / "L.csv", L)
    out = tmp_path / "cl"
    cfg = _write_config(
        tmp_path / "cl.json",
        {"l_csv": str(tmp_path / "L.csv"), "cluster": {"m": 2, "mode": "rows", "seed": 0}, "out_dir": str(out)},
    )
    result = runner.invoke(main, ["cluster", "-c", cfg])
    assert result.exit_code == 0, result.output
    labels = json.loads((out / "labels.json").read_text())
    assert labels["labels"][4] == 0
    assert 4 not in labels["kept_nodes"]
    rows = (out / "labels.csv").read_text().strip().splitlines()
    assert rows[0] == "node_id,label"
    assert rows[5] == "4,0"
    first = (out / "labels.csv").read_bytes()
    assert runner.invoke(main, ["cluster", "-c", cfg]).exit_code == 0
    assert (out / "labels.csv").read_bytes() == first


def test_cluster_command_from_results_json(tmp_path):
    out = tmp_path / "o"
    out.mkdir()
    rng = np.random.default_rng(1)
    u = 1 + 0.2 * np.abs(rng.normal(size=5))
    L = np.outer(u, u)
    io.write_json(out / "results.json", {"L_hat": io.matrix_to_obj(L)})
    cfg = _write_config(
        tmp_path / "cl.json",
        {"results_json": str(out / "results.json"), "cluster": {"m": 1}, "out_dir": str(out)},
    )
    result = runner.invoke(main, ["cluster", "-c", cfg])
    assert result.exit_code == 0, result.output


def _experiment_config(tmp_path, out, kind="structure"):
    cfg = {
        "kind": kind,
        "sim": {"family": "grouped_latent", "n": 150},
        "methods": ["proposed", "lvggm"],
        "replications": 2,
        "jobs": 1,
        "seed": 17,
        "grid": {"gammas": [0.05], "deltas": [0.1], "taus": [1e-4], "folds": 2},
        "init_grid": {"gammas": [0.05], "deltas": [0.1], "folds": 2},
        "solver": {"eps": 1e-7, "max_iter": 2000},
        "out_dir": str(out),
    }
    if kind == "clustering":
        cfg["modes"] = ["rows", "corabs"]
        cfg["cluster"] = {"m": 3, "restarts": 3}
    return _write_config(tmp_path / f"exp_{kind}.json", cfg)


def test_experiment_structure_outputs(tmp_path):
    out = tmp_path / "exp"
    cfg = _experiment_config(tmp_path, out)
    result = runner.invoke(main, ["experiment", "-c", cfg])
    assert result.exit_code == 0, result.output
    reps = (out / "replications.csv").read_text().strip().splitlines()
    assert reps[0].startswith("rep,method,tr_l,tp_l,fp_l,tp_s,fp_s")
    assert len(reps) == 1 + 2 * 2  # 2 reps x 2 methods
    table = (out / "tables.csv").read_text().strip().splitlines()
    assert table[0] == "Sample Size,Criteria,proposed,lvggm"
    assert len(table) == 6  # 5 criteria
    assert "n = 150" in table[1]


def test_experiment_clustering_outputs_and_determinism(tmp_path):
    out1 = tmp_path / "e1"
    (tmp_path / "c1").mkdir()
    cfg1 = _experiment_config(tmp_path / "c1", out1, kind="clustering")
    result = runner.invoke(main, ["experiment", "-c", cfg1])
    assert result.exit_code == 0, result.output
    table = (out1 / "tables.csv").read_text().strip().splitlines()
    assert table[0] == "Clustering based,Setting,proposed,lvggm"
    assert len(table) == 3  # rows + corabs

    out2 = tmp_path / "e2"
    (tmp_path / "c2").mkdir()
    cfg2 = _experiment_config(tmp_path / "c2", out2, kind="clustering")
    result = runner.invoke(main, ["experiment", "-c", cfg2])
    assert result.exit_code == 0
    assert (out1 / "tables.csv").read_bytes() == (out2 / "tables.csv").read_bytes()
    assert (out1 / "replications.csv").read_bytes() == (out2 / "replications.csv").read_bytes()


def test_experiment_rejects_unknown_method(tmp_path):
    cfg = _write_config(
        tmp_path / "exp.json",
        {
            "kind": "structure",
            "sim": {"family": "grouped_latent", "n": 100},
            "methods": ["madeup"],
            "grid": {"gammas": [0.05], "deltas": [0.1]},
        },
    )
    result = runner.invoke(main, ["experiment", "-c", cfg])
    assert result.exit_code == 2


def test_experiment_fails_when_too_many_replications_fail(tmp_path):
    # every grid point infeasible (delta=0, one sweep, minus mode) -> every
    # replication records a failure -> above the 20% budget -> exit 1
    cfg = _write_config(
        tmp_path / "exp.json",
        {
            "kind": "structure",
            "sim": {"family": "grouped_latent", "n": 100},
            "methods": ["nonapmle"],
            "replications": 2,
            "seed": 0,
            "grid": {"gammas": [0.01], "deltas": [0.0], "taus": [0.0], "folds": 2},
            "solver": {"eps": 1e-16, "max_iter": 1},
            "out_dir": str(tmp_path / "out"),
        },
    )
    result = runner.invoke(main, ["experiment", "-c", cfg])
    assert result.exit_code == 1
    err = json.loads(result.stderr.strip().splitlines()[-1])
    assert "replications failed" in err["message"]


def test_prices_to_returns(tmp_path):
    prices = np.array([[100.0, 50.0], [110.0, 49.0], [105.0, 51.0], [120.0, 52.0], [118.0, 56.0]])
    io.matrix_to_csv(tmp_path / "p.csv", prices)
    result = runner.invoke(
        main,
        ["prices-to-returns", str(tmp_path / "p.csv"), str(tmp_path / "r.csv"), "--alternate-days"],
    )
    assert result.exit_code == 0, result.output
    returns = io.matrix_from_csv(tmp_path / "r.csv")
    # alternating days keeps rows 0, 2, 4 -> two return rows
    expected = np.array([[105 / 100 - 1, 51 / 50 - 1], [118 / 105 - 1, 56 / 51 - 1]])
    assert np.allclose(returns, expected, atol=1e-12)

    io.matrix_to_csv(tmp_path / "z.csv", np.array([[1.0], [0.0]]))
    result = runner.invoke(
        main, ["prices-to-returns", str(tmp_path / "z.csv"), str(tmp_path / "r2.csv")]
    )
    assert result.exit_code == 2
