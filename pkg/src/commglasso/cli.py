"""Batch command-line surface: simulate, fit, experiment, cluster, returns prep.

Every command reads one JSON config file (unknown keys rejected) with
optional --set dotted-path overrides, and is a pure function of
(config, input files): reruns produce byte-identical outputs. Errors are
emitted as JSON on stderr; exit code 2 flags config problems, 1 runtime
failures.
"""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import __version__, experiments, io, simulation
from .clustering import cluster_pipeline
from .metrics import ScoreTolerances
from .pipeline import METHODS, SolverConfig, WeightConfig, fit_method, residualize
from .tuning import PenaltyGrid, adaptive_weights, hard_threshold_lvggm
from .admm import solve
from .types import (
    CommGlassoError,
    ConfigError,
    Dataset,
    Decomposition,
    SignMode,
    WeightMatrix,
)

GRID_SCHEMA = {"gammas": None, "deltas": None, "taus": None, "folds": None, "seed": None}
SOLVER_SCHEMA = {"mu": None, "eps": None, "max_iter": None, "backend": None}
WEIGHTS_SCHEMA = {"a": None, "cap": None}
SIM_SCHEMA = {
    "family": None,
    "n": None,
    "scenario": None,
    "a": None,
    "edge_prob": None,
    "p": None,
    "block_sizes": None,
    "seed": None,
}
CLUSTER_SCHEMA = {
    "m": None,
    "mode": None,
    "tol": None,
    "restarts": None,
    "max_iter": None,
    "seed": None,
}
SCORE_SCHEMA = {"support_tol_l": None, "support_tol_s": None, "rank_rel_tol": None}

SIMULATE_SCHEMA = {"sim": SIM_SCHEMA, "out_dir": None}
FIT_SCHEMA = {
    "x_csv": None,
    "c_csv": None,
    "has_header": None,
    "method": None,
    "sign_mode": None,
    "grid": GRID_SCHEMA,
    "init_grid": GRID_SCHEMA,
    "fixed": {"gamma": None, "delta": None, "tau": None},
    "solver": SOLVER_SCHEMA,
    "weights": WEIGHTS_SCHEMA,
    "ht_c": None,
    "cluster": CLUSTER_SCHEMA,
    "out_dir": None,
}
EXPERIMENT_SCHEMA = {
    "kind": None,
    "sim": SIM_SCHEMA,
    "methods": None,
    "modes": None,
    "replications": None,
    "jobs": None,
    "seed": None,
    "grid": GRID_SCHEMA,
    "init_grid": GRID_SCHEMA,
    "solver": SOLVER_SCHEMA,
    "weights": WEIGHTS_SCHEMA,
    "ht_c": None,
    "score": SCORE_SCHEMA,
    "cluster": CLUSTER_SCHEMA,
    "out_dir": None,
}
CLUSTER_CMD_SCHEMA = {
    "l_csv": None,
    "results_json": None,
    "has_header": None,
    "cluster": CLUSTER_SCHEMA,
    "out_dir": None,
}


def _fail(exc: Exception, code: int):
    payload = {"error": type(exc).__name__, "message": str(exc)}
    click.echo(json.dumps(payload), err=True)
    sys.exit(code)


def _guard(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError as exc:
        _fail(exc, 2)
    except (CommGlassoError, OSError, ValueError) as exc:
        _fail(exc, 1)


def _load(config_path, overrides, schema) -> dict:
    config = io.load_config(config_path)
    config = io.apply_overrides(config, overrides)
    io.validate_keys(config, schema)
    return config


def _out_dir(config, flag) -> Path:
    out = Path(flag or config.get("out_dir", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _build_spec(sim_cfg: dict) -> simulation.SimSpec:
    family = io.require(sim_cfg, "family", "config.sim")
    n = int(io.require(sim_cfg, "n", "config.sim"))
    if family == "latent_community":
        spec = simulation.latent_community_spec(n, float(sim_cfg.get("edge_prob", 0.01)))
    elif family == "grouped_latent":
        spec = simulation.grouped_latent_spec(
            n, int(sim_cfg.get("scenario", 0)), float(sim_cfg.get("a", 3.5))
        )
    else:
        raise ConfigError(f"config.sim.family: unknown family {family!r}")
    if "block_sizes" in sim_cfg or "p" in sim_cfg:
        sizes = tuple(int(d) for d in sim_cfg.get("block_sizes", spec.block_sizes))
        p = int(sim_cfg.get("p", sum(sizes)))
        chain = tuple(i for i in spec.chain_nodes if i + 2 < p)
        spec = replace(spec, p=p, block_sizes=sizes, chain_nodes=chain)
    return spec


def _build_grid(cfg: dict, default_taus, seed: int) -> PenaltyGrid:
    return PenaltyGrid(
        tuple(float(v) for v in io.require(cfg, "gammas", "config.grid")),
        tuple(float(v) for v in io.require(cfg, "deltas", "config.grid")),
        tuple(float(v) for v in cfg.get("taus", default_taus)),
        int(cfg.get("folds", 5)),
        int(cfg.get("seed", seed)),
    )


def _build_solver(cfg: dict) -> SolverConfig:
    return SolverConfig(
        mu=float(cfg.get("mu", 1.0)),
        eps=float(cfg.get("eps", 1e-8)),
        max_iter=int(cfg.get("max_iter", 10000)),
        backend=str(cfg.get("backend", "auto")),
    )


def _build_weight_cfg(cfg: dict) -> WeightConfig:
    return WeightConfig(a=float(cfg.get("a", 1.0)), cap=float(cfg.get("cap", 1e6)))


def _build_tolerances(cfg: dict) -> ScoreTolerances:
    return ScoreTolerances(
        support_tol_l=cfg.get("support_tol_l", 1e-3),
        support_tol_s=cfg.get("support_tol_s", 1e-6),
        rank_rel_tol=cfg.get("rank_rel_tol", 1e-4),
    )


@click.group()
@click.version_option(__version__)
def main():
    """Sparse plus low-rank-block precision estimation toolkit."""


@main.command()
@click.option("--config", "-c", "config_path", required=True, type=click.Path())
@click.option("--set", "overrides", multiple=True, help="Override config keys: a.b=value")
@click.option("--out-dir", default=None, type=click.Path())
def simulate(config_path, overrides, out_dir):
    """Generate a synthetic dataset: X.csv, C.csv, truth.json."""

    def run():
        config = _load(config_path, overrides, SIMULATE_SCHEMA)
        sim_cfg = io.require(config, "sim")
        spec = _build_spec(sim_cfg)
        seed = int(sim_cfg.get("seed", 0))
        data, truth = simulation.generate(spec, seed)
        out = _out_dir(config, out_dir)
        io.matrix_to_csv(out / "X.csv", data.X)
        io.matrix_to_csv(out / "C.csv", data.C)
        io.write_json(
            out / "truth.json",
            {
                "schema_version": io.SCHEMA_VERSION,
                "family": spec.family,
                "seed": seed,
                "sign_mode": truth.sign_mode.label(),
                "rank": truth.rank_star,
                "block_sizes": list(truth.block_sizes),
                "labels": [int(v) for v in truth.labels_star.labels],
                "S_star": io.matrix_to_obj(truth.S_star),
                "L_star": io.matrix_to_obj(truth.L_star),
                "B_star": io.matrix_to_obj(truth.B_star),
            },
        )
        click.echo(f"wrote {out / 'X.csv'}, {out / 'C.csv'}, {out / 'truth.json'}")

    _guard(run)


def _fixed_fit(method, resid, sigma_hat, fixed, sign_mode, solver, weight_cfg, ht_c):
    gamma = float(io.require(fixed, "gamma", "config.fixed"))
    delta = float(io.require(fixed, "delta", "config.fixed"))
    tau = float(fixed.get("tau", 0.0))
    p = sigma_hat.shape[0]
    ones = WeightMatrix.ones(p, weight_cfg.cap)
    pilot = solve(sigma_hat, solver.tuning(gamma, delta, 0.0), ones, sign_mode, solver.backend)
    if method == "lvggm":
        return pilot, pilot.decomposition, solver.tuning(gamma, delta, 0.0), None
    if method == "ht-lvggm":
        n = resid.shape[0]
        L_ht, threshold = hard_threshold_lvggm(pilot.decomposition.L, n, ht_c)
        decomp = Decomposition(pilot.decomposition.S, L_ht, sign_mode, validate=False)
        return pilot, decomp, solver.tuning(gamma, delta, 0.0), threshold
    weights = (
        ones
        if method == "nonapmle"
        else adaptive_weights(pilot.decomposition.L, weight_cfg.a, weight_cfg.cap)
    )
    report = solve(sigma_hat, solver.tuning(gamma, delta, tau), weights, sign_mode, solver.backend)
    return report, report.decomposition, solver.tuning(gamma, delta, tau), None


@main.command()
@click.option("--config", "-c", "config_path", required=True, type=click.Path())
@click.option("--set", "overrides", multiple=True)
@click.option("--out-dir", default=None, type=click.Path())
def fit(config_path, overrides, out_dir):
    """Run the three-stage estimation on CSV inputs; writes results.json."""

    def run():
        config = _load(config_path, overrides, FIT_SCHEMA)
        has_header = bool(config.get("has_header", False))
        X = io.matrix_from_csv(io.require(config, "x_csv"), has_header)
        if "c_csv" in config and config["c_csv"]:
            C = io.matrix_from_csv(config["c_csv"], has_header)
        else:
            C = np.empty((X.shape[0], 0))
        data = Dataset(X, C)
        method = config.get("method", "proposed")
        if method not in METHODS:
            raise ConfigError(f"config.method: unknown method {method!r}")
        sign_mode = SignMode.parse(config.get("sign_mode", "plus"))
        solver = _build_solver(config.get("solver", {}))
        weight_cfg = _build_weight_cfg(config.get("weights", {}))
        ht_c = float(config.get("ht_c", 1.0))

        reg_fit, resid, sigma_hat = residualize(data)
        cv_table = None
        if "fixed" in config:
            report, decomp, params, ht_threshold = _fixed_fit(
                method, resid, sigma_hat, config["fixed"], sign_mode, solver, weight_cfg, ht_c
            )
        else:
            grid = _build_grid(io.require(config, "grid"), (0.0,), 0)
            init_default = {"gammas": grid.gamma_values, "deltas": grid.delta_values}
            init_grid = _build_grid(config.get("init_grid", init_default), (0.0,), 0)
            mf = fit_method(
                method, resid, grid, init_grid, sign_mode, solver, weight_cfg, ht_c
            )
            report, decomp, params, ht_threshold = mf.report, mf.decomposition, mf.params, mf.ht_threshold
            cv_table = mf.cv_table

        labels = None
        if "cluster" in config:
            ccfg = config["cluster"]
            lv = cluster_pipeline(
                decomp.L,
                int(io.require(ccfg, "m", "config.cluster")),
                ccfg.get("mode", "rows"),
                ccfg.get("tol"),
                int(ccfg.get("restarts", 10)),
                int(ccfg.get("max_iter", 300)),
                int(ccfg.get("seed", 0)),
            )
            labels = [int(v) for v in lv.full_labels(decomp.p)]

        out = _out_dir(config, out_dir)
        results = {
            "schema_version": io.SCHEMA_VERSION,
            "method": method,
            "sign_mode": sign_mode.label(),
            "xi": {"gamma": params.gamma, "delta": params.delta, "tau": params.tau},
            "B_hat": io.matrix_to_obj(reg_fit.B_hat) if reg_fit is not None else None,
            "S_hat": io.matrix_to_obj(decomp.S),
            "L_hat": io.matrix_to_obj(decomp.L),
            "Theta_hat": io.matrix_to_obj(decomp.theta),
            "labels": labels,
            "ht_threshold": ht_threshold,
            "diagnostics": {
                "iterations": report.iterations,
                "converged": bool(report.converged),
                "objective": report.objective,
                "final_rel_change": report.final_rel_change,
                "theta_gap": report.theta_gap,
                "theta_min_eig": report.theta_min_eig,
                "backend": report.backend,
            },
        }
        io.write_json(out / "results.json", results)
        if cv_table is not None:
            io.write_rows_csv(
                out / "cv_table.csv",
                ["gamma", "delta", "tau", "fold", "score"],
                [
                    {
                        "gamma": repr(r.gamma),
                        "delta": repr(r.delta),
                        "tau": repr(r.tau),
                        "fold": r.fold,
                        "score": repr(r.score),
                    }
                    for r in cv_table
                ],
            )
        click.echo(f"wrote {out / 'results.json'}")

    _guard(run)


@main.command()
@click.option("--config", "-c", "config_path", required=True, type=click.Path())
@click.option("--set", "overrides", multiple=True)
@click.option("--out-dir", default=None, type=click.Path())
@click.option("--jobs", default=None, type=int, help="Worker processes for replications")
def experiment(config_path, overrides, out_dir, jobs):
    """Replicated simulation study; writes replications.csv and tables.csv."""

    def run():
        config = _load(config_path, overrides, EXPERIMENT_SCHEMA)
        kind = config.get("kind", "structure")
        if kind not in ("structure", "clustering"):
            raise ConfigError(f"config.kind: expected structure|clustering, got {kind!r}")
        spec = _build_spec(io.require(config, "sim"))
        methods = tuple(config.get("methods", ["proposed"]))
        for m in methods:
            if m not in METHODS:
                raise ConfigError(f"config.methods: unknown method {m!r}")
        replications = int(config.get("replications", 20))
        n_jobs = int(jobs if jobs is not None else config.get("jobs", 1))
        seed = int(config.get("seed", 0))
        solver = _build_solver(config.get("solver", {}))
        weight_cfg = _build_weight_cfg(config.get("weights", {}))
        grid = _build_grid(io.require(config, "grid"), (0.0,), seed)
        init_default = {"gammas": grid.gamma_values, "deltas": grid.delta_values}
        init_grid = _build_grid(config.get("init_grid", init_default), (0.0,), seed)
        ht_c = float(config.get("ht_c", 1.0))
        out = _out_dir(config, out_dir)

        if kind == "structure":
            job = experiments.StructureJob(
                spec=spec,
                methods=methods,
                main_grid=grid,
                init_grid=init_grid,
                solver=solver,
                weight_cfg=weight_cfg,
                tolerances=_build_tolerances(config.get("score", {})),
                ht_c=ht_c,
                seed=seed,
            )
            rows, failures = experiments.structure_experiment(job, replications, n_jobs)
            fields = [
                "rep", "method", "tr_l", "tp_l", "fp_l", "tp_s", "fp_s",
                "rank_est", "gamma", "delta", "tau", "iterations", "converged", "error",
            ]
            label = f"n = {spec.n}"
            agg = experiments.aggregate_structure(rows, methods, label)
            agg_fields = ["Sample Size", "Criteria", *methods]
        else:
            ccfg = config.get("cluster", {})
            job = experiments.ClusteringJob(
                spec=spec,
                methods=methods,
                modes=tuple(config.get("modes", ["rows", "corabs"])),
                m=int(ccfg.get("m", spec.m)),
                main_grid=grid,
                init_grid=init_grid,
                solver=solver,
                weight_cfg=weight_cfg,
                restarts=int(ccfg.get("restarts", 10)),
                ht_c=ht_c,
                seed=seed,
            )
            rows, failures = experiments.clustering_experiment(job, replications, n_jobs)
            fields = ["rep", "method", "mode", "hamming", "survivors", "error"]
            sim_cfg = config["sim"]
            if spec.family == "grouped_latent" and int(sim_cfg.get("scenario", 0)) == 1:
                label = f"a = {sim_cfg.get('a', 3.5)}"
            else:
                label = f"n = {spec.n}"
            agg = experiments.aggregate_clustering(rows, methods, job.modes, label)
            agg_fields = ["Clustering based", "Setting", *methods]

        failure_rows = [
            {**{f: "" for f in fields}, "rep": f["rep"], "error": f["error"]}
            for f in failures
        ]
        io.write_rows_csv(out / "replications.csv", fields, rows + failure_rows)
        io.write_rows_csv(out / "tables.csv", agg_fields, agg)
        click.echo(f"wrote {out / 'replications.csv'}, {out / 'tables.csv'}")

    _guard(run)


@main.command()
@click.option("--config", "-c", "config_path", required=True, type=click.Path())
@click.option("--set", "overrides", multiple=True)
@click.option("--out-dir", default=None, type=click.Path())
def cluster(config_path, overrides, out_dir):
    """K-means community labels from a fitted low-rank part; writes labels.csv."""

    def run():
        config = _load(config_path, overrides, CLUSTER_CMD_SCHEMA)
        if "l_csv" in config:
            L = io.matrix_from_csv(config["l_csv"], bool(config.get("has_header", False)))
        elif "results_json" in config:
            L = io.matrix_from_obj(io.read_json(config["results_json"])["L_hat"])
        else:
            raise ConfigError("config: need l_csv or results_json")
        ccfg = io.require(config, "cluster")
        lv = cluster_pipeline(
            L,
            int(io.require(ccfg, "m", "config.cluster")),
            ccfg.get("mode", "rows"),
            ccfg.get("tol"),
            int(ccfg.get("restarts", 10)),
            int(ccfg.get("max_iter", 300)),
            int(ccfg.get("seed", 0)),
        )
        full = lv.full_labels(L.shape[0])
        out = _out_dir(config, out_dir)
        io.write_rows_csv(
            out / "labels.csv",
            ["node_id", "label"],
            [{"node_id": i, "label": int(v)} for i, v in enumerate(full)],
        )
        io.write_json(
            out / "labels.json",
            {
                "schema_version": io.SCHEMA_VERSION,
                "m": lv.m,
                "labels": [int(v) for v in full],
                "kept_nodes": [int(v) for v in lv.index_map],
            },
        )
        click.echo(f"wrote {out / 'labels.csv'}, {out / 'labels.json'}")

    _guard(run)


@main.command("prices-to-returns")
@click.argument("prices_csv", type=click.Path(exists=True))
@click.argument("returns_csv", type=click.Path())
@click.option("--alternate-days", is_flag=True, help="Drop every other row before differencing")
@click.option("--has-header", is_flag=True)
def prices_to_returns(prices_csv, returns_csv, alternate_days, has_header):
    """Convert a prices CSV (rows = days) into simple returns."""

    def run():
        prices = io.matrix_from_csv(prices_csv, has_header)
        if alternate_days:
            prices = prices[::2]
        if prices.shape[0] < 2:
            raise ConfigError("need at least two price rows to form returns")
        if np.any(prices == 0):
            raise ConfigError("prices contain zeros; returns are undefined")
        returns = prices[1:] / prices[:-1] - 1.0
        io.matrix_to_csv(returns_csv, returns)
        click.echo(f"wrote {returns_csv}")

    _guard(run)


if __name__ == "__main__":
    main()
