"""Three-stage estimation drivers shared by the CLI and the experiment harness.

Stage 1 removes covariate effects by least squares (or just centers X when
there are no covariates). Stage 2 fits one of four estimators on the
residual covariance:

* lvggm      - l1-off + nuclear penalties only (the pilot program)
* ht-lvggm   - lvggm followed by hard thresholding of L at c/sqrt(n)
* nonapmle   - full penalty with uniform weights
* proposed   - full penalty with adaptive weights from an lvggm pilot

Stage 3 (clustering) lives in `clustering`; the CLI wires it behind these.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .admm import SolveReport, solve
from .regression import RegressionFit, empirical_covariance, fit_ols
from .tuning import PenaltyGrid, adaptive_weights, cross_validate, hard_threshold_lvggm
from .types import (
    ConfigError,
    Dataset,
    Decomposition,
    SignMode,
    TuningParams,
    WeightMatrix,
)

METHODS = ("lvggm", "ht-lvggm", "nonapmle", "proposed")


@dataclass(frozen=True)
class SolverConfig:
    mu: float = 1.0
    eps: float = 1e-8
    max_iter: int = 10000
    backend: str = "auto"

    def tuning(self, gamma: float, delta: float, tau: float) -> TuningParams:
        return TuningParams(gamma, delta, tau, self.mu, self.eps, self.max_iter)


@dataclass(frozen=True)
class WeightConfig:
    a: float = 1.0
    cap: float = 1e6


@dataclass(frozen=True)
class MethodFit:
    method: str
    decomposition: Decomposition
    params: TuningParams
    report: SolveReport
    weights: WeightMatrix
    cv_table: tuple
    pilot: SolveReport = None
    ht_threshold: float = None


def residualize(data: Dataset):
    """Stage 1. Returns (RegressionFit or None, residuals, sigma_hat).

    Without covariates the residuals are the column-centered observations.
    """
    if data.q == 0:
        residuals = data.X - data.X.mean(axis=0, keepdims=True)
        return None, residuals, empirical_covariance(residuals)
    fit = fit_ols(data)
    return fit, fit.residuals, fit.sigma_hat


def _cv_then_fit(residuals, grid, weights, solver, sign_mode):
    cv = cross_validate(
        residuals,
        grid,
        weights,
        solver.tuning(0.0, 0.0, 0.0),
        sign_mode,
        solver.backend,
    )
    sigma_hat = empirical_covariance(residuals)
    report = solve(sigma_hat, cv.params, weights, sign_mode, solver.backend)
    return cv, report


def fit_method(
    method: str,
    residuals: np.ndarray,
    main_grid: PenaltyGrid,
    init_grid: PenaltyGrid = None,
    sign_mode: SignMode = SignMode.PLUS,
    solver: SolverConfig = SolverConfig(),
    weight_cfg: WeightConfig = WeightConfig(),
    ht_c: float = 1.0,
) -> MethodFit:
    """Fit one estimator on a residual matrix with CV-selected penalties.

    main_grid drives the (gamma, delta, tau) search for nonapmle/proposed;
    init_grid (tau pinned to 0) drives the lvggm pilot and baseline. Either
    may be omitted when the method does not need it.
    """
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")
    sign_mode = SignMode.parse(sign_mode)
    residuals = np.asarray(residuals, dtype=np.float64)
    n, p = residuals.shape
    ones = WeightMatrix.ones(p, weight_cfg.cap)

    if method in ("lvggm", "ht-lvggm", "proposed"):
        if init_grid is None:
            raise ConfigError(f"method {method!r} needs an init grid")
        if init_grid.tau_values != (0.0,):
            raise ConfigError("the pilot grid must pin tau to 0")
        cv0, pilot = _cv_then_fit(residuals, init_grid, ones, solver, sign_mode)

    if method == "lvggm":
        return MethodFit(
            method,
            pilot.decomposition,
            cv0.params,
            pilot,
            ones,
            cv0.table,
            pilot=pilot,
        )

    if method == "ht-lvggm":
        L_ht, threshold = hard_threshold_lvggm(pilot.decomposition.L, n, ht_c)
        decomp = Decomposition(pilot.decomposition.S, L_ht, sign_mode, validate=False)
        return MethodFit(
            method,
            decomp,
            cv0.params,
            pilot,
            ones,
            cv0.table,
            pilot=pilot,
            ht_threshold=threshold,
        )

    if main_grid is None:
        raise ConfigError(f"method {method!r} needs a main grid")

    if method == "nonapmle":
        cv, report = _cv_then_fit(residuals, main_grid, ones, solver, sign_mode)
        return MethodFit(method, report.decomposition, cv.params, report, ones, cv.table)

    weights = adaptive_weights(pilot.decomposition.L, weight_cfg.a, weight_cfg.cap)
    cv, report = _cv_then_fit(residuals, main_grid, weights, solver, sign_mode)
    return MethodFit(
        method,
        report.decomposition,
        cv.params,
        report,
        weights,
        cv.table,
        pilot=pilot,
    )
