"""Pilot estimate, adaptive weights, baselines, and cross-validation.

The pilot fit solves the l1-off + nuclear program only (tau = 0, uniform
weights); its low-rank part seeds the adaptive weights w_ij = 1/|l_ij|^a,
capped so exactly-zero pilot entries pin the final estimate to zero instead
of dividing by zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .admm import SolveReport, solve
from .regression import empirical_covariance
from .types import (
    ConfigError,
    InfeasibleFold,
    SignMode,
    TuningParams,
    WeightMatrix,
    symmetrize,
)


@dataclass(frozen=True)
class PenaltyGrid:
    """Candidate (gamma, delta, tau) values plus the fold count and shuffle seed."""

    gamma_values: tuple
    delta_values: tuple
    tau_values: tuple
    folds: int = 5
    seed: int = 0

    def __post_init__(self):
        for name in ("gamma_values", "delta_values", "tau_values"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not vals:
                raise ConfigError(f"{name} must be nonempty")
            if any(v < 0 for v in vals):
                raise ConfigError(f"{name} must be nonnegative")
            if list(vals) != sorted(vals):
                raise ConfigError(f"{name} must be sorted ascending")
            object.__setattr__(self, name, vals)
        if self.folds < 2:
            raise ConfigError("need at least 2 folds")

    def points(self) -> list:
        return list(product(self.gamma_values, self.delta_values, self.tau_values))

    def size(self) -> int:
        return len(self.gamma_values) * len(self.delta_values) * len(self.tau_values)


@dataclass(frozen=True)
class CvRow:
    gamma: float
    delta: float
    tau: float
    fold: int          # -1 marks the aggregate row
    score: float


@dataclass(frozen=True)
class CvResult:
    params: TuningParams
    table: tuple
    folds: int


def lvggm_initial(
    sigma_hat: np.ndarray,
    gamma: float,
    delta: float,
    mu: float = 1.0,
    eps: float = 1e-8,
    max_iter: int = 10000,
    sign_mode: SignMode = SignMode.PLUS,
    backend: str = "auto",
    warm_start=None,
) -> SolveReport:
    """Pilot fit: the full solver specialized to tau = 0 and uniform weights."""
    params = TuningParams(gamma, delta, 0.0, mu, eps, max_iter)
    return solve(sigma_hat, params, None, sign_mode, backend, warm_start)


def adaptive_weights(L_bar: np.ndarray, a: float = 1.0, cap: float = 1e6) -> WeightMatrix:
    """Entrywise w_ij = min(1 / |l_ij|^a, cap) from a pilot low-rank estimate.

    The absolute value keeps weights positive for odd exponents and the cap
    handles exact zeros, which would otherwise get an infinite penalty.
    """
    if a <= 0:
        raise ConfigError("exponent a must be positive")
    if cap <= 0:
        raise ConfigError("cap must be positive")
    L_bar = symmetrize(L_bar, "L_bar")
    with np.errstate(divide="ignore", over="ignore"):
        W = 1.0 / np.abs(L_bar) ** a
    W = np.minimum(W, cap)
    return WeightMatrix(symmetrize(W), cap)


def hard_threshold_lvggm(L_bar: np.ndarray, n: int, c: float = 1.0):
    """Zero out pilot entries with |l_ij| <= c/sqrt(n); returns (matrix, threshold)."""
    if n < 1:
        raise ConfigError("n must be a positive integer")
    L_bar = symmetrize(L_bar, "L_bar")
    threshold = c / np.sqrt(n)
    out = np.where(np.abs(L_bar) > threshold, L_bar, 0.0)
    return out, float(threshold)


def cv_split(n: int, folds: int, seed: int) -> list:
    """Seeded shuffle of row indices into `folds` segments with sizes differing by <= 1."""
    if folds > n:
        raise ConfigError(f"cannot split {n} rows into {folds} folds")
    rng = np.random.Generator(np.random.Philox(key=seed))
    order = rng.permutation(n)
    return [np.sort(seg) for seg in np.array_split(order, folds)]


def predictive_score(sigma_test: np.ndarray, theta: np.ndarray) -> float:
    """Held-out negative log-likelihood tr(sigma_test theta) - logdet(theta)."""
    w = np.linalg.eigvalsh(symmetrize(theta))
    if w[0] <= 0:
        raise InfeasibleFold("fitted theta is not positive definite")
    return float(np.sum(sigma_test * theta) - np.sum(np.log(w)))


def cross_validate(
    residuals: np.ndarray,
    grid: PenaltyGrid,
    weights: WeightMatrix = None,
    solver: TuningParams = None,
    sign_mode: SignMode = SignMode.PLUS,
    backend: str = "auto",
    warm_start: bool = True,
) -> CvResult:
    """Pick the penalty triple minimizing the average predictive negative log-likelihood.

    Rows of the residual matrix are shuffled once (seeded) into equal folds;
    each grid point is fit on the complement of every fold and scored on the
    held-out empirical covariance (same n-divisor as the training one). A
    fold whose fit is not positive definite sends that grid point to +inf.
    Ties break toward the largest (gamma, delta, tau) lexicographically.
    """
    residuals = np.asarray(residuals, dtype=np.float64)
    n, p = residuals.shape
    solver = solver if solver is not None else TuningParams(0.0, 0.0, 0.0)
    if weights is None:
        weights = WeightMatrix.ones(p)
    segments = cv_split(n, grid.folds, grid.seed)

    train_sigmas = []
    test_sigmas = []
    for seg in segments:
        mask = np.ones(n, dtype=bool)
        mask[seg] = False
        train_sigmas.append(empirical_covariance(residuals[mask]))
        test_sigmas.append(empirical_covariance(residuals[seg]))

    rows = []
    totals = {}
    warm = [None] * grid.folds
    for point in grid.points():
        gamma, delta, tau = point
        params = solver.with_penalties(gamma, delta, tau)
        total = 0.0
        for t in range(grid.folds):
            report = solve(
                train_sigmas[t],
                params,
                weights,
                sign_mode,
                backend,
                warm[t] if warm_start else None,
            )
            if warm_start:
                warm[t] = report
            try:
                score = predictive_score(test_sigmas[t], report.decomposition.theta)
            except InfeasibleFold:
                score = np.inf
            rows.append(CvRow(gamma, delta, tau, t, score))
            total += score
        rows.append(CvRow(gamma, delta, tau, -1, total))
        totals[point] = total

    finite = {pt: sc for pt, sc in totals.items() if np.isfinite(sc)}
    if not finite:
        raise InfeasibleFold("every grid point failed to produce a PD fit")
    best_score = min(finite.values())
    best_point = max(pt for pt, sc in finite.items() if sc == best_score)
    params = solver.with_penalties(*best_point)
    return CvResult(params=params, table=tuple(rows), folds=grid.folds)
