"""Desk-scale reference solvers used only by tests and acceptance runs.

reference_solve attacks the same convex program as the ADMM by alternating
proximal-gradient steps on (S, L) with backtracking, using a Dykstra
iteration for the L-block prox (weighted l1 plus the PSD cone has no closed
form). consensus_kkt_solve resolves the consensus projection by assembling
the equality-constrained least-squares KKT system directly, independent of
the closed-form mixing weights.
"""

from __future__ import annotations

import numpy as np

from .admm import SolveReport, AdmmState, objective_value
from .prox import project_psd, soft_threshold
from .types import (
    Decomposition,
    DimensionMismatch,
    NotConverged,
    SignMode,
    TuningParams,
    WeightMatrix,
    symmetrize,
)

MAX_ORACLE_P = 8


def _dykstra_wl1_psd(Z, lam_w, max_iter=2000, tol=1e-14):
    """Prox of (weighted l1 + PSD indicator) at Z by Dykstra's alternating scheme."""
    X = Z.copy()
    P = np.zeros_like(Z)
    Q = np.zeros_like(Z)
    for _ in range(max_iter):
        Y = np.sign(X + P) * np.maximum(np.abs(X + P) - lam_w, 0.0)
        P = X + P - Y
        X_new = project_psd(Y + Q)
        Q = Y + Q - X_new
        delta = float(np.max(np.abs(X_new - X)))
        X = X_new
        if delta < tol:
            break
    return X


def reference_solve(
    sigma_hat: np.ndarray,
    params: TuningParams,
    weights: WeightMatrix = None,
    sign_mode: SignMode = SignMode.PLUS,
    tol: float = 1e-10,
    max_iter: int = 300000,
) -> SolveReport:
    """Alternating proximal-gradient reference for the penalized estimator.

    Stops when the prox-gradient mapping norm of both blocks falls below tol,
    or when that norm has stopped halving for several times its observed
    halving interval, i.e. its geometric decay has hit the float64 noise
    floor and the iterate is the numerical optimum of this descent scheme.
    Capped at p <= 8 so the reference stays trivially correct; raises
    NotConverged past max_iter.
    """
    sigma_hat = symmetrize(sigma_hat, "sigma_hat")
    sign_mode = SignMode.parse(sign_mode)
    sign = int(sign_mode)
    p = sigma_hat.shape[0]
    if p > MAX_ORACLE_P:
        raise DimensionMismatch(f"reference solver is capped at p <= {MAX_ORACLE_P}")
    if weights is None:
        weights = WeightMatrix.ones(p)
    W = weights.W
    gamma, delta, tau = params.gamma, params.delta, params.tau
    eye = np.eye(p)
    off = 1.0 - eye

    def nll(theta):
        w = np.linalg.eigvalsh(symmetrize(theta))
        if w[0] <= 0:
            return np.inf
        return -np.sum(np.log(w)) + np.sum(sigma_hat * theta)

    def full_obj(S, L):
        return (
            nll(S + sign * L)
            + gamma * np.sum(np.abs(S) * off)
            + delta * np.trace(L)
            + tau * np.sum(W * np.abs(L))
        )

    S = eye * (1.0 + np.trace(sigma_hat) / p)
    L = np.zeros((p, p))
    t_s = 1.0
    t_l = 1.0
    converged = False
    iterations = 0
    best_gap = np.inf
    last_halved = 0
    halving_interval = 500

    for k in range(max_iter):
        iterations = k + 1
        step_s = step_l = 0.0

        # S step: smooth part is the likelihood, prox is off-diagonal soft threshold
        g0 = nll(S + sign * L)
        grad = sigma_hat - np.linalg.inv(symmetrize(S + sign * L))
        slack = 1e-12 * (1.0 + abs(g0))  # keeps fp noise from collapsing the step size
        while True:
            base = S - t_s * grad
            cand = soft_threshold(base, t_s * gamma)
            np.fill_diagonal(cand, np.diag(base))
            diff = cand - S
            g1 = nll(cand + sign * L)
            if g1 <= g0 + np.sum(grad * diff) + np.sum(diff**2) / (2 * t_s) + slack:
                break
            t_s /= 2.0
        step_s = float(np.max(np.abs(cand - S)))
        S = symmetrize(cand)
        t_s = min(t_s * 1.2, 1e3)

        # L step: fold the linear nuclear term delta*tr(L) into the gradient,
        # leaving the weighted l1 + PSD cone to the Dykstra prox
        g0 = nll(S + sign * L) + delta * np.trace(L)
        grad = sign * (sigma_hat - np.linalg.inv(symmetrize(S + sign * L))) + delta * eye
        slack = 1e-12 * (1.0 + abs(g0))
        while True:
            cand = _dykstra_wl1_psd(L - t_l * grad, t_l * tau * W)
            diff = cand - L
            g1 = nll(S + sign * cand)
            if np.isfinite(g1):
                g1 += delta * np.trace(cand)
            if g1 <= g0 + np.sum(grad * diff) + np.sum(diff**2) / (2 * t_l) + slack:
                break
            t_l /= 2.0
        step_l = float(np.max(np.abs(cand - L)))
        L = symmetrize(cand)
        t_l = min(t_l * 1.2, 1e3)

        gap = max(step_s / t_s, step_l / t_l)
        if gap < 0.5 * best_gap:
            halving_interval = max(500, k - last_halved)
            best_gap = gap
            last_halved = k
        if k > 10 and (gap <= tol or k - last_halved >= 6 * halving_interval):
            converged = True
            break

    if not converged:
        raise NotConverged(f"reference solver still moving after {max_iter} iterations")

    decomp = Decomposition(S, L, sign_mode, validate=False)
    theta = decomp.theta
    Y1 = np.stack([theta, S, L, L.copy()])
    return SolveReport(
        decomposition=decomp,
        iterations=iterations,
        converged=True,
        final_rel_change=max(step_s, step_l),
        objective=objective_value(S, L, sigma_hat, params, weights, sign_mode),
        theta_gap=0.0,
        theta_min_eig=float(np.linalg.eigvalsh(theta)[0]),
        primal_residual=0.0,
        dual_residual=0.0,
        backend="oracle",
        state=AdmmState(Y1, Y1.copy(), np.zeros_like(Y1)),
    )


def consensus_kkt_solve(T: np.ndarray, sign_mode: SignMode = SignMode.PLUS) -> np.ndarray:
    """Exact equality-constrained projection of stacked blocks via the KKT system.

    Solves, entrywise, min ||x - t||^2 s.t. C x = 0 with
    C = [[1, -1, -sign, 0], [0, 0, 1, -1]], through the bordered system
    [[I, C^T], [C, 0]] [x; psi] = [t; 0].
    """
    T = np.asarray(T, dtype=np.float64)
    if T.ndim != 3 or T.shape[0] != 4:
        raise DimensionMismatch(f"expected a (4, p, p) stack, got {T.shape}")
    sign = int(SignMode.parse(sign_mode))
    C = np.array([[1.0, -1.0, -float(sign), 0.0], [0.0, 0.0, 1.0, -1.0]])
    kkt = np.zeros((6, 6))
    kkt[:4, :4] = np.eye(4)
    kkt[:4, 4:] = C.T
    kkt[4:, :4] = C
    rhs = np.zeros((6, T.shape[1] * T.shape[2]))
    rhs[:4] = T.reshape(4, -1)
    sol = np.linalg.solve(kkt, rhs)
    return sol[:4].reshape(T.shape)
