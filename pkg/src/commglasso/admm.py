"""Consensus ADMM for the penalized sparse-plus-low-rank decomposition.

Minimizes

    -logdet(theta) + tr(sigma_hat theta)
        + gamma * ||S||_off,1 + delta * ||L||_* + tau * sum_ij w_ij |L_ij|

over theta = S + sign*L with L PSD, by splitting into four blocks
(theta, s, l1, l2) tied together through the affine consensus set
{theta = s + sign*l1, l1 = l2}. Each sweep applies the scaled proximal
updates to the blocks, projects onto the consensus set in closed form, and
advances the scaled duals. The low-rank output is read from the l2 block
(the nuclear-prox block); the entrywise shrinkage lives in l1 and the two
agree at convergence.

The l1 update is the exact prox of its weighted l1 penalty: the PSD-ness of
the low-rank part is enforced through the l2 nuclear prox and the l1 = l2
constraint. Composing an additional PSD projection into the l1 update makes
that subproblem inexact and measurably biases the solution off the optimum
whenever L is rank-deficient, so none is applied.

A single solve is sequential; independent solves (grid points, folds,
replications) can run in parallel freely since nothing here mutates shared
state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _admm_py
from .types import (
    ConfigError,
    Decomposition,
    DimensionMismatch,
    SignMode,
    TuningParams,
    WeightMatrix,
    symmetrize,
)

try:
    from . import _admm_cy
except ImportError:  # pure-Python fallback
    _admm_cy = None

BLOCKS = ("theta", "s", "l1", "l2")

# Euclidean projection onto {theta = s + sign*l1, l1 = l2}: mixing weights of
# the stacked blocks, one row per output block.
_MIX_PLUS = np.array(
    [
        [3.0, 2.0, 1.0, 1.0],
        [2.0, 3.0, -1.0, -1.0],
        [1.0, -1.0, 2.0, 2.0],
        [1.0, -1.0, 2.0, 2.0],
    ]
) / 5.0
_MIX_MINUS = np.array(
    [
        [3.0, 2.0, -1.0, -1.0],
        [2.0, 3.0, 1.0, 1.0],
        [-1.0, 1.0, 2.0, 2.0],
        [-1.0, 1.0, 2.0, 2.0],
    ]
) / 5.0


def available_backends() -> tuple:
    return ("python",) if _admm_cy is None else ("compiled", "python")


def default_backend() -> str:
    return "python" if _admm_cy is None else "compiled"


def _resolve_backend(backend: str):
    if backend == "auto":
        backend = default_backend()
    if backend == "python":
        return _admm_py.run_loop, "python"
    if backend == "compiled":
        if _admm_cy is None:
            raise ConfigError("compiled backend requested but the extension is not built")
        return _admm_cy.run_loop, "compiled"
    raise ConfigError(f"unknown backend {backend!r}")


@dataclass(frozen=True)
class AdmmState:
    """Stacked iterates: primal blocks Y1, consensus blocks Y2, scaled duals Gamma."""

    Y1: np.ndarray
    Y2: np.ndarray
    Gamma: np.ndarray
    iteration: int = 0
    rel_change: float = np.inf


@dataclass(frozen=True)
class SolveReport:
    decomposition: Decomposition
    iterations: int
    converged: bool
    final_rel_change: float
    objective: float
    theta_gap: float         # max |theta block - (S + sign*L2)| at exit
    theta_min_eig: float
    primal_residual: float
    dual_residual: float
    backend: str
    state: AdmmState


def init_state(p: int, sign_mode: SignMode = SignMode.PLUS) -> AdmmState:
    """Algorithm start: S = L1 = L2 = I, theta = S + sign*L1, zero duals."""
    eye = np.eye(p)
    Y1 = np.stack([eye * (1 + int(sign_mode)), eye, eye, eye.copy()])
    return AdmmState(Y1=Y1, Y2=Y1.copy(), Gamma=np.zeros_like(Y1))


def consensus_project(T: np.ndarray, sign_mode: SignMode = SignMode.PLUS) -> np.ndarray:
    """Project stacked blocks T (4, p, p) onto the consensus constraint set."""
    T = np.asarray(T, dtype=np.float64)
    if T.ndim != 3 or T.shape[0] != 4:
        raise DimensionMismatch(f"expected a (4, p, p) stack, got {T.shape}")
    mix = _MIX_PLUS if SignMode.parse(sign_mode) is SignMode.PLUS else _MIX_MINUS
    return np.einsum("ab,bij->aij", mix, T)


def admm_step(
    state: AdmmState,
    sigma_hat: np.ndarray,
    params: TuningParams,
    weights: WeightMatrix,
    sign_mode: SignMode = SignMode.PLUS,
) -> AdmmState:
    """One full scaled-ADMM sweep; reference implementation of the loop body."""
    from .prox import (
        prox_logdet,
        prox_nuclear_psd,
        soft_threshold,
        weighted_soft_threshold,
    )

    sign_mode = SignMode.parse(sign_mode)
    mu = params.mu
    Y2, G = state.Y2, state.Gamma
    p = sigma_hat.shape[0]

    theta = prox_logdet(Y2[0] - G[0], mu, sigma_hat)
    v = Y2[1] - G[1]
    s = soft_threshold(v, mu * params.gamma)
    s[np.arange(p), np.arange(p)] = v[np.arange(p), np.arange(p)]
    l1 = weighted_soft_threshold(Y2[2] - G[2], mu * params.tau, weights)
    l2 = prox_nuclear_psd(Y2[3] - G[3], mu * params.delta)

    Y1_new = np.stack([theta, s, l1, l2])
    Y2_new = consensus_project(Y1_new + G, sign_mode)
    G_new = G + Y1_new - Y2_new
    denom = max(float(np.sum(state.Y1**2)), 1e-300)
    rel = float(np.sum((Y1_new - state.Y1) ** 2)) / denom
    return AdmmState(Y1_new, Y2_new, G_new, state.iteration + 1, rel)


def neg_log_likelihood(theta: np.ndarray, sigma_hat: np.ndarray) -> float:
    """-logdet(theta) + tr(sigma_hat theta); +inf outside the PD cone."""
    w = np.linalg.eigvalsh(symmetrize(theta))
    if w[0] <= 0:
        return np.inf
    return float(-np.sum(np.log(w)) + np.sum(sigma_hat * theta))


def nll_gradient(theta: np.ndarray, sigma_hat: np.ndarray) -> np.ndarray:
    """Gradient sigma_hat - theta^{-1} of the Gaussian negative log-likelihood."""
    return np.asarray(sigma_hat) - np.linalg.inv(symmetrize(theta))


def penalty_value(
    S: np.ndarray,
    L: np.ndarray,
    params: TuningParams,
    weights: WeightMatrix,
) -> float:
    off_l1 = float(np.sum(np.abs(S)) - np.sum(np.abs(np.diag(S))))
    nuclear = float(np.sum(np.abs(np.linalg.eigvalsh(symmetrize(L)))))
    weighted = float(np.sum(weights.W * np.abs(L)))
    return params.gamma * off_l1 + params.delta * nuclear + params.tau * weighted


def objective_value(
    S: np.ndarray,
    L: np.ndarray,
    sigma_hat: np.ndarray,
    params: TuningParams,
    weights: WeightMatrix,
    sign_mode: SignMode = SignMode.PLUS,
) -> float:
    sign_mode = SignMode.parse(sign_mode)
    theta = np.asarray(S) + int(sign_mode) * np.asarray(L)
    return neg_log_likelihood(theta, sigma_hat) + penalty_value(S, L, params, weights)


def solve(
    sigma_hat: np.ndarray,
    params: TuningParams,
    weights: WeightMatrix = None,
    sign_mode: SignMode = SignMode.PLUS,
    backend: str = "auto",
    warm_start=None,
) -> SolveReport:
    """Run the consensus ADMM until the relative-change criterion or max_iter.

    The stopping rule is ||Y1_k+1 - Y1_k||_F^2 / ||Y1_k||_F^2 <= eps. A
    non-converged run is reported through converged=False, never raised.
    warm_start accepts a previous AdmmState or SolveReport (grid searches
    re-use neighbouring solutions).
    """
    sigma_hat = symmetrize(sigma_hat, "sigma_hat")
    sign_mode = SignMode.parse(sign_mode)
    p = sigma_hat.shape[0]
    if weights is None:
        weights = WeightMatrix.ones(p)
    if weights.p != p:
        raise DimensionMismatch(f"weights are {weights.p}x{weights.p}, sigma is {p}x{p}")
    run, backend_name = _resolve_backend(backend)

    if warm_start is None:
        start = init_state(p, sign_mode)
    else:
        start = warm_start.state if isinstance(warm_start, SolveReport) else warm_start
        if start.Y1.shape != (4, p, p):
            raise DimensionMismatch("warm start shape does not match the problem")
    Y1 = np.ascontiguousarray(start.Y1, dtype=np.float64).copy()
    Y2 = np.ascontiguousarray(start.Y2, dtype=np.float64).copy()
    G = np.ascontiguousarray(start.Gamma, dtype=np.float64).copy()

    iterations, rel, converged, primal, dual = run(
        sigma_hat,
        params.gamma,
        params.delta,
        params.tau,
        params.mu,
        params.eps,
        params.max_iter,
        weights.W,
        int(sign_mode),
        Y1,
        Y2,
        G,
    )

    S = symmetrize(Y1[1])
    L = symmetrize(Y1[3])
    decomp = Decomposition(S, L, sign_mode, validate=False)
    theta = decomp.theta
    theta_gap = float(np.max(np.abs(Y1[0] - theta)))
    theta_min_eig = float(np.linalg.eigvalsh(theta)[0])
    objective = objective_value(S, L, sigma_hat, params, weights, sign_mode)
    state = AdmmState(Y1, Y2, G, iterations, rel)
    return SolveReport(
        decomposition=decomp,
        iterations=iterations,
        converged=converged,
        final_rel_change=rel,
        objective=objective,
        theta_gap=theta_gap,
        theta_min_eig=theta_min_eig,
        primal_residual=primal,
        dual_residual=dual,
        backend=backend_name,
        state=state,
    )
