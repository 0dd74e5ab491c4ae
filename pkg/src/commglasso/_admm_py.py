"""Pure-NumPy ADMM inner loop.

Reference semantics for the compiled kernel in _admm_cy.pyx: both run the
same consensus sweep and must stay interchangeable. Block order in the
stacked (4, p, p) arrays is (theta, s, l1, l2).
"""

from __future__ import annotations

import numpy as np


def _eigh_sym(M):
    return np.linalg.eigh((M + M.T) / 2.0)


def run_loop(sigma, gamma, delta, tau, mu, eps, max_iter, W, sign, Y1, Y2, G):
    """Iterate the consensus ADMM in place; returns loop diagnostics.

    Y1, Y2, G are (4, p, p) stacks holding the primal blocks, the consensus
    blocks and the scaled duals; they carry the final iterates on return.

    Returns (iterations, rel_change, converged, primal_res, dual_res).
    """
    p = sigma.shape[0]
    diag = np.arange(p)
    tauW = tau * mu * W
    lam_s = mu * gamma
    lam_n = mu * delta

    iterations = 0
    rel = np.inf
    converged = False
    dual_res = np.inf

    for _ in range(max_iter):
        y1_prev = Y1.copy()
        y2_prev = Y2.copy()

        # theta block: prox of mu*(-logdet + tr(sigma .))
        w, V = _eigh_sym(Y2[0] - G[0] - mu * sigma)
        xi = (w + np.sqrt(w * w + 4.0 * mu)) / 2.0
        Y1[0] = (V * xi) @ V.T

        # s block: off-diagonal soft threshold, diagonal passes through
        Vs = Y2[1] - G[1]
        Snew = np.sign(Vs) * np.maximum(np.abs(Vs) - lam_s, 0.0)
        Snew[diag, diag] = Vs[diag, diag]
        Y1[1] = Snew

        # l1 block: entrywise weighted soft threshold
        Vl = Y2[2] - G[2]
        Y1[2] = np.sign(Vl) * np.maximum(np.abs(Vl) - tauW, 0.0)

        # l2 block: nuclear prox over the PSD cone
        w, V = _eigh_sym(Y2[3] - G[3])
        w = np.maximum(w - lam_n, 0.0)
        Y1[3] = (V * w) @ V.T

        # consensus projection onto {theta = s + sign*l1, l1 = l2}
        T = Y1 + G
        if sign > 0:
            Y2[0] = (3.0 * T[0] + 2.0 * T[1] + T[2] + T[3]) / 5.0
            Y2[1] = (2.0 * T[0] + 3.0 * T[1] - T[2] - T[3]) / 5.0
            Y2[2] = (T[0] - T[1] + 2.0 * T[2] + 2.0 * T[3]) / 5.0
        else:
            Y2[0] = (3.0 * T[0] + 2.0 * T[1] - T[2] - T[3]) / 5.0
            Y2[1] = (2.0 * T[0] + 3.0 * T[1] + T[2] + T[3]) / 5.0
            Y2[2] = (-T[0] + T[1] + 2.0 * T[2] + 2.0 * T[3]) / 5.0
        Y2[3] = Y2[2]

        G += Y1 - Y2

        iterations += 1
        denom = float(np.sum(y1_prev * y1_prev))
        rel = float(np.sum((Y1 - y1_prev) ** 2)) / max(denom, 1e-300)
        dual_res = float(np.linalg.norm(Y2 - y2_prev)) / mu
        if rel <= eps:
            converged = True
            break

    primal_res = float(np.linalg.norm(Y1 - Y2))
    return iterations, rel, converged, primal_res, dual_res
