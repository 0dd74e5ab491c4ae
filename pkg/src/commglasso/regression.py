"""Stage 1: least-squares removal of covariate effects.

Fits X = C B + R column-wise, returns the residual matrix and the empirical
residual covariance R.T R / n (divisor n, not n-1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .types import Dataset, DimensionMismatch, EmptyInput, SingularDesign, symmetrize

COND_LIMIT = 1e12


@dataclass(frozen=True)
class RegressionFit:
    B_hat: np.ndarray       # q x p coefficients
    residuals: np.ndarray   # n x p
    sigma_hat: np.ndarray   # p x p empirical residual covariance


def empirical_covariance(residuals: np.ndarray) -> np.ndarray:
    """Empirical covariance R.T R / n of a residual matrix."""
    R = np.asarray(residuals, dtype=np.float64)
    if R.ndim != 2:
        raise DimensionMismatch(f"residuals must be 2-d, got shape {R.shape}")
    if R.shape[0] == 0:
        raise EmptyInput("cannot form a covariance from zero rows")
    return symmetrize(R.T @ R / R.shape[0])


def fit_ols(data: Dataset) -> RegressionFit:
    """Least-squares fit of the covariates; residuals orthogonal to col(C).

    Solves the normal equations through a Cholesky factorization of C.T C
    rather than an explicit inverse. Raises SingularDesign when the Gram
    matrix is numerically singular (condition number above 1e12).
    """
    C, X = data.C, data.X
    gram = symmetrize(C.T @ C)
    eigs = np.linalg.eigvalsh(gram)
    if eigs[0] <= 0 or eigs[-1] / eigs[0] > COND_LIMIT:
        raise SingularDesign(
            f"C.T C is numerically singular (eigenvalue range {eigs[0]:.3e}..{eigs[-1]:.3e})"
        )
    B_hat = cho_solve(cho_factor(gram, lower=True), C.T @ X)
    residuals = X - C @ B_hat
    return RegressionFit(B_hat, residuals, empirical_covariance(residuals))
