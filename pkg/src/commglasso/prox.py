"""Proximal and projection primitives used inside the ADMM sweeps.

Every eigendecomposition here is applied to (Z + Z.T)/2: solver iterates
drift asymmetrically at machine precision and LAPACK wants a clean
symmetric input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import EigenFailure, WeightMatrix, symmetrize


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues (descending) and orthonormal eigenvectors of a symmetric matrix."""

    values: np.ndarray
    vectors: np.ndarray


def eigensystem(M: np.ndarray) -> EigenSystem:
    try:
        w, V = np.linalg.eigh(symmetrize(M))
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(f"eigendecomposition failed: {exc}") from exc
    return EigenSystem(w[::-1].copy(), V[:, ::-1].copy())


def soft_threshold(Z: np.ndarray, lam: float) -> np.ndarray:
    """Entrywise sign(z) * max(|z| - lam, 0)."""
    Z = np.asarray(Z, dtype=np.float64)
    return np.sign(Z) * np.maximum(np.abs(Z) - lam, 0.0)


def weighted_soft_threshold(Z: np.ndarray, lam: float, weights) -> np.ndarray:
    """Soft threshold entry (i, j) at level lam * w_ij."""
    W = weights.W if isinstance(weights, WeightMatrix) else np.asarray(weights)
    Z = np.asarray(Z, dtype=np.float64)
    return np.sign(Z) * np.maximum(np.abs(Z) - lam * W, 0.0)


def prox_nuclear_psd(Z: np.ndarray, lam: float) -> np.ndarray:
    """Prox of lam*||.||_* restricted to the PSD cone: eigenvalues shrink and clip."""
    es = eigensystem(Z)
    w = np.maximum(es.values - lam, 0.0)
    return symmetrize((es.vectors * w) @ es.vectors.T)


def project_psd(Z: np.ndarray) -> np.ndarray:
    """Nearest PSD matrix in Frobenius norm: clip negative eigenvalues."""
    es = eigensystem(Z)
    w = np.maximum(es.values, 0.0)
    return symmetrize((es.vectors * w) @ es.vectors.T)


def prox_logdet(M: np.ndarray, mu: float, sigma_hat: np.ndarray) -> np.ndarray:
    """Prox of mu * (-logdet(X) + tr(sigma_hat X)) at M.

    Eigendecomposes M - mu*sigma_hat and maps each eigenvalue s to the
    positive root of x^2 - s*x - mu = 0, so the output is positive definite
    and satisfies -X^{-1} + sigma_hat + (X - M)/mu = 0.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    es = eigensystem(np.asarray(M, dtype=np.float64) - mu * np.asarray(sigma_hat))
    xi = (es.values + np.sqrt(es.values**2 + 4.0 * mu)) / 2.0
    return symmetrize((es.vectors * xi) @ es.vectors.T)
