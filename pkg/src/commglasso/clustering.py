"""Stage 3: K-means on the rows of the low-rank estimate, plus label scoring.

Clustering runs either on the rows of L directly or on the Pearson
correlation matrix of their absolute values (the right input when each
community is rank one). Rows that are numerically zero are excised first;
their nodes come back as label 0 (unassigned) in the full-length output.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .types import (
    AllRowsZero,
    ConfigError,
    InvalidK,
    LabelVector,
    LengthMismatch,
    symmetrize,
)

EXHAUSTIVE_LIMIT = 8


@dataclass(frozen=True)
class KmeansResult:
    labels: LabelVector
    centers: np.ndarray
    loss: float
    restarts_used: int
    loss_history: tuple   # per-iteration loss of the winning restart


def drop_zero_rows(L_hat: np.ndarray, tol: float = 0.0):
    """Remove rows (and matching columns) with sup-norm <= tol.

    Returns (reduced matrix, index_map) where index_map recovers the original
    node ids. Raises AllRowsZero when nothing survives.
    """
    if tol < 0:
        raise ConfigError("tol must be nonnegative")
    L_hat = symmetrize(L_hat, "L_hat")
    keep = np.max(np.abs(L_hat), axis=1) > tol
    if not np.any(keep):
        raise AllRowsZero("every row is below the zero tolerance")
    index_map = np.flatnonzero(keep)
    return L_hat[np.ix_(index_map, index_map)], index_map


def cor_abs_transform(L_hat: np.ndarray) -> np.ndarray:
    """Pearson correlations between the absolute-value rows of L_hat.

    Rows whose absolute values have zero variance correlate 0 against
    everything else; the diagonal is pinned to 1.
    """
    A = np.abs(np.asarray(L_hat, dtype=np.float64))
    if A.ndim != 2 or A.shape[1] < 2:
        raise ConfigError("need at least 2 columns for a correlation")
    centered = A - A.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.sum(centered**2, axis=1))
    safe = np.where(norms > 0, norms, 1.0)
    scaled = centered / safe[:, None]
    out = scaled @ scaled.T
    zero_var = norms == 0
    out[zero_var, :] = 0.0
    out[:, zero_var] = 0.0
    np.fill_diagonal(out, 1.0)
    return symmetrize(np.clip(out, -1.0, 1.0))


def _kmeans_pp(points: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((m, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for k in range(1, m):
        total = d2.sum()
        if total <= 0:
            centers[k] = points[rng.integers(n)]
            continue
        centers[k] = points[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((points - centers[k]) ** 2, axis=1))
    return centers


def _lloyd(points: np.ndarray, centers: np.ndarray, max_iter: int):
    n, m = points.shape[0], centers.shape[0]
    labels = np.zeros(n, dtype=np.int64)
    history = []
    for _ in range(max_iter):
        d2 = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(d2, axis=1)
        loss = float(d2[np.arange(n), new_labels].sum())
        history.append(loss)
        for k in range(m):
            members = new_labels == k
            if np.any(members):
                centers[k] = points[members].mean(axis=0)
            else:
                # empty cluster: grab the point farthest from its center
                far = int(np.argmax(d2[np.arange(n), new_labels]))
                centers[k] = points[far]
                new_labels[far] = k
        if np.array_equal(new_labels, labels) and len(history) > 1:
            labels = new_labels
            break
        labels = new_labels
    d2 = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    labels = np.argmin(d2, axis=1)
    loss = float(d2[np.arange(n), labels].sum())
    history.append(loss)
    return labels, centers, loss, history


def kmeans(
    points: np.ndarray,
    m: int,
    restarts: int = 10,
    max_iter: int = 300,
    seed: int = 0,
) -> KmeansResult:
    """Best-of-restarts Lloyd iteration with k-means++ seeding.

    Deterministic given the seed; restart r draws from a generator keyed by
    seed + r, and ties in loss go to the lowest restart index.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ConfigError("points must be a 2-d array")
    if m > points.shape[0]:
        raise InvalidK(f"m={m} clusters but only {points.shape[0]} points")
    if m < 1 or restarts < 1:
        raise ConfigError("m and restarts must be positive")

    best = None
    for r in range(restarts):
        rng = np.random.Generator(np.random.Philox(key=seed + r))
        centers = _kmeans_pp(points, m, rng)
        labels, centers, loss, history = _lloyd(points, centers.copy(), max_iter)
        if best is None or loss < best[2]:
            best = (labels, centers, loss, history, r)
    labels, centers, loss, history, _ = best
    return KmeansResult(
        labels=LabelVector(labels + 1, m),
        centers=centers,
        loss=loss,
        restarts_used=restarts,
        loss_history=tuple(history),
    )


def _confusion(est: np.ndarray, truth: np.ndarray, m: int) -> np.ndarray:
    counts = np.zeros((m, m), dtype=np.int64)
    for a, b in zip(est, truth):
        counts[a - 1, b - 1] += 1
    return counts


def _coerce_labels(labels) -> np.ndarray:
    if isinstance(labels, LabelVector):
        return labels.labels
    return np.asarray(labels, dtype=np.int64).ravel()


def hamming_error(est, truth, method: str = "auto") -> float:
    """Minimum fraction of mismatched labels over all label permutations.

    Exhausts the m! permutations for small m and otherwise maximizes the
    agreement through an assignment on the confusion matrix; the two agree
    exactly.
    """
    est = _coerce_labels(est)
    truth = _coerce_labels(truth)
    if est.size != truth.size:
        raise LengthMismatch(f"{est.size} estimated labels vs {truth.size} true")
    if est.size == 0:
        raise LengthMismatch("empty label vectors")
    m = int(max(est.max(), truth.max()))
    counts = _confusion(est, truth, m)
    if method == "auto":
        method = "exhaustive" if m <= EXHAUSTIVE_LIMIT else "assignment"
    if method == "exhaustive":
        best = 0
        for perm in permutations(range(m)):
            agree = sum(counts[perm[b], b] for b in range(m))
            best = max(best, agree)
    elif method == "assignment":
        rows, cols = linear_sum_assignment(counts, maximize=True)
        best = int(counts[rows, cols].sum())
    else:
        raise ConfigError(f"unknown method {method!r}")
    return 1.0 - best / est.size


def cluster_pipeline(
    L_hat: np.ndarray,
    m: int,
    mode: str = "rows",
    tol: float = None,
    restarts: int = 10,
    max_iter: int = 300,
    seed: int = 0,
) -> LabelVector:
    """Excise zero rows, optionally transform, and K-means the remaining rows.

    mode "rows" clusters the raw rows of the reduced matrix, "corabs" the
    rows of their absolute-value correlation matrix. tol defaults to
    1e-6 * max|L_hat|. Labels come back indexed against the original nodes;
    expand with .full_labels(p) to mark excised nodes as 0.
    """
    L_hat = symmetrize(L_hat, "L_hat")
    if tol is None:
        tol = 1e-6 * float(np.max(np.abs(L_hat), initial=0.0))
    reduced, index_map = drop_zero_rows(L_hat, tol)
    if mode == "rows":
        points = reduced
    elif mode == "corabs":
        points = cor_abs_transform(reduced)
    else:
        raise ConfigError(f"unknown clustering mode {mode!r}")
    result = kmeans(points, m, restarts=restarts, max_iter=max_iter, seed=seed)
    return LabelVector(result.labels.labels, m, index_map)
