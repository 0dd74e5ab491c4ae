"""Shared domain types, invariants, and error classes.

All matrices are dense float64 ndarrays. Symmetric matrices are stored in
full and re-symmetrized as (M + M.T)/2 on construction; the estimation
problems here top out at a few hundred nodes, where dense eigendecompositions
dominate and sparse storage buys nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

SYM_RTOL = 1e-10
PSD_RTOL = 1e-8


class CommGlassoError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(CommGlassoError):
    pass


class SingularDesign(CommGlassoError):
    pass


class EmptyInput(CommGlassoError):
    pass


class EigenFailure(CommGlassoError):
    pass


class NotConverged(CommGlassoError):
    pass


class InfeasibleFold(CommGlassoError):
    pass


class AllRowsZero(CommGlassoError):
    pass


class InvalidK(CommGlassoError):
    pass


class LengthMismatch(CommGlassoError):
    pass


class InfeasibleTruth(CommGlassoError):
    pass


class ConfigError(CommGlassoError):
    pass


class SignMode(IntEnum):
    """Sign of the low-rank part in theta = S + sign * L."""

    PLUS = 1
    MINUS = -1

    @classmethod
    def parse(cls, value) -> "SignMode":
        if isinstance(value, SignMode):
            return value
        if isinstance(value, str):
            key = value.strip().lower()
            if key in ("plus", "+", "1"):
                return cls.PLUS
            if key in ("minus", "-", "-1"):
                return cls.MINUS
            raise ConfigError(f"unknown sign mode {value!r}")
        if value in (1, -1):
            return cls(value)
        raise ConfigError(f"unknown sign mode {value!r}")

    def label(self) -> str:
        return "plus" if self is SignMode.PLUS else "minus"


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-d, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ConfigError(f"{name} contains NaN or Inf entries")
    return M


def symmetrize(M, name: str = "matrix") -> np.ndarray:
    """Return the exactly symmetric matrix (M + M.T)/2."""
    M = as_matrix(M, name)
    if M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {M.shape}")
    return (M + M.T) / 2.0


def is_symmetric(M, rtol: float = SYM_RTOL) -> bool:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        return False
    scale = 1.0 + np.max(np.abs(M), initial=0.0)
    return bool(np.max(np.abs(M - M.T), initial=0.0) <= rtol * scale)


def min_max_eigvals(M) -> tuple[float, float]:
    try:
        w = np.linalg.eigvalsh(symmetrize(M))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK rarely fails
        raise EigenFailure(str(exc)) from exc
    return float(w[0]), float(w[-1])


def is_psd(M, rtol: float = PSD_RTOL) -> bool:
    """PSD within a relative tolerance -rtol * max eigenvalue (ADMM iterates drift)."""
    lo, hi = min_max_eigvals(M)
    return lo >= -rtol * max(hi, 0.0)


def is_pd(M) -> bool:
    lo, _ = min_max_eigvals(M)
    return lo > 0.0


@dataclass(frozen=True)
class Dataset:
    """Observations X (n x p) with row-aligned covariates C (n x q)."""

    X: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        X = as_matrix(self.X, "X")
        C = as_matrix(self.C, "C")
        if X.shape[0] != C.shape[0]:
            raise DimensionMismatch(
                f"X has {X.shape[0]} rows but C has {C.shape[0]}"
            )
        if X.shape[0] <= C.shape[1]:
            raise DimensionMismatch(
                f"need n > q, got n={X.shape[0]}, q={C.shape[1]}"
            )
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "C", C)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.C.shape[1]


@dataclass(frozen=True)
class Decomposition:
    """Sparse part S plus (signed) PSD community part L.

    theta is derived as S + sign * L, so the stored sum matches the parts
    bit-for-bit by construction.
    """

    S: np.ndarray
    L: np.ndarray
    sign_mode: SignMode = SignMode.PLUS
    validate: bool = True

    def __post_init__(self):
        S = symmetrize(self.S, "S")
        L = symmetrize(self.L, "L")
        if S.shape != L.shape:
            raise DimensionMismatch(f"S is {S.shape}, L is {L.shape}")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "sign_mode", SignMode.parse(self.sign_mode))
        if self.validate:
            if not is_psd(L):
                raise EigenFailure("community part L is not PSD within tolerance")
            if not is_pd(self.theta):
                raise EigenFailure("theta = S + sign*L is not positive definite")

    @property
    def theta(self) -> np.ndarray:
        return self.S + int(self.sign_mode) * self.L

    @property
    def p(self) -> int:
        return self.S.shape[0]


@dataclass(frozen=True)
class TuningParams:
    """Penalty triple (gamma, delta, tau) plus ADMM controls."""

    gamma: float
    delta: float
    tau: float
    mu: float = 1.0
    eps: float = 1e-8
    max_iter: int = 10000

    def __post_init__(self):
        for name in ("gamma", "delta", "tau"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if self.mu <= 0:
            raise ConfigError("mu must be positive")
        if self.eps <= 0:
            raise ConfigError("eps must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be a positive integer")

    def with_penalties(self, gamma: float, delta: float, tau: float) -> "TuningParams":
        return TuningParams(gamma, delta, tau, self.mu, self.eps, self.max_iter)


@dataclass(frozen=True)
class WeightMatrix:
    """Adaptive per-entry weights for the L penalty; entries lie in (0, cap]."""

    W: np.ndarray
    cap: float = 1e6

    def __post_init__(self):
        W = as_matrix(self.W, "W")
        if self.cap <= 0:
            raise ConfigError("cap must be positive")
        if not is_symmetric(W):
            raise DimensionMismatch("weight matrix must be symmetric")
        if np.any(W <= 0) or np.any(W > self.cap):
            raise ConfigError("weights must lie in (0, cap]")
        object.__setattr__(self, "W", W)

    @classmethod
    def ones(cls, p: int, cap: float = 1e6) -> "WeightMatrix":
        return cls(np.ones((p, p)), cap)

    @property
    def p(self) -> int:
        return self.W.shape[0]


@dataclass(frozen=True)
class LabelVector:
    """Community assignments in {1..m} for the surviving nodes.

    index_map holds the original node indices the labels refer to (identity
    unless zero rows were excised upstream).
    """

    labels: np.ndarray
    m: int
    index_map: np.ndarray = None

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if self.index_map is None:
            index_map = np.arange(labels.size, dtype=np.int64)
        else:
            index_map = np.asarray(self.index_map, dtype=np.int64).ravel()
        if index_map.size != labels.size:
            raise LengthMismatch(
                f"{labels.size} labels but index map of size {index_map.size}"
            )
        if self.m < 1 or self.m > labels.size:
            raise InvalidK(f"m={self.m} with {labels.size} labelled nodes")
        if labels.size and (labels.min() < 1 or labels.max() > self.m):
            raise ConfigError(f"labels must lie in 1..{self.m}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "index_map", index_map)

    def full_labels(self, p: int) -> np.ndarray:
        """Expand to length p against original node ids; excised nodes get 0."""
        out = np.zeros(p, dtype=np.int64)
        out[self.index_map] = self.labels
        return out

    def __len__(self) -> int:
        return self.labels.size


@dataclass(frozen=True)
class GroundTruth:
    """True parameters of a simulated instance, used for scoring."""

    S_star: np.ndarray
    L_star: np.ndarray
    B_star: np.ndarray
    labels_star: LabelVector
    rank_star: int
    block_sizes: tuple
    sign_mode: SignMode = SignMode.PLUS

    def __post_init__(self):
        S = symmetrize(self.S_star, "S_star")
        L = symmetrize(self.L_star, "L_star")
        B = as_matrix(self.B_star, "B_star")
        sizes = tuple(int(d) for d in self.block_sizes)
        if sum(sizes) != S.shape[0]:
            raise DimensionMismatch("block sizes must sum to p")
        object.__setattr__(self, "S_star", S)
        object.__setattr__(self, "L_star", L)
        object.__setattr__(self, "B_star", B)
        object.__setattr__(self, "block_sizes", sizes)
        object.__setattr__(self, "sign_mode", SignMode.parse(self.sign_mode))

    @property
    def p(self) -> int:
        return self.S_star.shape[0]

    @property
    def theta_star(self) -> np.ndarray:
        return self.S_star + int(self.sign_mode) * self.L_star
