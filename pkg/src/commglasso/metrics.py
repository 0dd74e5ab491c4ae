"""Structure-recovery criteria: rank hit plus support true/false positive rates.

TP_L and FP_L count over the upper triangle including the diagonal; TP_S and
FP_S over the strict upper triangle, matching how the criteria index their
sets. Vacuous denominators define TP as 1 and FP as 0 and are flagged in the
report.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .prox import eigensystem
from .types import Decomposition, DimensionMismatch, GroundTruth, symmetrize


@dataclass(frozen=True)
class ScoreTolerances:
    """Zero tests for the estimate (and optionally the truth) plus the rank rule."""

    support_tol_l: float = None   # None: 1e-6 * max(|L|, 1)
    support_tol_s: float = None
    rank_rel_tol: float = 1e-4
    truth_tol: float = 0.0


@dataclass(frozen=True)
class CriteriaReport:
    tr_l: int
    tp_l: float
    fp_l: float
    tp_s: float
    fp_s: float
    rank_est: int
    tolerances: ScoreTolerances
    vacuous: tuple = field(default_factory=tuple)

    def as_dict(self) -> dict:
        return {
            "tr_l": self.tr_l,
            "tp_l": self.tp_l,
            "fp_l": self.fp_l,
            "tp_s": self.tp_s,
            "fp_s": self.fp_s,
        }


def numerical_rank(L_hat: np.ndarray, rel_tol: float = 1e-4) -> int:
    """Count of eigenvalues above rel_tol times the largest one."""
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    values = eigensystem(symmetrize(L_hat, "L_hat")).values
    cutoff = rel_tol * max(float(values[0]), 1e-300)
    return int(np.sum(values > cutoff))


def support(M: np.ndarray, abs_tol: float = None) -> np.ndarray:
    """Boolean mask of entries with |m_ij| strictly above abs_tol."""
    M = np.asarray(M, dtype=np.float64)
    if abs_tol is None:
        abs_tol = 1e-6 * max(float(np.max(np.abs(M), initial=0.0)), 1.0)
    if abs_tol < 0:
        raise ValueError("abs_tol must be nonnegative")
    return np.abs(M) > abs_tol


def _rate(est_mask, truth_mask, region):
    denom = int(np.sum(truth_mask & region))
    hits = int(np.sum(est_mask & truth_mask & region))
    return hits, denom


def score(
    est: Decomposition,
    truth: GroundTruth,
    tolerances: ScoreTolerances = ScoreTolerances(),
) -> CriteriaReport:
    """Rank and support recovery rates of an estimate against the truth."""
    if est.p != truth.p:
        raise DimensionMismatch(f"estimate is {est.p}x{est.p}, truth is {truth.p}x{truth.p}")
    p = est.p
    upper = np.triu(np.ones((p, p), dtype=bool))          # k <= l
    strict = np.triu(np.ones((p, p), dtype=bool), k=1)    # i < j

    est_l = support(est.L, tolerances.support_tol_l)
    est_s = support(est.S, tolerances.support_tol_s)
    true_l = support(truth.L_star, tolerances.truth_tol)
    true_s = support(truth.S_star, tolerances.truth_tol)

    vacuous = []
    tp_l_hits, tp_l_denom = _rate(est_l, true_l, upper)
    fp_l_hits, fp_l_denom = _rate(est_l, ~true_l, upper)
    tp_s_hits, tp_s_denom = _rate(est_s, true_s, strict)
    fp_s_hits, fp_s_denom = _rate(est_s, ~true_s, strict)

    def tp(hits, denom, name):
        if denom == 0:
            vacuous.append(name)
            return 1.0
        return hits / denom

    def fp(hits, denom, name):
        if denom == 0:
            vacuous.append(name)
            return 0.0
        return hits / denom

    rank_est = numerical_rank(est.L, tolerances.rank_rel_tol)
    return CriteriaReport(
        tr_l=int(rank_est == truth.rank_star),
        tp_l=tp(tp_l_hits, tp_l_denom, "tp_l"),
        fp_l=fp(fp_l_hits, fp_l_denom, "fp_l"),
        tp_s=tp(tp_s_hits, tp_s_denom, "tp_s"),
        fp_s=fp(fp_s_hits, fp_s_denom, "fp_s"),
        rank_est=rank_est,
        tolerances=tolerances,
        vacuous=tuple(vacuous),
    )
