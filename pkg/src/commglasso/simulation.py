"""Synthetic data generators with ground truth for scoring.

Two families at the default desk scale of p = 45 nodes and q = 2 covariates:

* latent_community: theta = S + L with two communities (25 and 20 nodes) of
  ranks 2 and 1. The sparse part has diagonal 5, a lag-2 chain inside the
  second community, and rare Bernoulli cross-community edges.
* grouped_latent: three 15-node groups, each tied to one latent variable;
  marginalizing the latents yields theta = S - L with L the (PSD) Schur
  complement, so the solver runs in minus mode. The sparse part has
  diagonal 5 and a lag-2 chain inside the first group.

Randomness comes from numpy's counter-based Philox generator keyed by the
seed, so every draw is reproducible; cross-language fixtures should go
through the exported CSV files rather than the raw stream.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .types import (
    ConfigError,
    Dataset,
    GroundTruth,
    InfeasibleTruth,
    LabelVector,
    SignMode,
    symmetrize,
)

PD_MARGIN = 1e-8
MAX_ATTEMPTS = 100


@dataclass(frozen=True)
class SimSpec:
    """Knobs for one synthetic design; see the factory helpers for defaults."""

    family: str              # "latent_community" | "grouped_latent"
    n: int
    p: int
    q: int
    r: int
    m: int
    block_sizes: tuple
    factor_scales: tuple     # one scale per latent factor
    factor_blocks: tuple     # block index each factor loads on
    u_dist: str              # "orthonormal" | "uniform" | "normal"
    u_means: tuple = ()      # per-factor means for the normal draw
    edge_prob: float = 0.01  # cross-community Bernoulli rate (latent_community)
    edge_low: float = 1.5
    edge_high: float = 2.0
    chain_nodes: tuple = ()  # 0-based nodes i carrying an (i, i+2) chain edge
    s_diag: float = 5.0
    h_diag: float = 3.0      # latent-precision diagonal (grouped_latent)

    def __post_init__(self):
        if self.family not in ("latent_community", "grouped_latent"):
            raise ConfigError(f"unknown family {self.family!r}")
        if sum(self.block_sizes) != self.p:
            raise ConfigError("block sizes must sum to p")
        if len(self.factor_scales) != self.r or len(self.factor_blocks) != self.r:
            raise ConfigError("need one scale and one block per factor")
        if self.u_dist not in ("orthonormal", "uniform", "normal"):
            raise ConfigError(f"unknown u distribution {self.u_dist!r}")
        if self.u_dist == "normal" and len(self.u_means) != self.r:
            raise ConfigError("normal u draw needs one mean per factor")
        if any(i >= self.m for i in self.factor_blocks):
            raise ConfigError("factor block index out of range")
        if self.n < 1:
            raise ConfigError("n must be positive")


def latent_community_spec(n: int, edge_prob: float = 0.01) -> SimSpec:
    """Two communities of ranks 2 and 1; factor scales 3, 2.5, 2."""
    return SimSpec(
        family="latent_community",
        n=n,
        p=45,
        q=2,
        r=3,
        m=2,
        block_sizes=(25, 20),
        factor_scales=(3.0, 2.5, 2.0),
        factor_blocks=(0, 0, 1),
        u_dist="orthonormal",
        edge_prob=edge_prob,
        chain_nodes=tuple(range(25, 35)),
    )


def grouped_latent_spec(n: int, scenario: int = 0, a: float = 3.5) -> SimSpec:
    """Three 15-node groups, one latent each.

    scenario 0 is the base design: scales 3.5/3/2.5 with Uniform(1, 2)
    loading entries, so within-group variation is small. scenario 1 scales
    the factors by (a, a-0.1, a-0.2); scenario 2 uses scales 3.6/3.3/3 with
    Normal loading entries centered at 1, 2, -1 (larger within-group
    variation). Loading vectors are always normalized to unit length, which
    the positive-definiteness of theta requires.
    """
    spec = SimSpec(
        family="grouped_latent",
        n=n,
        p=45,
        q=2,
        r=3,
        m=3,
        block_sizes=(15, 15, 15),
        factor_scales=(3.5, 3.0, 2.5),
        factor_blocks=(0, 1, 2),
        u_dist="uniform",
        chain_nodes=tuple(range(0, 13)),
    )
    if scenario == 0:
        return spec
    if scenario == 1:
        return replace(spec, factor_scales=(a, a - 0.1, a - 0.2), u_dist="uniform")
    if scenario == 2:
        return replace(
            spec, factor_scales=(3.6, 3.3, 3.0), u_dist="normal", u_means=(1.0, 2.0, -1.0)
        )
    raise ConfigError(f"unknown scenario {scenario!r}")


def _block_slices(block_sizes):
    edges = np.concatenate([[0], np.cumsum(block_sizes)])
    return [slice(int(edges[i]), int(edges[i + 1])) for i in range(len(block_sizes))]


def _draw_loadings(spec: SimSpec, rng: np.random.Generator) -> np.ndarray:
    """p x r loading matrix; factors sharing a block come out orthonormal."""
    slices = _block_slices(spec.block_sizes)
    A = np.zeros((spec.p, spec.r))
    for block in range(spec.m):
        factors = [k for k in range(spec.r) if spec.factor_blocks[k] == block]
        if not factors:
            continue
        d = spec.block_sizes[block]
        if spec.u_dist == "orthonormal":
            basis = np.linalg.qr(rng.normal(size=(d, len(factors))))[0]
        else:
            cols = []
            for k in factors:
                if spec.u_dist == "uniform":
                    v = rng.uniform(1.0, 2.0, size=d)
                else:
                    v = rng.normal(loc=spec.u_means[k], scale=1.0, size=d)
                cols.append(v / np.linalg.norm(v))
            basis = np.column_stack(cols)
        for j, k in enumerate(factors):
            A[slices[block], k] = spec.factor_scales[k] * basis[:, j]
    return A


def _signed_magnitudes(rng: np.random.Generator, size, lo: float, hi: float):
    mags = rng.uniform(lo, hi, size=size)
    signs = np.where(rng.random(size=size) < 0.5, 1.0, -1.0)
    return mags * signs


def _chain_matrix(spec: SimSpec, rng: np.random.Generator) -> np.ndarray:
    S = np.zeros((spec.p, spec.p))
    for i in spec.chain_nodes:
        val = _signed_magnitudes(rng, None, spec.edge_low, spec.edge_high)
        S[i, i + 2] = S[i + 2, i] = val
    return S


def _sample_dataset(spec: SimSpec, rng: np.random.Generator, theta: np.ndarray):
    B = rng.uniform(0.5, 1.0, size=(spec.q, spec.p))
    C = rng.normal(size=(spec.n, spec.q))
    sigma = symmetrize(np.linalg.inv(theta))
    chol = np.linalg.cholesky(sigma)
    R = rng.normal(size=(spec.n, spec.p)) @ chol.T
    X = C @ B + R
    return Dataset(X, C), B


def _truth_labels(spec: SimSpec) -> LabelVector:
    labels = np.concatenate(
        [np.full(d, i + 1, dtype=np.int64) for i, d in enumerate(spec.block_sizes)]
    )
    return LabelVector(labels, spec.m)


def gen_latent_community(spec: SimSpec, seed: int):
    """Draw one latent-community instance; returns (Dataset, GroundTruth)."""
    if spec.family != "latent_community":
        raise ConfigError("spec is not a latent_community design")
    rng = np.random.Generator(np.random.Philox(key=seed))
    slices = _block_slices(spec.block_sizes)
    for _ in range(MAX_ATTEMPTS):
        A = _draw_loadings(spec, rng)
        L = symmetrize(A @ A.T)
        S = spec.s_diag * np.eye(spec.p) + _chain_matrix(spec, rng)
        d1, d2 = spec.block_sizes[0], spec.block_sizes[1]
        hits = rng.random(size=(d1, d2)) < spec.edge_prob
        vals = _signed_magnitudes(rng, (d1, d2), spec.edge_low, spec.edge_high)
        cross = np.where(hits, vals, 0.0)
        S[slices[0], slices[1]] += cross
        S[slices[1], slices[0]] += cross.T
        theta = S + L
        if np.linalg.eigvalsh(theta)[0] > PD_MARGIN:
            break
    else:
        raise InfeasibleTruth(f"no PD truth found in {MAX_ATTEMPTS} attempts")
    data, B = _sample_dataset(spec, rng, theta)
    truth = GroundTruth(
        S_star=S,
        L_star=L,
        B_star=B,
        labels_star=_truth_labels(spec),
        rank_star=spec.r,
        block_sizes=spec.block_sizes,
        sign_mode=SignMode.PLUS,
    )
    return data, truth


def gen_grouped_latent(spec: SimSpec, seed: int):
    """Draw one grouped-latent instance (minus mode); returns (Dataset, GroundTruth)."""
    if spec.family != "grouped_latent":
        raise ConfigError("spec is not a grouped_latent design")
    rng = np.random.Generator(np.random.Philox(key=seed))
    for _ in range(MAX_ATTEMPTS):
        loadings = _draw_loadings(spec, rng)  # p x r, column k = scale_k * u_k
        L = symmetrize(loadings @ loadings.T) / spec.h_diag
        theta_o = spec.s_diag * np.eye(spec.p) + _chain_matrix(spec, rng)
        theta = theta_o - L
        if np.linalg.eigvalsh(theta)[0] > PD_MARGIN:
            break
    else:
        raise InfeasibleTruth(f"no PD truth found in {MAX_ATTEMPTS} attempts")
    data, B = _sample_dataset(spec, rng, theta)
    truth = GroundTruth(
        S_star=theta_o,
        L_star=L,
        B_star=B,
        labels_star=_truth_labels(spec),
        rank_star=spec.r,
        block_sizes=spec.block_sizes,
        sign_mode=SignMode.MINUS,
    )
    return data, truth


def generate(spec: SimSpec, seed: int):
    if spec.family == "latent_community":
        return gen_latent_community(spec, seed)
    return gen_grouped_latent(spec, seed)
