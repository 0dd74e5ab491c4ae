"""Sparse plus low-rank-block precision matrix estimation with community detection.

Three-stage pipeline: least-squares covariate removal, adaptively weighted
penalized maximum likelihood through a consensus ADMM, and K-means community
recovery on the low-rank part. The ADMM inner loop runs on a compiled Cython
kernel when the extension is built and otherwise on an equivalent pure-NumPy
loop; `admm.default_backend()` reports which one is active.
"""

from .admm import SolveReport, available_backends, default_backend, solve
from .regression import RegressionFit, empirical_covariance, fit_ols
from .types import (
    CommGlassoError,
    Dataset,
    Decomposition,
    GroundTruth,
    LabelVector,
    SignMode,
    TuningParams,
    WeightMatrix,
)

__version__ = "0.1.0"

__all__ = [
    "CommGlassoError",
    "Dataset",
    "Decomposition",
    "GroundTruth",
    "LabelVector",
    "RegressionFit",
    "SignMode",
    "SolveReport",
    "TuningParams",
    "WeightMatrix",
    "available_backends",
    "default_backend",
    "empirical_covariance",
    "fit_ols",
    "solve",
    "__version__",
]
