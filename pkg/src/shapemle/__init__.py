"""Shape-constrained maximum-likelihood estimation of densities and tail inflation functions.

Three estimation problems share one active-set solver: log-concave
densities on the line, convex log-density ratios against ``N(0, 1)``,
and convex nondecreasing log-density ratios against ``Gamma(alpha, beta)``.
"""

from .data import Kind, Setting, SolverConfig, WeightedSample, ingest, read_csv
from .errors import (
    DegenerateSample,
    EmptyCandidates,
    FactorizationFailure,
    InvalidEnvelope,
    InvalidInput,
    IterationCap,
    NoProgress,
    NonIntegrable,
    Overflow,
    ShapeMLEError,
)
from .objective import Objective, cdf, directional_kink, kink_eval, loglik, mean
from .simulate import (
    RngStream,
    example_2b,
    gauss_sample,
    sample_piecewise_logaffine,
    simulate_2a,
    simulate_2b,
)
from .solver import CertificateReport, FitResult, certify, fit, new_knot
from .spline import ActiveModel, SplineParams, evaluate, integral, localized_kink, normalize

__all__ = [
    "ActiveModel", "CertificateReport", "DegenerateSample", "EmptyCandidates",
    "FactorizationFailure", "FitResult", "InvalidEnvelope", "InvalidInput",
    "IterationCap", "Kind", "NoProgress", "NonIntegrable", "Objective", "Overflow",
    "RngStream", "Setting", "ShapeMLEError", "SolverConfig", "SplineParams",
    "WeightedSample", "cdf", "certify", "directional_kink", "evaluate", "example_2b",
    "fit", "gauss_sample", "ingest", "integral", "kink_eval", "localized_kink",
    "loglik", "mean", "new_knot", "normalize", "read_csv", "sample_piecewise_logaffine",
    "simulate_2a", "simulate_2b",
]

__version__ = "0.1.0"
