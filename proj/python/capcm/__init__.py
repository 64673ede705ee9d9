"""Capillary Christoffel-Minkowski solver on spherical caps."""

from ._capcm import (
    CapDomain,
    ConfigError,
    ContinuationStall,
    ConvexityError,
    EllipticityError,
    Error,
    HypothesisError,
    InvalidArgument,
    NewtonError,
    af_margin,
    elementary_symmetric,
    ell,
    format_double,
    forward,
    in_gamma_k,
    lambda_min,
    manufactured,
    minkowski_ratio,
    newton_tensor,
    reconstruct,
    run,
    sigma_k,
    solve,
    translation_point,
)

EXIT_OK, EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_STALL = 0, 1, 2, 3

__all__ = [name for name in dir() if not name.startswith("_")]
