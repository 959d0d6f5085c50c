"""Finite-key security analysis, attack simulation and key audits for a
plug-and-play BB84 QKD system."""

from .keyrate import (
    BoundBreakdown,
    ChannelParams,
    DomainError,
    SecurityEpsilons,
    asymptotic_key_bound,
    binary_entropy,
    channel_single_photon_fraction,
    corrected_error_rate,
    detection_prob,
    finite_key_bound,
    leak_ec_fraction,
    multi_photon_prob,
    single_photon_fraction,
)
from .optimizer import CurvePoint, OptimizationResult, bound_curve, optimize_epsilons

__all__ = [
    "BoundBreakdown", "ChannelParams", "DomainError", "SecurityEpsilons",
    "asymptotic_key_bound", "binary_entropy", "channel_single_photon_fraction",
    "corrected_error_rate", "detection_prob", "finite_key_bound", "leak_ec_fraction",
    "multi_photon_prob", "single_photon_fraction",
    "CurvePoint", "OptimizationResult", "bound_curve", "optimize_epsilons",
]

__version__ = "0.1.0"
