"""Data-driven dissipativity certificates for discrete-time LTI systems."""
from .certify import (PreconditionError, Verdict, certify_nominal, certify_robust,
                      certify_robust_square, estimate_nominal, estimate_robust,
                      estimate_robust_square)
from .data import (DataMatrices, NoiseModel, Trajectory, ball_noise, build_matrices,
                   rank_condition)
from .model import Kind, LtiSystem, kyp_check, random_system, simulate, true_gain, true_shortage
from .supply import (SupplyFamily, SupplyRate, generic, l2_gain, l2_gain_family, passivity,
                     shortage, shortage_family)

__all__ = [
    "PreconditionError", "Verdict", "certify_nominal", "certify_robust",
    "certify_robust_square", "estimate_nominal", "estimate_robust", "estimate_robust_square",
    "DataMatrices", "NoiseModel", "Trajectory", "ball_noise", "build_matrices",
    "rank_condition", "Kind", "LtiSystem", "kyp_check", "random_system", "simulate",
    "true_gain", "true_shortage", "SupplyFamily", "SupplyRate", "generic", "l2_gain",
    "l2_gain_family", "passivity", "shortage", "shortage_family",
]
__version__ = "0.1.0"
