"""Negative-rate recursion and closed-form noise calibration.

With i.i.d. gains A_j ~ N(omega, sigma^2) the probability that a scalar
chain X_j = f(A_j X_{j-1}) started at x0 > 0 is negative at depth j is

    pi_j = (1 - (1 - 2 p_neg)^j) / 2,   p_neg = Phi(-omega / sigma),

which inverts to sigma* = -omega / Phi^{-1}((1 - (1 - 2p)^{1/L}) / 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .special import norm_cdf, norm_ppf

LR_LOW_FACTOR = 1e-5
LR_HIGH_FACTOR = 1e-3


def sign_flip_probability(sigma, omega):
    """P(A < 0) for A ~ N(omega, sigma^2); zero when sigma == 0."""
    sigma = np.asarray(sigma, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(sigma > 0, norm_cdf(-omega / np.where(sigma > 0, sigma, 1.0)), 0.0)
    return out if out.ndim else float(out)


def negative_rate(sigma, depth: int, omega: float):
    """pi_depth(sigma); accepts an array of sigmas."""
    if depth < 1:
        raise DomainError("depth must be a positive integer")
    if np.any(np.asarray(sigma) < 0):
        raise DomainError("sigma must be nonnegative")
    p_neg = np.asarray(sign_flip_probability(sigma, omega))
    # (1 - 2p)^L through log1p/expm1 so that tiny p at large L is not lost.
    out = -0.5 * np.expm1(depth * np.log1p(-2.0 * p_neg))
    return out if out.ndim else float(out)


def negative_rate_curve(sigma: float, depth: int, omega: float) -> np.ndarray:
    """pi_1 .. pi_depth."""
    p_neg = sign_flip_probability(sigma, omega)
    j = np.arange(1, depth + 1)
    return -0.5 * np.expm1(j * math.log1p(-2.0 * p_neg))


def sigma_star(p: float, depth: int, omega: float) -> float:
    """Unique sigma with negative_rate(sigma, depth, omega) == p."""
    if not (0.0 <= p < 0.5):
        raise DomainError("p must be in [0, 0.5)")
    if depth < 1:
        raise DomainError("depth must be a positive integer")
    if not omega > 0:
        raise DomainError("omega must be positive")
    if p == 0.0:
        return 0.0
    q = -0.5 * math.expm1(math.log1p(-2.0 * p) / depth)
    return -omega / norm_ppf(q)


def lr_band(omega: float) -> tuple[float, float]:
    if not omega > 0:
        raise DomainError("omega must be positive")
    return LR_LOW_FACTOR * omega, LR_HIGH_FACTOR * omega


@dataclass(frozen=True)
class CalibrationResult:
    p_target: float
    depth_L: int
    omega: float
    sigma_star: float
    lr_band: tuple[float, float]

    def to_dict(self):
        return {
            "sigma_star": self.sigma_star,
            "lr_low": self.lr_band[0],
            "lr_high": self.lr_band[1],
            "omega": self.omega,
            "p": self.p_target,
            "depth": self.depth_L,
        }


def calibrate(p: float, depth: int, omega: float) -> CalibrationResult:
    return CalibrationResult(p, depth, omega, sigma_star(p, depth, omega), lr_band(omega))
