"""Closed-form clipping-distortion statistics under a Rayleigh magnitude model.

With unit-energy symbols and a unitary IDFT each time sample is
approximately CN(0, 1), so ``|x|`` is Rayleigh with scale ``1/sqrt(2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx

SIGMA_ABS_X = 1.0 / np.sqrt(2.0)


def _check(sigma_abs_x: float, gamma: float) -> None:
    if not (np.isfinite(sigma_abs_x) and np.isfinite(gamma)):
        raise ValueError("non-finite input")
    if sigma_abs_x <= 0 or gamma < 0:
        raise ValueError("need sigma_abs_x > 0 and gamma >= 0")


def expected_clip_energy(sigma_abs_x: float, gamma: float) -> float:
    """``E[|c|^2]`` for one clipped sample (``|c| = |x| - gamma`` given ``|x| > gamma``).

    The ``exp(g^2/2s^2) * erfc(g/(sqrt(2)s))`` product is evaluated as a
    single ``erfcx`` call so large clipping levels neither overflow nor
    lose precision.
    """
    _check(sigma_abs_x, gamma)
    s = sigma_abs_x
    t = gamma / (np.sqrt(2.0) * s)
    return float(2 * s**2 - 2 * np.sqrt(np.pi / 2) * gamma * s * erfcx(t))


def tail_probability(sigma_abs_x: float, gamma: float) -> float:
    """``Pr(|x| > gamma)`` for Rayleigh ``|x|``."""
    _check(sigma_abs_x, gamma)
    return float(np.exp(-gamma**2 / (2 * sigma_abs_x**2)))


def expected_support(n: int, sigma_abs_x: float, gamma: float) -> float:
    return n * tail_probability(sigma_abs_x, gamma)


def support_variance(n: int, sigma_abs_x: float, gamma: float) -> float:
    """Binomial variance of the clipped-sample count (diagnostic only)."""
    p = tail_probability(sigma_abs_x, gamma)
    return n * p * (1 - p)


def sigma_c2(sigma_abs_x: float, gamma: float) -> float:
    """Per-tone variance of the clipping spectrum, ``E[|c|^2] E[|I_c|] / N``."""
    return expected_clip_energy(sigma_abs_x, gamma) * tail_probability(sigma_abs_x, gamma)


def sigma_d2(sigma_c2: float, sigma_z2: float, lambda_k) -> np.ndarray | float:
    """Total per-tone distortion variance ``sigma_C^2 + sigma_Z^2 / |lambda|^2``."""
    g2 = np.abs(np.asarray(lambda_k)) ** 2
    if np.any(g2 == 0):
        raise ValueError("zero channel gain")
    out = sigma_c2 + sigma_z2 / g2
    return float(out) if np.ndim(out) == 0 else out


def density_d(sigma_d2: float, z) -> np.ndarray | float:
    """Circular complex Gaussian density with ``E|D|^2 = sigma_d2``."""
    if sigma_d2 <= 0:
        raise ValueError("sigma_d2 must be positive")
    return np.exp(-np.abs(z) ** 2 / sigma_d2) / (np.pi * sigma_d2)


def radial_cdf(sigma_d2: float, r) -> np.ndarray | float:
    """``Pr(|D| <= r) = 1 - exp(-r^2 / sigma_d2)``."""
    if sigma_d2 <= 0:
        raise ValueError("sigma_d2 must be positive")
    return -np.expm1(-np.asarray(r, dtype=float) ** 2 / sigma_d2)


@dataclass(frozen=True)
class DistortionStats:
    sigma_abs_x: float
    gamma: float
    e_c2: float
    e_supp: float
    sigma_c2: float
    per_tone_sigma_d2: np.ndarray


def distortion_stats(n: int, gamma: float, sigma_z2: float, gains,
                     sigma_abs_x: float = SIGMA_ABS_X) -> DistortionStats:
    e_c2 = expected_clip_energy(sigma_abs_x, gamma)
    e_supp = expected_support(n, sigma_abs_x, gamma)
    sc2 = e_c2 * e_supp / n
    return DistortionStats(sigma_abs_x=sigma_abs_x, gamma=gamma, e_c2=e_c2,
                           e_supp=e_supp, sigma_c2=sc2,
                           per_tone_sigma_d2=np.asarray(sigma_d2(sc2, sigma_z2, gains)))
