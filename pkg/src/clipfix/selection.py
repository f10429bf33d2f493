"""Tone-subset selection and cardinality rules."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

CONVENTIONS = ("literal", "unit")


@dataclass(frozen=True)
class ToneSet:
    indices: np.ndarray
    n: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.intp)
        if idx.size and (idx.min() < 0 or idx.max() >= self.n):
            raise ValueError("tone index out of range")
        if np.unique(idx).size != idx.size:
            raise ValueError("duplicate tones")
        object.__setattr__(self, "indices", np.sort(idx))

    @property
    def m(self) -> int:
        return int(self.indices.size)

    def __len__(self) -> int:
        return self.m


def top_m(scores, m: int) -> ToneSet:
    """Indices of the ``m`` largest scores; ties prefer the lower index."""
    scores = np.asarray(scores, dtype=float)
    n = scores.size
    if not 0 <= m <= n:
        raise ValueError(f"cannot select {m} of {n} tones")
    # stable sort on -score keeps equal scores in index order
    order = np.argsort(-scores, kind="stable")
    return ToneSet(order[:m], n)


def q_function(x):
    return ndtr(-np.asarray(x, dtype=float))


def _check_ro(r_o: float, d_min: float) -> None:
    if not 0 < r_o < d_min / 2:
        raise ValueError(f"r_o={r_o} must lie in (0, d_min/2)")


def disk_ratio(r_o: float, d_min: float, sigma_d2: float, convention: str = "literal") -> float:
    """Per-tone lower bound on ``Pr(correct | |perturbation| < r_o)``.

    ``literal`` is the closed form as usually written, with ``2 sigma^2`` denominators;
    ``unit`` evaluates the preceding sector-bound expression with the
    ``E|D|^2 = sigma_d2`` radial CDF.
    """
    _check_ro(r_o, d_min)
    leak_angle = 8.0 / np.pi * np.arcsin(r_o / d_min)
    if convention == "literal":
        f = -np.expm1(-r_o**2 / (2 * sigma_d2))
        leak = leak_angle * np.sinh(r_o * d_min / sigma_d2) * np.exp(-(d_min**2 + r_o**2) / (2 * sigma_d2))
    elif convention == "unit":
        f = -np.expm1(-r_o**2 / sigma_d2)
        shell = np.exp(-(d_min - r_o) ** 2 / sigma_d2) - np.exp(-(d_min + r_o) ** 2 / sigma_d2)
        leak = leak_angle * shell
    else:
        raise ValueError(f"unknown convention {convention!r}")
    return float(f / (f + leak))


def square_ratio(r_o: float, d_min: float, sigma_d2: float, convention: str = "literal") -> float:
    """Per-tone ratio for square-confined perturbations of half-side ``r_o``.

    ``literal`` feeds ``sigma_D`` straight to the Q-functions; ``unit`` uses
    the per-axis deviation ``sqrt(sigma_d2 / 2)``.  The leakage term counts
    the four diagonal neighbours only, so this is an approximation and can
    exceed the true confined rate.
    """
    _check_ro(r_o, d_min)
    if convention == "literal":
        s = np.sqrt(sigma_d2)
    elif convention == "unit":
        s = np.sqrt(sigma_d2 / 2)
    else:
        raise ValueError(f"unknown convention {convention!r}")
    home = (1 - 2 * q_function(r_o / s)) ** 2
    leak = 4 * (q_function((d_min - r_o) / s) - q_function((d_min + r_o) / s)) ** 2
    return float(home / (home + leak))


def prob_all_correct_disk(r_o, d_min, sigma_d2, m: int, convention: str = "literal") -> float:
    if m < 0:
        raise ValueError("m must be nonnegative")
    return disk_ratio(r_o, d_min, sigma_d2, convention) ** m


def prob_all_correct_square(r_o, d_min, sigma_d2, m: int, convention: str = "literal") -> float:
    if m < 0:
        raise ValueError("m must be nonnegative")
    return square_ratio(r_o, d_min, sigma_d2, convention) ** m


def gamma_cardinality(expected_support: float, n: int, kappa: float = 2.0) -> int:
    """CS sample-size floor ``ceil(kappa k ln(N/k))`` for expected sparsity ``k``."""
    k = float(expected_support)
    if k <= 0:
        return 0
    if k >= n:
        return n
    return min(n, int(math.ceil(kappa * k * math.log(n / k))))


def tau_cardinality(tau: float, d_min: float, sigma_d2: float, radii=None, r_o: float | None = None,
                    bound: str = "disk", convention: str = "literal") -> int:
    """Largest ``m`` whose bound stays at or above ``tau``.

    With ``radii`` (observed perturbation magnitudes) the disk radius tracks
    the data: for each ``m`` it is the ``m``-th smallest radius.  Otherwise a
    fixed ``r_o`` is used.
    """
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    ratio_fn = disk_ratio if bound == "disk" else square_ratio
    if radii is None:
        if r_o is None:
            raise ValueError("need radii or r_o")
        p = ratio_fn(r_o, d_min, sigma_d2, convention)
        if p >= 1.0:
            return np.iinfo(np.int64).max
        return int(math.floor(math.log(tau) / math.log(p))) if p > 0 else 0
    rs = np.sort(np.asarray(radii, dtype=float))
    cap = np.nextafter(d_min / 2, 0)
    best = 0
    for m in range(1, rs.size + 1):
        ro = min(max(rs[m - 1], 1e-12 * d_min), cap)
        if ratio_fn(ro, d_min, sigma_d2, convention) ** m >= tau:
            best = m
    return best


def choose_cardinality(tau: float, expected_support: float, n: int, d_min: float, sigma_d2: float,
                       radii=None, r_o: float | None = None, kappa: float = 2.0,
                       bound: str = "disk", convention: str = "literal") -> tuple[int, int, int]:
    """``(m, m_tau, m_gamma)`` with ``m = max(m_tau, m_gamma)`` capped at ``n``."""
    m_gamma = gamma_cardinality(expected_support, n, kappa)
    m_tau = tau_cardinality(tau, d_min, sigma_d2, radii=radii, r_o=r_o, bound=bound,
                            convention=convention)
    return min(n, max(m_tau, m_gamma)), m_tau, m_gamma
