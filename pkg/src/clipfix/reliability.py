"""Per-tone decision reliability and the convexity-transition analysis.

Every criterion is evaluated as a log-reliability.  Tone selection only
needs the ordering, and the linear-domain quantities (``alpha`` in
particular) overflow long before the orderings become uninformative.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .qam import Constellation

RHO_FLOOR = 1e-300


class Criterion(str, enum.Enum):
    EXACT = "exact"
    TRUNC = "trunc"
    QUADRANT = "quadrant"
    CIRCLE = "circle"
    SQUARE = "square"
    LEAF = "leaf"
    ADAPTIVE = "adaptive"
    RANDOM = "random"


class RegimeError(ValueError):
    """Distortion too large for the convexity-transition analysis."""


@dataclass(frozen=True)
class Perturbation:
    r: np.ndarray
    theta: np.ndarray


@dataclass(frozen=True)
class ReliabilityScores:
    criterion: Criterion
    scores: np.ndarray
    mu: float = 1.0
    log_domain: bool = True


def perturbation(const: Constellation, xhat) -> Perturbation:
    """Magnitude and first-quadrant-folded phase of ``xhat - <xhat>``."""
    delta = np.asarray(xhat, dtype=complex) - const.decide(xhat)
    return Perturbation(r=np.abs(delta), theta=np.arctan2(np.abs(delta.imag), np.abs(delta.real)))


def log_density(sigma_d2, r):
    sigma_d2 = np.asarray(sigma_d2, dtype=float)
    return -np.log(np.pi * sigma_d2) - np.asarray(r, dtype=float) ** 2 / sigma_d2


# --- scalar criteria as functions of (r, theta) ---------------------------------

def log_r_trunc(r, theta, d_min, sigma_d2):
    """Log of the four-point closed form
    ``(beta [alpha^cos + alpha^sin + beta alpha^(cos+sin)])^-1``.
    """
    r, theta, sigma_d2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r, theta, sigma_d2)))
    la = 2.0 * d_min * r / sigma_d2
    lb = -d_min**2 / sigma_d2
    c, s = np.cos(theta), np.sin(theta)
    terms = np.stack([la * c, la * s, lb + la * (c + s)])
    return -lb - logsumexp(terms, axis=0)


def r_trunc(r, theta, d_min, sigma_d2):
    return np.exp(log_r_trunc(r, theta, d_min, sigma_d2))


def competitor_distances(r, theta, d_min):
    """Distances to the three competing points of the local four-point cell."""
    c, s = np.cos(theta), np.sin(theta)
    r1 = np.sqrt(r**2 - 2 * r * d_min * c + d_min**2)
    r2 = np.sqrt(r**2 - 2 * r * d_min * (c + s) + 2 * d_min**2)
    r3 = np.sqrt(r**2 - 2 * r * d_min * s + d_min**2)
    return r1, r2, r3


def log_r_circle(r, sigma_d2):
    return log_density(sigma_d2, r)


def log_r_square(r, theta, sigma_d2):
    cheb = np.asarray(r) * np.maximum(np.cos(theta), np.sin(theta))
    return log_density(sigma_d2, cheb)


def leaf_shape(theta, mu):
    if not 0.5 <= mu <= 1.0:
        raise ValueError(f"leaf parameter mu={mu} outside [1/2, 1]")
    return mu + (1.0 - mu) * np.cos(4.0 * np.asarray(theta) + np.pi)


def log_r_leaf(r, theta, sigma_d2, mu):
    return log_density(sigma_d2, r) + np.log(np.maximum(leaf_shape(theta, mu), RHO_FLOOR))


def r_circle(r, sigma_d2):
    return np.exp(log_r_circle(r, sigma_d2))


def r_square(r, theta, sigma_d2):
    return np.exp(log_r_square(r, theta, sigma_d2))


def r_leaf(r, theta, sigma_d2, mu):
    return np.exp(log_r_leaf(r, theta, sigma_d2, mu))


# --- criteria acting on equalized observations --------------------------------

def log_r_exact(const: Constellation, xhat, sigma_d2):
    """Log of ``f_D(xhat - <xhat>) / sum_{A != <xhat>} f_D(xhat - A)``."""
    xhat = np.atleast_1d(np.asarray(xhat, dtype=complex))
    sigma_d2 = np.broadcast_to(np.asarray(sigma_d2, dtype=float), xhat.shape)
    _, idx = const.nearest(xhat)
    d2 = np.abs(xhat[:, None] - const.points[None, :]) ** 2
    e = -d2 / sigma_d2[:, None]
    num = e[np.arange(xhat.size), idx]
    e[np.arange(xhat.size), idx] = -np.inf
    return num - logsumexp(e, axis=1)


def r_exact(const: Constellation, xhat, sigma_d2):
    return np.exp(log_r_exact(const, xhat, sigma_d2))


def _neighbor_table(const: Constellation) -> np.ndarray:
    table = np.full((const.order, 8), -1, dtype=np.intp)
    for i in range(const.order):
        nn, nnn = const.neighbor_indices(i)
        both = np.concatenate([nn, nnn])
        table[i, : both.size] = both
    return table


_TABLES: dict[int, np.ndarray] = {}


def neighbor_table(const: Constellation) -> np.ndarray:
    if const.order not in _TABLES:
        _TABLES[const.order] = _neighbor_table(const)
    return _TABLES[const.order]


def log_r_first_tier(const: Constellation, xhat, sigma_d2):
    """Exact reliability truncated to the NN and NNN of the decision.

    Neighbors missing at the constellation edge are dropped.
    """
    xhat = np.atleast_1d(np.asarray(xhat, dtype=complex))
    sigma_d2 = np.broadcast_to(np.asarray(sigma_d2, dtype=float), xhat.shape)
    p, idx = const.nearest(xhat)
    nb = neighbor_table(const)[idx]
    d2 = np.abs(xhat[:, None] - const.points[np.maximum(nb, 0)]) ** 2
    e = np.where(nb >= 0, -d2 / sigma_d2[:, None], -np.inf)
    return -np.abs(xhat - p) ** 2 / sigma_d2 - logsumexp(e, axis=1)


def log_r_quadrant(const: Constellation, xhat, sigma_d2):
    """Four-point closed form evaluated on the competitors that exist.

    Interior decisions reproduce :func:`log_r_trunc` exactly; at edges the
    absent competitors leave the denominator.
    """
    xhat = np.atleast_1d(np.asarray(xhat, dtype=complex))
    sigma_d2 = np.broadcast_to(np.asarray(sigma_d2, dtype=float), xhat.shape)
    p, idx = const.nearest(xhat)
    delta = xhat - p
    side = const.grid_side
    ix, iy = np.divmod(idx, side)
    sx = np.where(delta.real >= 0, 1, -1)
    sy = np.where(delta.imag >= 0, 1, -1)
    okx = (ix + sx >= 0) & (ix + sx < side)
    oky = (iy + sy >= 0) & (iy + sy < side)
    d = const.d_min
    a = np.abs(delta.real)
    b = np.abs(delta.imag)
    r2 = a**2 + b**2
    e1 = -((a - d) ** 2 + b**2) / sigma_d2
    e3 = -(a**2 + (b - d) ** 2) / sigma_d2
    e2 = -((a - d) ** 2 + (b - d) ** 2) / sigma_d2
    terms = np.stack([np.where(okx, e1, -np.inf), np.where(okx & oky, e2, -np.inf),
                      np.where(oky, e3, -np.inf)])
    denom = logsumexp(terms, axis=0)
    out = -r2 / sigma_d2 - denom
    lone = ~(okx | oky)
    if np.any(lone):
        # outward perturbation at a corner: no competitor in its quadrant
        out[lone] = log_r_first_tier(const, xhat[lone], sigma_d2[lone])
    return out


def score_tones(const: Constellation, xhat, sigma_d2, criterion: Criterion | str,
                mu: float = 0.95, severe: bool = False,
                rng: np.random.Generator | None = None) -> ReliabilityScores:
    """Log-reliability of every tone under ``criterion``.

    ``adaptive`` follows the two-regime recipe: under severe clipping the
    four-point closed form, otherwise the circle below the transition
    radius and the leaf above it.
    """
    crit = Criterion(criterion)
    xhat = np.atleast_1d(np.asarray(xhat, dtype=complex))
    sigma_d2 = np.broadcast_to(np.asarray(sigma_d2, dtype=float), xhat.shape)
    if crit is Criterion.RANDOM:
        if rng is None:
            raise ValueError("random selection needs an rng")
        return ReliabilityScores(crit, rng.random(xhat.size), mu)
    if crit is Criterion.EXACT:
        s = log_r_exact(const, xhat, sigma_d2)
    elif crit is Criterion.TRUNC:
        s = log_r_first_tier(const, xhat, sigma_d2)
    elif crit is Criterion.QUADRANT:
        s = log_r_quadrant(const, xhat, sigma_d2)
    else:
        pt = perturbation(const, xhat)
        if crit is Criterion.CIRCLE:
            s = log_r_circle(pt.r, sigma_d2)
        elif crit is Criterion.SQUARE:
            s = log_r_square(pt.r, pt.theta, sigma_d2)
        elif crit is Criterion.LEAF:
            s = log_r_leaf(pt.r, pt.theta, sigma_d2, mu)
        elif severe:
            s = log_r_quadrant(const, xhat, sigma_d2)
        else:
            mild = pt.r < r_tilde_approx(const.d_min, sigma_d2)
            s = np.where(mild, log_r_circle(pt.r, sigma_d2),
                         log_r_leaf(pt.r, pt.theta, sigma_d2, mu))
    return ReliabilityScores(crit, np.asarray(s, dtype=float), mu)


# --- convexity transition --------------------------------------------------------

def d2_r_trunc_dtheta2(r, theta, d_min, sigma_d2):
    """Second derivative of the four-point closed form with respect to theta.

    With ``R = 1/(beta g)`` and ``g = a^cos + a^sin + beta a^(cos+sin)``,
    ``R'' = (2 g'^2 / g^3 - g'' / g^2) / beta``.  Exponentials are shifted by
    their maximum so small ``sigma_d2`` stays finite.
    """
    r, theta, sigma_d2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r, theta, sigma_d2)))
    L = 2.0 * d_min * r / sigma_d2
    lb = -d_min**2 / sigma_d2
    c, s = np.cos(theta), np.sin(theta)
    ex = np.stack([L * c, L * s, lb + L * (c + s)])
    d1 = np.stack([-L * s, L * c, L * (c - s)])
    d2 = np.stack([-L * c, -L * s, -L * (c + s)])
    emax = ex.max(axis=0)
    w = np.exp(ex - emax)
    g = w.sum(axis=0)
    g1 = (d1 * w).sum(axis=0)
    g2 = ((d2 + d1**2) * w).sum(axis=0)
    return np.exp(-lb - emax) * (2 * g1**2 / g**3 - g2 / g**2)


def lambert_w0(y: float, tol: float = 1e-15, max_iter: int = 100) -> float:
    """Principal branch of Lambert W for real ``y >= -1/e``.

    Newton's method on ``x e^x - y`` from a branch-point series or log
    asymptote start; a bisection step replaces any Newton step that leaves
    the bracket.
    """
    y = float(y)
    branch = -np.exp(-1.0)
    if not np.isfinite(y):
        raise ValueError("non-finite argument")
    if y < branch:
        if y > branch - 1e-15:
            return -1.0
        raise ValueError(f"W0 undefined for y={y} < -1/e")
    if y == 0.0:
        return 0.0
    if y == branch:
        return -1.0
    if y < 0:
        p = np.sqrt(2.0 * (np.e * y + 1.0))
        x = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
        lo, hi = -1.0, 0.0
    else:
        x = np.log1p(y) if y < 3 else np.log(y) - np.log(np.log(y))
        lo, hi = 0.0, max(1.0, np.log(y) + 1.0)
    x = min(max(x, lo), hi)
    for _ in range(max_iter):
        ex = np.exp(x)
        f = x * ex - y
        if f == 0.0:
            return x
        if f > 0:
            hi = x
        else:
            lo = x
        fp = ex * (1.0 + x)
        step = f / fp if fp != 0 else np.inf
        xn = x - step
        if not lo <= xn <= hi:
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= tol * max(1.0, abs(x)) or hi - lo <= tol:
            return xn
        x = xn
    return x


def r_tilde_approx(d_min, sigma_d2):
    return np.sqrt(2.0) / 2.0 * np.asarray(sigma_d2) / d_min


def r_tilde(d_min: float, sigma_d2: float) -> tuple[float, float]:
    """Transition radius where the reliability turns concave in theta at pi/4.

    Returns ``(exact, approx)``; the exact root comes from ``W0`` and is
    defined while ``d_min^2 / sigma_d2 >= 2``.
    """
    arg = -np.exp(1.0 - d_min**2 / sigma_d2)
    if arg < -np.exp(-1.0):
        raise RegimeError(f"sigma_d2={sigma_d2} too large for d_min={d_min}")
    w = lambert_w0(arg)
    exact = -np.sqrt(2.0) * sigma_d2 / (2.0 * d_min) * (w - 1.0)
    return float(exact), float(r_tilde_approx(d_min, sigma_d2))


def transition_residual(r, d_min, sigma_d2):
    """Left side of the transition equation; zero at the transition radius."""
    u = np.sqrt(2.0) * d_min * np.asarray(r) / sigma_d2
    return u - np.exp(u - d_min**2 / sigma_d2) - 1.0
