"""Sparse recovery of the time-domain clipping signal from partial-DFT differences.

Both blind solvers use the phase prior: at a clipped sample the clipping
signal points opposite the received clipped sample, so only the real,
nonnegative magnitudes ``a`` are unknown and ``c = -exp(j theta) a``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .ofdm import dft, idft
from .selection import ToneSet

WEIGHT_FLOOR = 1e-6


class Method(str, enum.Enum):
    WPAL = "wpal"
    PABMP = "pabmp"
    ORACLE_LS = "oracle_ls"


@dataclass(frozen=True)
class CsProblem:
    tones: ToneSet
    observations: np.ndarray
    phase_hints: np.ndarray
    weights: np.ndarray
    noise_var: np.ndarray

    def __post_init__(self):
        m = self.tones.m
        if self.observations.shape != (m,) or self.noise_var.shape != (m,):
            raise ValueError("observations and noise variances must match the tone set")
        if self.phase_hints.shape != (self.n,) or self.weights.shape != (self.n,):
            raise ValueError("phase hints and weights must have length N")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")

    @property
    def n(self) -> int:
        return self.tones.n

    @property
    def m(self) -> int:
        return self.tones.m

    @property
    def rotation(self) -> np.ndarray:
        """Unit phasors ``-exp(j theta)`` applied to the magnitudes."""
        return -np.exp(1j * self.phase_hints)

    def sensing_matrix(self) -> np.ndarray:
        return partial_dft_matrix(self.tones)

    def phased_matrix(self) -> np.ndarray:
        return self.sensing_matrix() * self.rotation[None, :]


@dataclass
class RecoveryResult:
    c_hat: np.ndarray
    support: np.ndarray
    iterations: int
    residual_norm: float
    method: Method
    converged: bool = True
    info: dict = field(default_factory=dict)


def make_problem(tones: ToneSet, observations, clipped_time_hat, gamma: float,
                 noise_var, weight_floor: float = WEIGHT_FLOOR) -> CsProblem:
    """Assemble a problem from receiver-side quantities.

    Weights are ``||x_hat| - gamma|`` floored at ``weight_floor * gamma``.
    """
    xt = np.asarray(clipped_time_hat, dtype=complex)
    w = np.maximum(np.abs(np.abs(xt) - gamma), weight_floor * gamma)
    return CsProblem(tones=tones, observations=np.asarray(observations, dtype=complex),
                     phase_hints=np.angle(xt), weights=w,
                     noise_var=np.broadcast_to(np.asarray(noise_var, dtype=float), (tones.m,)).copy())


# --- partial DFT ---------------------------------------------------------------

def partial_dft_apply(v, tones: ToneSet) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    if v.size != tones.n:
        raise ValueError(f"vector length {v.size} does not match N={tones.n}")
    return dft(v)[tones.indices]


def partial_dft_adjoint(u, tones: ToneSet) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.size != tones.m:
        raise ValueError(f"vector length {u.size} does not match m={tones.m}")
    full = np.zeros(tones.n, dtype=complex)
    full[tones.indices] = u
    return idft(full)


def partial_dft_matrix(tones: ToneSet) -> np.ndarray:
    n = tones.n
    return np.exp(-2j * np.pi * np.outer(tones.indices, np.arange(n)) / n) / np.sqrt(n)


def default_epsilon(noise_var) -> float:
    """High-probability bound on the measurement-noise energy."""
    v = np.asarray(noise_var, dtype=float)
    m = v.size
    return float(m * np.median(v) * (1 + 2 * np.sqrt(2.0 / m)))


def _real_system(p: CsProblem):
    A = p.phased_matrix()
    return np.vstack([A.real, A.imag]), np.concatenate([p.observations.real, p.observations.imag])


# --- WPAL ------------------------------------------------------------------------

def _lagrangian(Ar, yr, a, thr):
    res = yr - Ar @ a
    return 0.5 * float(res @ res) + float(thr @ a)


def _nn_lasso(Ar, yr, thr, a0, tol, max_iter):
    """Monotone FISTA for ``min_{a>=0} 1/2||yr - Ar a||^2 + thr . a``, unit step."""
    a = a0.copy()
    z = a.copy()
    t = 1.0
    f_a = _lagrangian(Ar, yr, a, thr)
    history = [f_a]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g = Ar.T @ (yr - Ar @ z)
        u = np.maximum(z + g - thr, 0.0)
        f_u = _lagrangian(Ar, yr, u, thr)
        t_next = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        accepted = f_u <= f_a
        a_next, f_next = (u, f_u) if accepted else (a, f_a)
        z = a_next + (t / t_next) * (u - a_next) + ((t - 1) / t_next) * (a_next - a)
        step = float(np.max(np.abs(u - a))) if a.size else 0.0
        a, f_a, t = a_next, f_next, t_next
        history.append(f_a)
        if accepted and step <= tol * max(1.0, float(np.max(a, initial=0.0))):
            converged = True
            break
    return a, it, converged, history


def wpal(p: CsProblem, epsilon: float | None = None, max_iter: int = 20000,
         tol: float = 1e-12, bisect_steps: int = 30, shrink: float = 0.3,
         rel_gap: float = 0.05) -> RecoveryResult:
    """Weighted phase-augmented LASSO.

    Solves ``min_{a>=0} 1/2||y - Psi Theta a||^2 + sigma w.a`` and adjusts
    ``sigma`` by bisection so that the residual energy meets ``epsilon`` from
    below.  The unit step is valid because ``Psi`` has orthonormal rows.
    """
    if epsilon is None:
        epsilon = default_epsilon(p.noise_var)
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    Ar, yr = _real_system(p)
    n = p.n
    w = p.weights
    zero = np.zeros(n)
    if float(yr @ yr) <= epsilon:
        return RecoveryResult(np.zeros(n, dtype=complex), np.array([], dtype=np.intp), 0,
                              float(np.sqrt(yr @ yr)), Method.WPAL, True,
                              {"sigma": math.inf, "epsilon": epsilon, "history": [0.5 * float(yr @ yr)]})
    sig_hi = float(np.max((Ar.T @ yr) / w))
    total_it = 0

    def solve(sig, start, tol_):
        nonlocal total_it
        a, it, conv, hist = _nn_lasso(Ar, yr, sig * w, start, tol_, max_iter)
        total_it += it
        r = yr - Ar @ a
        return a, float(r @ r), conv, hist

    # continuation: shrink sigma from the all-zero level until feasible
    hi, a_hi = sig_hi, zero
    best = None
    sig = sig_hi
    while sig > sig_hi * 1e-14:
        sig *= shrink
        a, res, conv, hist = solve(sig, a_hi, 1e-8)
        if res <= epsilon:
            best = (sig, a, res, conv, hist)
            break
        hi, a_hi = sig, a
    if best is None:
        best = (sig, a, res, conv, hist)
    else:
        lo = best[0]
        for _ in range(bisect_steps):
            if best[2] >= epsilon * (1 - rel_gap) or hi / lo < 1 + 1e-9:
                break
            mid = math.sqrt(lo * hi)
            a, res, conv, hist = solve(mid, a_hi, 1e-8)
            if res <= epsilon:
                lo = mid
                best = (mid, a, res, conv, hist)
            else:
                hi, a_hi = mid, a
    sig, a, _, _, _ = best
    a, res, conv, hist = solve(sig, a, tol)
    rot = p.rotation
    supp = np.flatnonzero(a > 0)
    c_hat = np.zeros(n, dtype=complex)
    c_hat[supp] = rot[supp] * a[supp]
    return RecoveryResult(c_hat, supp, total_it, math.sqrt(res), Method.WPAL,
                          conv and res <= epsilon,
                          {"sigma": sig, "epsilon": epsilon, "magnitudes": a, "history": hist})


def wpal_kkt_violation(p: CsProblem, result: RecoveryResult) -> float:
    """Largest violation of the nonnegative weighted-LASSO optimality conditions."""
    sig = result.info["sigma"]
    if not math.isfinite(sig):
        # zero already meets the residual constraint; nothing to certify
        return 0.0
    a = result.info["magnitudes"]
    Ar, yr = _real_system(p)
    g = Ar.T @ (yr - Ar @ a)
    thr = sig * p.weights
    active = a > 0
    v_act = np.abs(g[active] - thr[active])
    v_in = np.maximum(g[~active] - thr[~active], 0.0)
    return float(max(v_act.max(initial=0.0), v_in.max(initial=0.0)))


# --- phase-augmented Bayesian matching pursuit ----------------------------------

@dataclass
class _Node:
    support: tuple
    metric: float
    u: np.ndarray          # Phi^{-1} y
    B: np.ndarray          # Phi^{-1} A


def pabmp(p: CsProblem, prior_activity: float, sigma_coeff2: float, search_breadth: int = 5,
          max_support: int | None = None, patience: int = 2) -> RecoveryResult:
    """Greedy tree search over supports under a Bernoulli-Gaussian prior.

    Magnitudes are i.i.d. ``N(0, sigma_coeff2)`` with probability
    ``prior_activity`` and zero otherwise; noise on tone ``k`` is
    ``CN(0, noise_var[k])``.  Each round extends each of the
    ``search_breadth`` best supports by one index and keeps the best distinct
    children.  The winner's conditional-mean magnitudes are projected onto
    the nonnegative half-line, which puts every nonzero coefficient on the
    hinted phase.
    """
    if not 0 < prior_activity < 1:
        raise ValueError("prior activity must lie strictly inside (0, 1)")
    if sigma_coeff2 <= 0 or search_breadth < 1:
        raise ValueError("need sigma_coeff2 > 0 and search_breadth >= 1")
    n = p.n
    Ar, yr = _real_system(p)
    scale = np.sqrt(2.0 / np.concatenate([p.noise_var, p.noise_var]))
    A = Ar * scale[:, None]
    y = yr * scale
    s2 = float(sigma_coeff2)
    log_odds = math.log(prior_activity / (1 - prior_activity))
    if max_support is None:
        max_support = p.m
    max_support = int(min(max_support, 2 * p.m - 1, n))

    root = _Node((), -0.5 * float(y @ y), y.copy(), A.copy())
    best = root
    frontier = [root]
    stale = 0
    rounds = 0
    path = [root.metric]
    for _ in range(max_support):
        rounds += 1
        cands = []
        for node in frontier:
            q = np.einsum("ij,ij->j", A, node.B)
            t = A.T @ node.u
            # q >= 0 in exact arithmetic; round-off can push it below
            den = np.maximum(1.0 + s2 * q, 1.0)
            gain = 0.5 * s2 * t * t / den - 0.5 * np.log(den) + log_odds
            if node.support:
                gain[list(node.support)] = -np.inf
            k = min(search_breadth, n - len(node.support))
            top = np.argpartition(-gain, k - 1)[:k]
            for j in top:
                cands.append((node.metric + float(gain[j]), node, int(j), float(t[j]), float(den[j])))
        cands.sort(key=lambda c: -c[0])
        seen = set()
        children = []
        for metric, node, j, tj, dj in cands:
            key = tuple(sorted(node.support + (j,)))
            if key in seen:
                continue
            seen.add(key)
            b = node.B[:, j]
            beta = s2 / dj
            u = node.u - beta * tj * b
            row = A[:, j] @ node.B
            B = node.B - beta * np.outer(b, row)
            children.append(_Node(key, metric, u, B))
            if len(children) == search_breadth:
                break
        if not children:
            break
        frontier = children
        path.append(children[0].metric)
        if children[0].metric > best.metric:
            best = children[0]
            stale = 0
        else:
            stale += 1
            if stale >= patience:
                break

    supp = np.array(best.support, dtype=np.intp)
    a = np.zeros(n)
    if supp.size:
        a[supp] = np.maximum(s2 * (A[:, supp].T @ best.u), 0.0)
    keep = np.flatnonzero(a > 0)
    c_hat = np.zeros(n, dtype=complex)
    c_hat[keep] = p.rotation[keep] * a[keep]
    res = p.observations - partial_dft_apply(c_hat, p.tones)
    return RecoveryResult(c_hat, keep, rounds, float(np.linalg.norm(res)), Method.PABMP, True,
                          {"metric": best.metric, "searched_support": supp,
                           "metric_path": np.array(path)})


# --- oracle least squares ---------------------------------------------------------

def oracle_ls(true_support, p: CsProblem, phase_augmented: bool = False,
              weighted: bool = False) -> RecoveryResult:
    """Least squares restricted to a known support (benchmark).

    ``weighted`` whitens each tone by its noise variance first.
    """
    supp = np.asarray(sorted(set(int(i) for i in np.atleast_1d(true_support))), dtype=np.intp)
    n = p.n
    c_hat = np.zeros(n, dtype=complex)
    if supp.size == 0:
        return RecoveryResult(c_hat, supp, 0, float(np.linalg.norm(p.observations)), Method.ORACLE_LS)
    w = 1.0 / np.sqrt(p.noise_var) if weighted else np.ones(p.m)
    if phase_augmented:
        Ar, yr = _real_system(p)
        w2 = np.concatenate([w, w])
        sol, _, rank, _ = np.linalg.lstsq(Ar[:, supp] * w2[:, None], yr * w2, rcond=None)
        c_hat[supp] = p.rotation[supp] * sol
    else:
        Psi = p.sensing_matrix()[:, supp] * w[:, None]
        sol, _, rank, _ = np.linalg.lstsq(Psi, p.observations * w, rcond=None)
        c_hat[supp] = sol
    res = p.observations - partial_dft_apply(c_hat, p.tones)
    return RecoveryResult(c_hat, supp, 1, float(np.linalg.norm(res)), Method.ORACLE_LS,
                          rank == supp.size, {"rank": int(rank)})
