"""Pilotless clipping-mitigation receiver and its Monte-Carlo scoring harness.

:func:`run_receiver` only touches what a receiver observes (the received
block, the channel and system constants).  Ground truth enters in
:func:`score_trial`, which also hosts the oracle benchmark.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import channel, ofdm, qam, recovery, reliability, selection, stats
from .recovery import CsProblem, RecoveryResult
from .reliability import Criterion
from .selection import ToneSet

CNR_FLOOR = 1e-12


@dataclass(frozen=True)
class LinkParams:
    """System constants shared by transmitter and receiver."""

    n: int = 256
    order: int = 64
    cr: float = 1.6
    ebn0_db: float = 20.0
    l_h: int = 16
    sigma_x: float = 1.0

    @property
    def gamma(self) -> float:
        return self.cr * self.sigma_x

    @property
    def noise_var(self) -> float:
        return channel.noise_var_from_ebn0(self.ebn0_db, self.order)

    @property
    def constellation(self) -> qam.Constellation:
        return _constellation(self.order)


_CONST: dict[int, qam.Constellation] = {}


def _constellation(order: int) -> qam.Constellation:
    if order not in _CONST:
        _CONST[order] = qam.build(order)
    return _CONST[order]


@dataclass(frozen=True)
class ReceiverConfig:
    criterion: str = "exact"
    mu: float = 0.95
    tau: float = 0.9
    stage1_m: int | None = 64
    max_m: int | None = None
    kappa: float = 2.0
    bound: str = "disk"
    solver: str = "pabmp"           # "pabmp", "wpal" or "none"
    stage2_enabled: bool = False
    stage2_m: int | None = None     # defaults to the stage-1 size
    cnr: str = "lambda"             # "lambda" (high SNR) or "ecs" (low SNR)
    epsilon_scale: float = 1.0
    search_breadth: int = 5
    severe_cr: float = 1.8

    def __post_init__(self):
        Criterion(self.criterion)
        if self.solver not in ("pabmp", "wpal", "none"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.cnr not in ("lambda", "ecs"):
            raise ValueError(f"unknown CNR rule {self.cnr!r}")
        if not 0.5 <= self.mu <= 1.0:
            raise ValueError("mu must lie in [1/2, 1]")
        if not 0 < self.tau < 1:
            raise ValueError("tau must lie in (0, 1)")


@dataclass
class ReceiverOutput:
    xhat: np.ndarray
    decisions: dict
    tone_sets: dict
    problems: dict
    results: dict
    scores: reliability.ReliabilityScores
    m: dict
    timings: dict = field(default_factory=dict)

    @property
    def final_stage(self) -> int:
        return max(self.decisions)


def stage_solve(p: CsProblem, link: LinkParams, cfg: ReceiverConfig) -> RecoveryResult:
    if cfg.solver == "wpal":
        return recovery.wpal(p, epsilon=cfg.epsilon_scale * recovery.default_epsilon(p.noise_var))
    sa = stats.SIGMA_ABS_X * link.sigma_x
    e_supp = stats.expected_support(link.n, sa, link.gamma)
    p1 = min(max(e_supp / link.n, 1.0 / link.n ** 2), 1 - 1e-9)
    s2 = max(stats.expected_clip_energy(sa, link.gamma), 1e-12)
    spread = np.sqrt(stats.support_variance(link.n, sa, link.gamma))
    max_support = int(np.ceil(e_supp + 4 * spread)) + 2
    return recovery.pabmp(p, p1, s2, cfg.search_breadth, max_support=max_support)


def cnr_high_snr(xhat, c_cs_freq, const: qam.Constellation, floor: float = CNR_FLOOR) -> np.ndarray:
    """``|xhat - <xhat - C>|^2 / |xhat - C - <xhat - C>|^2`` per tone."""
    xhat = np.asarray(xhat, dtype=complex)
    corrected = xhat - c_cs_freq
    dec = const.decide(corrected)
    return np.abs(xhat - dec) ** 2 / np.maximum(np.abs(corrected - dec) ** 2, floor)


def cnr_low_snr(xhat, c_cs_freq, const: qam.Constellation, floor: float = CNR_FLOOR) -> np.ndarray:
    """``|C|^2 / |xhat - C - <xhat - C>|^2`` per tone."""
    xhat = np.asarray(xhat, dtype=complex)
    corrected = xhat - c_cs_freq
    dec = const.decide(corrected)
    return np.abs(c_cs_freq) ** 2 / np.maximum(np.abs(corrected - dec) ** 2, floor)


def representative_sigma_d2(sigma_c2: float, sigma_z2: float, gains) -> float:
    """Channel-averaged ``sigma_D^2`` with the realized block's harmonic-mean gain.

    The ensemble mean of ``1/|lambda|^2`` diverges under Rayleigh fading;
    the per-block average is always finite.
    """
    return float(sigma_c2 + sigma_z2 * np.mean(1.0 / np.abs(gains) ** 2))


def _problem(tones: ToneSet, diffs, time_hat, link: LinkParams, inv_gain2) -> CsProblem:
    return recovery.make_problem(tones, diffs[tones.indices], time_hat, link.gamma,
                                 link.noise_var * inv_gain2[tones.indices])


def second_stage(xhat, c_cs_freq, time_hat, link: LinkParams, cfg: ReceiverConfig,
                 inv_gain2) -> tuple[ToneSet, CsProblem, RecoveryResult]:
    """Reselect tones by CNR, rebuild the differences around the corrected
    decisions and solve again."""
    const = link.constellation
    rule = cnr_high_snr if cfg.cnr == "lambda" else cnr_low_snr
    ratio = rule(xhat, c_cs_freq, const)
    m2 = cfg.stage2_m
    tones = selection.top_m(ratio, m2)
    diffs = xhat - const.decide(xhat - c_cs_freq)
    p = _problem(tones, diffs, time_hat, link, inv_gain2)
    return tones, p, stage_solve(p, link, cfg)


def run_receiver(Y, ch: channel.ChannelRealization, link: LinkParams, cfg: ReceiverConfig,
                 rng: np.random.Generator | None = None) -> ReceiverOutput:
    """Equalize, score tones, pick the measurement set, recover and decode."""
    const = link.constellation
    t0 = time.perf_counter()
    xhat = channel.equalize(Y, ch)
    dec0 = const.decide(xhat)
    diffs = xhat - dec0
    inv_gain2 = 1.0 / np.abs(ch.gains) ** 2
    sa = stats.SIGMA_ABS_X * link.sigma_x
    sc2 = stats.sigma_c2(sa, link.gamma)
    sd2 = sc2 + link.noise_var * inv_gain2
    scores = reliability.score_tones(const, xhat, sd2, cfg.criterion, mu=cfg.mu,
                                     severe=link.cr < cfg.severe_cr, rng=rng)

    if cfg.stage1_m is not None:
        m1, m_tau, m_gamma = min(cfg.stage1_m, link.n), None, None
    else:
        m1, m_tau, m_gamma = selection.choose_cardinality(
            cfg.tau, stats.expected_support(link.n, sa, link.gamma), link.n, const.d_min,
            representative_sigma_d2(sc2, link.noise_var, ch.gains), radii=np.abs(diffs),
            kappa=cfg.kappa, bound=cfg.bound)
        if cfg.max_m is not None:
            m1 = min(m1, cfg.max_m)
    omega = selection.top_m(scores.scores, m1)
    out = ReceiverOutput(xhat=xhat, decisions={0: dec0}, tone_sets={1: omega}, problems={},
                         results={}, scores=scores,
                         m={"stage1": m1, "tau": m_tau, "gamma": m_gamma})
    out.timings["scoring"] = time.perf_counter() - t0
    if cfg.solver == "none" or m1 == 0:
        return out

    time_hat = ofdm.idft(xhat)
    t1 = time.perf_counter()
    p1 = _problem(omega, diffs, time_hat, link, inv_gain2)
    r1 = stage_solve(p1, link, cfg)
    c1 = ofdm.dft(r1.c_hat)
    out.problems[1], out.results[1] = p1, r1
    out.decisions[1] = const.decide(xhat - c1)
    out.timings["stage1"] = time.perf_counter() - t1

    if cfg.stage2_enabled:
        if cfg.stage2_m is None:
            cfg = _with_stage2(cfg, m1)
        t2 = time.perf_counter()
        tones2, p2, r2 = second_stage(xhat, c1, time_hat, link, cfg, inv_gain2)
        out.tone_sets[2], out.problems[2], out.results[2] = tones2, p2, r2
        out.decisions[2] = const.decide(xhat - ofdm.dft(r2.c_hat))
        out.m["stage2"] = tones2.m
        out.timings["stage2"] = time.perf_counter() - t2
    return out


def _with_stage2(cfg: ReceiverConfig, m: int) -> ReceiverConfig:
    return replace(cfg, stage2_m=m)


# --- metrics ------------------------------------------------------------------------

def nsr(selected: ToneSet, decoded, truth) -> float:
    """Fraction of selected tones whose decision equals the transmitted symbol."""
    if selected.m == 0:
        raise ValueError("NSR of an empty selection is undefined")
    idx = selected.indices
    return float(np.mean(np.asarray(decoded)[idx] == np.asarray(truth)[idx]))


def achievable_rate(gains, sigma_x2: float, resid_var: float, sigma_z2: float) -> float:
    """Ergodic rate in bits/s/Hz with residual distortion treated as noise."""
    g2 = np.abs(np.asarray(gains)) ** 2
    return float(np.mean(np.log2(1.0 + g2 * sigma_x2 / (g2 * resid_var + sigma_z2))))


def ser(decoded, truth) -> float:
    return float(np.mean(np.asarray(decoded) != np.asarray(truth)))


@dataclass
class Trial:
    block: ofdm.OfdmBlock
    channel: channel.ChannelRealization
    received: np.ndarray
    noise: np.ndarray


@dataclass
class TrialResult:
    ser: dict
    nsr: dict
    rate_unmitigated: float
    rate_mitigated: dict
    rate_oracle: float
    m: dict
    support_size: int
    timings: dict


def simulate_trial(link: LinkParams, rng: np.random.Generator) -> Trial:
    const = link.constellation
    block = ofdm.make_block(const, link.n, link.gamma, rng)
    while True:
        ch = channel.draw(link.l_h, link.n, link.noise_var, rng)
        if np.all(ch.gains != 0):
            break
    noise = channel.crandn(rng, link.n, link.noise_var)
    Y = channel.transmit(block.clipped_freq, ch, noise=noise)
    return Trial(block, ch, Y, noise)


def oracle_problem(trial: Trial, out: ReceiverOutput, genie: bool = True) -> CsProblem:
    """Final-stage problem for the oracle; ``genie`` swaps in the true differences."""
    p = out.problems[max(out.problems)]
    if not genie:
        return p
    obs = (out.xhat - trial.block.freq_data)[p.tones.indices]
    return replace(p, observations=obs)


def score_trial(trial: Trial, out: ReceiverOutput, link: LinkParams,
                genie_oracle: bool = True) -> TrialResult:
    """Compare receiver output with ground truth; adds the oracle benchmark.

    The oracle knows the clipping support and solves a noise-weighted least
    squares problem on the final-stage tones.  With ``genie_oracle`` it also
    sees the true differences ``xhat - X`` there, so wrong decisions cannot
    bias it.
    """
    X = trial.block.freq_data
    C = trial.block.clip_freq
    gains = trial.channel.gains
    sz2 = link.noise_var
    sers = {s: ser(d, X) for s, d in out.decisions.items()}
    nsrs = {1: nsr(out.tone_sets[1], out.decisions[0], X)} if out.tone_sets[1].m else {}
    if 2 in out.tone_sets:
        nsrs[2] = nsr(out.tone_sets[2], out.decisions[1], X)
    rate_unmit = achievable_rate(gains, 1.0, float(np.mean(np.abs(C) ** 2)), sz2)
    rate_mit = {}
    for s, r in out.results.items():
        resid = float(np.mean(np.abs(C - ofdm.dft(r.c_hat)) ** 2))
        rate_mit[s] = achievable_rate(gains, 1.0, resid, sz2)
    if out.problems:
        orc = recovery.oracle_ls(trial.block.support, oracle_problem(trial, out, genie_oracle),
                                 weighted=True)
        resid = float(np.mean(np.abs(C - ofdm.dft(orc.c_hat)) ** 2))
        rate_orc = achievable_rate(gains, 1.0, resid, sz2)
    else:
        rate_orc = float("nan")
    return TrialResult(ser=sers, nsr=nsrs, rate_unmitigated=rate_unmit, rate_mitigated=rate_mit,
                       rate_oracle=rate_orc, m=dict(out.m), support_size=int(trial.block.support.size),
                       timings=dict(out.timings))


def run_trial(link: LinkParams, cfg: ReceiverConfig, rng: np.random.Generator) -> TrialResult:
    trial = simulate_trial(link, rng)
    out = run_receiver(trial.received, trial.channel, link, cfg, rng=rng)
    return score_trial(trial, out, link)
