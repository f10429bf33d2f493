"""Planted sparse-recovery instances shared by the recovery and acceptance tests."""

import numpy as np

from clipfix import channel, ofdm, qam, recovery, selection

C64 = qam.build(64)


def planted(rng, k, m, n=256, snr_db=None, tones=None):
    """Block whose clipping level sits between the k-th and (k+1)-th peak.

    Measurements are the clipping spectrum on a random tone set, optionally
    with white noise at ``snr_db`` below the measurement power.
    """
    X, idx = C64.random_symbols(n, rng)
    mags = np.sort(np.abs(ofdm.idft(X)))[::-1]
    gamma = 0.5 * (mags[k - 1] + mags[k])
    b = ofdm.block_from_symbols(X, idx, gamma)
    if tones is None:
        tones = selection.ToneSet(rng.choice(n, m, replace=False), n)
    y = recovery.partial_dft_apply(b.clip_signal, tones)
    power = np.mean(np.abs(y) ** 2)
    if snr_db is None:
        nv = np.full(tones.m, 1e-14 * power)
        noise = np.zeros(tones.m, complex)
    else:
        nv = np.full(tones.m, power / 10 ** (snr_db / 10))
        noise = channel.crandn(rng, tones.m, nv[0])
    p = recovery.make_problem(tones, y + noise, b.clipped_time, gamma, nv)
    return b, p, noise


def rel_err(est, ref):
    return float(np.linalg.norm(est - ref) / np.linalg.norm(ref))
