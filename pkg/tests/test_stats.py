import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats as sps

from clipfix import channel, ofdm, qam, stats

S = stats.SIGMA_ABS_X


def test_zero_threshold_limits():
    assert stats.expected_clip_energy(S, 0.0) == pytest.approx(2 * S**2)
    assert stats.expected_support(256, S, 0.0) == 256


def test_half_support_threshold():
    g = S * np.sqrt(2 * np.log(2))
    assert stats.expected_support(256, S, g) == pytest.approx(128)


def test_clip_energy_large_gamma_is_finite_and_small():
    vals = [stats.expected_clip_energy(S, g) for g in (2.0, 4.0, 8.0, 30.0)]
    assert all(np.isfinite(vals)) and all(v >= 0 for v in vals)
    assert vals == sorted(vals, reverse=True) and vals[-1] < 1e-3


def test_clip_energy_monte_carlo(rng):
    # a literal threshold of 1.131
    r = rng.rayleigh(S, 10**7)
    c = r[r > 1.131] - 1.131
    # energy given that the sample clips
    assert stats.expected_clip_energy(S, 1.131) == pytest.approx(np.mean(c**2), rel=0.01)


def test_support_and_variance_on_blocks(rng):
    const = qam.build(64)
    gamma, n = 1.6, 256
    sizes, C = [], []
    for _ in range(2000):
        b = ofdm.make_block(const, n, gamma, rng)
        sizes.append(b.support.size)
        C.append(b.clip_freq)
    assert np.mean(sizes) == pytest.approx(stats.expected_support(n, S, gamma), rel=0.03)
    assert np.mean(np.abs(np.array(C)) ** 2) == pytest.approx(stats.sigma_c2(S, gamma), rel=0.05)


def test_sigma_d2_identities():
    assert stats.sigma_d2(0.2, 0.0, 0.3 + 0.1j) == pytest.approx(0.2)
    assert stats.sigma_d2(0.2, 0.05, 1.0) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        stats.sigma_d2(0.2, 0.05, 0.0)


def test_sigma_d2_monte_carlo(rng):
    const = qam.build(64)
    gamma, n, sz2 = 1.4, 128, 0.01
    ch = channel.draw(8, n, sz2, rng)
    D = []
    for _ in range(4000):
        b = ofdm.make_block(const, n, gamma, rng)
        D.append(b.clip_freq + channel.crandn(rng, n, sz2) / ch.gains)
    emp = np.mean(np.abs(np.array(D)) ** 2, axis=0)
    pred = stats.sigma_d2(stats.sigma_c2(S, gamma), sz2, ch.gains)
    assert np.median(np.abs(emp / pred - 1)) < 0.05


def test_density_and_cdf(rng):
    s2 = 0.3
    assert stats.density_d(s2, 0.0) == pytest.approx(1 / (np.pi * s2))
    assert stats.radial_cdf(s2, 0.0) == 0.0
    assert stats.radial_cdf(s2, 1e3) == 1.0
    mass, _ = integrate.quad(lambda r: 2 * np.pi * r * stats.density_d(s2, r), 0, 6 * np.sqrt(s2))
    assert mass >= 0.999
    d = np.abs(channel.crandn(rng, 5000, s2))
    assert sps.kstest(d, lambda r: stats.radial_cdf(s2, r)).pvalue > 0.01


@given(st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_monotone_in_gamma(g1, g2):
    lo, hi = sorted((g1, g2))
    assert stats.expected_clip_energy(S, hi) <= stats.expected_clip_energy(S, lo) + 1e-15
    assert stats.expected_support(256, S, hi) <= stats.expected_support(256, S, lo)


@given(st.floats(0.0, 6.0), st.integers(1, 1024))
def test_bundle_invariants(gamma, n):
    ds = stats.distortion_stats(n, gamma, 0.01, np.array([1.0, 0.5j]))
    assert ds.e_c2 >= 0 and 0 <= ds.e_supp <= n
    assert ds.sigma_c2 == pytest.approx(ds.e_c2 * ds.e_supp / n, abs=1e-15)
    assert np.all(ds.per_tone_sigma_d2 >= ds.sigma_c2)


def test_bad_inputs():
    with pytest.raises(ValueError):
        stats.expected_clip_energy(-1.0, 1.0)
    with pytest.raises(ValueError):
        stats.expected_clip_energy(S, np.nan)
    with pytest.raises(ValueError):
        stats.density_d(0.0, 1.0)
