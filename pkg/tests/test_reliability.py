import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from scipy.optimize import brentq

from clipfix import qam
from clipfix import reliability as rl

C64 = qam.build(64)
D = C64.d_min


def interior_obs(const, rng, n, spread):
    side = const.grid_side
    ix = rng.integers(1, side - 1, n)
    iy = rng.integers(1, side - 1, n)
    p = const.points[ix * side + iy]
    u = (rng.random(n) - 0.5) + 1j * (rng.random(n) - 0.5)
    return p + spread * const.d_min * u


def test_exact_on_point_is_large():
    assert rl.log_r_exact(C64, C64.points[27], 0.01 * D**2)[0] > 20


def test_exact_boundary_pair_ratio():
    # midpoint of two interior neighbors: the pairwise ratio is one
    mid = 0.5 * (C64.points[27] + C64.points[35])
    r = float(rl.perturbation(C64, mid).r)
    r1 = np.abs(mid - C64.points[35])
    assert rl.log_density(0.1, r) - rl.log_density(0.1, r1) == pytest.approx(0.0, abs=1e-12)


def test_exact_matches_naive_sum(rng):
    c = qam.build(16)
    z = rng.standard_normal(50) + 1j * rng.standard_normal(50)
    s2 = 0.07
    got = rl.r_exact(c, z, s2)
    for zi, gi in zip(z, got):
        f = np.exp(-np.abs(zi - c.points) ** 2 / s2) / (np.pi * s2)
        k = np.argmin(np.abs(zi - c.points))
        others = [f[j] for j in range(c.order) if j != k]
        assert gi == pytest.approx(f[k] / np.sum(others), rel=1e-12)


def test_trunc_isotropic_limit():
    s2 = 0.3
    beta = np.exp(-1 / s2)
    assert rl.r_trunc(0.0, 0.3, 1.0, s2) == pytest.approx(1 / (beta * (2 + beta)), rel=1e-12)


@given(st.floats(0, 0.7), st.floats(0, np.pi / 2), st.floats(0.01, 1.0))
def test_trunc_symmetry_and_three_point_form(r, th, s2):
    a = rl.log_r_trunc(r, th, 1.0, s2)
    assert a == pytest.approx(rl.log_r_trunc(r, np.pi / 2 - th, 1.0, s2), abs=1e-9)
    r1, r2, r3 = rl.competitor_distances(r, th, 1.0)
    direct = -r**2 / s2 - np.logaddexp.reduce([-r1**2 / s2, -r2**2 / s2, -r3**2 / s2])
    assert a == pytest.approx(direct, abs=1e-9 * max(1, abs(direct)))


@given(st.floats(0.01, 0.7), st.floats(0, np.pi / 2), st.floats(0.05, 1.0), st.floats(0.1, 10))
def test_trunc_scale_invariance(r, th, s2, a):
    assert rl.log_r_trunc(r, th, 1.0, s2) == pytest.approx(
        rl.log_r_trunc(a * r, th, a, a * a * s2), abs=1e-8)


def test_quadrant_equals_closed_form_inside(rng):
    z = interior_obs(C64, rng, 500, 0.99)
    s2 = 0.1 * D**2
    pt = rl.perturbation(C64, z)
    assert np.allclose(rl.log_r_quadrant(C64, z, s2), rl.log_r_trunc(pt.r, pt.theta, D, s2),
                       atol=1e-9)


def test_quadrant_corner_is_finite():
    z = C64.points[0] - 0.01 - 0.01j
    assert np.isfinite(rl.log_r_quadrant(C64, z, 0.01))


def test_shapes():
    s2 = 0.2
    assert rl.r_circle(0.3, s2) == pytest.approx(rl.r_circle(0.3, s2))
    assert rl.r_leaf(0.3, np.pi / 4, s2, 0.8) == pytest.approx(rl.r_circle(0.3, s2))
    assert rl.r_leaf(0.3, 0.0, s2, 0.8) == pytest.approx(rl.r_circle(0.3, s2) * 0.6)
    with pytest.raises(ValueError):
        rl.leaf_shape(0.1, 0.3)


def test_leaf_ranks_like_trunc():
    s2, r = 0.2 * D**2, 0.3 * D
    t = np.sign(rl.log_r_trunc(r, np.pi / 4, D, s2) - rl.log_r_trunc(r, 0.0, D, s2))
    lf = np.sign(rl.log_r_leaf(r, np.pi / 4, s2, 0.95) - rl.log_r_leaf(r, 0.0, s2, 0.95))
    assert t == lf


@pytest.mark.parametrize("ratio", [0.02, 0.05, 0.1, 0.2])
def test_first_tier_tracks_exact(rng, ratio):
    z = interior_obs(C64, rng, 2000, 1.0)
    s2 = ratio * D**2
    err = np.abs(rl.log_r_first_tier(C64, z, s2) - rl.log_r_exact(C64, z, s2))
    assert err.max() < 1e-3


@given(st.lists(st.floats(-1.2, 1.2), min_size=4, max_size=40))
def test_ranking_invariant_under_monotone_map(vals):
    z = np.array(vals[::2][: len(vals) // 2]) + 1j * np.array(vals[1::2][: len(vals) // 2])
    s = rl.log_r_exact(C64, z, 0.05)
    t = np.sinh(s / 50) * 3 + 1
    assume(np.unique(s).size == s.size and np.unique(t).size == t.size)
    assert np.array_equal(np.argsort(s), np.argsort(t))


def test_scores_all_criteria(rng):
    z = interior_obs(C64, rng, 256, 1.0)
    s2 = np.full(256, 0.05 * D**2)
    for c in rl.Criterion:
        sc = rl.score_tones(C64, z, s2, c, rng=rng, severe=(c is rl.Criterion.ADAPTIVE))
        assert sc.scores.shape == (256,)
        assert np.all(np.isfinite(sc.scores))
    with pytest.raises(ValueError):
        rl.score_tones(C64, z, s2, "random")
    with pytest.raises(ValueError):
        rl.score_tones(C64, z, s2, "bogus")


def test_adaptive_mild_switch(rng):
    z = interior_obs(C64, rng, 256, 1.0)
    s2 = 0.05 * D**2
    pt = rl.perturbation(C64, z)
    got = rl.score_tones(C64, z, s2, "adaptive", mu=0.9).scores
    mild = pt.r < rl.r_tilde_approx(D, s2)
    assert np.allclose(got[mild], rl.log_r_circle(pt.r[mild], s2))
    assert np.allclose(got[~mild], rl.log_r_leaf(pt.r[~mild], pt.theta[~mild], s2, 0.9))


def test_perturbation_range(rng):
    z = interior_obs(C64, rng, 1000, 1.0)
    pt = rl.perturbation(C64, z)
    assert np.all(pt.r <= np.sqrt(2) / 2 * D + 1e-12)
    assert np.all((pt.theta >= 0) & (pt.theta <= np.pi / 2))


# --- Lambert W and the transition radius ------------------------------------------

def test_lambert_special_values():
    assert rl.lambert_w0(0.0) == 0.0
    assert rl.lambert_w0(-np.exp(-1)) == pytest.approx(-1.0, abs=1e-10)
    assert rl.lambert_w0(np.e) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(ValueError):
        rl.lambert_w0(-0.5)


@given(st.floats(-np.exp(-1), 50.0))
def test_lambert_residual(y):
    w = rl.lambert_w0(y)
    assert abs(w * np.exp(w) - y) < 1e-12 * max(1.0, abs(y))
    assert w >= -1.0


def test_rtilde_small_sigma():
    ex, ap = rl.r_tilde(1.0, 0.01)
    assert ex == pytest.approx(ap, rel=1e-3)


def test_rtilde_diverges_with_sigma():
    gaps = [abs(np.subtract(*rl.r_tilde(1.0, s))) for s in (0.05, 0.2, 0.4)]
    assert gaps == sorted(gaps)
    with pytest.raises(rl.RegimeError):
        rl.r_tilde(1.0, 0.6)


@pytest.mark.parametrize("s2", [0.02, 0.05, 0.1, 0.2, 0.4])
def test_rtilde_root_matches_bisection(s2):
    ex, _ = rl.r_tilde(1.0, s2)
    hi = 1.0 / np.sqrt(2) * (1.0 / s2) * s2  # stays left of the second root
    root = brentq(lambda r: rl.transition_residual(r, 1.0, s2), 1e-9, hi, xtol=1e-14)
    assert ex == pytest.approx(root, abs=1e-9)


def test_second_derivative_finite_difference():
    h = 1e-4
    for r, th, s2 in [(0.1, 0.3, 0.2), (0.3, np.pi / 4, 0.1), (0.05, 1.0, 0.05)]:
        fd = (rl.r_trunc(r, th + h, 1, s2) - 2 * rl.r_trunc(r, th, 1, s2)
              + rl.r_trunc(r, th - h, 1, s2)) / h**2
        an = rl.d2_r_trunc_dtheta2(r, th, 1, s2)
        assert an == pytest.approx(fd, rel=1e-5)


@pytest.mark.parametrize("s2", [0.05, 0.1, 0.2])
def test_second_derivative_sign_bracket(s2):
    rt, _ = rl.r_tilde(1.0, s2)
    assert rl.d2_r_trunc_dtheta2(0.5 * rt, np.pi / 4, 1, s2) > 0
    assert rl.d2_r_trunc_dtheta2(2 * rt, np.pi / 4, 1, s2) < 0


@given(st.floats(0.01, 0.6), st.floats(0, 0.5), st.floats(0.05, 0.4))
def test_second_derivative_symmetry(r, delta, s2):
    a = rl.d2_r_trunc_dtheta2(r, np.pi / 4 + delta, 1, s2)
    b = rl.d2_r_trunc_dtheta2(r, np.pi / 4 - delta, 1, s2)
    assert a == pytest.approx(b, rel=1e-7, abs=1e-9 * rl.r_trunc(r, np.pi / 4, 1, s2))
