import numpy as np
import pytest
from hypothesis import given, strategies as st

from clipfix import qam

ORDERS = st.sampled_from(qam.SUPPORTED_ORDERS)


def brute_dmin(points):
    d = np.abs(points[:, None] - points[None, :])
    return d[d > 0].min()


def test_qpsk_points():
    c = qam.build(4)
    expected = {complex(a, b) / np.sqrt(2) for a in (-1, 1) for b in (-1, 1)}
    got = set(np.round(c.points, 12))
    assert got == {complex(np.round(z.real, 12), np.round(z.imag, 12)) for z in expected}
    assert c.d_min == pytest.approx(np.sqrt(2), abs=1e-12)


def test_64qam_is_8x8():
    c = qam.build(64)
    assert c.points.size == 64 and c.grid_side == 8
    assert np.unique(np.round(c.points.real, 12)).size == 8


@pytest.mark.parametrize("order", qam.SUPPORTED_ORDERS)
def test_unit_energy_and_dmin(order):
    c = qam.build(order)
    assert np.mean(np.abs(c.points) ** 2) == pytest.approx(1.0, abs=1e-12)
    assert c.d_min == pytest.approx(brute_dmin(c.points), rel=1e-12)
    assert c.d_min == pytest.approx(2 / np.sqrt(2 / 3 * (order - 1)), rel=1e-12)


@pytest.mark.parametrize("order", [2, 8, 32, 0, -4])
def test_unsupported_order(order):
    with pytest.raises(ValueError):
        qam.build(order)


def test_nearest_identity_and_tie():
    c = qam.build(16)
    p, idx = c.nearest(c.points)
    assert np.array_equal(idx, np.arange(16))
    # midpoint between index 5 and its in-phase neighbor 9
    mid = 0.5 * (c.points[5] + c.points[9])
    assert c.nearest(mid)[1] == 5
    mid = 0.5 * (c.points[5] + c.points[6])
    assert c.nearest(mid)[1] == 5


def test_nearest_matches_exhaustive(rng):
    c = qam.build(64)
    z = 1.3 * (rng.standard_normal(1000) + 1j * rng.standard_normal(1000))
    _, idx = c.nearest(z)
    brute = np.argmin(np.abs(z[:, None] - c.points[None, :]), axis=1)
    assert np.array_equal(idx, brute)


def test_neighbor_counts():
    c = qam.build(64)
    interior = 3 * 8 + 4
    nn, nnn = c.neighbor_frame(interior)
    assert len(nn) == 4 and len(nnn) == 4
    nn, nnn = c.neighbor_frame(0)
    assert len(nn) == 2 and len(nnn) == 1
    with pytest.raises(IndexError):
        c.neighbor_frame(64)


@pytest.mark.parametrize("order", [16, 64])
def test_neighbors_match_distance_classes(order):
    c = qam.build(order)
    for i in range(order):
        d = np.abs(c.points - c.points[i])
        nn_b = set(np.flatnonzero(np.isclose(d, c.d_min)))
        nnn_b = set(np.flatnonzero(np.isclose(d, np.sqrt(2) * c.d_min)))
        nn, nnn = c.neighbor_indices(i)
        assert set(nn) == nn_b and set(nnn) == nnn_b


@given(ORDERS, st.floats(-2, 2), st.floats(-2, 2))
def test_nearest_is_minimal(order, a, b):
    c = qam.build(order)
    z = complex(a, b)
    p = c.decide(z)
    assert abs(z - p) <= np.min(np.abs(z - c.points)) + 1e-12
    assert c.decide(p) == p


@given(ORDERS, st.integers(0, 255), st.floats(0, 0.499), st.floats(0, 2 * np.pi))
def test_decision_region_ball(order, i, frac, phi):
    c = qam.build(order)
    i %= order
    z = c.points[i] + frac * c.d_min * np.exp(1j * phi)
    assert c.nearest(z)[1] == i
