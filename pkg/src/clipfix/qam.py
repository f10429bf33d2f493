"""Square M-QAM alphabets, hard decisions and decision-region geometry."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SUPPORTED_ORDERS = (4, 16, 64, 256)


@dataclass(frozen=True)
class Constellation:
    """Unit-average-energy square QAM alphabet.

    Point ``idx`` sits at grid position ``(idx // side, idx % side)``: the
    first coordinate indexes the in-phase level, the second the quadrature
    level, both ascending.
    """

    order: int
    points: np.ndarray = field(repr=False)
    d_min: float
    grid_side: int
    scale: float = field(repr=False)

    @property
    def levels(self) -> np.ndarray:
        """Per-axis amplitude levels (already normalized)."""
        side = self.grid_side
        return (2.0 * np.arange(side) - (side - 1)) * self.scale

    def nearest(self, z):
        """Nearest constellation point and its index, elementwise.

        Equidistant candidates resolve to the smallest point index.
        """
        z = np.asarray(z, dtype=complex)
        ix = self._axis_index(z.real)
        iy = self._axis_index(z.imag)
        idx = ix * self.grid_side + iy
        return self.points[idx], idx

    def decide(self, z) -> np.ndarray:
        return self.nearest(z)[0]

    def _axis_index(self, v: np.ndarray) -> np.ndarray:
        u = (v / self.scale + (self.grid_side - 1)) / 2.0
        # ceil(u - 1/2) sends exact midpoints to the lower level
        return np.clip(np.ceil(u - 0.5), 0, self.grid_side - 1).astype(np.intp)

    def neighbor_frame(self, index: int) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned (NN) and diagonal (NNN) neighbors of one point."""
        nn, nnn = self.neighbor_indices(index)
        return self.points[nn], self.points[nnn]

    def neighbor_indices(self, index: int) -> tuple[np.ndarray, np.ndarray]:
        if not 0 <= index < self.order:
            raise IndexError(f"point index {index} outside 0..{self.order - 1}")
        side = self.grid_side
        ix, iy = divmod(int(index), side)

        def collect(offsets):
            out = []
            for dx, dy in offsets:
                jx, jy = ix + dx, iy + dy
                if 0 <= jx < side and 0 <= jy < side:
                    out.append(jx * side + jy)
            return np.array(out, dtype=np.intp)

        nn = collect([(1, 0), (0, 1), (-1, 0), (0, -1)])
        nnn = collect([(1, 1), (-1, 1), (-1, -1), (1, -1)])
        return nn, nnn

    def random_symbols(self, n: int, rng: np.random.Generator):
        idx = rng.integers(0, self.order, size=n)
        return self.points[idx], idx


def build(order: int) -> Constellation:
    """Build the square ``order``-QAM alphabet with unit average energy."""
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported QAM order {order}; expected one of {SUPPORTED_ORDERS}")
    side = int(round(np.sqrt(order)))
    scale = 1.0 / np.sqrt((2.0 / 3.0) * (order - 1))
    lv = (2.0 * np.arange(side) - (side - 1)) * scale
    points = (lv[:, None] + 1j * lv[None, :]).ravel()
    points.setflags(write=False)
    return Constellation(order=order, points=points, d_min=2.0 * scale,
                         grid_side=side, scale=scale)
