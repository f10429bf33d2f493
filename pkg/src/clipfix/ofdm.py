"""Unitary DFT pair, OFDM block synthesis and hard amplitude clipping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qam import Constellation


def dft(x) -> np.ndarray:
    """Unitary DFT, ``X(k) = N^{-1/2} sum_l x(l) exp(-2j pi k l / N)``."""
    x = np.asarray(x, dtype=complex)
    if x.size == 0:
        raise ValueError("empty input")
    return np.fft.fft(x, norm="ortho")


def idft(X) -> np.ndarray:
    """Inverse of :func:`dft`."""
    X = np.asarray(X, dtype=complex)
    if X.size == 0:
        raise ValueError("empty input")
    return np.fft.ifft(X, norm="ortho")


def dft_matrix(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def dft_direct(x) -> np.ndarray:
    """O(N^2) reference transform; any length."""
    x = np.asarray(x, dtype=complex)
    if x.size == 0:
        raise ValueError("empty input")
    return dft_matrix(x.size) @ x


@dataclass(frozen=True)
class OfdmBlock:
    freq_data: np.ndarray
    symbol_index: np.ndarray
    time_signal: np.ndarray
    clipped_time: np.ndarray
    clip_signal: np.ndarray
    support: np.ndarray
    gamma: float

    @property
    def n(self) -> int:
        return self.freq_data.size

    @property
    def clipped_freq(self) -> np.ndarray:
        return dft(self.clipped_time)

    @property
    def clip_freq(self) -> np.ndarray:
        return dft(self.clip_signal)


def clip(x, gamma: float):
    """Hard-limit ``|x|`` to ``gamma`` keeping phase.

    Returns ``(clipped, c, support)`` with ``clipped = x + c`` and ``support``
    the sorted indices where ``|x| > gamma``.
    """
    if not gamma > 0:
        raise ValueError(f"clipping level must be positive, got {gamma}")
    x = np.asarray(x, dtype=complex)
    mag = np.abs(x)
    over = mag > gamma
    clipped = x.copy()
    clipped[over] = gamma * x[over] / mag[over]
    c = clipped - x
    c[~over] = 0.0
    return clipped, c, np.flatnonzero(over)


def papr(x) -> float:
    x = np.asarray(x, dtype=complex)
    p = np.abs(x) ** 2
    mean = p.mean() if p.size else 0.0
    if mean == 0.0:
        raise ValueError("PAPR of a zero vector is undefined")
    return float(p.max() / mean)


def make_block(const: Constellation, n: int, gamma: float,
               rng: np.random.Generator) -> OfdmBlock:
    """Draw i.i.d. symbols, synthesize, and clip one OFDM block."""
    X, idx = const.random_symbols(n, rng)
    return block_from_symbols(X, idx, gamma)


def block_from_symbols(X, idx, gamma: float) -> OfdmBlock:
    X = np.asarray(X, dtype=complex)
    x = idft(X)
    xc, c, supp = clip(x, gamma)
    return OfdmBlock(freq_data=X, symbol_index=np.asarray(idx), time_signal=x,
                     clipped_time=xc, clip_signal=c, support=supp, gamma=float(gamma))
