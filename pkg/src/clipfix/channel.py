"""Block-fading Rayleigh multipath channel with AWGN and zero-forcing equalization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ofdm import dft


class SingularChannelError(ValueError):
    """A per-tone gain is exactly zero; the realization must be redrawn."""


@dataclass(frozen=True)
class ChannelRealization:
    taps: np.ndarray
    gains: np.ndarray
    noise_var: float

    @property
    def n(self) -> int:
        return self.gains.size


def crandn(rng: np.random.Generator, size, var: float = 1.0) -> np.ndarray:
    """Circularly symmetric complex Gaussian samples with ``E|z|^2 = var``."""
    s = np.sqrt(var / 2.0)
    return s * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def frequency_response(taps, n: int) -> np.ndarray:
    """``lambda(k) = sum_l h(l) exp(-2j pi k l / n)``."""
    return np.fft.fft(np.asarray(taps, dtype=complex), n)


def draw(l_h: int, n: int, noise_var: float, rng: np.random.Generator) -> ChannelRealization:
    """Uniform power-delay profile, total expected power 1."""
    if not 1 <= l_h <= n:
        raise ValueError(f"channel length {l_h} outside [1, {n}]")
    if noise_var < 0:
        raise ValueError("noise variance must be nonnegative")
    taps = crandn(rng, l_h, 1.0 / l_h)
    return ChannelRealization(taps=taps, gains=frequency_response(taps, n),
                              noise_var=float(noise_var))


def noise_var_from_ebn0(ebn0_db: float, order: int) -> float:
    """Unit symbol energy, so ``Eb = 1/log2(M)`` and ``N0 = sigma_z^2``."""
    return 1.0 / (np.log2(order) * 10.0 ** (ebn0_db / 10.0))


def transmit(freq_clipped, ch: ChannelRealization, rng: np.random.Generator | None = None,
             noise=None) -> np.ndarray:
    """Frequency-domain received block ``Y = Lambda X_clipped + Z``."""
    Xc = np.asarray(freq_clipped, dtype=complex)
    if Xc.shape != ch.gains.shape:
        raise ValueError(f"block length {Xc.size} does not match channel length {ch.n}")
    if noise is None:
        noise = crandn(rng, Xc.size, ch.noise_var) if ch.noise_var > 0 else 0.0
    return ch.gains * Xc + noise


def transmit_time(clipped_time, ch: ChannelRealization, time_noise=None) -> np.ndarray:
    """Circular convolution in time followed by the unitary DFT."""
    x = np.asarray(clipped_time, dtype=complex)
    n = x.size
    h = np.zeros(n, dtype=complex)
    h[: ch.taps.size] = ch.taps
    y = np.array([np.sum(h * x[(i - np.arange(n)) % n]) for i in range(n)])
    if time_noise is not None:
        y = y + time_noise
    return dft(y)


def equalize(Y, ch: ChannelRealization) -> np.ndarray:
    if np.any(ch.gains == 0):
        raise SingularChannelError("zero per-tone gain")
    return np.asarray(Y, dtype=complex) / ch.gains
