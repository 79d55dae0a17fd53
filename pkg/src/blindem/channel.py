"""Block-invariant linear ISI channel with circular complex AWGN.

The three benchmark channels are fixed-magnitude profiles with i.i.d.
uniform random tap phases; the two longer ones are worst-case minimum
Euclidean distance profiles.  SNR is defined as
``||h||^2 * E{|x|^2} / noise_variance``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Tap magnitudes per channel memory; the L=2 profile carries a built-in
# sign flip on the second tap (an extra pi phase).
CHANNEL_PROFILES: dict[int, np.ndarray] = {
    2: np.array([1.0, -1.0]),
    3: np.array([0.5, 0.7, 0.5]),
    4: np.array([0.38, 0.6, 0.6, 0.38]),
}


@dataclass(frozen=True)
class ChannelTaps:
    """Complex FIR taps ``h[0..L-1]``; ``h[0]`` multiplies the current symbol."""

    taps: np.ndarray

    def __post_init__(self):
        taps = np.atleast_1d(np.asarray(self.taps, dtype=complex))
        object.__setattr__(self, "taps", taps)
        if taps.size < 1 or not np.all(np.isfinite(taps)):
            raise ValueError("channel taps must be a non-empty finite vector")

    @property
    def memory(self) -> int:
        return self.taps.size

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.taps) ** 2))


@dataclass(frozen=True)
class NoiseSpec:
    """Circular complex Gaussian noise with total variance ``variance``."""

    variance: float

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError("noise variance must be positive")

    def snr_db(self, h: ChannelTaps, symbol_energy: float = 1.0) -> float:
        return 10.0 * np.log10(h.energy * symbol_energy / self.variance)


def sigma_from_snr(h: ChannelTaps, snr_db: float, symbol_energy: float = 1.0) -> float:
    """Noise variance that realizes ``snr_db`` for the given taps."""
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    if not symbol_energy > 0:
        raise ValueError("symbol energy must be positive")
    return h.energy * symbol_energy / 10.0 ** (snr_db / 10.0)


def channel_from_phases(memory: int, phases) -> ChannelTaps:
    """Benchmark profile taps with explicit per-tap phases."""
    mags = CHANNEL_PROFILES.get(memory)
    if mags is None:
        raise ValueError(f"no benchmark profile for memory {memory}")
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (memory,):
        raise ValueError(f"need {memory} phases, got shape {phases.shape}")
    return ChannelTaps(mags * np.exp(1j * phases))


def draw_channel(memory: int, rng: np.random.Generator) -> ChannelTaps:
    """Benchmark profile with i.i.d. phases uniform on [0, 2*pi)."""
    return channel_from_phases(memory, rng.uniform(0.0, 2.0 * np.pi, size=memory))


def complex_awgn(n: int, variance: float, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. circular complex Gaussian, variance/2 per real dimension."""
    scale = np.sqrt(variance / 2.0)
    return rng.normal(scale=scale, size=n) + 1j * rng.normal(scale=scale, size=n)


def apply_channel(
    x,
    h: ChannelTaps,
    preamble,
    noise: NoiseSpec | None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Convolve symbols with the taps and add noise.

    ``preamble`` supplies the ``memory - 1`` symbols preceding the frame
    (the transmitter's initial channel state).  ``noise=None`` yields the
    noiseless output.
    """
    x = np.asarray(x, dtype=complex)
    preamble = np.asarray(preamble, dtype=complex)
    if preamble.size != h.memory - 1:
        raise ValueError(
            f"preamble length {preamble.size} does not match memory-1 = {h.memory - 1}"
        )
    full = np.concatenate([preamble, x])
    z = np.convolve(full, h.taps)[h.memory - 1 : h.memory - 1 + x.size]
    if noise is None:
        return z
    if rng is None:
        raise ValueError("an rng is required to draw noise")
    return z + complex_awgn(x.size, noise.variance, rng)


def draw_preamble(order: int, memory: int, rng: np.random.Generator) -> np.ndarray:
    """memory-1 random M-PSK symbols, unknown to the receiver."""
    idx = rng.integers(0, order, size=memory - 1)
    return np.exp(2j * np.pi * idx / order)


def perturb_init(h: ChannelTaps, sigma_h2: float, rng: np.random.Generator) -> ChannelTaps:
    """Add i.i.d. circular complex Gaussian error of total variance sigma_h2."""
    if sigma_h2 < 0:
        raise ValueError("perturbation variance must be non-negative")
    if sigma_h2 == 0:
        return ChannelTaps(h.taps.copy())
    return ChannelTaps(h.taps + complex_awgn(h.memory, sigma_h2, rng))
