"""Block-fading channel realizations for the downlink broadcast and uplink MAC.

Both links are parallel fading channels: one complex gain per (device,
sub-channel) pair, redrawn independently every iteration and held fixed
within it. Entries are circularly symmetric complex Gaussian with variance
``sigma2`` (real and imaginary parts each N(0, sigma2/2)).

Only the gains are modeled. Additive receiver noise never appears
explicitly: transmission is digital at rates inside the capacity region,
so its entire effect is already captured by the capacity expressions that
the allocator turns into per-device bit budgets.
"""

from dataclasses import dataclass

import numpy as np

from .rng import SeedTree

__all__ = ["ChannelConfig", "ChannelRealization", "draw_downlink", "draw_uplink"]


@dataclass(frozen=True)
class ChannelConfig:
    num_devices: int
    s_dl: int
    s_ul: int
    sigma2_dl: float
    sigma2_ul: float

    def __post_init__(self):
        if self.num_devices < 1:
            raise ValueError("num_devices must be >= 1")
        if self.s_dl < 1 or self.s_ul < 1:
            raise ValueError("sub-channel counts must be >= 1")
        if self.sigma2_dl <= 0 or self.sigma2_ul <= 0:
            raise ValueError("gain variances must be positive")


@dataclass(frozen=True)
class ChannelRealization:
    """Complex gains, one row per device and one column per sub-channel."""

    gains: np.ndarray
    iteration: int


def _complex_normal(rng: np.random.Generator, shape, sigma2: float) -> np.ndarray:
    scale = np.sqrt(sigma2 / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def draw_downlink(config: ChannelConfig, seeds: SeedTree, t: int) -> ChannelRealization:
    """Downlink gains for iteration t; (seed, t) fully determines the draw."""
    rng = seeds.stream("channel-dl", t)
    gains = _complex_normal(rng, (config.num_devices, config.s_dl), config.sigma2_dl)
    return ChannelRealization(gains=gains, iteration=t)


def draw_uplink(config: ChannelConfig, seeds: SeedTree, t: int) -> ChannelRealization:
    """Uplink gains for iteration t; independent of the downlink stream."""
    rng = seeds.stream("channel-ul", t)
    gains = _complex_normal(rng, (config.num_devices, config.s_ul), config.sigma2_ul)
    return ChannelRealization(gains=gains, iteration=t)
