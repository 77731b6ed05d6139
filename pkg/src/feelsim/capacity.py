"""Capacity allocation for the parallel fading broadcast channel and MAC.

Downlink: on each sub-channel only the device with the strongest gain is
served, and power is water-filled across sub-channels against the total
budget. Uplink: same winner-per-sub-channel structure against a pooled
budget of ``K * per_device_power``, with the resulting sum capacity split
evenly across participants (symmetric rate allocation).

`bc_boundary` and `mac_region_contains` evaluate the single-sub-channel
region descriptions directly; they exist as test oracles and are not used
on the protocol path.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "AllocationResult",
    "BCBoundaryPoint",
    "DegenerateChannelError",
    "bc_boundary",
    "bc_waterfill",
    "mac_waterfill",
    "mac_region_contains",
]

# Bisection controls for the water level (monotone scalar equation with a
# guaranteed bracket, see _water_level).
_MAX_BISECT = 200
_RESIDUAL_RTOL = 1e-12


class DegenerateChannelError(ValueError):
    """All gains are zero; no power allocation exists."""


@dataclass(frozen=True)
class AllocationResult:
    """Water-filling outcome over one realization restricted to K devices.

    per_device_capacity is in bits per round; winner[i] is the index (into
    the restricted device list) served on sub-channel i.
    """

    water_level: float
    per_subchannel_power: np.ndarray
    per_subchannel_rate: np.ndarray
    per_device_capacity: np.ndarray
    winner: np.ndarray


@dataclass(frozen=True)
class BCBoundaryPoint:
    alpha: np.ndarray
    rates: np.ndarray


def _water_level(best_gains: np.ndarray, budget: float) -> float:
    """Solve sum_i (1/lam - 1/g_i)^+ = budget by bisection.

    The left side is strictly decreasing in lam. Bracket: at
    lam_hi = max(g) the sum is 0; at lam_lo = n/(budget + sum(1/g)) the sum
    is >= budget because dropping the positive-part clamp only lowers it.
    """
    g = best_gains[best_gains > 0.0]
    if g.size == 0:
        raise DegenerateChannelError("degenerate channel: all gains zero")
    lam_lo = g.size / (budget + np.sum(1.0 / g))
    lam_hi = float(np.max(g))
    lam = 0.5 * (lam_lo + lam_hi)
    for _ in range(_MAX_BISECT):
        lam = 0.5 * (lam_lo + lam_hi)
        allocated = np.sum(np.maximum(1.0 / lam - 1.0 / g, 0.0))
        if abs(allocated - budget) <= _RESIDUAL_RTOL * budget:
            break
        if allocated > budget:
            lam_lo = lam
        else:
            lam_hi = lam
    return float(lam)


def _waterfill(gains: np.ndarray, budget: float) -> AllocationResult:
    """Winner-takes-the-sub-channel water-filling shared by both links."""
    if gains.ndim != 2:
        raise ValueError("gains must be a (devices, sub-channels) matrix")
    if budget <= 0:
        raise ValueError("power budget must be positive")
    mags2 = np.abs(gains) ** 2
    winner = np.argmax(mags2, axis=0)  # ties: argmax returns lowest index
    best = mags2[winner, np.arange(mags2.shape[1])]
    lam = _water_level(best, budget)
    with np.errstate(divide="ignore"):
        power = np.where(best > 0.0, np.maximum(1.0 / lam - 1.0 / best, 0.0), 0.0)
    rate = np.log2(1.0 + np.maximum(best / lam - 1.0, 0.0))
    per_device = np.zeros(mags2.shape[0])
    np.add.at(per_device, winner, rate)
    return AllocationResult(
        water_level=lam,
        per_subchannel_power=power,
        per_subchannel_rate=rate,
        per_device_capacity=per_device,
        winner=winner,
    )


def bc_waterfill(gains: np.ndarray, total_power: float) -> AllocationResult:
    """Sum-capacity-optimal downlink allocation for the selected devices.

    gains: (K, s_dl) complex matrix restricted to the selected devices.
    per_device_capacity[k] is the sum of rates on the sub-channels device k
    wins, in bits per round.
    """
    return _waterfill(gains, total_power)


def mac_waterfill(gains: np.ndarray, per_device_power: float) -> AllocationResult:
    """Uplink allocation: pooled budget K*P, symmetric capacity split.

    Only the strongest device transmits on each sub-channel; the resulting
    sum capacity is divided equally, so per_device_capacity is constant.
    """
    if per_device_power <= 0:
        raise ValueError("per-device power must be positive")
    num_devices = gains.shape[0]
    alloc = _waterfill(gains, num_devices * per_device_power)
    sum_capacity = float(np.sum(alloc.per_subchannel_rate))
    return AllocationResult(
        water_level=alloc.water_level,
        per_subchannel_power=alloc.per_subchannel_power,
        per_subchannel_rate=alloc.per_subchannel_rate,
        per_device_capacity=np.full(num_devices, sum_capacity / num_devices),
        winner=alloc.winner,
    )


def bc_boundary(gains: np.ndarray, power: float, alpha: np.ndarray) -> BCBoundaryPoint:
    """One boundary point of the single-sub-channel degraded BC region.

    Devices are ordered by ascending |h| internally (the weaker user decodes
    while treating the stronger users' superposed signals as noise); rates
    are returned in the input device order.
    """
    gains = np.asarray(gains)
    alpha = np.asarray(alpha, dtype=float)
    if gains.shape != alpha.shape:
        raise ValueError("gains and alpha must have the same length")
    if power <= 0:
        raise ValueError("power must be positive")
    if np.any(alpha < 0) or abs(alpha.sum() - 1.0) > 1e-12:
        raise ValueError("alpha must be nonnegative and sum to 1")
    mags2 = np.abs(gains) ** 2
    order = np.argsort(mags2, kind="stable")
    g = mags2[order]
    a = alpha[order]
    # interference at user k comes from the shares of all stronger users
    tail = np.concatenate([np.cumsum((a * g)[::-1])[::-1][1:], [0.0]])
    rates_sorted = np.log2(1.0 + a * g * power / (1.0 + tail * power))
    rates = np.empty_like(rates_sorted)
    rates[order] = rates_sorted
    return BCBoundaryPoint(alpha=alpha.copy(), rates=rates)


def mac_region_contains(gains, powers, rates) -> bool:
    """Exhaustive subset check of the single-sub-channel MAC region.

    True iff sum_{k in S} rates_k <= log2(1 + sum_{k in S} |h_k|^2 P_k) for
    every nonempty S. Comparison allows ~1e-12 relative slack so boundary
    points computed through a different float path still count as inside.
    Oracle use only: K <= 16.
    """
    gains = np.asarray(gains)
    powers = np.asarray(powers, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if not (gains.shape == powers.shape == rates.shape):
        raise ValueError("gains, powers, rates must have the same length")
    num = gains.size
    if num > 16:
        raise ValueError("oracle limited to small K (<= 16)")
    weighted = np.abs(gains) ** 2 * powers
    for mask in range(1, 1 << num):
        members = [k for k in range(num) if mask >> k & 1]
        bound = np.log2(1.0 + weighted[members].sum())
        if rates[members].sum() > bound * (1.0 + 1e-12) + 1e-12:
            return False
    return True
