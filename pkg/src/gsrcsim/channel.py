"""Downlink channel for C&C packets.

LoS/NLoS free-space path loss with Rayleigh fading. A packet is decoded when
its SNR strictly exceeds the threshold; its transmission time follows from
the Shannon rate over the configured bandwidth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Protocol

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    if not x > 0.0:
        raise ValueError(f"linear_to_db needs a positive value, got {x!r}")
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class ChannelParams:
    """Radio parameters of the BS-to-UAV link.

    Excess path-loss coefficients are given in dB (0 dB is a linear factor
    of 1); every other power is in dBm.
    """

    a: float = 9.61
    b: float = 0.16
    fc_hz: float = 5e9
    alpha: float = 2.0
    eta_los_db: float = 1.0
    eta_nlos_db: float = 20.0
    noise_dbm: float = -104.0
    tx_power_dbm: float = 18.0
    bandwidth_hz: float = 1e6
    snr_threshold_db: float = 5.5
    cnc_bits: int = 104 * 8

    def __post_init__(self) -> None:
        for name in ("a", "b", "fc_hz", "alpha", "bandwidth_hz"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)!r}")
        if self.cnc_bits <= 0:
            raise ValueError(f"cnc_bits must be > 0, got {self.cnc_bits!r}")
        if self.eta_los_db < 0:
            raise ValueError("eta_los_db must be >= 0 dB (linear factor >= 1)")
        if self.eta_nlos_db < self.eta_los_db:
            raise ValueError("eta_nlos_db must be >= eta_los_db")

    @property
    def eta_los(self) -> float:
        return db_to_linear(self.eta_los_db)

    @property
    def eta_nlos(self) -> float:
        return db_to_linear(self.eta_nlos_db)

    @property
    def tx_power_w(self) -> float:
        return db_to_linear(self.tx_power_dbm - 30.0)

    @property
    def noise_w(self) -> float:
        return db_to_linear(self.noise_dbm - 30.0)

    @property
    def snr_threshold(self) -> float:
        return db_to_linear(self.snr_threshold_db)


@dataclass(frozen=True)
class ChannelDraw:
    """One realisation of the downlink for a single transmission attempt.

    ``tx_time_s`` is None when the SNR is zero, i.e. the packet never arrives.
    """

    is_los: bool
    fading_power: float
    snr_linear: float
    decoded: bool
    tx_time_s: float | None


def _geometry(bs_pos, uav_pos) -> tuple[float, float]:
    delta = np.asarray(uav_pos, dtype=float) - np.asarray(bs_pos, dtype=float)
    d = float(np.linalg.norm(delta))
    if d == 0.0:
        raise ValueError("coincident endpoints: BS and UAV share a position")
    height = float(delta[2])
    if height < 0.0:
        raise ValueError("UAV must not be below the BS")
    assert height <= d * (1.0 + 1e-12)
    return d, height


def elevation_deg(bs_pos, uav_pos) -> float:
    d, height = _geometry(bs_pos, uav_pos)
    return math.degrees(math.asin(min(1.0, height / d)))


def los_probability(bs_pos, uav_pos, params: ChannelParams) -> float:
    theta = elevation_deg(bs_pos, uav_pos)
    return 1.0 / (1.0 + params.a * math.exp(-params.b * (theta - params.a)))


def free_space_factor(distance_m: float, params: ChannelParams) -> float:
    """Distance-dependent path loss ``(4 pi d fc / c) ** alpha`` (linear)."""
    return (4.0 * math.pi * distance_m * params.fc_hz / SPEED_OF_LIGHT) ** params.alpha


def tx_time(snr_linear: float, params: ChannelParams) -> float | None:
    if snr_linear <= 0.0:
        return None
    return params.cnc_bits / (params.bandwidth_hz * math.log2(snr_linear + 1.0))


def channel_outcome(
    bs_pos, uav_pos, params: ChannelParams, is_los: bool, fading_power: float
) -> ChannelDraw:
    """Deterministic part of a draw: SNR, decode flag and airtime."""
    d, _ = _geometry(bs_pos, uav_pos)
    eta = params.eta_los if is_los else params.eta_nlos
    gain = fading_power / (free_space_factor(d, params) * eta)
    snr = params.tx_power_w * gain / params.noise_w
    return ChannelDraw(
        is_los=bool(is_los),
        fading_power=float(fading_power),
        snr_linear=snr,
        decoded=snr > params.snr_threshold,
        tx_time_s=tx_time(snr, params),
    )


def sample_channel(bs_pos, uav_pos, params: ChannelParams, rng: np.random.Generator) -> ChannelDraw:
    # |beta|^2 for beta ~ CN(0, 1) is Exp(1); draw it directly.
    is_los = rng.random() < los_probability(bs_pos, uav_pos, params)
    fading_power = rng.exponential(1.0)
    return channel_outcome(bs_pos, uav_pos, params, is_los, fading_power)


def decode_probability(bs_pos, uav_pos, params: ChannelParams) -> float:
    """Closed-form P(decoded) for a fixed geometry (exponential fading tail)."""
    d, _ = _geometry(bs_pos, uav_pos)
    p_los = los_probability(bs_pos, uav_pos, params)
    base = params.snr_threshold * params.noise_w * free_space_factor(d, params) / params.tx_power_w
    return p_los * math.exp(-base * params.eta_los) + (1.0 - p_los) * math.exp(-base * params.eta_nlos)


class Channel(Protocol):
    def draw(self, uav_pos, rng: np.random.Generator) -> ChannelDraw: ...


class RadioChannel:
    """Stochastic channel between a fixed BS and the UAV."""

    def __init__(self, params: ChannelParams, bs_pos=(0.0, 0.0, 0.0)):
        self.params = params
        self.bs_pos = np.asarray(bs_pos, dtype=float)

    def draw(self, uav_pos, rng: np.random.Generator) -> ChannelDraw:
        return sample_channel(self.bs_pos, uav_pos, self.params, rng)


class IdealChannel:
    """Every attempt decodes after a fixed airtime; consumes no randomness."""

    def __init__(self, tx_time_s: float = 0.0):
        self.tx_time_s = tx_time_s

    def draw(self, uav_pos, rng: np.random.Generator) -> ChannelDraw:
        return ChannelDraw(True, 1.0, math.inf, True, self.tx_time_s)


class DeadChannel:
    """Nothing ever decodes."""

    def draw(self, uav_pos, rng: np.random.Generator) -> ChannelDraw:
        return ChannelDraw(False, 0.0, 0.0, False, None)


class ScriptedChannel:
    """Replays a fixed list of outcomes, for timeline tests.

    Each item is either a ChannelDraw or a ``(decoded, tx_time_s)`` pair.
    """

    def __init__(self, outcomes: Iterable):
        self._it: Iterator = iter(outcomes)
        self.positions: list[np.ndarray] = []

    def draw(self, uav_pos, rng: np.random.Generator) -> ChannelDraw:
        self.positions.append(np.array(uav_pos, dtype=float))
        item = next(self._it)
        if isinstance(item, ChannelDraw):
            return item
        decoded, t = item
        return ChannelDraw(True, 1.0, math.inf if decoded else 0.0, bool(decoded), t)
