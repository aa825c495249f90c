"""SINR, per-user rate, and the three latency components.

The air-to-air link uses a bounded path loss model: received power from a
station with transmit power P at distance d is

    eta * kappa * P * (1 + d)^(-alpha),

finite at d = 0.  SINR divides that by co-channel interference plus thermal
noise N_o * B.  Latency has three parts: packet transmission over the shared
downlink, backhaul forwarding, and on-board computation (quadratic in the
processed load by default, pluggable otherwise).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

# A cell expected to hold fewer than one user grants a visiting user the full
# bandwidth; keeps the FDMA share (and every latency built on it) finite.
MIN_USER_SHARE = 1.0


def dbm_per_hz_to_w_per_hz(value_dbm_hz: float) -> float:
    """Convert a noise power spectral density from dBm/Hz to W/Hz."""
    return 10.0 ** (value_dbm_hz / 10.0) * 1e-3


@dataclass(frozen=True)
class ChannelParams:
    """Radio constants shared by every link."""

    carrier_frequency: float = 2.0e9   # Hz, informational
    path_loss_exponent: float = 2.0    # alpha
    path_loss_constant: float = 1.42e-4  # eta
    noise_psd: float = 1e-20           # N_o, W/Hz
    channel_gain: float = 1.0          # kappa in (0, 1]; 1 = line of sight
    packet_bits: float = 1e4           # bits per packet delivered to each user
    reuse_factor: int = 1

    def __post_init__(self):
        if self.path_loss_exponent <= 0 or self.path_loss_constant <= 0:
            raise ValueError("path loss parameters must be positive")
        if self.noise_psd <= 0:
            raise ValueError("noise_psd must be positive (W/Hz)")
        if not 0.0 < self.channel_gain <= 1.0:
            raise ValueError("channel_gain must lie in (0, 1]")
        if self.packet_bits <= 0:
            raise ValueError("packet_bits must be positive")
        if self.reuse_factor < 1:
            raise ValueError("reuse_factor must be a positive integer")


@dataclass(frozen=True)
class DroneBS:
    """Per-station radio, backhaul, and compute configuration."""

    id: int
    position: np.ndarray
    tx_power: float = 0.5        # W
    bandwidth: float = 1e7       # Hz
    backhaul_rate: float = 1e8   # bits/s
    compute_speed: float = 1e14  # bits^2/s constant of the quadratic compute model
    frequency_group: int = 0

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        if min(self.tx_power, self.bandwidth, self.backhaul_rate, self.compute_speed) <= 0:
            raise ValueError("tx_power, bandwidth, backhaul_rate, compute_speed must be positive")


@dataclass(frozen=True)
class Network:
    """A deployment: stations plus their co-channel grouping."""

    stations: tuple[DroneBS, ...]
    groups: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        stations = tuple(self.stations)
        object.__setattr__(self, "stations", stations)
        groups = tuple(tuple(g) for g in self.groups) or (tuple(range(len(stations))),)
        object.__setattr__(self, "groups", groups)
        seen = sorted(i for g in groups for i in g)
        if seen != list(range(len(stations))):
            raise ValueError("groups must partition the station indices")

    def __len__(self) -> int:
        return len(self.stations)

    def group_of(self, station_id: int) -> tuple[int, ...]:
        for members in self.groups:
            if station_id in members:
                return members
        raise KeyError(station_id)

    def interferers(self, station_id: int) -> list[DroneBS]:
        return [self.stations[i] for i in self.group_of(station_id) if i != station_id]


@dataclass(frozen=True)
class ComputationModel:
    """Pluggable non-decreasing compute-latency model g and its derivative.

    Both callables take (processed_bits, compute_speed) and return seconds and
    seconds/bit respectively; they must accept numpy arrays.
    """

    latency: Callable
    marginal: Callable


QUADRATIC_COMPUTE = ComputationModel(
    latency=lambda bits, speed: bits * bits / speed,
    marginal=lambda bits, speed: 2.0 * bits / speed,
)


def received_power(point, station: DroneBS, params: ChannelParams) -> float:
    """eta * kappa * P * (1 + d)^(-alpha); finite at d = 0."""
    d = float(np.linalg.norm(np.asarray(point, dtype=float) - station.position))
    return (
        params.path_loss_constant
        * params.channel_gain
        * station.tx_power
        * (1.0 + d) ** (-params.path_loss_exponent)
    )


def sinr(point, serving: DroneBS, interferers: Sequence[DroneBS], params: ChannelParams) -> float:
    """SINR at a point served by one station against a co-channel interferer set."""
    signal = received_power(point, serving, params)
    interference = sum(received_power(point, u, params) for u in interferers)
    noise = params.noise_psd * serving.bandwidth
    return signal / (interference + noise)


def per_ue_rate(serving: DroneBS, expected_users: float, sinr_value: float) -> float:
    """Downlink rate for one user when the cell's bandwidth is shared FDMA-style.

    The bandwidth divisor is max(expected_users, 1): an almost-empty cell gives
    a visiting user the whole band instead of dividing by a fraction.
    """
    if expected_users < 0:
        raise ValueError("expected_users must be non-negative")
    share = serving.bandwidth / max(expected_users, MIN_USER_SHARE)
    return share * np.log2(1.0 + sinr_value)


def transmission_latency(serving: DroneBS, expected_users: float, sinr_value: float,
                         params: ChannelParams) -> float:
    """Seconds to deliver one packet; +inf when the rate is zero."""
    rate = per_ue_rate(serving, expected_users, sinr_value)
    if rate <= 0.0:
        return float("inf")
    return params.packet_bits / rate


def backhaul_latency(expected_users: float, serving: DroneBS, params: ChannelParams) -> float:
    """Seconds to forward the cell's average load over the backhaul link."""
    return params.packet_bits * expected_users / serving.backhaul_rate


def computation_latency(expected_users: float, serving: DroneBS, params: ChannelParams,
                        compute: ComputationModel = QUADRATIC_COMPUTE) -> float:
    """Seconds of on-board processing for the cell's average load."""
    return float(compute.latency(params.packet_bits * expected_users, serving.compute_speed))


@dataclass(frozen=True)
class LatencyBreakdown:
    transmission: float
    backhaul: float
    computation: float

    @property
    def total(self) -> float:
        return self.transmission + self.backhaul + self.computation


def total_latency(point, serving: DroneBS, interferers: Sequence[DroneBS],
                  expected_users: float, params: ChannelParams,
                  compute: ComputationModel = QUADRATIC_COMPUTE) -> LatencyBreakdown:
    """All three latency components for one user position."""
    gamma = sinr(point, serving, interferers, params)
    return LatencyBreakdown(
        transmission=transmission_latency(serving, expected_users, gamma, params),
        backhaul=backhaul_latency(expected_users, serving, params),
        computation=computation_latency(expected_users, serving, params, compute),
    )


# ----------------------------------------------------------------------------
# Vectorized evaluators over many points (used by the association solver and
# the experiment harness; one row per point, one column per station).
# ----------------------------------------------------------------------------

def _station_array(network: Network, attr: str) -> np.ndarray:
    return np.array([getattr(bs, attr) for bs in network.stations], dtype=float)


def received_power_map(points: np.ndarray, network: Network, params: ChannelParams) -> np.ndarray:
    """Received power from every station at every point, shape (n_points, n_stations)."""
    pts = np.asarray(points, dtype=float)
    pos = np.array([bs.position for bs in network.stations])
    powers = _station_array(network, "tx_power")
    d = np.linalg.norm(pts[:, None, :] - pos[None, :, :], axis=2)
    return params.path_loss_constant * params.channel_gain * powers[None, :] * (1.0 + d) ** (
        -params.path_loss_exponent
    )


def sinr_map(points: np.ndarray, network: Network, params: ChannelParams) -> np.ndarray:
    """SINR of every candidate serving station at every point, (n_points, n_stations).

    Interference for column n sums received power over station n's co-channel
    group, excluding n itself.
    """
    received = received_power_map(points, network, params)
    interference = np.empty_like(received)
    for members in network.groups:
        idx = list(members)
        group_total = received[:, idx].sum(axis=1, keepdims=True)
        interference[:, idx] = group_total - received[:, idx]
    noise = params.noise_psd * _station_array(network, "bandwidth")
    return received / (interference + noise[None, :])


def unit_transmission_latency_map(points: np.ndarray, network: Network,
                                  params: ChannelParams) -> np.ndarray:
    """Per-point full-band packet latency beta / (B * log2(1 + SINR)), (n_points, n_stations).

    This is the position-dependent factor of transmission latency; multiplying
    by the cell's expected user count gives the shared-band value.  Columns are
    +inf wherever the SINR is exactly zero.
    """
    gamma = sinr_map(points, network, params)
    spectral = np.log2(1.0 + gamma)
    bands = _station_array(network, "bandwidth")
    with np.errstate(divide="ignore"):
        return params.packet_bits / (bands[None, :] * spectral)
