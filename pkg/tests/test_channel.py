import math

import numpy as np
import pytest

from aether3d.channel import (
    ChannelParams,
    DroneBS,
    Network,
    QUADRATIC_COMPUTE,
    backhaul_latency,
    computation_latency,
    dbm_per_hz_to_w_per_hz,
    per_ue_rate,
    received_power,
    sinr,
    sinr_map,
    total_latency,
    transmission_latency,
    unit_transmission_latency_map,
)


def bs(x=0.0, y=0.0, z=0.0, **kw):
    kw.setdefault("id", 0)
    return DroneBS(position=(x, y, z), **kw)


def test_noise_psd_conversion():
    assert dbm_per_hz_to_w_per_hz(-170.0) == pytest.approx(1e-20, rel=1e-12)
    assert dbm_per_hz_to_w_per_hz(0.0) == pytest.approx(1e-3)


def test_sinr_no_interference_hand_value():
    # eta*kappa*P at zero distance over pure noise: 1.42e-4 * 0.5 / 1e-13
    params = ChannelParams(path_loss_constant=1.42e-4, noise_psd=1e-20)
    station = bs(tx_power=0.5, bandwidth=1e7)
    assert sinr((0, 0, 0), station, [], params) == pytest.approx(7.1e8, rel=1e-12)


def test_sinr_vanishes_with_channel_gain():
    params = ChannelParams(channel_gain=1e-12)
    station = bs(tx_power=0.5)
    assert sinr((0, 0, 0), station, [], params) < 1e-10


def test_sinr_symmetry_gives_unity():
    params = ChannelParams(noise_psd=1e-30)
    serving = bs(x=-100.0)
    rival = bs(x=100.0, id=1)
    value = sinr((0.0, 0.0, 0.0), serving, [rival], params)
    assert value == pytest.approx(1.0, rel=1e-9)


def test_received_power_decreases_with_distance():
    params = ChannelParams()
    station = bs()
    rng = np.random.default_rng(11)
    d = np.sort(rng.uniform(0, 3000, size=40))
    powers = [received_power((x, 0, 0), station, params) for x in d]
    assert all(a > b for a, b in zip(powers, powers[1:]))
    assert math.isfinite(powers[0])  # bounded at d = 0


def test_sinr_decreases_when_interferer_approaches():
    params = ChannelParams()
    serving = bs()
    values = [
        sinr((0, 0, 0), serving, [bs(x=d, id=1)], params)
        for d in (2000.0, 1500.0, 1000.0, 500.0, 100.0)
    ]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_per_ue_rate_examples():
    station = bs(bandwidth=1e7)
    assert per_ue_rate(station, 10.0, 3.0) == pytest.approx(2e6, rel=1e-12)
    assert per_ue_rate(station, 10.0, 0.0) == 0.0
    # empty-cell guard: fewer than one expected user gets the full band
    assert per_ue_rate(station, 0.0, 3.0) == pytest.approx(2e7, rel=1e-12)
    with pytest.raises(ValueError):
        per_ue_rate(station, -1.0, 1.0)


def test_transmission_latency_examples():
    params = ChannelParams(packet_bits=1e4)
    station = bs(bandwidth=1e6)
    # rate = 1e6 b/s when log2(1+gamma) = 1 and one user
    assert transmission_latency(station, 1.0, 1.0, params) == pytest.approx(0.01)
    assert transmission_latency(station, 1.0, 0.0, params) == math.inf


def test_backhaul_latency_examples():
    params = ChannelParams(packet_bits=1e4)
    assert backhaul_latency(100.0, bs(backhaul_rate=1e8), params) == pytest.approx(0.01)
    assert backhaul_latency(0.0, bs(backhaul_rate=1e8), params) == 0.0
    # station number 1 in the (100+n) Mb/s convention
    assert backhaul_latency(100.0, bs(backhaul_rate=1.01e8), params) == pytest.approx(1e6 / 1.01e8)


def test_computation_latency_examples():
    params = ChannelParams(packet_bits=1e4)
    station = bs(compute_speed=1e14)
    assert computation_latency(100.0, station, params) == pytest.approx(1e-2)
    assert computation_latency(0.0, station, params) == 0.0
    assert QUADRATIC_COMPUTE.marginal(1e6, 1e14) == pytest.approx(2e-8)


def test_latency_components_monotone_in_load():
    params = ChannelParams()
    station = bs()
    loads = [0.0, 1.0, 5.0, 20.0, 80.0]
    tx = [transmission_latency(station, k, 3.0, params) for k in loads]
    bh = [backhaul_latency(k, station, params) for k in loads]
    cp = [computation_latency(k, station, params) for k in loads]
    for series in (tx, bh, cp):
        assert all(a <= b for a, b in zip(series, series[1:]))
    # backhaul is linear, computation quadratic in the load
    assert backhaul_latency(40.0, station, params) == pytest.approx(2 * backhaul_latency(20.0, station, params))
    assert computation_latency(40.0, station, params) == pytest.approx(4 * computation_latency(20.0, station, params))


def test_total_latency_breakdown_sums():
    params = ChannelParams()
    serving = bs()
    out = total_latency((100.0, 50.0, 25.0), serving, [bs(x=900.0, id=1)], 12.0, params)
    assert out.total == pytest.approx(out.transmission + out.backhaul + out.computation)
    assert out.transmission > 0 and out.backhaul > 0 and out.computation > 0


def test_total_latency_against_independent_evaluator():
    """Duplicate-implementation oracle written from the basic definitions."""
    params = ChannelParams()
    stations = [
        bs(x=0.0, tx_power=0.5, bandwidth=1e7, backhaul_rate=1.01e8, compute_speed=1e14),
        bs(x=979.8, y=0.0, id=1),
        bs(x=-979.8, y=0.0, id=2),
    ]
    point = np.array([120.0, -80.0, 45.0])
    k_users = 17.0

    def oracle():
        eta, kappa, alpha = 1.42e-4, 1.0, 2.0
        beta, noise = 1e4, 1e-20
        recv = []
        for st in stations:
            d = math.dist(point, st.position)
            recv.append(eta * kappa * st.tx_power * (1.0 + d) ** (-alpha))
        gamma = recv[0] / (recv[1] + recv[2] + noise * 1e7)
        rate = 1e7 / k_users * math.log2(1.0 + gamma)
        return beta / rate, beta * k_users / 1.01e8, (beta * k_users) ** 2 / 1e14

    expect = oracle()
    got = total_latency(point, stations[0], stations[1:], k_users, params)
    assert got.transmission == pytest.approx(expect[0], rel=1e-12)
    assert got.backhaul == pytest.approx(expect[1], rel=1e-12)
    assert got.computation == pytest.approx(expect[2], rel=1e-12)


def test_sinr_map_matches_scalar_evaluator():
    params = ChannelParams()
    stations = tuple(bs(x=600.0 * i, id=i) for i in range(4))
    network = Network(stations=stations, groups=((0, 2), (1, 3)))
    rng = np.random.default_rng(5)
    points = rng.uniform(-500, 2500, size=(25, 3))
    table = sinr_map(points, network, params)
    for i, point in enumerate(points):
        for n, station in enumerate(stations):
            interferers = network.interferers(n)
            assert table[i, n] == pytest.approx(sinr(point, station, interferers, params), rel=1e-12)


def test_unit_transmission_latency_map_values():
    params = ChannelParams()
    stations = (bs(), bs(x=979.8, id=1))
    network = Network(stations=stations)
    points = np.array([[100.0, 0.0, 0.0]])
    gamma = sinr_map(points, network, params)
    unit = unit_transmission_latency_map(points, network, params)
    assert unit[0, 0] == pytest.approx(1e4 / (1e7 * np.log2(1 + gamma[0, 0])), rel=1e-12)
    assert np.all(np.isfinite(unit))


def test_network_group_validation():
    stations = (bs(), bs(x=100.0, id=1))
    with pytest.raises(ValueError):
        Network(stations=stations, groups=((0,),))
    net = Network(stations=stations)
    assert net.groups == ((0, 1),)
    assert [s.id for s in net.interferers(0)] == [1]


def test_param_validation():
    with pytest.raises(ValueError):
        ChannelParams(channel_gain=0.0)
    with pytest.raises(ValueError):
        ChannelParams(noise_psd=-1e-20)
    with pytest.raises(ValueError):
        DroneBS(id=0, position=(0, 0, 0), tx_power=0.0)
