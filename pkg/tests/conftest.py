import numpy as np
import pytest

from aether3d.channel import ChannelParams, DroneBS, Network
from aether3d.geometry import Box, VoxelGrid


@pytest.fixture
def unit_box():
    return Box((0.0, 0.0, 0.0), (1000.0, 1000.0, 1000.0))


@pytest.fixture
def default_params():
    return ChannelParams()


def make_two_station_instance(backhaul=(1.0e8, 1.0e8), compute=(1e14, 1e14),
                              tx_power=(0.5, 0.5), shape=(4, 2, 2)):
    """Two stations on the x axis of a 800x400x400 box."""
    box = Box((0, 0, 0), (800.0, 400.0, 400.0))
    grid = VoxelGrid(box=box, shape=shape)
    stations = (
        DroneBS(id=0, position=(200.0, 200.0, 200.0), tx_power=tx_power[0],
                backhaul_rate=backhaul[0], compute_speed=compute[0]),
        DroneBS(id=1, position=(600.0, 200.0, 200.0), tx_power=tx_power[1],
                backhaul_rate=backhaul[1], compute_speed=compute[1]),
    )
    return box, grid, Network(stations=stations)
