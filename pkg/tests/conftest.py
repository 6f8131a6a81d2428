import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cfisac.scenario import ChannelSet, ScenarioConfig, Square, draw_channels

sys.path.insert(0, str(Path(__file__).parent / "oracles"))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


def network_config(**kw) -> ScenarioConfig:
    base = dict(
        n_tx=2, n_rx=2, n_users=2, n_antennas=2,
        tx_positions=((0.0, 500.0), (500.0, 500.0)),
        rx_positions=((0.0, 250.0), (500.0, 250.0)),
        user_regions=(Square((200.0, 200.0), 30.0), Square((300.0, 300.0), 30.0)),
        eve_region=Square((250.0, 250.0), 30.0),
        power_budget=5.0, cap_tx=4.0, cap_rx=3.0, secrecy_floor=0.5)
    base.update(kw)
    return ScenarioConfig(**base)


def channel_set_from(d) -> ChannelSet:
    """ChannelSet around the raw arrays of an oracle instance."""
    return ChannelSet(h_users=d["h_users"], h_eve=d["h_eve"], g_sense=d["g"], c_clutter=d["c"],
                      n_antennas=d["na"], noise_user=d["noise_user"], noise_eve=d["noise_eve"],
                      noise_rx=d["noise_rx"])


def scalar_channels(p) -> ChannelSet:
    return ChannelSet(h_users=np.array([[p["h"]]]), h_eve=np.array([p["he"]]),
                      g_sense=np.array([[p["g"]]]), c_clutter=np.array([[p["c"]]]), n_antennas=1,
                      noise_user=np.array([p["noise_user"]]), noise_eve=p["noise_eve"],
                      noise_rx=np.array([p["noise_rx"]]))


@pytest.fixture
def cfg():
    return network_config()


@pytest.fixture
def ch(cfg):
    return draw_channels(cfg, np.random.default_rng(7))
