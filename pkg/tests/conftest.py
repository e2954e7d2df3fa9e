import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from isac6d.config import load_preset  # noqa: E402
from isac6d.motion import TargetState6D  # noqa: E402
from isac6d.radar import RadarConfig  # noqa: E402


@pytest.fixture(scope="session")
def paper_cfg():
    return load_preset("paper")


@pytest.fixture(scope="session")
def paper_radar(paper_cfg):
    return paper_cfg.radar


@pytest.fixture(scope="session")
def desk_cfg():
    return load_preset("desk")


@pytest.fixture
def small_radar():
    return RadarConfig(n_subcarriers=8, n_symbols=6, tx_shape=(3, 2), rx_shape=(4, 3))


@pytest.fixture(scope="session")
def reference_target():
    return TargetState6D.from_degrees(120.0, 90.0, 20.0, 15.0, 0.0, 8.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
