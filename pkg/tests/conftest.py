import json
import os

import pytest

from src.auction_core import AdvertiserProfile, validate_ctr_curve
from src.logger import Logger
from src.market_analysis import MarketScenario
from src.mediator_model import MediatorProfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
WORKED_EXAMPLE = os.path.join(ROOT, "scenarios", "worked_example.json")


@pytest.fixture
def worked_scenario():
    """gamma = (1, .5); p-scores 10, 4, 3; s-scores 3, 5, 8; f = .8; L = 2"""
    return MarketScenario(
        ctr=validate_ctr_curve([1.0, 0.5]),
        advertisers=(
            AdvertiserProfile("A", v_p=10.0, e_p=1.0, v_s=3.0, e_s=1.0),
            AdvertiserProfile("B", v_p=4.0, e_p=1.0, v_s=5.0, e_s=1.0),
            AdvertiserProfile("C", v_p=3.0, e_p=1.0, v_s=8.0, e_s=1.0),
        ),
        mediator=MediatorProfile("M", relevance_p=0.8, alpha=1.0, num_secondary_slots=2),
    )


@pytest.fixture
def worked_example_path():
    return WORKED_EXAMPLE


@pytest.fixture
def threshold_scenario():
    """L = K = 3 with s-values equal to p-values; B has an interior threshold"""
    return MarketScenario(
        ctr=validate_ctr_curve([0.5, 0.4, 0.1]),
        advertisers=(
            AdvertiserProfile("A", 6.0, 1.0, 6.0, 1.0),
            AdvertiserProfile("B", 5.0, 1.0, 5.0, 1.0),
            AdvertiserProfile("C", 4.9, 1.0, 4.9, 1.0),
            AdvertiserProfile("D", 1.0, 1.0, 1.0, 1.0),
        ),
        mediator=MediatorProfile("M", relevance_p=1.0, alpha=1.0, num_secondary_slots=3),
    )


@pytest.fixture
def quiet_logger():
    return Logger(log_directory=None, log_level="WARNING")


@pytest.fixture
def cli_config(tmp_path):
    """Config file that keeps logs out of the working tree"""
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"log_directory": None, "log_level": "WARNING"}))
    return str(path)
