# Mediator Market Engine
# Main source package

from src.auction_core import AdvertiserProfile, CtrCurve, validate_ctr_curve
from src.errors import ErrorCode, InvariantError, MarketError, ValidationError
from src.logger import Logger
from src.market_analysis import MarketScenario, compare, run_baseline, run_with_mediator
from src.mediator_model import MediatorProfile
