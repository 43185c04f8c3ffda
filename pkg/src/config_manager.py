"""
Configuration Manager for the mediator market engine
Handles loading and validation of JSON configuration files
"""

import json
import os
import sys
from copy import deepcopy
from typing import Any, Dict, Optional

from src.auction_core import TOLERANCE
from src.scenario_io import REPORT_FORMATS, GeneratorParams

TOLERANCE_ENV = "MEDIATOR_MARKET_TOLERANCE"


def _notice(message: str) -> None:
    # stdout belongs to reports
    print(message, file=sys.stderr)


class ConfigManager:
    """Manages configuration loading and validation"""

    def __init__(self, config_path: str = "config.json"):
        self.config_path = config_path
        self.config: Dict[str, Any] = {}
        self.default_config = {
            "log_directory": "./logs",
            "log_level": "INFO",
            "tolerance": TOLERANCE,
            "report_format": "table",
            "campaign": {
                "seed": 42,
                "count": 1000,
            },
            "generator": {},
        }

    def load_config(self) -> Dict[str, Any]:
        """Load configuration from JSON file, falling back to defaults"""
        try:
            if os.path.exists(self.config_path):
                with open(self.config_path, "r", encoding="utf-8") as f:
                    self.config = json.load(f)
            else:
                _notice(f"Configuration file {self.config_path} not found, using defaults")
                self.config = deepcopy(self.default_config)

            self._validate_config()
            return self.config

        except json.JSONDecodeError as e:
            _notice(f"Error parsing configuration file: {e}")
            _notice("Using default configuration")
            self.config = deepcopy(self.default_config)
            return self.config
        except OSError as e:
            _notice(f"Error loading configuration: {e}")
            _notice("Using default configuration")
            self.config = deepcopy(self.default_config)
            return self.config

    def _validate_config(self) -> None:
        """Validate configuration and fill missing values with defaults"""
        if not isinstance(self.config, dict):
            _notice("Configuration root is not an object, using defaults")
            self.config = deepcopy(self.default_config)
            return

        for key, default_value in self.default_config.items():
            if key not in self.config:
                self.config[key] = deepcopy(default_value)

        tolerance = self.config.get("tolerance")
        if isinstance(tolerance, bool) or not isinstance(tolerance, (int, float)) or tolerance < 0:
            _notice(f"Invalid tolerance {tolerance!r}, using {TOLERANCE}")
            self.config["tolerance"] = TOLERANCE

        if self.config.get("report_format") not in REPORT_FORMATS:
            self.config["report_format"] = self.default_config["report_format"]

        campaign = self.config.get("campaign")
        if not isinstance(campaign, dict):
            campaign = {}
        for key, default_value in self.default_config["campaign"].items():
            if not isinstance(campaign.get(key), int) or isinstance(campaign.get(key), bool):
                campaign[key] = default_value
        self.config["campaign"] = campaign

        if not isinstance(self.config.get("generator"), dict):
            self.config["generator"] = {}

    def get_log_directory(self) -> str:
        return self.config.get("log_directory", "./logs")

    def get_log_level(self) -> str:
        return self.config.get("log_level", "INFO")

    def get_report_format(self) -> str:
        return self.config.get("report_format", "table")

    def get_tolerance(self, override: Optional[float] = None) -> float:
        """
        Effective comparison tolerance.

        Precedence: explicit override (the --tolerance flag), then the
        MEDIATOR_MARKET_TOLERANCE environment variable, then the file.
        """
        if override is not None:
            return override
        env_value = os.environ.get(TOLERANCE_ENV)
        if env_value:
            try:
                return float(env_value)
            except ValueError:
                _notice(f"Ignoring {TOLERANCE_ENV}={env_value!r}: not a number")
        return float(self.config.get("tolerance", TOLERANCE))

    def get_campaign_seed(self) -> int:
        return self.config.get("campaign", {}).get("seed", 42)

    def get_campaign_count(self) -> int:
        return self.config.get("campaign", {}).get("count", 1000)

    def get_generator_params(self) -> GeneratorParams:
        """Generator distributions; unknown keys raise ValidationError"""
        params = GeneratorParams.from_dict(self.config.get("generator", {}))
        params.validate()
        return params
