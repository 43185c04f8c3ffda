"""
Error types for the mediator market engine

Every error carries a stable code so callers (and the CLI) can tell
input problems from numerical invariant failures.
"""

from enum import Enum
from typing import Optional


class ErrorCode(str, Enum):
    CTR_EMPTY = "CTR_EMPTY"
    CTR_NOT_DECREASING = "CTR_NOT_DECREASING"
    CTR_OUT_OF_RANGE = "CTR_OUT_OF_RANGE"
    DUPLICATE_AGENT = "DUPLICATE_AGENT"
    NEGATIVE_VALUE = "NEGATIVE_VALUE"
    NOT_FINITE = "NOT_FINITE"
    NEGATIVE_SCORE = "NEGATIVE_SCORE"
    RELEVANCE_OUT_OF_RANGE = "RELEVANCE_OUT_OF_RANGE"
    FITNESS_NOT_POSITIVE = "FITNESS_NOT_POSITIVE"
    FITNESS_TOO_LARGE = "FITNESS_TOO_LARGE"
    SECONDARY_SLOTS_OUT_OF_RANGE = "SECONDARY_SLOTS_OUT_OF_RANGE"
    SLOT_OUT_OF_RANGE = "SLOT_OUT_OF_RANGE"
    UNSORTED_SCORES = "UNSORTED_SCORES"
    LENGTH_MISMATCH = "LENGTH_MISMATCH"
    NOT_ENOUGH_SLOTS = "NOT_ENOUGH_SLOTS"
    NO_ADVERTISERS = "NO_ADVERTISERS"
    MEDIATOR_REQUIRED = "MEDIATOR_REQUIRED"
    UNKNOWN_AGENT = "UNKNOWN_AGENT"
    SCENARIO_MISMATCH = "SCENARIO_MISMATCH"
    SCHEMA_VERSION = "SCHEMA_VERSION"
    SYNTAX = "SYNTAX"
    MISSING_FIELD = "MISSING_FIELD"
    BAD_FIELD = "BAD_FIELD"
    GENERATOR_PARAMS = "GENERATOR_PARAMS"
    INVARIANT_VIOLATED = "INVARIANT_VIOLATED"


class MarketError(Exception):
    """Base class for all engine errors"""

    default_code = ErrorCode.BAD_FIELD

    def __init__(self, message: str, code: Optional[ErrorCode] = None,
                 field: Optional[str] = None, line: Optional[int] = None):
        self.code = code or self.default_code
        self.field = field
        self.line = line
        super().__init__(message)

    def __str__(self) -> str:
        location = ""
        if self.line is not None:
            location += f" (line {self.line})"
        if self.field:
            location += f" [field: {self.field}]"
        return f"{self.code.value}: {self.args[0]}{location}"


class ValidationError(MarketError):
    """Semantic violation in auction or scenario input"""


class ScenarioFormatError(MarketError):
    """Scenario document that cannot be read as a scenario"""

    default_code = ErrorCode.SYNTAX


class ScenarioMismatchError(MarketError):
    """Outcomes compared across different scenarios"""

    default_code = ErrorCode.SCENARIO_MISMATCH


class InvariantError(MarketError):
    """A numerical invariant failed beyond tolerance"""

    default_code = ErrorCode.INVARIANT_VIOLATED
