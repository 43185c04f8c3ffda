"""
Scenario documents, seeded scenario generation and report rendering

Scenario documents are JSON objects:

    {
      "schema_version": 1,
      "ctr": [1.0, 0.5],
      "advertisers": [
        {"id": "A", "v_p": 10.0, "e_p": 1.0, "v_s": 3.0, "e_s": 1.0}
      ],
      "mediator": {"id": "M", "e_p": 0.8, "alpha": 1.0, "L": 2},
      "generator": {"seed": 42, "index": 0}
    }

"mediator" and "generator" are optional; "v_s"/"e_s" default to 0 and 1.
The canonical form is what serialize_scenario writes: keys in the order
above, floats in shortest round-trip form, newline-terminated.
"""

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, fields
from typing import Any, Dict, Iterator, List, Optional

import numpy as np

from src.auction_core import AdvertiserProfile, validate_ctr_curve
from src.errors import ErrorCode, ScenarioFormatError, ValidationError
from src.market_analysis import ComparisonReport, MarketOutcome, MarketScenario, SweepRow
from src.mediator_model import MediatorProfile

logger = logging.getLogger("MediatorMarket.scenario_io")

SCHEMA_VERSION = 1
SIGNIFICANT_DIGITS = 12
REPORT_FORMATS = ("table", "structured")


@dataclass(frozen=True)
class ScenarioDocument:
    """A parsed document: the scenario plus where it came from"""
    schema_version: int
    scenario: MarketScenario
    generator: Optional[Dict[str, Any]] = None


def _require(record: Dict[str, Any], key: str, path: str) -> Any:
    if key not in record:
        raise ScenarioFormatError(f"Missing field '{key}'", ErrorCode.MISSING_FIELD, field=f"{path}{key}")
    return record[key]


def _number(value: Any, field_path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioFormatError(f"Expected a number, got {value!r}", ErrorCode.BAD_FIELD, field=field_path)
    if not math.isfinite(value):
        raise ScenarioFormatError(f"Expected a finite number, got {value!r}", ErrorCode.BAD_FIELD,
                                  field=field_path)
    return float(value)


def _integer(value: Any, field_path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioFormatError(f"Expected an integer, got {value!r}", ErrorCode.BAD_FIELD, field=field_path)
    return value


def _object(value: Any, field_path: str) -> Dict[str, Any]:
    if not isinstance(value, dict):
        raise ScenarioFormatError("Expected an object", ErrorCode.BAD_FIELD, field=field_path)
    return value


def parse_document(text: str) -> ScenarioDocument:
    """
    Parse and validate a scenario document.

    Raises:
        ScenarioFormatError: syntax errors (with line) and missing/mistyped fields
        ValidationError: semantic violations, each with its own code
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioFormatError(e.msg, ErrorCode.SYNTAX, line=e.lineno) from e

    doc = _object(raw, "<document>")
    version = _integer(_require(doc, "schema_version", ""), "schema_version")
    if version != SCHEMA_VERSION:
        raise ScenarioFormatError(f"Unsupported schema_version {version}", ErrorCode.SCHEMA_VERSION,
                                  field="schema_version")

    gammas = _require(doc, "ctr", "")
    if not isinstance(gammas, list):
        raise ScenarioFormatError("Expected a list of position effects", ErrorCode.BAD_FIELD, field="ctr")
    ctr = validate_ctr_curve(_number(g, f"ctr[{j}]") for j, g in enumerate(gammas))

    records = _require(doc, "advertisers", "")
    if not isinstance(records, list):
        raise ScenarioFormatError("Expected a list of advertisers", ErrorCode.BAD_FIELD, field="advertisers")

    advertisers = []
    for i, record in enumerate(records):
        path = f"advertisers[{i}]."
        record = _object(record, path.rstrip("."))
        agent_id = _require(record, "id", path)
        if not isinstance(agent_id, str) or not agent_id:
            raise ScenarioFormatError("Agent id must be a non-empty string", ErrorCode.BAD_FIELD, field=f"{path}id")
        advertisers.append(AdvertiserProfile(
            agent_id=agent_id,
            v_p=_number(_require(record, "v_p", path), f"{path}v_p"),
            e_p=_number(_require(record, "e_p", path), f"{path}e_p"),
            v_s=_number(record.get("v_s", 0.0), f"{path}v_s"),
            e_s=_number(record.get("e_s", 1.0), f"{path}e_s"),
        ))

    mediator = None
    if doc.get("mediator") is not None:
        record = _object(doc["mediator"], "mediator")
        agent_id = _require(record, "id", "mediator.")
        if not isinstance(agent_id, str) or not agent_id:
            raise ScenarioFormatError("Agent id must be a non-empty string", ErrorCode.BAD_FIELD,
                                      field="mediator.id")
        mediator = MediatorProfile(
            agent_id=agent_id,
            relevance_p=_number(_require(record, "e_p", "mediator."), "mediator.e_p"),
            alpha=_number(_require(record, "alpha", "mediator."), "mediator.alpha"),
            num_secondary_slots=_integer(_require(record, "L", "mediator."), "mediator.L"),
        )

    generator = doc.get("generator")
    if generator is not None:
        generator = _object(generator, "generator")

    scenario = MarketScenario(ctr=ctr, advertisers=tuple(advertisers), mediator=mediator)
    return ScenarioDocument(version, scenario, generator)


def parse_scenario(text: str) -> MarketScenario:
    """Parse a scenario document into a validated MarketScenario"""
    return parse_document(text).scenario


def load_scenario(path: str) -> ScenarioDocument:
    """Read and parse a UTF-8 scenario file"""
    with open(path, "r", encoding="utf-8") as f:
        return parse_document(f.read())


def scenario_to_dict(scenario: MarketScenario, generator: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    doc: Dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "ctr": list(scenario.ctr.gammas),
        "advertisers": [
            {"id": a.agent_id, "v_p": a.v_p, "e_p": a.e_p, "v_s": a.v_s, "e_s": a.e_s}
            for a in scenario.advertisers
        ],
    }
    if scenario.mediator is not None:
        m = scenario.mediator
        doc["mediator"] = {"id": m.agent_id, "e_p": m.relevance_p, "alpha": m.alpha, "L": m.num_secondary_slots}
    if generator is not None:
        doc["generator"] = generator
    return doc


def serialize_scenario(scenario: MarketScenario, generator: Optional[Dict[str, Any]] = None,
                       compact: bool = False) -> str:
    """Canonical text of a scenario; compact form fits on one line"""
    doc = scenario_to_dict(scenario, generator)
    if compact:
        return json.dumps(doc, separators=(",", ":")) + "\n"
    return json.dumps(doc, indent=2) + "\n"


@dataclass(frozen=True)
class GeneratorParams:
    """
    Distributions for random scenarios. Values are uniform on
    [0, value_max], relevances uniform on [relevance_min, 1], the CTR curve
    is geometric with gamma_1 uniform on top_ctr_range and ratio uniform on
    ratio_range. Fitness e_M * alpha is resampled until f * gamma_1 < 1.
    extreme=True gives L = K and identical s- and p-values, so the
    s-ranking matches the baseline p-ranking.
    """
    min_advertisers: int = 2
    max_advertisers: int = 50
    min_slots: int = 1
    max_slots: int = 10
    value_max: float = 10.0
    relevance_min: float = 0.1
    top_ctr_min: float = 0.5
    top_ctr_max: float = 1.0
    ratio_min: float = 0.3
    ratio_max: float = 0.9
    alpha_min: float = 0.5
    alpha_max: float = 3.0
    s_participation: float = 0.7
    extreme: bool = False

    def validate(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            default = f.default
            if isinstance(default, bool):
                ok = isinstance(value, bool)
            elif isinstance(default, int):
                ok = isinstance(value, int) and not isinstance(value, bool)
            else:
                ok = isinstance(value, (int, float)) and not isinstance(value, bool)
            if not ok:
                raise ValidationError(f"Generator parameter {f.name} has the wrong type: {value!r}",
                                      ErrorCode.GENERATOR_PARAMS, field=f.name)

        problems = []
        if not 1 <= self.min_advertisers <= self.max_advertisers:
            problems.append("need 1 <= min_advertisers <= max_advertisers")
        if not 1 <= self.min_slots <= self.max_slots:
            problems.append("need 1 <= min_slots <= max_slots")
        if not self.value_max > 0:
            problems.append("value_max must be positive")
        if not 0 < self.relevance_min <= 1:
            problems.append("relevance_min must be in (0, 1]")
        if not 0 < self.top_ctr_min <= self.top_ctr_max <= 1:
            problems.append("need 0 < top_ctr_min <= top_ctr_max <= 1")
        if not 0 < self.ratio_min <= self.ratio_max < 1:
            problems.append("need 0 < ratio_min <= ratio_max < 1")
        if not 0 < self.alpha_min <= self.alpha_max:
            problems.append("need 0 < alpha_min <= alpha_max")
        if not 0 <= self.s_participation <= 1:
            problems.append("s_participation must be in [0, 1]")
        if problems:
            raise ValidationError("; ".join(problems), ErrorCode.GENERATOR_PARAMS)

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "GeneratorParams":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValidationError(f"Unknown generator parameters: {sorted(unknown)}", ErrorCode.GENERATOR_PARAMS)
        return cls(**values)


def _random_scenario(rng: np.random.Generator, params: GeneratorParams) -> MarketScenario:
    num_slots = int(rng.integers(params.min_slots, params.max_slots + 1))
    num_advertisers = int(rng.integers(params.min_advertisers, params.max_advertisers + 1))

    top = float(rng.uniform(params.top_ctr_min, params.top_ctr_max))
    ratio = float(rng.uniform(params.ratio_min, params.ratio_max))
    ctr = validate_ctr_curve(top * ratio ** j for j in range(num_slots))

    width = len(str(num_advertisers))
    advertisers = []
    for i in range(num_advertisers):
        v_p = float(rng.uniform(0.0, params.value_max))
        e_p = float(rng.uniform(params.relevance_min, 1.0))
        if params.extreme:
            v_s, e_s = v_p, e_p
        else:
            joins = rng.random() < params.s_participation
            v_s = float(rng.uniform(0.0, params.value_max)) if joins else 0.0
            e_s = float(rng.uniform(params.relevance_min, 1.0))
        advertisers.append(AdvertiserProfile(f"A{i + 1:0{width}d}", v_p, e_p, v_s, e_s))

    while True:
        relevance = float(rng.uniform(params.relevance_min, 1.0))
        alpha = float(rng.uniform(params.alpha_min, params.alpha_max))
        if relevance * alpha * ctr.gamma(1) < 1.0:
            break
    num_secondary = num_slots if params.extreme else int(rng.integers(1, num_slots + 1))
    mediator = MediatorProfile("M", relevance, alpha, num_secondary)

    return MarketScenario(ctr=ctr, advertisers=tuple(advertisers), mediator=mediator)


def generate_scenarios(seed: int, count: int,
                       params: Optional[GeneratorParams] = None) -> Iterator[MarketScenario]:
    """
    Deterministic stream of valid random scenarios.

    Args:
        seed: Seed of the single numpy Generator driving the stream
        count: Number of scenarios, >= 1
        params: Distributions; defaults to GeneratorParams()
    """
    params = params or GeneratorParams()
    params.validate()
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}", ErrorCode.GENERATOR_PARAMS)

    rng = np.random.default_rng(seed)
    for index in range(count):
        scenario = _random_scenario(rng, params)
        logger.debug(f"Generated scenario {index} (seed {seed}): K={scenario.ctr.num_slots}, "
                     f"N={len(scenario.advertisers)}")
        yield scenario


def fmt(value: Optional[float]) -> str:
    """12 significant digits; '-' for missing values"""
    if value is None:
        return "-"
    return format(value, f".{SIGNIFICANT_DIGITS}g")


def _rounded(value: Optional[float]) -> Optional[float]:
    return None if value is None else float(fmt(value))


def _slot(value: Optional[int]) -> str:
    return "-" if value is None else str(value)


def _csv(rows: List[List[str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerows(rows)
    return buffer.getvalue()


def _check_format(output_format: str) -> None:
    if output_format not in REPORT_FORMATS:
        raise ValidationError(f"Unknown report format '{output_format}'", ErrorCode.BAD_FIELD, field="format")


def _threshold_text(report: ComparisonReport, agent_id: str) -> str:
    result = report.thresholds.get(agent_id)
    if result is None:
        return "-"
    if result.fitness is not None:
        return fmt(result.fitness)
    return result.status.value


def write_report(report: ComparisonReport, output_format: str = "table") -> str:
    """
    Render a comparison report.

    table: one CSV row per advertiser, a blank line, then metric,value rows.
    structured: the full report as nested JSON.
    """
    _check_format(output_format)
    now = report.with_mediator
    before = report.baseline
    mediator = report.scenario.mediator

    if output_format == "structured":
        return json.dumps(_report_dict(report), indent=2) + "\n"

    rows = [["agent", "baseline_slot", "new_slot", "secondary_slot", "u0", "u", "delta", "u_s", "min_fitness"]]
    for profile in report.scenario.advertisers:
        agent_id = profile.agent_id
        p_now = now.payoffs[agent_id]
        p_before = before.payoffs[agent_id]
        rows.append([
            agent_id, _slot(p_before.p_slot), _slot(p_now.p_slot), _slot(p_now.s_slot),
            fmt(p_before.total), fmt(p_now.total), fmt(report.advertiser_deltas[agent_id].direct),
            fmt(p_now.s_payoff), _threshold_text(report, agent_id),
        ])
    rows.append([])
    rows.append(["metric", "value"])
    rows.extend([
        ["R", fmt(now.revenue)],
        ["R0", fmt(before.revenue)],
        ["R-R0", fmt(report.revenue_delta.direct)],
        ["E", fmt(report.efficiency)],
        ["E0", fmt(report.baseline_efficiency)],
        ["E-E0", fmt(report.efficiency_delta.direct)],
        ["u_M", fmt(now.mediator_payoff)],
        ["s_M^p", fmt(now.mediator_score)],
        ["f", fmt(mediator.fitness if mediator else None)],
        ["l", _slot(now.mediator_slot) if not now.mediator_lost else "lost"],
        ["accounting_residual", fmt(report.accounting_residual)],
    ])
    return _csv(rows)


def _outcome_dict(outcome: MarketOutcome) -> Dict[str, Any]:
    data: Dict[str, Any] = {
        "p_ranking": list(outcome.p_auction.ranking.ordered_agents),
        "p_price_scores": [_rounded(r) for r in outcome.p_auction.price_scores],
        "p_per_click_prices": [_rounded(p) for p in outcome.p_auction.per_click_prices],
        "p_derived_bids": [_rounded(b) for b in outcome.p_auction.derived_bids],
        "revenue": _rounded(outcome.revenue),
        "payoffs": {
            agent_id: {
                "p_slot": p.p_slot, "s_slot": p.s_slot,
                "p_payoff": _rounded(p.p_payoff), "s_payoff": _rounded(p.s_payoff), "total": _rounded(p.total),
            }
            for agent_id, p in outcome.payoffs.items()
        },
    }
    if outcome.with_mediator:
        data.update({
            "mediator_lost": outcome.mediator_lost,
            "mediator_slot": outcome.mediator_slot,
            "mediator_rank": outcome.mediator_rank,
            "mediator_score": _rounded(outcome.mediator_score),
            "mediator_payoff": _rounded(outcome.mediator_payoff),
        })
    if outcome.s_auction is not None:
        data.update({
            "s_ranking": list(outcome.s_auction.ranking.ordered_agents),
            "s_price_scores": [_rounded(r) for r in outcome.s_auction.price_scores],
            "s_per_click_prices": [_rounded(p) for p in outcome.s_auction.per_click_prices],
        })
    return data


def _report_dict(report: ComparisonReport) -> Dict[str, Any]:
    return {
        "with_mediator": {**_outcome_dict(report.with_mediator), "efficiency": _rounded(report.efficiency)},
        "baseline": {**_outcome_dict(report.baseline), "efficiency": _rounded(report.baseline_efficiency)},
        "deltas": {
            "revenue": {"direct": _rounded(report.revenue_delta.direct),
                        "closed_form": _rounded(report.revenue_delta.closed_form)},
            "efficiency": {"direct": _rounded(report.efficiency_delta.direct),
                           "closed_form": _rounded(report.efficiency_delta.closed_form)},
            "advertisers": {
                agent_id: {"direct": _rounded(d.direct), "closed_form": _rounded(d.closed_form)}
                for agent_id, d in report.advertiser_deltas.items()
            },
        },
        "thresholds": {
            agent_id: {
                "status": t.status.value,
                "fitness": _rounded(t.fitness),
                "mediator_slot": t.mediator_slot,
                "no_loss_from": _rounded(t.no_loss_from),
                "reason": t.reason,
            }
            for agent_id, t in report.thresholds.items()
        },
        "accommodated": list(report.accommodated),
        "losing_advertisers": list(report.losing_advertisers),
        "accounting_residual": _rounded(report.accounting_residual),
        "baseline_accounting_residual": _rounded(report.baseline_accounting_residual),
        "violations": report.violations(),
    }


def write_outcome(outcome: MarketOutcome, output_format: str = "table") -> str:
    """Render a single market run"""
    _check_format(output_format)
    if output_format == "structured":
        return json.dumps(_outcome_dict(outcome), indent=2) + "\n"

    rows = [["agent", "p_slot", "s_slot", "u_p", "u_s", "u"]]
    for profile in outcome.scenario.advertisers:
        p = outcome.payoffs[profile.agent_id]
        rows.append([profile.agent_id, _slot(p.p_slot), _slot(p.s_slot),
                     fmt(p.p_payoff), fmt(p.s_payoff), fmt(p.total)])
    rows.append([])
    rows.append(["metric", "value"])
    rows.append(["R", fmt(outcome.revenue)])
    if outcome.with_mediator:
        rows.append(["s_M^p", fmt(outcome.mediator_score)])
        rows.append(["l", _slot(outcome.mediator_slot) if not outcome.mediator_lost else "lost"])
        rows.append(["u_M", fmt(outcome.mediator_payoff)])
    return _csv(rows)


def write_sweep(rows: List[SweepRow], output_format: str = "table") -> str:
    """Render a fitness sweep, one row per fitness value"""
    _check_format(output_format)
    if output_format == "structured":
        return json.dumps([
            {
                "f": _rounded(row.fitness), "l": row.mediator_slot, "rank": row.mediator_rank,
                "s_M^p": _rounded(row.mediator_score), "R-R0": _rounded(row.revenue_delta),
                "E-E0": _rounded(row.efficiency_delta), "u_M": _rounded(row.mediator_payoff),
                "min_delta": _rounded(row.min_advertiser_delta), "win_win": row.win_win,
            }
            for row in rows
        ], indent=2) + "\n"

    table = [["f", "l", "rank", "s_M^p", "R-R0", "E-E0", "u_M", "min_delta", "flag"]]
    for row in rows:
        table.append([
            fmt(row.fitness), _slot(row.mediator_slot) if row.mediator_slot else "lost",
            _slot(row.mediator_rank), fmt(row.mediator_score), fmt(row.revenue_delta),
            fmt(row.efficiency_delta), fmt(row.mediator_payoff), fmt(row.min_advertiser_delta),
            "WIN-WIN" if row.win_win else "",
        ])
    return _csv(table)
