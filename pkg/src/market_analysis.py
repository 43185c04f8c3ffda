"""
Market analysis for the mediator model

Runs the primary auction with and without the mediator, and compares the
two: auctioneer revenue, efficiency, advertiser payoffs, and the mediator
fitness an advertiser needs to break even. Closed forms are evaluated next
to direct subtraction so every delta is checked two ways.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.auction_core import (
    TOLERANCE,
    AdvertiserProfile,
    AuctionEntry,
    CtrCurve,
    SneOutcome,
    auction_revenue,
    rank_by_score,
    revenue_closed_form,
    slot_payoff,
    sne_price_scores,
    solve_sne,
    verify_sne,
    within_tolerance,
)
from src.errors import (
    ErrorCode,
    InvariantError,
    ScenarioMismatchError,
    ValidationError,
)
from src.mediator_model import (
    MediatorProfile,
    effective_ctr,
    mediator_payoff,
    mediator_score,
)

logger = logging.getLogger("MediatorMarket.market_analysis")


@dataclass(frozen=True)
class MarketScenario:
    """Slots, advertisers and at most one mediator"""
    ctr: CtrCurve
    advertisers: Tuple[AdvertiserProfile, ...]
    mediator: Optional[MediatorProfile] = None

    def __post_init__(self):
        object.__setattr__(self, "advertisers", tuple(self.advertisers))
        if not self.advertisers:
            raise ValidationError("Scenario needs at least one advertiser", ErrorCode.NO_ADVERTISERS)

        seen = set()
        for agent_id in self.agent_ids:
            if agent_id in seen:
                raise ValidationError(f"Duplicate agent id: {agent_id}", ErrorCode.DUPLICATE_AGENT)
            seen.add(agent_id)

        if self.mediator is not None:
            self.mediator.validate_against(self.ctr)

    @property
    def agent_ids(self) -> List[str]:
        ids = [a.agent_id for a in self.advertisers]
        if self.mediator is not None:
            ids.append(self.mediator.agent_id)
        return ids

    def advertiser(self, agent_id: str) -> AdvertiserProfile:
        for profile in self.advertisers:
            if profile.agent_id == agent_id:
                return profile
        raise ValidationError(f"Unknown advertiser: {agent_id}", ErrorCode.UNKNOWN_AGENT)

    def with_fitness(self, fitness: float) -> "MarketScenario":
        """Same market with the mediator's fitness moved to the given value"""
        if self.mediator is None:
            raise ValidationError("Scenario has no mediator", ErrorCode.MEDIATOR_REQUIRED)
        return replace(self, mediator=self.mediator.with_fitness(fitness))


@dataclass(frozen=True)
class AgentPayoff:
    """An advertiser's equilibrium payoff split by tier"""
    agent_id: str
    p_slot: Optional[int]
    s_slot: Optional[int]
    p_payoff: float
    s_payoff: float

    @property
    def total(self) -> float:
        return self.p_payoff + self.s_payoff


@dataclass(frozen=True)
class MarketOutcome:
    """Equilibrium of one market run (with the mediator, or the baseline)"""
    scenario: MarketScenario
    p_auction: SneOutcome
    s_auction: Optional[SneOutcome]
    mediator_slot: Optional[int]
    mediator_rank: Optional[int]
    mediator_score: float
    mediator_payoff: float
    revenue: float
    payoffs: Dict[str, AgentPayoff]
    with_mediator: bool

    @property
    def mediator_lost(self) -> bool:
        return self.with_mediator and self.mediator_slot is None

    @property
    def fitness(self) -> float:
        return self.scenario.mediator.fitness if self.scenario.mediator else 0.0


@dataclass(frozen=True)
class DualForm:
    """A quantity computed by direct subtraction and by closed form"""
    direct: float
    closed_form: float

    @property
    def value(self) -> float:
        return self.direct

    def agrees(self, tolerance: float = TOLERANCE) -> bool:
        return within_tolerance(self.direct, self.closed_form, tolerance)


def _p_side_payoffs(scenario: MarketScenario, p_auction: SneOutcome) -> Dict[str, Tuple[Optional[int], float]]:
    ctr = scenario.ctr
    result = {}
    for profile in scenario.advertisers:
        j = p_auction.ranking.position_of(profile.agent_id)
        if j is not None and j <= ctr.num_slots:
            payoff = slot_payoff(profile.s_p, ctr.gamma(j), p_auction.price_score_for_slot(j))
            result[profile.agent_id] = (j, payoff)
        else:
            result[profile.agent_id] = (None, 0.0)
    return result


def _p_entries(scenario: MarketScenario) -> List[AuctionEntry]:
    # zero value encodes non-participation
    return [AuctionEntry(a.agent_id, a.s_p, a.e_p) for a in scenario.advertisers if a.s_p > 0]


def _s_entries(scenario: MarketScenario) -> List[AuctionEntry]:
    return [AuctionEntry(a.agent_id, a.s_s, a.e_s) for a in scenario.advertisers if a.s_s > 0]


def run_baseline(scenario: MarketScenario) -> MarketOutcome:
    """
    Primary-auction SNE among the advertisers only.

    Args:
        scenario: Valid scenario; any mediator is ignored

    Returns:
        MarketOutcome with with_mediator=False
    """
    p_auction = solve_sne(scenario.ctr, _p_entries(scenario))
    payoffs = {
        agent_id: AgentPayoff(agent_id, slot, None, payoff, 0.0)
        for agent_id, (slot, payoff) in _p_side_payoffs(scenario, p_auction).items()
    }
    revenue = auction_revenue(scenario.ctr, p_auction.price_scores)
    logger.debug(f"Baseline: sigma~ = {p_auction.ranking.ordered_agents}, R0 = {revenue:.12g}")

    return MarketOutcome(
        scenario=scenario,
        p_auction=p_auction,
        s_auction=None,
        mediator_slot=None,
        mediator_rank=None,
        mediator_score=0.0,
        mediator_payoff=0.0,
        revenue=revenue,
        payoffs=payoffs,
        with_mediator=False,
    )


def run_with_mediator(scenario: MarketScenario) -> MarketOutcome:
    """
    Full pipeline with the mediator.

    The s-auction is priced first (its prices do not depend on l), which
    fixes the mediator's score; she then competes in the p-auction. When she
    wins no primary slot the outcome equals the baseline, flagged as lost.

    Args:
        scenario: Valid scenario with a mediator

    Returns:
        MarketOutcome with with_mediator=True
    """
    mediator = scenario.mediator
    if mediator is None:
        raise ValidationError("Scenario has no mediator; use run_baseline", ErrorCode.MEDIATOR_REQUIRED)

    ctr = scenario.ctr
    k = ctr.num_slots
    num_secondary = mediator.num_secondary_slots

    s_entries = _s_entries(scenario)
    tau = rank_by_score((e.agent_id, e.score) for e in s_entries)
    s_m = mediator_score(ctr, mediator, tau.scores)

    p_entries = _p_entries(scenario)
    if s_m > 0:
        p_entries.append(AuctionEntry(mediator.agent_id, s_m, mediator.relevance_p))
    p_auction = solve_sne(ctr, p_entries)
    rank = p_auction.ranking.position_of(mediator.agent_id)

    if rank is None or rank > k:
        logger.debug(f"Mediator lost the p-auction (score {s_m:.12g}, rank {rank})")
        baseline = run_baseline(scenario)
        return replace(baseline, mediator_rank=rank, mediator_score=s_m, with_mediator=True)

    l = rank
    s_auction = solve_sne(ctr, s_entries, num_slots=num_secondary)
    secondary = effective_ctr(ctr, l, mediator)

    payoffs = {}
    for agent_id, (p_slot, p_payoff) in _p_side_payoffs(scenario, p_auction).items():
        profile = scenario.advertiser(agent_id)
        s_slot = s_auction.ranking.position_of(agent_id)
        s_payoff = 0.0
        if s_slot is not None and s_slot <= num_secondary:
            s_payoff = slot_payoff(profile.s_s, secondary.gamma(s_slot), s_auction.price_score_for_slot(s_slot))
        else:
            s_slot = None
        payoffs[agent_id] = AgentPayoff(agent_id, p_slot, s_slot, p_payoff, s_payoff)

    u_m = mediator_payoff(ctr, l, s_m, p_auction.ranking.scores[l:])
    revenue = auction_revenue(ctr, p_auction.price_scores)
    logger.debug(f"With mediator: sigma = {p_auction.ranking.ordered_agents}, l = {l}, "
                 f"R = {revenue:.12g}, u_M = {u_m:.12g}")

    return MarketOutcome(
        scenario=scenario,
        p_auction=p_auction,
        s_auction=s_auction,
        mediator_slot=l,
        mediator_rank=rank,
        mediator_score=s_m,
        mediator_payoff=u_m,
        revenue=revenue,
        payoffs=payoffs,
        with_mediator=True,
    )


def efficiency(outcome: MarketOutcome) -> float:
    """
    Social value E: primary slots held by advertisers plus the mediator's
    secondary slots valued at gamma_l * f * sum_j gamma_j * s_tau(j).
    """
    ctr = outcome.scenario.ctr
    sigma = outcome.p_auction.ranking
    l = outcome.mediator_slot

    total = sum(ctr.gamma(j) * sigma.score_at(j) for j in range(1, ctr.num_slots + 1) if j != l)
    if l is not None:
        tau = outcome.s_auction.ranking
        num_secondary = outcome.scenario.mediator.num_secondary_slots
        resale = sum(ctr.gamma(j) * tau.score_at(j) for j in range(1, num_secondary + 1))
        total += ctr.gamma(l) * outcome.fitness * resale
    return float(total)


def _check_same_scenario(with_outcome: MarketOutcome, baseline: MarketOutcome) -> None:
    if with_outcome.scenario.ctr != baseline.scenario.ctr or \
            with_outcome.scenario.advertisers != baseline.scenario.advertisers:
        raise ScenarioMismatchError("Outcomes were computed on different scenarios")


def _padded_sigma(outcome: MarketOutcome) -> np.ndarray:
    return outcome.p_auction.ranking.padded_scores(outcome.scenario.ctr.num_slots + 2)


def revenue_delta(with_outcome: MarketOutcome, baseline: MarketOutcome,
                  tolerance: float = TOLERANCE, check: bool = True) -> DualForm:
    """
    R - R0 directly and as the telescoped sum
    sum_{j=max(1,l-1)..K} (gamma_j - gamma_{j+1}) * j * (s_sigma(j+1) - s_sigma(j+2)).
    """
    _check_same_scenario(with_outcome, baseline)
    direct = with_outcome.revenue - baseline.revenue

    telescoped = 0.0
    l = with_outcome.mediator_slot
    if l is not None:
        ctr = with_outcome.scenario.ctr
        k = ctr.num_slots
        gammas = ctr.padded(k + 1)
        s = _padded_sigma(with_outcome)
        for j in range(max(1, l - 1), k + 1):
            telescoped += (gammas[j - 1] - gammas[j]) * j * (s[j] - s[j + 1])

    result = DualForm(direct, float(telescoped))
    if check:
        if not result.agrees(tolerance):
            raise InvariantError(f"Revenue delta forms disagree: {direct!r} vs {telescoped!r}")
        if direct < -tolerance:
            raise InvariantError(f"Revenue decreased with the mediator: R - R0 = {direct!r}")
    return result


def efficiency_delta(with_outcome: MarketOutcome, baseline: MarketOutcome,
                     tolerance: float = TOLERANCE, check: bool = True) -> DualForm:
    """
    E - E0 directly and as gamma_l * f * sum_j gamma_j * s_tau(j) - gamma_l * r^p_{l+1}.
    """
    _check_same_scenario(with_outcome, baseline)
    direct = efficiency(with_outcome) - efficiency(baseline)

    closed = 0.0
    l = with_outcome.mediator_slot
    if l is not None:
        ctr = with_outcome.scenario.ctr
        tau = with_outcome.s_auction.ranking
        num_secondary = with_outcome.scenario.mediator.num_secondary_slots
        resale = sum(ctr.gamma(j) * tau.score_at(j) for j in range(1, num_secondary + 1))
        closed = ctr.gamma(l) * with_outcome.fitness * resale \
            - ctr.gamma(l) * with_outcome.p_auction.price_score_for_slot(l)

    result = DualForm(direct, float(closed))
    if check:
        if not result.agrees(tolerance):
            raise InvariantError(f"Efficiency delta forms disagree: {direct!r} vs {closed!r}")
        if direct < -tolerance:
            raise InvariantError(f"Efficiency decreased with the mediator: E - E0 = {direct!r}")
    return result


def _p_side_loss(ctr: CtrCurve, l: int, sigma_scores: Sequence[float], j: int) -> float:
    """sum_{i=max(l-1, j-1)..K} (gamma_i - gamma_{i+1}) * (s_sigma(i+1) - s_sigma(i+2))"""
    k = ctr.num_slots
    gammas = ctr.padded(k + 1)
    s = np.zeros(k + 2)
    raw = np.asarray(sigma_scores, dtype=float)
    n = min(k + 2, raw.size)
    s[:n] = raw[:n]

    loss = 0.0
    for i in range(max(1, l - 1, j - 1), k + 1):
        loss += (gammas[i - 1] - gammas[i]) * (s[i] - s[i + 1])
    return float(loss)


def _compensation_capacity(ctr: CtrCurve, num_secondary: int, tau_scores: Sequence[float],
                           s_rank: Optional[int]) -> float:
    """s-auction payoff per unit of gamma_l * f for the agent at s-rank s_rank"""
    if s_rank is None or s_rank > num_secondary:
        return 0.0
    gammas = ctr.padded(num_secondary + 1)
    gammas[num_secondary] = 0.0
    s = np.zeros(num_secondary + 1)
    raw = np.asarray(tau_scores, dtype=float)
    n = min(num_secondary + 1, raw.size)
    s[:n] = raw[:n]

    own = s[s_rank - 1]
    capacity = 0.0
    for i in range(s_rank, num_secondary + 1):
        capacity += (gammas[i - 1] - gammas[i]) * (own - s[i])
    return float(capacity)


def advertiser_payoff_delta(with_outcome: MarketOutcome, baseline: MarketOutcome, agent_id: str,
                            tolerance: float = TOLERANCE, check: bool = True) -> DualForm:
    """
    u - u0 for one advertiser, directly and by the closed form
    u^s - sum_{i=max(l-1, j-1)..K} (gamma_i - gamma_{i+1}) * (s_sigma(i+1) - s_sigma(i+2)),
    with j the advertiser's rank in the mediated p-auction.
    """
    _check_same_scenario(with_outcome, baseline)
    with_outcome.scenario.advertiser(agent_id)

    now = with_outcome.payoffs[agent_id]
    before = baseline.payoffs[agent_id]
    direct = now.total - before.total

    closed = 0.0
    l = with_outcome.mediator_slot
    if l is not None:
        closed = now.s_payoff
        j = with_outcome.p_auction.ranking.position_of(agent_id)
        if j is not None:
            closed -= _p_side_loss(with_outcome.scenario.ctr, l, _padded_sigma(with_outcome), j)

    result = DualForm(direct, float(closed))
    if check and not result.agrees(tolerance):
        raise InvariantError(f"Payoff delta forms disagree for {agent_id}: {direct!r} vs {closed!r}")
    return result


def no_loss_fitness(ctr: CtrCurve, l: int, sigma_scores: Sequence[float], p_rank: int,
                    tau_scores: Sequence[float], s_rank: Optional[int],
                    num_secondary: int) -> Optional[float]:
    """
    Fitness at which an advertiser's s-auction payoff offsets her p-side loss,
    with the mediator's slot l (and hence sigma) held fixed.

    Returns:
        The bound, or None when the advertiser has no compensation capacity
    """
    loss = _p_side_loss(ctr, l, sigma_scores, p_rank)
    denominator = ctr.gamma(l) * _compensation_capacity(ctr, num_secondary, tau_scores, s_rank)
    if denominator <= 0:
        return None
    return loss / denominator


class ThresholdStatus(str, Enum):
    DEFINED = "defined"
    UNDEFINED = "undefined"
    INAPPLICABLE = "inapplicable"


@dataclass(frozen=True)
class ThresholdResult:
    """
    Minimum fitness for no net loss. fitness/mediator_slot/regime are set for
    an interior root; an advertiser who never loses primary surplus gets
    DEFINED with fitness 0 and no slot. no_loss_from is the smallest fitness
    with no net loss while the mediator holds a slot, whether or not a fixed
    point exists.
    """
    status: ThresholdStatus
    fitness: Optional[float] = None
    mediator_slot: Optional[int] = None
    regime: Optional[Tuple[float, float]] = None
    no_loss_from: Optional[float] = None
    reason: str = ""


def min_fitness_for_no_loss(scenario: MarketScenario, agent_id: str,
                            tolerance: float = TOLERANCE) -> ThresholdResult:
    """
    Smallest self-consistent no-loss fitness for a baseline winner.

    Applies when the mediator sells all K slots (L = K) and her s-auction
    ranks advertisers exactly as the baseline p-auction does. The mediator's
    slot l moves with f, so f is swept over the regimes where l is constant.
    Inside a regime the advertiser's payoff delta is affine in f and the
    bound is solved exactly; the first regime (in increasing f) whose root
    lies strictly inside it wins.
    """
    mediator = scenario.mediator
    if mediator is None:
        return ThresholdResult(ThresholdStatus.INAPPLICABLE, reason="scenario has no mediator")
    scenario.advertiser(agent_id)

    ctr = scenario.ctr
    k = ctr.num_slots
    if mediator.num_secondary_slots != k:
        return ThresholdResult(ThresholdStatus.INAPPLICABLE, reason="mediator does not sell all K slots")

    baseline_rank = rank_by_score((e.agent_id, e.score) for e in _p_entries(scenario))
    tau = rank_by_score((e.agent_id, e.score) for e in _s_entries(scenario))
    if tau.ordered_agents != baseline_rank.ordered_agents:
        return ThresholdResult(ThresholdStatus.INAPPLICABLE,
                               reason="s-auction ranking differs from the baseline p-ranking")

    baseline_position = baseline_rank.position_of(agent_id)
    if baseline_position is None or baseline_position > k:
        return ThresholdResult(ThresholdStatus.INAPPLICABLE, reason="advertiser is not a baseline winner")

    unit_score = mediator_score(ctr, mediator.with_fitness(1.0), tau.scores, tolerance)
    if unit_score <= 0:
        return ThresholdResult(ThresholdStatus.UNDEFINED, reason="mediator has no resale value")

    capacity = _compensation_capacity(ctr, k, tau.scores, tau.position_of(agent_id))
    if capacity <= 0:
        return ThresholdResult(ThresholdStatus.UNDEFINED, reason="no compensation capacity")

    scores = list(baseline_rank.scores)
    n = len(scores)
    fitness_cap = 1.0 / ctr.gamma(1)
    no_loss_from = None
    loss_free = True
    regimes_seen = 0

    for l in range(min(k, n + 1), 0, -1):
        upper = scores[l - 2] / unit_score if l >= 2 else math.inf
        lower = scores[l - 1] / unit_score if l <= n else 0.0
        upper = min(upper, fitness_cap)
        if lower >= upper:
            continue

        p_rank = baseline_position if baseline_position < l else baseline_position + 1

        def loss_at(f: float) -> float:
            sigma = scores[:l - 1] + [f * unit_score] + scores[l - 1:]
            return _p_side_loss(ctr, l, sigma, p_rank)

        regimes_seen += 1
        # the loss is affine in f, so its ends bound it
        if max(loss_at(lower), loss_at(upper)) > tolerance:
            loss_free = False

        intercept = loss_at(0.0)
        slope = ctr.gamma(l) * capacity - (loss_at(1.0) - intercept)
        logger.debug(f"{agent_id}: regime l={l} f in ({lower:.6g}, {upper:.6g}), "
                     f"delta(f) = {slope:.6g}*f - {intercept:.6g}")

        if no_loss_from is None:
            if slope > 0 and intercept / slope < upper:
                no_loss_from = max(lower, intercept / slope)
            elif slope <= 0 and slope * lower - intercept >= -tolerance:
                no_loss_from = lower

        if slope <= 0:
            continue
        root = intercept / slope
        # at f == lower the mediator ties scores[l-1] and the id tie-break decides her slot
        if lower < root < upper:
            return ThresholdResult(ThresholdStatus.DEFINED, fitness=root, mediator_slot=l,
                                   regime=(lower, upper), no_loss_from=no_loss_from)

    if regimes_seen and loss_free:
        return ThresholdResult(ThresholdStatus.DEFINED, fitness=0.0, no_loss_from=0.0,
                               reason="advertiser loses no primary surplus at any fitness")

    return ThresholdResult(ThresholdStatus.UNDEFINED, no_loss_from=no_loss_from,
                           reason="no regime where the bound is self-consistent")


def accounting_check(outcome: MarketOutcome) -> float:
    """Residual E - (R + sum of advertiser payoffs + u_M)"""
    payoffs = sum(p.total for p in outcome.payoffs.values())
    return efficiency(outcome) - (outcome.revenue + payoffs + outcome.mediator_payoff)


@dataclass(frozen=True)
class ComparisonReport:
    """With/without-mediator comparison of one scenario"""
    scenario: MarketScenario
    with_mediator: MarketOutcome
    baseline: MarketOutcome
    efficiency: float
    baseline_efficiency: float
    revenue_delta: DualForm
    efficiency_delta: DualForm
    advertiser_deltas: Dict[str, DualForm]
    thresholds: Dict[str, ThresholdResult]
    accounting_residual: float
    baseline_accounting_residual: float
    tolerance: float = TOLERANCE

    @property
    def accommodated(self) -> Tuple[str, ...]:
        """Baseline losers who now win a secondary slot"""
        return tuple(
            agent_id for agent_id, now in self.with_mediator.payoffs.items()
            if self.baseline.payoffs[agent_id].p_slot is None and now.s_slot is not None
        )

    @property
    def losing_advertisers(self) -> Tuple[str, ...]:
        return tuple(a for a, d in self.advertiser_deltas.items() if d.direct < -self.tolerance)

    def violations(self) -> List[str]:
        """Every invariant that failed beyond tolerance"""
        tol = self.tolerance
        found = []
        if not self.revenue_delta.agrees(tol):
            found.append(f"revenue delta forms disagree ({self.revenue_delta.direct!r} vs "
                         f"{self.revenue_delta.closed_form!r})")
        if self.revenue_delta.direct < -tol:
            found.append(f"revenue decreased (R - R0 = {self.revenue_delta.direct!r})")
        if not self.efficiency_delta.agrees(tol):
            found.append(f"efficiency delta forms disagree ({self.efficiency_delta.direct!r} vs "
                         f"{self.efficiency_delta.closed_form!r})")
        if self.efficiency_delta.direct < -tol:
            found.append(f"efficiency decreased (E - E0 = {self.efficiency_delta.direct!r})")
        for agent_id, delta in self.advertiser_deltas.items():
            if not delta.agrees(tol):
                found.append(f"payoff delta forms disagree for {agent_id}")
        if abs(self.accounting_residual) > tol * (1.0 + abs(self.efficiency)):
            found.append(f"accounting residual {self.accounting_residual!r}")
        if abs(self.baseline_accounting_residual) > tol * (1.0 + abs(self.baseline_efficiency)):
            found.append(f"baseline accounting residual {self.baseline_accounting_residual!r}")
        return found


def compare(scenario: MarketScenario, tolerance: float = TOLERANCE) -> ComparisonReport:
    """
    Run both sides of the market and every comparative quantity.

    Invariants are recorded, not raised; see ComparisonReport.violations().
    """
    with_outcome = run_with_mediator(scenario)
    baseline = run_baseline(scenario)

    deltas = {
        a.agent_id: advertiser_payoff_delta(with_outcome, baseline, a.agent_id, tolerance, check=False)
        for a in scenario.advertisers
    }
    thresholds = {
        agent_id: min_fitness_for_no_loss(scenario, agent_id, tolerance)
        for agent_id in baseline.p_auction.winners()
    }

    report = ComparisonReport(
        scenario=scenario,
        with_mediator=with_outcome,
        baseline=baseline,
        efficiency=efficiency(with_outcome),
        baseline_efficiency=efficiency(baseline),
        revenue_delta=revenue_delta(with_outcome, baseline, tolerance, check=False),
        efficiency_delta=efficiency_delta(with_outcome, baseline, tolerance, check=False),
        advertiser_deltas=deltas,
        thresholds=thresholds,
        accounting_residual=accounting_check(with_outcome),
        baseline_accounting_residual=accounting_check(baseline),
        tolerance=tolerance,
    )
    for problem in report.violations():
        logger.warning(f"Invariant violated: {problem}")
    return report


@dataclass(frozen=True)
class SweepRow:
    """One fitness value of a sweep"""
    fitness: float
    mediator_rank: Optional[int]
    mediator_slot: Optional[int]
    mediator_score: float
    revenue_delta: float
    efficiency_delta: float
    mediator_payoff: float
    min_advertiser_delta: float
    win_win: bool


def fitness_sweep(scenario: MarketScenario, f_min: float, f_max: float, steps: int,
                  tolerance: float = TOLERANCE) -> List[SweepRow]:
    """
    Re-run the comparison over evenly spaced fitness values.

    A row is win-win when the mediator holds a slot and no advertiser's
    total payoff falls.
    """
    if scenario.mediator is None:
        raise ValidationError("Sweep needs a mediator", ErrorCode.MEDIATOR_REQUIRED)
    if not 0 < f_min <= f_max:
        raise ValidationError(f"Need 0 < f_min <= f_max, got {f_min}, {f_max}", ErrorCode.FITNESS_NOT_POSITIVE)
    if not f_max * scenario.ctr.gamma(1) < 1:
        raise ValidationError(f"f_max * gamma_1 = {f_max * scenario.ctr.gamma(1):.6g} must be < 1",
                              ErrorCode.FITNESS_TOO_LARGE)
    if steps < 1:
        raise ValidationError("steps must be >= 1", ErrorCode.BAD_FIELD, field="steps")

    baseline = run_baseline(scenario)
    rows = []
    for f in np.linspace(f_min, f_max, steps):
        moved = scenario.with_fitness(float(f))
        outcome = run_with_mediator(moved)
        deltas = [
            advertiser_payoff_delta(outcome, baseline, a.agent_id, tolerance, check=False).direct
            for a in moved.advertisers
        ]
        min_delta = min(deltas) if deltas else 0.0
        rows.append(SweepRow(
            fitness=float(f),
            mediator_rank=outcome.mediator_rank,
            mediator_slot=outcome.mediator_slot,
            mediator_score=outcome.mediator_score,
            revenue_delta=revenue_delta(outcome, baseline, tolerance, check=False).direct,
            efficiency_delta=efficiency_delta(outcome, baseline, tolerance, check=False).direct,
            mediator_payoff=outcome.mediator_payoff,
            min_advertiser_delta=min_delta,
            win_win=outcome.mediator_slot is not None and min_delta >= -tolerance,
        ))
    return rows


@dataclass
class VerificationResult:
    """All invariant checks for one scenario"""
    scenario: MarketScenario
    failures: List[str] = field(default_factory=list)
    witness: Optional[Tuple[int, int]] = None

    @property
    def passed(self) -> bool:
        return not self.failures


def _check_prices(label: str, ranked_scores: Sequence[float], price_scores: Sequence[float],
                  tolerance: float, failures: List[str]) -> None:
    r = list(price_scores)
    for j in range(len(r)):
        own_score = ranked_scores[j + 1] if j + 1 < len(ranked_scores) else 0.0
        if r[j] < -tolerance or r[j] > own_score + tolerance * (1.0 + abs(own_score)):
            failures.append(f"{label}: price-score r_{j + 2} = {r[j]!r} outside [0, {own_score!r}]")
        if j + 1 < len(r) and r[j + 1] > r[j] + tolerance * (1.0 + abs(r[j])):
            failures.append(f"{label}: price-scores not monotone at r_{j + 2}")


def verify_scenario(scenario: MarketScenario, tolerance: float = TOLERANCE,
                    corrupt_prices: bool = False) -> VerificationResult:
    """
    Check the equilibrium and every analytic identity on one scenario.

    corrupt_prices zeroes the top slot's price-score before the SNE check,
    as a negative control for the verifier.
    """
    result = VerificationResult(scenario)
    failures = result.failures
    ctr = scenario.ctr

    outcomes = [run_baseline(scenario)]
    if scenario.mediator is not None:
        outcomes.insert(0, run_with_mediator(scenario))

    for outcome in outcomes:
        label = "p-auction" if outcome.with_mediator else "baseline p-auction"
        sigma_scores = outcome.p_auction.ranking.scores
        prices = list(outcome.p_auction.price_scores)
        if corrupt_prices:
            prices[0] = 0.0

        verdict = verify_sne(ctr, sigma_scores, prices, tolerance)
        if not verdict.passed:
            failures.append(f"{label}: SNE violated, position {verdict.witness[0]} "
                            f"prefers slot {verdict.witness[1]}")
            result.witness = result.witness or verdict.witness

        recursion = auction_revenue(ctr, outcome.p_auction.price_scores)
        closed = revenue_closed_form(ctr, sigma_scores)
        if not within_tolerance(recursion, closed, tolerance):
            failures.append(f"{label}: revenue forms disagree ({recursion!r} vs {closed!r})")
        _check_prices(label, sigma_scores, outcome.p_auction.price_scores, tolerance, failures)

        residual = accounting_check(outcome)
        if abs(residual) > tolerance * (1.0 + abs(efficiency(outcome))):
            failures.append(f"{label}: accounting residual {residual!r}")

    if scenario.mediator is None:
        return result

    with_outcome, baseline = outcomes
    if with_outcome.s_auction is not None:
        num_secondary = scenario.mediator.num_secondary_slots
        tau_scores = with_outcome.s_auction.ranking.scores
        r_s = with_outcome.s_auction.price_scores

        verdict = verify_sne(ctr.truncated(num_secondary), tau_scores, r_s, tolerance)
        if not verdict.passed:
            failures.append(f"s-auction: SNE violated, position {verdict.witness[0]} "
                            f"prefers slot {verdict.witness[1]}")
            result.witness = result.witness or verdict.witness
        _check_prices("s-auction", tau_scores, r_s, tolerance, failures)

        secondary = effective_ctr(ctr, with_outcome.mediator_slot, scenario.mediator)
        effective = sne_price_scores(secondary.as_ctr_curve(), tau_scores)
        if not all(within_tolerance(a, b, 1e-12) for a, b in zip(effective, r_s)):
            failures.append("s-auction: effective-curve prices differ from the reduced recursion")

        if with_outcome.mediator_payoff < -tolerance:
            failures.append(f"mediator payoff negative ({with_outcome.mediator_payoff!r})")

    checks = [
        lambda: revenue_delta(with_outcome, baseline, tolerance),
        lambda: efficiency_delta(with_outcome, baseline, tolerance),
    ] + [
        (lambda agent_id=a.agent_id: advertiser_payoff_delta(with_outcome, baseline, agent_id, tolerance))
        for a in scenario.advertisers
    ]
    for check in checks:
        try:
            check()
        except InvariantError as e:
            failures.append(str(e))

    return result


def verify_campaign(scenarios: Iterable[MarketScenario], tolerance: float = TOLERANCE,
                    corrupt_prices: bool = False) -> Tuple[int, List[VerificationResult]]:
    """Verify scenarios in order; returns (count, failing results in order)"""
    count = 0
    failing = []
    for scenario in scenarios:
        count += 1
        result = verify_scenario(scenario, tolerance, corrupt_prices)
        if not result.passed:
            failing.append(result)
    return count, failing
