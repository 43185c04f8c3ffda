"""
Position auction primitives

CTR curves, rank-by-revenue ordering, the symmetric Nash equilibrium price
recursion for GSP, revenue, payoffs and an independent SNE verifier.

Scores are relevance-weighted values (s = e * v). Price-scores r_j are the
bid-times-relevance of the slot-j occupant; the occupant of slot j pays
r_{j+1} per unit of relevance.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import ErrorCode, ValidationError

TOLERANCE = 1e-9


def within_tolerance(a: float, b: float, tolerance: float = TOLERANCE) -> bool:
    """Absolute-plus-relative comparison used for every numerical check"""
    return abs(a - b) <= tolerance * (1.0 + max(abs(a), abs(b)))


@dataclass(frozen=True)
class CtrCurve:
    """Position effects gamma_1 > ... > gamma_K > 0, zero beyond K"""
    gammas: Tuple[float, ...]

    def __post_init__(self):
        _check_gammas(self.gammas)

    @property
    def num_slots(self) -> int:
        return len(self.gammas)

    def gamma(self, j: int) -> float:
        """1-based position effect; exactly 0 beyond the last slot"""
        if j < 1:
            raise ValidationError(f"Slot index must be >= 1, got {j}", ErrorCode.SLOT_OUT_OF_RANGE)
        return self.gammas[j - 1] if j <= self.num_slots else 0.0

    def padded(self, length: int) -> np.ndarray:
        """gamma_1 ... gamma_length as an array, zero-padded"""
        out = np.zeros(length)
        n = min(length, self.num_slots)
        out[:n] = self.gammas[:n]
        return out

    def truncated(self, num_slots: int) -> "CtrCurve":
        """The first num_slots positions with zeros after them"""
        if num_slots < 1 or num_slots > self.num_slots:
            raise ValidationError(
                f"Requested {num_slots} slots from a curve with {self.num_slots}",
                ErrorCode.NOT_ENOUGH_SLOTS)
        return CtrCurve(self.gammas[:num_slots])


def _check_gammas(gammas: Sequence[float]) -> None:
    if len(gammas) == 0:
        raise ValidationError("CTR curve needs at least one slot", ErrorCode.CTR_EMPTY)
    for j, g in enumerate(gammas, start=1):
        if not (0.0 < g <= 1.0):
            raise ValidationError(f"gamma_{j} = {g} is outside (0, 1]", ErrorCode.CTR_OUT_OF_RANGE)
    for j in range(1, len(gammas)):
        if not gammas[j - 1] > gammas[j]:
            raise ValidationError(
                f"CTR curve must be strictly decreasing: gamma_{j} = {gammas[j - 1]}, "
                f"gamma_{j + 1} = {gammas[j]}",
                ErrorCode.CTR_NOT_DECREASING)


def validate_ctr_curve(gammas: Iterable[float]) -> CtrCurve:
    """
    Build a CtrCurve from raw position effects.

    Args:
        gammas: Position effects for slots 1..K

    Returns:
        CtrCurve answering gamma_j = 0 for j > K

    Raises:
        ValidationError: empty, out of (0, 1], or not strictly decreasing
    """
    return CtrCurve(tuple(float(g) for g in gammas))


@dataclass(frozen=True)
class AdvertiserProfile:
    """One advertiser's values and relevances for both tiers"""
    agent_id: str
    v_p: float
    e_p: float
    v_s: float = 0.0
    e_s: float = 1.0

    def __post_init__(self):
        for name in ("v_p", "e_p", "v_s", "e_s"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{self.agent_id}: {name} must be finite",
                                      ErrorCode.NOT_FINITE, field=name)
        for name in ("v_p", "v_s"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{self.agent_id}: {name} must be non-negative",
                                      ErrorCode.NEGATIVE_VALUE, field=name)
        for name in ("e_p", "e_s"):
            if not (0.0 < getattr(self, name) <= 1.0):
                raise ValidationError(f"{self.agent_id}: {name} must be in (0, 1]",
                                      ErrorCode.RELEVANCE_OUT_OF_RANGE, field=name)

    @property
    def s_p(self) -> float:
        return self.v_p * self.e_p

    @property
    def s_s(self) -> float:
        return self.v_s * self.e_s


@dataclass(frozen=True)
class Ranking:
    """Agents in slot order (position j holds sigma(j)) with their scores"""
    ordered_agents: Tuple[str, ...]
    scores: Tuple[float, ...]
    _positions: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_positions",
                           {agent: j for j, agent in enumerate(self.ordered_agents, start=1)})

    def __len__(self) -> int:
        return len(self.ordered_agents)

    def position_of(self, agent_id: str) -> Optional[int]:
        """1-based position, or None when the agent is not ranked"""
        return self._positions.get(agent_id)

    def agent_at(self, j: int) -> Optional[str]:
        return self.ordered_agents[j - 1] if 1 <= j <= len(self.ordered_agents) else None

    def score_at(self, j: int) -> float:
        return self.scores[j - 1] if 1 <= j <= len(self.scores) else 0.0

    def padded_scores(self, length: int) -> np.ndarray:
        """s_sigma(1) ... s_sigma(length), zero beyond the participants"""
        out = np.zeros(length)
        n = min(length, len(self.scores))
        out[:n] = self.scores[:n]
        return out


def rank_by_score(profiles: Iterable[Tuple[str, float]]) -> Ranking:
    """
    Rank agents by score, highest first; ties go to the smaller agent id.

    Args:
        profiles: (agent id, score) pairs

    Returns:
        Ranking over all given agents
    """
    entries = list(profiles)
    seen = set()
    for agent_id, score in entries:
        if agent_id in seen:
            raise ValidationError(f"Duplicate agent id: {agent_id}", ErrorCode.DUPLICATE_AGENT)
        seen.add(agent_id)
        if score < 0:
            raise ValidationError(f"{agent_id}: score must be non-negative, got {score}",
                                  ErrorCode.NEGATIVE_SCORE)

    entries.sort(key=lambda entry: (-entry[1], entry[0]))
    return Ranking(tuple(agent for agent, _ in entries), tuple(float(s) for _, s in entries))


def _check_sorted(scores: np.ndarray) -> None:
    if scores.size > 1 and np.any(np.diff(scores) > 0):
        raise ValidationError("Scores must be sorted in non-increasing order", ErrorCode.UNSORTED_SCORES)


def _slot_count(ctr: CtrCurve, num_slots: Optional[int]) -> int:
    if num_slots is None:
        return ctr.num_slots
    if num_slots < 1 or num_slots > ctr.num_slots:
        raise ValidationError(
            f"Requested {num_slots} slots but the curve has {ctr.num_slots}",
            ErrorCode.NOT_ENOUGH_SLOTS)
    return num_slots


def sne_price_scores(ctr: CtrCurve, ranked_scores: Sequence[float],
                     num_slots: Optional[int] = None) -> np.ndarray:
    """
    SNE price-scores r_2 ... r_{K+1} by backward accumulation.

    gamma_i * r_{i+1} = sum_{j=i..K} (gamma_j - gamma_{j+1}) * s_sigma(j+1)

    Args:
        ctr: Position effects
        ranked_scores: Scores in slot order, non-increasing; zero-padded as needed
        num_slots: Use only the first num_slots positions (gamma beyond is 0)

    Returns:
        Array of exactly K price-scores
    """
    k = _slot_count(ctr, num_slots)
    raw = np.asarray(ranked_scores, dtype=float)
    _check_sorted(raw)

    gammas = ctr.padded(k + 1)
    gammas[k] = 0.0
    scores = np.zeros(k + 1)
    n = min(k + 1, raw.size)
    scores[:n] = raw[:n]

    terms = (gammas[:k] - gammas[1:]) * scores[1:]
    suffix = np.cumsum(terms[::-1])[::-1]
    return suffix / gammas[:k]


def gsp_next_score_prices(ranked: Sequence[Tuple[float, float]]) -> List[float]:
    """
    Raw GSP per-click prices: slot i pays s_{i+1} / e_i.

    Args:
        ranked: (score, relevance) pairs sorted by score, highest first

    Returns:
        One price per ranked participant
    """
    scores = np.array([score for score, _ in ranked], dtype=float)
    _check_sorted(scores)
    prices = []
    for i, (_, relevance) in enumerate(ranked):
        if relevance <= 0:
            raise ValidationError(f"Relevance at position {i + 1} must be positive",
                                  ErrorCode.RELEVANCE_OUT_OF_RANGE)
        next_score = scores[i + 1] if i + 1 < scores.size else 0.0
        prices.append(float(next_score / relevance))
    return prices


def auction_revenue(ctr: CtrCurve, price_scores: Sequence[float]) -> float:
    """R = sum_j gamma_j * r_{j+1}"""
    r = np.asarray(price_scores, dtype=float)
    if r.size != ctr.num_slots:
        raise ValidationError(
            f"Expected {ctr.num_slots} price-scores, got {r.size}", ErrorCode.LENGTH_MISMATCH)
    return float(np.dot(ctr.padded(ctr.num_slots), r))


def revenue_closed_form(ctr: CtrCurve, ranked_scores: Sequence[float],
                        num_slots: Optional[int] = None) -> float:
    """R = sum_j (gamma_j - gamma_{j+1}) * j * s_sigma(j+1)"""
    k = _slot_count(ctr, num_slots)
    raw = np.asarray(ranked_scores, dtype=float)
    _check_sorted(raw)

    gammas = ctr.padded(k + 1)
    gammas[k] = 0.0
    scores = np.zeros(k + 1)
    n = min(k + 1, raw.size)
    scores[:n] = raw[:n]

    weights = (gammas[:k] - gammas[1:]) * np.arange(1, k + 1)
    return float(np.dot(weights, scores[1:]))


def slot_payoff(score: float, ctr_at_slot: float, price_score: float) -> float:
    """gamma_j * (s_i - r_{j+1}); negative for out-of-equilibrium deviations"""
    return ctr_at_slot * (score - price_score)


@dataclass(frozen=True)
class SneVerdict:
    """Result of an SNE check; witness is (position, preferred slot) on failure"""
    passed: bool
    witness: Optional[Tuple[int, int]] = None
    shortfall: float = 0.0


def verify_sne(ctr: CtrCurve, ranked_scores: Sequence[float], price_scores: Sequence[float],
               tolerance: float = TOLERANCE) -> SneVerdict:
    """
    Check that no agent prefers another slot at that slot's price.

    Every ranked agent i is compared against every slot j = 1..K and against
    losing (gamma = 0, r = 0). Slots past K are losing for the current holder.

    Args:
        ctr: Position effects
        ranked_scores: Scores in slot order
        price_scores: r_2 ... r_{K+1}
        tolerance: absolute-plus-relative slack

    Returns:
        SneVerdict with the first violated (i, j) in row-major order
    """
    k = ctr.num_slots
    r = np.asarray(price_scores, dtype=float)
    if r.size != k:
        raise ValidationError(f"Expected {k} price-scores, got {r.size}", ErrorCode.LENGTH_MISMATCH)

    scores = np.asarray(ranked_scores, dtype=float)
    gammas = ctr.padded(k)

    for i, score in enumerate(scores, start=1):
        current = slot_payoff(score, gammas[i - 1], r[i - 1]) if i <= k else 0.0
        for j in range(1, k + 2):
            if j <= k:
                alternative = slot_payoff(score, gammas[j - 1], r[j - 1])
            else:
                alternative = 0.0
            if current < alternative - tolerance * (1.0 + abs(alternative)):
                return SneVerdict(False, (i, j), float(alternative - current))
    return SneVerdict(True)


@dataclass(frozen=True)
class AuctionEntry:
    """One participant of a single-tier auction"""
    agent_id: str
    score: float
    relevance: float

    @property
    def value(self) -> float:
        return self.score / self.relevance


@dataclass(frozen=True)
class SneOutcome:
    """Equilibrium allocation and prices for one auction tier"""
    ranking: Ranking
    price_scores: Tuple[float, ...]
    per_click_prices: Tuple[float, ...]
    derived_bids: Tuple[float, ...]

    @property
    def num_slots(self) -> int:
        return len(self.price_scores)

    def price_score_for_slot(self, j: int) -> float:
        """r_{j+1}: what the slot-j occupant pays per unit relevance"""
        return self.price_scores[j - 1] if 1 <= j <= len(self.price_scores) else 0.0

    def winners(self) -> Tuple[str, ...]:
        return self.ranking.ordered_agents[:self.num_slots]


def solve_sne(ctr: CtrCurve, entries: Iterable[AuctionEntry],
              num_slots: Optional[int] = None) -> SneOutcome:
    """
    Rank the entries and price them at the recursion's SNE.

    The top bid is not pinned by the recursion and is reported as the
    top bidder's value. Losing bids are not reported.
    """
    k = _slot_count(ctr, num_slots)
    by_id = {}
    for entry in entries:
        if entry.relevance <= 0:
            raise ValidationError(f"{entry.agent_id}: relevance must be positive",
                                  ErrorCode.RELEVANCE_OUT_OF_RANGE)
        if entry.agent_id in by_id:
            raise ValidationError(f"Duplicate agent id: {entry.agent_id}", ErrorCode.DUPLICATE_AGENT)
        by_id[entry.agent_id] = entry

    ranking = rank_by_score((e.agent_id, e.score) for e in by_id.values())
    price_scores = sne_price_scores(ctr, ranking.scores, num_slots=k)

    prices = []
    bids = []
    for j, agent_id in enumerate(ranking.ordered_agents[:k], start=1):
        entry = by_id[agent_id]
        prices.append(float(price_scores[j - 1] / entry.relevance))
        if j == 1:
            bids.append(entry.value)
        else:
            bids.append(float(price_scores[j - 2] / entry.relevance))

    return SneOutcome(
        ranking=ranking,
        price_scores=tuple(float(r) for r in price_scores),
        per_click_prices=tuple(prices),
        derived_bids=tuple(bids),
    )
