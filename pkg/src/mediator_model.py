"""
Mediator side of the market

A mediator wins a primary slot l, forks it into L secondary slots and sells
them in her own sub-auction (the s-auction). Secondary slot j is noticed with
effective probability gamma_l * f * gamma_j, where the fitness f is the
mediator's relevance times the CTR amplification alpha.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from src.auction_core import (
    TOLERANCE,
    CtrCurve,
    auction_revenue,
    revenue_closed_form,
    sne_price_scores,
    validate_ctr_curve,
    within_tolerance,
)
from src.errors import ErrorCode, InvariantError, ValidationError

logger = logging.getLogger("MediatorMarket.mediator_model")


@dataclass(frozen=True)
class MediatorProfile:
    """A for-profit reseller of one primary slot"""
    agent_id: str
    relevance_p: float
    alpha: float
    num_secondary_slots: int

    def __post_init__(self):
        if not math.isfinite(self.alpha):
            raise ValidationError(f"{self.agent_id}: alpha must be finite",
                                  ErrorCode.NOT_FINITE, field="alpha")
        if not (0.0 < self.relevance_p <= 1.0):
            raise ValidationError(f"{self.agent_id}: relevance_p must be in (0, 1]",
                                  ErrorCode.RELEVANCE_OUT_OF_RANGE, field="e_p")
        if not self.alpha > 0:
            raise ValidationError(f"{self.agent_id}: fitness must be positive (alpha = {self.alpha})",
                                  ErrorCode.FITNESS_NOT_POSITIVE, field="alpha")
        if self.num_secondary_slots < 1:
            raise ValidationError(f"{self.agent_id}: needs at least one secondary slot",
                                  ErrorCode.SECONDARY_SLOTS_OUT_OF_RANGE, field="L")

    @property
    def fitness(self) -> float:
        return self.relevance_p * self.alpha

    def validate_against(self, ctr: CtrCurve) -> None:
        """Reject (never clamp) a mediator that does not fit the curve"""
        if self.num_secondary_slots > ctr.num_slots:
            raise ValidationError(
                f"{self.agent_id}: L = {self.num_secondary_slots} exceeds K = {ctr.num_slots}",
                ErrorCode.SECONDARY_SLOTS_OUT_OF_RANGE, field="L")
        if not self.fitness * ctr.gamma(1) < 1.0:
            raise ValidationError(
                f"{self.agent_id}: f * gamma_1 = {self.fitness * ctr.gamma(1):.6g} must be < 1",
                ErrorCode.FITNESS_TOO_LARGE, field="alpha")

    def with_fitness(self, fitness: float) -> "MediatorProfile":
        """Same mediator with alpha rescaled so that relevance_p * alpha = fitness"""
        return replace(self, alpha=fitness / self.relevance_p)


@dataclass(frozen=True)
class EffectiveCtrCurve:
    """gamma~_j = gamma_l * f * gamma_j for j <= L, else 0"""
    base: CtrCurve
    primary_slot: int
    fitness: float
    num_slots: int

    @property
    def gammas(self) -> Tuple[float, ...]:
        scale = self.base.gamma(self.primary_slot) * self.fitness
        return tuple(scale * g for g in self.base.gammas[:self.num_slots])

    def gamma(self, j: int) -> float:
        if j < 1 or j > self.num_slots:
            return 0.0
        return self.base.gamma(self.primary_slot) * self.fitness * self.base.gamma(j)

    def as_ctr_curve(self) -> CtrCurve:
        return validate_ctr_curve(self.gammas)


def effective_ctr(ctr: CtrCurve, l: int, mediator: MediatorProfile) -> EffectiveCtrCurve:
    """
    Effective position effects of the mediator's secondary slots.

    Args:
        ctr: Primary position effects
        l: Primary slot won by the mediator (1-based)
        mediator: The mediator profile

    Returns:
        EffectiveCtrCurve with L entries
    """
    if not 1 <= l <= ctr.num_slots:
        raise ValidationError(f"Primary slot {l} outside 1..{ctr.num_slots}", ErrorCode.SLOT_OUT_OF_RANGE)
    if mediator.num_secondary_slots > ctr.num_slots:
        raise ValidationError(
            f"L = {mediator.num_secondary_slots} exceeds K = {ctr.num_slots}",
            ErrorCode.SECONDARY_SLOTS_OUT_OF_RANGE)
    return EffectiveCtrCurve(ctr, l, mediator.fitness, mediator.num_secondary_slots)


def s_auction_price_scores(ctr: CtrCurve, num_secondary_slots: int,
                           ranked_s_scores: Sequence[float]) -> np.ndarray:
    """
    s-auction price-scores r^s_2 ... r^s_{L+1}.

    The gamma_l * f factor cancels, so this is the primary recursion on the
    first L positions and never depends on l or f.
    """
    return sne_price_scores(ctr, ranked_s_scores, num_slots=num_secondary_slots)


def mediator_score(ctr: CtrCurve, mediator: MediatorProfile, ranked_s_scores: Sequence[float],
                   tolerance: float = TOLERANCE) -> float:
    """
    The mediator's primary-auction score s_M^p.

    s_M^p = f * sum_{j<=L} gamma_j * r^s_{j+1}, her expected s-auction revenue
    per noticed impression. Computed in summation and telescoped form and
    cross-checked.
    """
    num_slots = mediator.num_secondary_slots
    truncated = ctr.truncated(num_slots)
    r_s = s_auction_price_scores(ctr, num_slots, ranked_s_scores)

    summation = mediator.fitness * auction_revenue(truncated, r_s)
    closed = mediator.fitness * revenue_closed_form(ctr, ranked_s_scores, num_slots=num_slots)

    if not within_tolerance(summation, closed, tolerance):
        raise InvariantError(
            f"Mediator score forms disagree: summation {summation!r} vs closed form {closed!r}")

    logger.debug(f"s_M^p = {summation:.12g} (f = {mediator.fitness:.6g}, L = {num_slots})")
    return summation


def mediator_payoff(ctr: CtrCurve, l: Optional[int], s_m_p: float, ranked_p_scores_below: Sequence[float]) -> float:
    """
    Mediator's equilibrium payoff gamma_l * (s_M^p - r^p_{l+1}).

    Args:
        ctr: Primary position effects
        l: Slot won by the mediator; None or beyond K means she lost
        s_m_p: Mediator score from mediator_score
        ranked_p_scores_below: s_sigma(l+1), s_sigma(l+2), ... in order

    Returns:
        u_M, 0 when the mediator holds no slot
    """
    k = ctr.num_slots
    if l is None or l > k:
        return 0.0
    if l < 1:
        raise ValidationError(f"Primary slot {l} outside 1..{k}", ErrorCode.SLOT_OUT_OF_RANGE)

    gammas = ctr.padded(k + 1)
    below = np.zeros(k - l + 1)
    below_raw = np.asarray(ranked_p_scores_below, dtype=float)
    n = min(below.size, below_raw.size)
    below[:n] = below_raw[:n]

    # sum_{j=l..K} (gamma_j - gamma_{j+1}) * s_sigma(j+1)
    price_term = float(np.dot(gammas[l - 1:k] - gammas[l:k + 1], below))
    return gammas[l - 1] * s_m_p - price_term
