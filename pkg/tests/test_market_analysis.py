import math
from dataclasses import replace

import pytest

from src.auction_core import AdvertiserProfile, validate_ctr_curve
from src.errors import ErrorCode, InvariantError, ScenarioMismatchError, ValidationError
from src.market_analysis import (
    MarketScenario,
    ThresholdStatus,
    accounting_check,
    advertiser_payoff_delta,
    compare,
    efficiency,
    efficiency_delta,
    fitness_sweep,
    min_fitness_for_no_loss,
    no_loss_fitness,
    revenue_delta,
    run_baseline,
    run_with_mediator,
    verify_campaign,
    verify_scenario,
)
from src.mediator_model import MediatorProfile
from src.scenario_io import GeneratorParams, generate_scenarios


class TestWorkedScenario:
    def test_with_mediator(self, worked_scenario):
        outcome = run_with_mediator(worked_scenario)
        assert outcome.mediator_slot == 2
        assert outcome.p_auction.ranking.ordered_agents == ("A", "M", "B", "C")
        assert outcome.mediator_score == pytest.approx(4.4)
        assert outcome.s_auction.price_scores == pytest.approx((4.0, 3.0))
        assert outcome.revenue == pytest.approx(6.2)
        assert outcome.mediator_payoff == pytest.approx(0.2)
        assert efficiency(outcome) == pytest.approx(14.2)

    def test_payoffs(self, worked_scenario):
        payoffs = run_with_mediator(worked_scenario).payoffs
        assert payoffs["A"].p_payoff == pytest.approx(5.8)
        assert payoffs["A"].s_slot is None
        assert payoffs["B"].p_slot is None
        assert payoffs["B"].s_payoff == pytest.approx(0.4)
        assert payoffs["C"].s_slot == 1
        assert payoffs["C"].s_payoff == pytest.approx(1.6)

    def test_baseline(self, worked_scenario):
        baseline = run_baseline(worked_scenario)
        assert baseline.p_auction.ranking.ordered_agents == ("A", "B", "C")
        assert baseline.revenue == pytest.approx(5.0)
        assert efficiency(baseline) == pytest.approx(12.0)
        assert baseline.payoffs["A"].total == pytest.approx(6.5)
        assert baseline.payoffs["B"].total == pytest.approx(0.5)
        assert baseline.payoffs["C"].total == 0.0

    def test_deltas(self, worked_scenario):
        with_outcome = run_with_mediator(worked_scenario)
        baseline = run_baseline(worked_scenario)

        r = revenue_delta(with_outcome, baseline)
        assert r.direct == pytest.approx(1.2)
        assert r.closed_form == pytest.approx(1.2)

        e = efficiency_delta(with_outcome, baseline)
        assert e.direct == pytest.approx(2.2)
        assert e.closed_form == pytest.approx(2.2)

        expected = {"A": -0.7, "B": -0.1, "C": 1.6}
        for agent_id, value in expected.items():
            delta = advertiser_payoff_delta(with_outcome, baseline, agent_id)
            assert delta.direct == pytest.approx(value)
            assert delta.closed_form == pytest.approx(value)

    def test_accounting(self, worked_scenario):
        assert accounting_check(run_with_mediator(worked_scenario)) == pytest.approx(0.0, abs=1e-12)
        assert accounting_check(run_baseline(worked_scenario)) == pytest.approx(0.0, abs=1e-12)

    def test_compare_report(self, worked_scenario):
        report = compare(worked_scenario)
        assert report.violations() == []
        assert report.accommodated == ("C",)
        assert set(report.losing_advertisers) == {"A", "B"}
        # s-ranking differs from the baseline p-ranking
        assert all(t.status == ThresholdStatus.INAPPLICABLE for t in report.thresholds.values())
        assert set(report.thresholds) == {"A", "B"}

    def test_mediator_required(self, worked_scenario):
        with pytest.raises(ValidationError) as info:
            run_with_mediator(replace(worked_scenario, mediator=None))
        assert info.value.code == ErrorCode.MEDIATOR_REQUIRED


class TestLostMediator:
    def test_outcome_equals_baseline(self, worked_scenario):
        weak = worked_scenario.with_fitness(0.5)
        outcome = run_with_mediator(weak)
        baseline = run_baseline(weak)
        assert outcome.mediator_lost
        assert outcome.mediator_rank == 4
        assert outcome.mediator_score == pytest.approx(2.75)
        assert outcome.revenue == baseline.revenue
        assert outcome.mediator_payoff == 0.0
        assert revenue_delta(outcome, baseline).direct == 0.0
        assert efficiency_delta(outcome, baseline).direct == 0.0

    def test_zero_resale_value_does_not_enter(self):
        scenario = MarketScenario(
            ctr=validate_ctr_curve([1.0, 0.5]),
            advertisers=(AdvertiserProfile("A", 10.0, 1.0), AdvertiserProfile("B", 4.0, 1.0)),
            mediator=MediatorProfile("M", 0.8, 1.0, 2),
        )
        outcome = run_with_mediator(scenario)
        assert outcome.mediator_score == 0.0
        assert outcome.mediator_lost
        assert outcome.mediator_rank is None


class TestScenarioValidation:
    def test_duplicate_ids(self):
        with pytest.raises(ValidationError) as info:
            MarketScenario(
                ctr=validate_ctr_curve([1.0]),
                advertisers=(AdvertiserProfile("A", 1.0, 1.0), AdvertiserProfile("A", 2.0, 1.0)),
            )
        assert info.value.code == ErrorCode.DUPLICATE_AGENT

    def test_mediator_id_collides(self):
        with pytest.raises(ValidationError):
            MarketScenario(
                ctr=validate_ctr_curve([0.5]),
                advertisers=(AdvertiserProfile("M", 1.0, 1.0),),
                mediator=MediatorProfile("M", 1.0, 1.0, 1),
            )

    def test_no_advertisers(self):
        with pytest.raises(ValidationError) as info:
            MarketScenario(ctr=validate_ctr_curve([1.0]), advertisers=())
        assert info.value.code == ErrorCode.NO_ADVERTISERS

    def test_fitness_too_large(self, worked_scenario):
        with pytest.raises(ValidationError) as info:
            worked_scenario.with_fitness(1.0)
        assert info.value.code == ErrorCode.FITNESS_TOO_LARGE

    def test_unknown_agent(self, worked_scenario):
        with_outcome = run_with_mediator(worked_scenario)
        with pytest.raises(ValidationError) as info:
            advertiser_payoff_delta(with_outcome, run_baseline(worked_scenario), "Z")
        assert info.value.code == ErrorCode.UNKNOWN_AGENT

    def test_mismatched_outcomes(self, worked_scenario, threshold_scenario):
        with pytest.raises(ScenarioMismatchError):
            revenue_delta(run_with_mediator(worked_scenario), run_baseline(threshold_scenario))


class TestNoLossFitness:
    def test_zero_loss_gives_zero(self):
        ctr = validate_ctr_curve([1.0, 0.5])
        assert no_loss_fitness(ctr, 1, [6.0, 5.0, 4.0, 4.0], 3, [5.0, 4.0, 1.0], 2, 2) == 0.0

    def test_no_compensation_capacity(self):
        ctr = validate_ctr_curve([1.0, 0.5])
        # equal s-scores leave nothing to win in the s-auction
        assert no_loss_fitness(ctr, 1, [6.0, 6.0, 5.0, 4.0], 2, [5.0, 5.0, 5.0], 1, 2) is None


class TestMinFitnessForNoLoss:
    def test_interior_threshold(self, threshold_scenario):
        result = min_fitness_for_no_loss(threshold_scenario, "B")
        assert result.status == ThresholdStatus.DEFINED
        assert result.fitness == pytest.approx(84 / 43)
        assert result.mediator_slot == 1
        assert result.regime == pytest.approx((6 / 3.74, 2.0))
        assert result.no_loss_from == pytest.approx(84 / 43)

    def test_delta_changes_sign_at_threshold(self, threshold_scenario):
        baseline = run_baseline(threshold_scenario)

        def delta_at(f):
            outcome = run_with_mediator(threshold_scenario.with_fitness(f))
            assert outcome.mediator_slot == 1
            return advertiser_payoff_delta(outcome, baseline, "B").direct

        assert delta_at(84 / 43) == pytest.approx(0.0, abs=1e-9)
        assert delta_at(1.9) < 0
        assert delta_at(1.99) > 0

    def test_no_self_consistent_root(self):
        scenario = MarketScenario(
            ctr=validate_ctr_curve([1.0, 0.5]),
            advertisers=(
                AdvertiserProfile("A", 10.0, 1.0, 10.0, 1.0),
                AdvertiserProfile("B", 4.0, 1.0, 4.0, 1.0),
                AdvertiserProfile("C", 3.0, 1.0, 3.0, 1.0),
            ),
            mediator=MediatorProfile("M", 1.0, 0.5, 2),
        )
        a = min_fitness_for_no_loss(scenario, "A")
        assert a.status == ThresholdStatus.UNDEFINED
        assert a.no_loss_from == pytest.approx(0.8)

        b = min_fitness_for_no_loss(scenario, "B")
        assert b.status == ThresholdStatus.UNDEFINED
        assert b.no_loss_from is None

    def test_advertiser_without_primary_loss_needs_no_fitness(self):
        scenario = MarketScenario(
            ctr=validate_ctr_curve([1.0, 0.5]),
            advertisers=(
                AdvertiserProfile("A", 5.0, 1.0, 9.0, 1.0),
                AdvertiserProfile("B", 3.0, 1.0, 8.0, 1.0),
                AdvertiserProfile("C", 3.0, 1.0, 1.0, 1.0),
            ),
            mediator=MediatorProfile("M", 1.0, 0.5, 2),
        )
        result = min_fitness_for_no_loss(scenario, "B")
        assert result.status == ThresholdStatus.DEFINED
        assert result.fitness == 0.0
        assert result.mediator_slot is None
        assert result.no_loss_from == 0.0

        baseline = run_baseline(scenario)
        for f in (0.3, 0.7, 0.95):
            outcome = run_with_mediator(scenario.with_fitness(f))
            assert advertiser_payoff_delta(outcome, baseline, "B").direct >= 0.0

    def test_root_on_regime_boundary_is_not_self_consistent(self):
        # at f = 0.75 the mediator ties A, ranks below her and A loses
        scenario = MarketScenario(
            ctr=validate_ctr_curve([1.0, 0.5]),
            advertisers=(
                AdvertiserProfile("A", 10.5, 1.0, 10.5, 1.0),
                AdvertiserProfile("B", 10.0, 1.0, 10.0, 1.0),
                AdvertiserProfile("C", 9.0, 1.0, 9.0, 1.0),
            ),
            mediator=MediatorProfile("M", 1.0, 0.5, 2),
        )
        result = min_fitness_for_no_loss(scenario, "A")
        assert result.status == ThresholdStatus.UNDEFINED
        assert result.no_loss_from == pytest.approx(0.75)

        baseline = run_baseline(scenario)
        at_boundary = run_with_mediator(scenario.with_fitness(0.75))
        assert at_boundary.mediator_slot == 2
        assert advertiser_payoff_delta(at_boundary, baseline, "A").direct == pytest.approx(-0.375)

        above = run_with_mediator(scenario.with_fitness(0.8))
        assert above.mediator_slot == 1
        assert advertiser_payoff_delta(above, baseline, "A").direct == pytest.approx(0.05)

    def test_requires_matching_rankings(self, worked_scenario):
        result = min_fitness_for_no_loss(worked_scenario, "A")
        assert result.status == ThresholdStatus.INAPPLICABLE

    def test_baseline_loser_is_inapplicable(self, threshold_scenario):
        assert min_fitness_for_no_loss(threshold_scenario, "D").status == ThresholdStatus.INAPPLICABLE

    def test_no_mediator(self, threshold_scenario):
        result = min_fitness_for_no_loss(replace(threshold_scenario, mediator=None), "A")
        assert result.status == ThresholdStatus.INAPPLICABLE


class TestFitnessSweep:
    def test_worked_sweep(self, worked_scenario):
        rows = fitness_sweep(worked_scenario, 0.1, 0.9, 9)
        assert [row.fitness for row in rows] == pytest.approx([0.1 * i for i in range(1, 10)])
        slots = [row.mediator_slot for row in rows]
        assert slots[:7] == [None] * 7
        assert slots[7:] == [2, 2]
        assert [row.mediator_rank for row in rows[5:7]] == [3, 3]
        scores = [row.mediator_score for row in rows]
        assert scores == sorted(scores)
        assert rows[7].revenue_delta == pytest.approx(1.2)
        assert not any(row.win_win for row in rows)

    def test_single_step(self, worked_scenario):
        rows = fitness_sweep(worked_scenario, 0.3, 0.9, 1)
        assert len(rows) == 1
        assert rows[0].fitness == pytest.approx(0.3)

    def test_below_first_breakpoint(self, worked_scenario):
        for row in fitness_sweep(worked_scenario, 0.1, 0.5, 5):
            assert row.mediator_slot is None
            assert row.revenue_delta == 0.0
            assert row.min_advertiser_delta == 0.0

    def test_range_must_keep_clicks_below_one(self, worked_scenario):
        with pytest.raises(ValidationError) as info:
            fitness_sweep(worked_scenario, 0.1, 1.0, 3)
        assert info.value.code == ErrorCode.FITNESS_TOO_LARGE


class TestVerifyScenario:
    def test_worked_scenario_passes(self, worked_scenario):
        assert verify_scenario(worked_scenario).passed

    def test_corrupted_prices_fail_with_witness(self, worked_scenario):
        result = verify_scenario(worked_scenario, corrupt_prices=True)
        assert not result.passed
        assert result.witness == (2, 1)

    def test_delta_check_raises(self, worked_scenario):
        with_outcome = run_with_mediator(worked_scenario)
        baseline = run_baseline(worked_scenario)
        tampered = replace(with_outcome, revenue=with_outcome.revenue + 1.0)
        with pytest.raises(InvariantError):
            revenue_delta(tampered, baseline)


@pytest.mark.campaign
def test_campaign_growth_and_conservation():
    """1000 seeded scenarios: revenue and efficiency never fall, books balance, SNE holds"""
    count, failing = verify_campaign(generate_scenarios(seed=42, count=1000))
    assert count == 1000
    assert failing == [], failing[0].failures if failing else None


@pytest.mark.campaign
def test_campaign_negative_control():
    count, failing = verify_campaign(generate_scenarios(seed=42, count=20), corrupt_prices=True)
    assert len(failing) == count == 20
    assert all(result.witness is not None for result in failing)


@pytest.mark.campaign
def test_threshold_consistency_campaign():
    """Interior thresholds are zeros of the payoff delta with a sign change inside the regime"""
    params = GeneratorParams(extreme=True, min_slots=2, max_slots=8, max_advertisers=20,
                             top_ctr_min=0.2, top_ctr_max=0.6, ratio_min=0.6, ratio_max=0.95)
    checked = 0
    for scenario in generate_scenarios(seed=7, count=5000, params=params):
        baseline = run_baseline(scenario)
        for agent_id in baseline.p_auction.winners():
            result = min_fitness_for_no_loss(scenario, agent_id)
            if result.status != ThresholdStatus.DEFINED or result.regime is None:
                continue
            lower, upper = result.regime
            root = result.fitness
            eps = 0.25 * min(root - lower, upper - root)
            if eps < 1e-6:
                continue

            def delta_at(f):
                outcome = run_with_mediator(scenario.with_fitness(f))
                assert outcome.mediator_slot == result.mediator_slot
                return advertiser_payoff_delta(outcome, baseline, agent_id).direct

            assert delta_at(root) == pytest.approx(0.0, abs=1e-6)
            assert delta_at(root - eps) < 0 < delta_at(root + eps)
            checked += 1
        if checked >= 100:
            break
    assert checked >= 100


@pytest.mark.campaign
def test_sweep_monotonicity_campaign():
    """Raising fitness never pushes the mediator down, and a better slot never lowers R - R0"""
    for scenario in generate_scenarios(seed=11, count=200):
        cap = 1.0 / scenario.ctr.gamma(1)
        rows = fitness_sweep(scenario, 0.01 * cap, 0.99 * cap, 25)

        ranks = [math.inf if row.mediator_rank is None else row.mediator_rank for row in rows]
        slots = [math.inf if row.mediator_slot is None else row.mediator_slot for row in rows]
        assert all(later <= earlier for earlier, later in zip(ranks, ranks[1:]))
        assert all(later <= earlier for earlier, later in zip(slots, slots[1:]))

        gains = [row.revenue_delta for row in rows]
        for earlier, later in zip(gains, gains[1:]):
            assert later >= earlier - 1e-9 * (1.0 + abs(earlier))


def test_advertiser_absent_from_both_auctions(worked_scenario):
    scenario = replace(worked_scenario,
                       advertisers=worked_scenario.advertisers + (AdvertiserProfile("D", 0.0, 1.0),))
    delta = advertiser_payoff_delta(run_with_mediator(scenario), run_baseline(scenario), "D")
    assert delta.direct == 0.0
    assert delta.closed_form == 0.0


def test_all_zero_valuations_balance():
    scenario = MarketScenario(
        ctr=validate_ctr_curve([0.9, 0.3]),
        advertisers=(AdvertiserProfile("A", 0.0, 1.0), AdvertiserProfile("B", 0.0, 0.5)),
        mediator=MediatorProfile("M", 0.5, 1.0, 1),
    )
    for outcome in (run_with_mediator(scenario), run_baseline(scenario)):
        assert efficiency(outcome) == 0.0
        assert accounting_check(outcome) == 0.0
