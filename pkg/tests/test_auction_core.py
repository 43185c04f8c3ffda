import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.auction_core import (
    AdvertiserProfile,
    AuctionEntry,
    auction_revenue,
    gsp_next_score_prices,
    rank_by_score,
    revenue_closed_form,
    slot_payoff,
    sne_price_scores,
    solve_sne,
    validate_ctr_curve,
    verify_sne,
    within_tolerance,
)
from src.errors import ErrorCode, ValidationError


@st.composite
def ctr_curves(draw, max_slots=8):
    k = draw(st.integers(min_value=1, max_value=max_slots))
    top = draw(st.floats(min_value=0.2, max_value=1.0))
    ratio = draw(st.floats(min_value=0.2, max_value=0.95))
    return validate_ctr_curve(top * ratio ** j for j in range(k))


@st.composite
def sorted_scores(draw, min_size=0, max_size=12):
    values = draw(st.lists(st.floats(min_value=0.0, max_value=100.0), min_size=min_size, max_size=max_size))
    return sorted(values, reverse=True)


class TestCtrCurve:
    def test_gamma_is_zero_beyond_last_slot(self):
        ctr = validate_ctr_curve([1.0, 0.5])
        assert ctr.gamma(2) == 0.5
        assert ctr.gamma(3) == 0.0
        assert ctr.gamma(100) == 0.0

    @pytest.mark.parametrize("gammas, code", [
        ([], ErrorCode.CTR_EMPTY),
        ([1.0, 1.0], ErrorCode.CTR_NOT_DECREASING),
        ([0.5, 0.6], ErrorCode.CTR_NOT_DECREASING),
        ([1.2, 0.5], ErrorCode.CTR_OUT_OF_RANGE),
        ([0.5, 0.0], ErrorCode.CTR_OUT_OF_RANGE),
    ])
    def test_rejects_invalid_curves(self, gammas, code):
        with pytest.raises(ValidationError) as info:
            validate_ctr_curve(gammas)
        assert info.value.code == code

    def test_single_slot(self):
        ctr = validate_ctr_curve([0.7])
        assert ctr.num_slots == 1

    def test_truncated_keeps_prefix(self):
        ctr = validate_ctr_curve([0.9, 0.6, 0.3])
        assert ctr.truncated(2).gammas == (0.9, 0.6)
        with pytest.raises(ValidationError):
            ctr.truncated(4)


class TestRanking:
    def test_orders_by_score_then_id(self):
        ranking = rank_by_score([("B", 2.0), ("C", 5.0), ("A", 2.0)])
        assert ranking.ordered_agents == ("C", "A", "B")
        assert ranking.scores == (5.0, 2.0, 2.0)
        assert ranking.position_of("B") == 3
        assert ranking.position_of("Z") is None

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValidationError) as info:
            rank_by_score([("A", 1.0), ("A", 2.0)])
        assert info.value.code == ErrorCode.DUPLICATE_AGENT

    def test_negative_score_rejected(self):
        with pytest.raises(ValidationError) as info:
            rank_by_score([("A", -1.0)])
        assert info.value.code == ErrorCode.NEGATIVE_SCORE

    def test_empty(self):
        assert len(rank_by_score([])) == 0

    def test_gsp_next_score_prices(self):
        assert gsp_next_score_prices([(10.0, 1.0), (4.0, 0.5), (3.0, 1.0)]) == [4.0, 6.0, 0.0]


class TestSnePriceScores:
    def test_two_slot_example(self):
        ctr = validate_ctr_curve([1.0, 0.5])
        r = sne_price_scores(ctr, [8.0, 5.0, 3.0])
        np.testing.assert_allclose(r, [4.0, 3.0])

    def test_fewer_bidders_than_slots(self):
        ctr = validate_ctr_curve([1.0, 0.5, 0.25])
        r = sne_price_scores(ctr, [8.0, 5.0])
        # r_3 and r_4 see no competitor below
        np.testing.assert_allclose(r, [2.5, 0.0, 0.0])

    def test_no_bidders(self):
        ctr = validate_ctr_curve([1.0, 0.5])
        np.testing.assert_allclose(sne_price_scores(ctr, []), [0.0, 0.0])

    def test_unsorted_scores_rejected(self):
        ctr = validate_ctr_curve([1.0, 0.5])
        with pytest.raises(ValidationError) as info:
            sne_price_scores(ctr, [3.0, 5.0])
        assert info.value.code == ErrorCode.UNSORTED_SCORES

    def test_truncated_recursion(self):
        ctr = validate_ctr_curve([1.0, 0.5, 0.25])
        np.testing.assert_allclose(sne_price_scores(ctr, [8.0, 5.0, 3.0, 1.0], num_slots=2), [4.0, 3.0])

    @given(ctr_curves(), sorted_scores())
    def test_prices_within_envelope_and_monotone(self, ctr, scores):
        r = sne_price_scores(ctr, scores)
        padded = scores + [0.0] * (ctr.num_slots + 1)
        for j in range(ctr.num_slots):
            assert -1e-9 <= r[j] <= padded[j + 1] * (1 + 1e-9) + 1e-9
            if j + 1 < ctr.num_slots:
                assert r[j + 1] <= r[j] * (1 + 1e-9) + 1e-9

    @given(ctr_curves(), sorted_scores(), st.floats(min_value=0.01, max_value=100.0))
    def test_scale_equivariance(self, ctr, scores, c):
        r = sne_price_scores(ctr, scores)
        scaled = sne_price_scores(ctr, [c * s for s in scores])
        np.testing.assert_allclose(scaled, c * r, rtol=1e-9, atol=1e-9)

    @given(ctr_curves(), sorted_scores())
    def test_revenue_forms_agree(self, ctr, scores):
        recursion = auction_revenue(ctr, sne_price_scores(ctr, scores))
        closed = revenue_closed_form(ctr, scores)
        assert within_tolerance(recursion, closed)

    @given(ctr_curves(), sorted_scores(min_size=1))
    def test_equilibrium_is_verified(self, ctr, scores):
        verdict = verify_sne(ctr, scores, sne_price_scores(ctr, scores))
        assert verdict.passed, verdict


class TestRevenue:
    def test_length_mismatch(self):
        ctr = validate_ctr_curve([1.0, 0.5])
        with pytest.raises(ValidationError) as info:
            auction_revenue(ctr, [1.0])
        assert info.value.code == ErrorCode.LENGTH_MISMATCH

    def test_baseline_revenue_of_worked_market(self):
        ctr = validate_ctr_curve([1.0, 0.5])
        r = sne_price_scores(ctr, [10.0, 4.0, 3.0])
        np.testing.assert_allclose(r, [3.5, 3.0])
        assert auction_revenue(ctr, r) == pytest.approx(5.0)
        assert revenue_closed_form(ctr, [10.0, 4.0, 3.0]) == pytest.approx(5.0)


class TestVerifySne:
    def test_detects_perturbed_prices(self):
        ctr = validate_ctr_curve([1.0, 0.5])
        verdict = verify_sne(ctr, [10.0, 6.0, 4.0], [3.0, 4.0])
        assert not verdict.passed
        assert verdict.witness == (2, 1)
        assert verdict.shortfall > 0

    def test_zeroed_top_price_fails(self):
        ctr = validate_ctr_curve([1.0, 0.5])
        r = sne_price_scores(ctr, [10.0, 6.0, 4.0])
        r[0] = 0.0
        assert not verify_sne(ctr, [10.0, 6.0, 4.0], r).passed

    def test_slot_payoff_can_be_negative(self):
        assert slot_payoff(2.0, 0.5, 3.0) == pytest.approx(-0.5)


class TestAdvertiserProfile:
    def test_scores(self):
        profile = AdvertiserProfile("A", 10.0, 0.5, 4.0, 0.25)
        assert profile.s_p == pytest.approx(5.0)
        assert profile.s_s == pytest.approx(1.0)

    @pytest.mark.parametrize("kwargs, code", [
        ({"v_p": -1.0, "e_p": 1.0}, ErrorCode.NEGATIVE_VALUE),
        ({"v_p": 1.0, "e_p": 1.5}, ErrorCode.RELEVANCE_OUT_OF_RANGE),
        ({"v_p": float("nan"), "e_p": 1.0}, ErrorCode.NOT_FINITE),
        ({"v_p": float("inf"), "e_p": 1.0}, ErrorCode.NOT_FINITE),
        ({"v_p": 1.0, "e_p": 1.0, "v_s": float("inf")}, ErrorCode.NOT_FINITE),
        ({"v_p": 1.0, "e_p": float("nan")}, ErrorCode.NOT_FINITE),
    ])
    def test_invalid_profiles(self, kwargs, code):
        with pytest.raises(ValidationError) as info:
            AdvertiserProfile("A", **kwargs)
        assert info.value.code == code
        assert info.value.field in kwargs


class TestSolveSne:
    def test_prices_and_bids(self):
        ctr = validate_ctr_curve([1.0, 0.5])
        outcome = solve_sne(ctr, [
            AuctionEntry("A", 10.0, 1.0),
            AuctionEntry("B", 4.0, 0.5),
            AuctionEntry("C", 3.0, 1.0),
        ])
        assert outcome.winners() == ("A", "B")
        np.testing.assert_allclose(outcome.price_scores, [3.5, 3.0])
        np.testing.assert_allclose(outcome.per_click_prices, [3.5, 6.0])
        # top bid is the value; slot j bids r_j / e
        np.testing.assert_allclose(outcome.derived_bids, [10.0, 7.0])
        assert outcome.price_score_for_slot(3) == 0.0

    def test_duplicate_entry_rejected(self):
        ctr = validate_ctr_curve([1.0])
        with pytest.raises(ValidationError):
            solve_sne(ctr, [AuctionEntry("A", 1.0, 1.0), AuctionEntry("A", 2.0, 1.0)])

    @settings(max_examples=50)
    @given(ctr_curves(), sorted_scores(min_size=1))
    def test_price_never_exceeds_value(self, ctr, scores):
        entries = [AuctionEntry(f"X{i:02d}", s, 1.0) for i, s in enumerate(scores)]
        outcome = solve_sne(ctr, entries)
        for j, agent in enumerate(outcome.winners(), start=1):
            assert outcome.per_click_prices[j - 1] <= outcome.ranking.score_at(j) * (1 + 1e-9) + 1e-9
