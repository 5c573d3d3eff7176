from decimal import Decimal, getcontext

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helo import elo

getcontext().prec = 50

ratings = st.floats(0.0, 4000.0, allow_nan=False)


def decimal_expected(a: float, b: float) -> float:
    """50-digit evaluation of 1 / (1 + 10^((b - a) / 400))."""
    gap = (Decimal(b) - Decimal(a)) / Decimal(400)
    return float(1 / (1 + Decimal(10) ** gap))


def test_equal_ratings_score_half():
    assert elo.expected_score(1500, 1500) == 0.5


def test_known_gap_matches_high_precision():
    assert elo.expected_score(1400, 1600) == pytest.approx(decimal_expected(1400, 1600), abs=1e-15)
    assert elo.expected_score(1400, 1600) == pytest.approx(0.24025307335204216, abs=1e-15)
    assert round(elo.expected_score(1400, 1600), 10) == 0.2402530734


@settings(max_examples=300)
@given(ratings, ratings)
def test_expected_scores_sum_to_one(a, b):
    assert elo.expected_score(a, b) + elo.expected_score(b, a) == 1.0


@settings(max_examples=200)
@given(ratings, ratings)
def test_expected_score_agrees_with_decimal(a, b):
    assert elo.expected_score(a, b) == pytest.approx(decimal_expected(a, b), abs=1e-15)


@settings(max_examples=200)
@given(ratings, ratings, ratings)
def test_expected_score_is_monotone_in_opponent(a, b, c):
    lo, hi = sorted((b, c))
    assert elo.expected_score(a, lo) >= elo.expected_score(a, hi)


def test_update_examples():
    cfg = elo.EloConfig(32, 3)
    assert elo.update_rating(1500, [1400, 1500, 1600], [1, 0.5, 0], cfg) == 1500
    assert elo.update_rating(1500, [1500] * 3, [1, 1, 1], cfg) == 1548
    assert elo.update_rating(1500, [1500] * 3, [0.5] * 3, cfg) == 1500


def test_update_clamps_to_range():
    cfg = elo.EloConfig(400, 3)
    assert elo.update_rating(3990, [3990] * 3, [1, 1, 1], cfg) == 4000
    assert elo.update_rating(5, [5] * 3, [0, 0, 0], cfg) == 0


@settings(max_examples=200)
@given(ratings, st.lists(ratings, min_size=3, max_size=3), st.lists(st.sampled_from(elo.OUTCOMES), min_size=3, max_size=3))
def test_update_stays_in_range_and_moves_at_most_3k(r, opps, outs):
    new = elo.update_rating(r, opps, outs)
    assert 0.0 <= new <= 4000.0
    assert abs(new - r) <= 3 * 32 + 1e-9


def test_update_rejects_bad_input():
    with pytest.raises(elo.EloError):
        elo.update_rating(1500, [1500] * 3, [1, 1, 2])
    with pytest.raises(elo.EloError):
        elo.update_rating(1500, [1500] * 2, [1, 1])
    with pytest.raises(elo.EloError):
        elo.update_rating(4000.5, [1500] * 3, [1, 1, 1])
    with pytest.raises(elo.EloError):
        elo.EloConfig(32, 2)
    with pytest.raises(elo.EloError):
        elo.EloConfig(0, 3)


def test_ladder_edges():
    ladder = elo.RankLadder.load()
    b = ladder.band(1250)
    assert (b.low, b.high) == (1000, 1500)
    assert ladder.band(1000).low == 1000
    assert ladder.band(1500).low == 1500
    assert ladder.rank(4000) == ladder.bands[-1].label
    assert ladder.rank(0) == ladder.bands[0].label
    with pytest.raises(elo.EloError):
        ladder.rank(-1)


def test_ladder_json_round_trip_and_validation():
    ladder = elo.RankLadder.uniform(500)
    assert elo.RankLadder.from_json(ladder.to_json()) == ladder
    with pytest.raises(elo.LadderError):
        elo.RankLadder.from_json('{"bands": [{"label": "a", "min": 0, "max": 3000}]}')
    with pytest.raises(elo.LadderError):
        elo.RankLadder.from_json('{"bands": [{"label": "a", "min": 0, "max": 2000},'
                                 ' {"label": "b", "min": 2100, "max": 4000}]}')
    with pytest.raises(elo.LadderError):
        elo.RankLadder.from_json("not json")


@settings(max_examples=300)
@given(ratings)
def test_every_rating_has_exactly_one_band(r):
    ladder = elo.RankLadder.load()
    hits = [b for b in ladder.bands if b.contains(r)]
    assert len(hits) == 1
    assert ladder.band(r) == hits[0]


def test_kernel_series_accuracy():
    coeffs = elo.chebyshev_coeffs(50)
    err = elo.max_grid_error(coeffs)
    assert err <= 5e-6
    assert err == pytest.approx(1.343e-6, rel=0.01)
    assert float(elo.chebyshev_eval(coeffs, 0.0)) == pytest.approx(0.5, abs=1e-6)
    exact = float(1 / (1 + Decimal(10) ** Decimal("-0.5")))
    assert round(exact, 6) == 0.759747
    assert float(elo.chebyshev_eval(coeffs, -0.5)) == pytest.approx(exact, abs=5e-6)


def test_low_degree_kernel_is_bad_at_the_ends():
    coeffs = elo.chebyshev_coeffs(1)
    ends = elo.chebyshev_eval(coeffs, np.array([-5.0, 5.0]))
    assert np.max(np.abs(ends - elo.logistic_kernel(np.array([-5.0, 5.0])))) > 0.1


def test_kernel_series_is_odd_around_half():
    # f(x) - 1/2 is odd, so every even coefficient past the constant term vanishes.
    coeffs = elo.chebyshev_coeffs(50)
    assert coeffs[0] == pytest.approx(0.5, abs=1e-12)
    assert np.max(np.abs(coeffs[2::2])) < 1e-12


def test_top_band_admits_the_cap():
    ladder = elo.RankLadder.load()
    top = ladder.band(elo.RATING_MAX)
    assert top.contains(elo.RATING_MAX) and top.proof_high == elo.RATING_MAX + 1
    assert not ladder.band(1200.0).contains(1500.0) and ladder.band(1200.0).proof_high == 1500
