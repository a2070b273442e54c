"""Stock-out vectors: feasibility, counting, sampling, segment bijection."""

import math
import random
from collections import Counter
from itertools import product as iter_product

import pytest

from stockout_demand import (
    StockoutVector,
    count_stockout_vectors,
    enumerate_stockout_vectors,
    from_segments,
    is_feasible,
    sample_stockout_vectors,
    to_segments,
)
from stockout_demand.combinatorics import (
    log_binomial,
    log_multinomial,
    multinomial_exact,
    raw_stockout_draws,
)


class TestFeasibility:
    def test_duplicate_indices_infeasible(self):
        v = StockoutVector((0, 1), (1, 1), (3, 3), 5)
        assert not is_feasible(v)

    def test_out_of_range_infeasible(self):
        assert not is_feasible(StockoutVector((0,), (2,), (0,), 5))
        assert not is_feasible(StockoutVector((0,), (2,), (6,), 5))

    def test_cumulative_room_rule(self):
        # product 0 (stock 2) out at arrival 2 is fine alone, but product 1
        # (stock 2) cannot also be out by arrival 3: 3 < 2 + 2
        assert is_feasible(StockoutVector((0,), (2,), (2,), 5))
        assert not is_feasible(StockoutVector((0, 1), (2, 2), (2, 3), 5))
        assert is_feasible(StockoutVector((0, 1), (2, 2), (2, 4), 5))


class TestCount:
    def test_base_case_h1(self):
        # single product, stock s: n + 1 - s feasible indices
        assert count_stockout_vectors([3], 10) == 8

    def test_h2_closed_form(self):
        assert count_stockout_vectors([3, 3], 10) == 50

    def test_no_stockouts(self):
        assert count_stockout_vectors([], 7) == 1

    def test_too_few_arrivals(self):
        assert count_stockout_vectors([3, 3], 5) == 0

    def test_packed_left_when_n_equals_total_stock(self):
        for stocks in [(1, 2), (2, 2, 1), (3,)]:
            n = sum(stocks)
            expected = sum(1 for _ in enumerate_stockout_vectors(stocks, n))
            assert count_stockout_vectors(stocks, n) == expected

    def test_matches_enumeration_on_grid(self):
        for k in range(1, 4):
            for stocks in iter_product((1, 2, 3), repeat=k):
                for n in range(0, 13):
                    expected = sum(1 for _ in enumerate_stockout_vectors(stocks, n))
                    assert count_stockout_vectors(stocks, n) == expected, (stocks, n)


class TestSampling:
    def test_without_replacement_and_exhaustive_coverage(self):
        stocks, n = (2, 1), 6
        count = count_stockout_vectors(stocks, n)
        sample = sample_stockout_vectors(stocks, n, count, seed=7)
        assert len({v.indices for v in sample}) == count
        universe = {v.indices for v in enumerate_stockout_vectors(stocks, n)}
        assert {v.indices for v in sample} == universe

    def test_oversampling_rejected(self):
        count = count_stockout_vectors([2], 4)
        with pytest.raises(ValueError):
            sample_stockout_vectors([2], 4, count + 1, seed=0)

    def test_deterministic_in_seed(self):
        a = sample_stockout_vectors((3, 3), 10, 5, seed=42)
        b = sample_stockout_vectors((3, 3), 10, 5, seed=42)
        assert [v.indices for v in a] == [v.indices for v in b]
        c = sample_stockout_vectors((3, 3), 10, 5, seed=43)
        assert [v.indices for v in a] != [v.indices for v in c]

    def test_pair_frequencies_uniform_across_seeds(self):
        # h=1, n=4, s=2: feasible indices {2, 3, 4}; sampling 2 of 3 should
        # hit each unordered pair about 1/3 of the time across seeds
        counts = Counter()
        trials = 3000
        for seed in range(trials):
            pair = frozenset(
                v.indices[0] for v in sample_stockout_vectors([2], 4, 2, seed=seed)
            )
            counts[pair] += 1
        assert set(counts) == {
            frozenset({2, 3}),
            frozenset({2, 4}),
            frozenset({3, 4}),
        }
        # 3 sigma for a binomial(trials, 1/3)
        sigma = math.sqrt(trials * (1 / 3) * (2 / 3))
        for pair, c in counts.items():
            assert abs(c - trials / 3) < 3.5 * sigma, counts

    def test_raw_draws_cover_every_candidate(self):
        stocks, n = (3, 3), 10
        total = n ** len(stocks)
        seen = []
        stream = raw_stockout_draws(stocks, n, seed=11)
        for _ in range(total):
            v, ok = next(stream)
            assert ok == is_feasible(v)
            seen.append(v.indices)
        # one full period visits every candidate exactly once
        assert len(set(seen)) == total


class TestSegmentBijection:
    def test_round_trip_identity(self, rng):
        for _ in range(300):
            k = rng.randint(1, 3)
            stocks = tuple(rng.randint(1, 3) for _ in range(k))
            n = rng.randint(sum(stocks), sum(stocks) + 6)
            vectors = list(enumerate_stockout_vectors(stocks, n))
            if not vectors:
                continue
            v = rng.choice(vectors)
            seg = to_segments(v)
            assert seg.total_arrivals == n
            back = from_segments(seg, stocks, v.products)
            assert back.indices == v.indices

    def test_infeasible_vector_rejected(self):
        with pytest.raises(ValueError):
            to_segments(StockoutVector((0,), (2,), (1,), 4))


class TestLogHelpers:
    def test_log_multinomial_matches_exact(self, rng):
        for _ in range(50):
            counts = [rng.randint(0, 20) for _ in range(rng.randint(1, 4))]
            exact = multinomial_exact(counts)
            assert math.exp(log_multinomial(counts)) == pytest.approx(exact, rel=1e-10)

    def test_log_binomial_triangle(self):
        assert log_binomial(5, 6) == float("-inf")
        assert log_binomial(5, -1) == float("-inf")
        assert math.exp(log_binomial(10, 3)) == pytest.approx(120.0, rel=1e-12)
