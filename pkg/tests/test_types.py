"""Domain types: validation, projections, segmentation."""

import pytest

from stockout_demand import (
    Assortment,
    CompletePath,
    InvalidObservation,
    ModelParams,
    NULL,
    SalesSummary,
    hide_product,
    project_sales,
    project_transactions,
    segment_decomposition,
    validate_complete_path,
)
from stockout_demand.types import assortment_after, transaction_segments


def make_path(events, products=(0, 1), stocks=None, includes_null=True, horizon=1.0):
    return CompletePath(
        horizon=horizon,
        initial_assortment=Assortment(tuple(products), includes_null),
        stocks=stocks or {a: 1 for a in products},
        events=tuple(events),
    )


class TestAssortment:
    def test_rejects_duplicates(self):
        with pytest.raises(InvalidObservation):
            Assortment((0, 0))

    def test_null_membership_follows_flag(self):
        assert NULL in Assortment((0,), True)
        assert NULL not in Assortment((0,), False)

    def test_without_preserves_order_and_flag(self):
        a = Assortment((2, 0, 5), False)
        assert a.without(0).products == (2, 5)
        assert a.without(0).includes_null is False


class TestModelParams:
    def test_rejects_nonpositive_rate_and_weights(self):
        with pytest.raises(InvalidObservation):
            ModelParams(rate=0.0, weights={0: 1.0})
        with pytest.raises(InvalidObservation):
            ModelParams(rate=1.0, weights={0: 0.0})


class TestValidation:
    def test_valid_path_passes(self):
        path = make_path([(0.1, 0), (0.5, NULL), (0.9, 1)])
        assert validate_complete_path(path).ok

    def test_purchase_after_stockout_flagged(self):
        path = make_path([(0.1, 0), (0.2, 0)])
        report = validate_complete_path(path)
        assert not report.ok
        assert any("stocked out" in msg for _, msg in report.violations)

    def test_unoffered_product_flagged(self):
        path = make_path([(0.1, 7)])
        assert not validate_complete_path(path).ok

    def test_time_ordering_flagged(self):
        path = make_path([(0.5, NULL), (0.1, NULL)])
        assert not validate_complete_path(path).ok

    def test_null_in_no_null_regime_flagged(self):
        path = make_path([(0.1, NULL)], includes_null=False)
        assert not validate_complete_path(path).ok

    def test_equal_timestamps_allowed(self):
        path = make_path([(0.5, NULL), (0.5, 0)])
        assert validate_complete_path(path).ok


class TestProjections:
    def test_transactions_drop_nulls_keep_order(self):
        path = make_path([(0.1, 1), (0.2, NULL), (0.3, 0)])
        rec = project_transactions(path, keep_times=True)
        assert rec.transactions == ((0.1, 1), (0.3, 0))
        rec2 = project_transactions(path, keep_times=False)
        assert rec2.products == (1, 0)
        assert not rec2.timestamps_present

    def test_sales_histogram_matches_choices(self):
        path = make_path(
            [(0.1, 0), (0.2, NULL), (0.3, 1), (0.4, 1)],
            stocks={0: 3, 1: 2},
        )
        summary = project_sales(path)
        assert summary.sales == {0: 1, 1: 2}
        assert summary.total_sales == 3
        assert summary.stocked_out == (1,)

    def test_invalid_path_rejected(self):
        path = make_path([(0.1, 0), (0.2, 0)])
        with pytest.raises(InvalidObservation):
            project_sales(path)


class TestAssortmentAfter:
    def test_incremental_matches_batch_recount(self, rng):
        products = (0, 1, 2)
        stocks = {0: 2, 1: 1, 2: 3}
        initial = Assortment(products, True)
        for _ in range(50):
            remaining = dict(stocks)
            prefix = []
            for _ in range(rng.randint(0, 6)):
                options = [NULL] + [a for a in products if remaining[a] > 0]
                c = rng.choice(options)
                prefix.append(c)
                if c is not NULL:
                    remaining[c] -= 1
                expected = tuple(a for a in products if remaining[a] > 0)
                assert assortment_after(initial, stocks, prefix).products == expected


class TestSegments:
    def test_transaction_segments_replay(self):
        initial = Assortment((0, 1, 2), True)
        stocks = {0: 1, 1: 2, 2: 5}
        order, counts, assorts, idx = transaction_segments(
            initial, stocks, (2, 0, 1, 2, 1)
        )
        assert order == (0, 1)
        assert counts == (1, 2, 0)  # stock-out purchases excluded
        assert [a.products for a in assorts] == [(0, 1, 2), (1, 2), (2,)]
        assert idx == (2, 5)

    def test_segment_decomposition_total(self):
        path = make_path(
            [(0.1, NULL), (0.2, 0), (0.3, 1), (0.4, NULL)],
            stocks={0: 1, 1: 1},
        )
        seg = segment_decomposition(path)
        assert seg.stockout_order == (0, 1)
        assert seg.segment_sizes == (1, 0, 1)
        assert seg.total_arrivals == path.arrivals


class TestHideProduct:
    def test_hidden_sales_become_null(self):
        summary = SalesSummary(
            horizon=1.0,
            initial_assortment=Assortment((0, 1), False),
            stocks={0: 100, 1: 2},
            sales={0: 3, 1: 2},
        )
        hidden = hide_product(summary, 0)
        assert hidden.initial_assortment.products == (1,)
        assert hidden.initial_assortment.includes_null
        assert hidden.sales == {1: 2}

    def test_refuses_stockoutable_product(self):
        summary = SalesSummary(
            horizon=1.0,
            initial_assortment=Assortment((0, 1), False),
            stocks={0: 2, 1: 2},
            sales={0: 2, 1: 0},
        )
        with pytest.raises(InvalidObservation):
            hide_product(summary, 0)
