"""Fitting: closed forms, dataset compilation, profile search, naive baseline."""

import math

import numpy as np
import pytest

from stockout_demand import (
    Assortment,
    CompletePath,
    SalesSummary,
    InvalidObservation,
    ModelParams,
    NULL,
    TruncationPolicy,
    catalog_probabilities,
    compile_dataset,
    dataset_log_likelihood,
    fit,
    fit_complete,
    fit_naive,
    naive_rate,
    simulate_dataset,
)
from stockout_demand.simulate import VisitConfig
from stockout_demand.types import project_sales, project_transactions


def make_path(choices, stocks, horizon=1.0, includes_null=True):
    n = len(choices)
    events = tuple((horizon * (i + 1) / (n + 1), c) for i, c in enumerate(choices))
    return CompletePath(
        horizon=horizon,
        initial_assortment=Assortment(tuple(sorted(stocks)), includes_null),
        stocks=dict(stocks),
        events=events,
    )


def two_product_config(include_null=True, rate=3.0, stock=2):
    return VisitConfig(
        horizon=1.0,
        params=ModelParams(rate=rate, weights={0: 1.0, 1: 0.5}),
        always_available=(),
        optional_products=(0, 1),
        offer_probability=1.0,
        stock_level=stock,
        include_null=include_null,
    )


class TestHelpers:
    def test_naive_rate_pools_time(self):
        paths = [
            make_path([0, NULL, 0], {0: 5}, horizon=2.0),
            make_path([0], {0: 5}, horizon=3.0),
        ]
        assert naive_rate(paths) == pytest.approx(4 / 5)

    def test_catalog_probabilities_normalize(self):
        params = ModelParams(rate=1.0, weights={0: 0.5, 1: 1.5})
        with_null = catalog_probabilities(params, (0, 1), True)
        assert sum(with_null.values()) == pytest.approx(1.0)
        assert with_null[None] == pytest.approx(1.0 / 3.0)
        no_null = catalog_probabilities(params, (0, 1), False)
        assert None not in no_null
        assert sum(no_null.values()) == pytest.approx(1.0)


class TestDatasetLikelihood:
    def test_empty_dataset_is_zero(self):
        params = ModelParams(rate=1.0, weights={0: 1.0})
        assert dataset_log_likelihood([], params, "sales") == 0.0

    def test_duplicates_double(self):
        paths = simulate_dataset(two_product_config(), 5, seed=1)
        summaries = [project_sales(p) for p in paths]
        params = ModelParams(rate=2.5, weights={0: 0.8, 1: 0.7})
        one = dataset_log_likelihood(summaries, params, "sales")
        two = dataset_log_likelihood(summaries * 2, params, "sales")
        assert two == pytest.approx(2 * one, rel=1e-12)

    def test_matches_per_visit_sum(self):
        from stockout_demand import l5_sales_attraction

        paths = simulate_dataset(two_product_config(), 20, seed=2)
        summaries = [project_sales(p) for p in paths]
        params = ModelParams(rate=2.5, weights={0: 0.8, 1: 0.7})
        policy = TruncationPolicy(m=25)
        total = dataset_log_likelihood(summaries, params, "sales", policy)
        expected = sum(l5_sales_attraction(s, params, policy) for s in summaries)
        assert total == pytest.approx(expected, rel=1e-10)

    def test_gradient_matches_finite_differences(self):
        paths = simulate_dataset(two_product_config(), 15, seed=3)
        summaries = [project_sales(p) for p in paths]
        ds = compile_dataset(summaries, "sales", TruncationPolicy(m=20))
        x = np.array([math.log(2.2), 0.3, -0.4])
        _, grad = ds.loglik_grad(x)
        step = 1e-6
        for i in range(len(x)):
            up, dn = x.copy(), x.copy()
            up[i] += step
            dn[i] -= step
            fd = (ds.loglik_grad(up)[0] - ds.loglik_grad(dn)[0]) / (2 * step)
            assert grad[i] == pytest.approx(fd, rel=1e-5, abs=1e-7)

    def test_empty_dataset_compilation_rejected(self):
        with pytest.raises(InvalidObservation):
            compile_dataset([], "sales")


class TestCompleteFit:
    def test_rate_is_arrivals_per_unit_time(self):
        paths = simulate_dataset(two_product_config(rate=6.0), 10, seed=4)
        total = sum(p.arrivals for p in paths)
        result = fit_complete(paths)
        assert result.params.rate == pytest.approx(total / 10.0, rel=1e-12)
        assert result.converged

    def test_fit_delegates_to_closed_form(self):
        paths = simulate_dataset(two_product_config(), 10, seed=5)
        a = fit(paths, "complete")
        b = fit_complete(paths)
        assert a.params.rate == b.params.rate
        assert a.loglik == pytest.approx(b.loglik, rel=1e-12)

    def test_single_product_share_estimate(self):
        # 4 purchases and 6 nulls in 10 arrivals: fitted purchase
        # probability is the empirical share 0.4
        paths = [
            make_path([0, NULL, 0, NULL, NULL], {0: 50}),
            make_path([NULL, 0, NULL, 0, NULL], {0: 50}),
        ]
        result = fit_complete(paths)
        assert result.params.rate == pytest.approx(5.0, rel=1e-12)
        assert result.probabilities[0] == pytest.approx(0.4, abs=1e-6)
        assert result.probabilities[None] == pytest.approx(0.6, abs=1e-6)


class TestLikelihoodDominance:
    def test_fitted_params_beat_truth(self):
        config = two_product_config()
        paths = simulate_dataset(config, 150, seed=6)
        summaries = [project_sales(p) for p in paths]
        result = fit(summaries, "sales")
        at_truth = dataset_log_likelihood(summaries, config.params, "sales")
        assert result.loglik >= at_truth - 1e-6


class TestGranularities:
    def test_all_granularities_recover_roughly(self):
        config = two_product_config(rate=3.0)
        paths = simulate_dataset(config, 300, seed=7)
        truth = catalog_probabilities(config.params, (0, 1), True)
        datasets = {
            "complete": paths,
            "transactions-timed": [project_transactions(p, True) for p in paths],
            "transactions": [project_transactions(p, False) for p in paths],
            "sales": [project_sales(p) for p in paths],
        }
        for granularity, data in datasets.items():
            result = fit(data, granularity)
            assert result.converged, granularity
            # the per-product purchase rates lambda * P_a and the purchase
            # shares are sharply identified at every granularity; the split
            # between the arrival rate and the null share is only weakly
            # identified once null choices are latent, so absolute choice
            # probabilities are checked for complete data alone
            purchase_total = 1.0 - result.probabilities[None]
            for a in (0, 1):
                assert abs(
                    result.params.rate * result.probabilities[a]
                    - config.params.rate * truth[a]
                ) < 0.2, granularity
                assert abs(
                    result.probabilities[a] / purchase_total
                    - truth[a] / (1.0 - truth[None])
                ) < 0.05, granularity
            if granularity == "complete":
                for a, p in truth.items():
                    assert abs(result.probabilities[a] - p) < 0.1

    def test_no_null_fit_recovers_choice_probabilities(self):
        # one product never exhausts, so no arrival is ever discarded and
        # the no-null likelihood matches the generating process exactly
        config = VisitConfig(
            horizon=1.0,
            params=ModelParams(rate=3.0, weights={0: 1.0, 1: 0.5}),
            always_available=(0,),
            optional_products=(1,),
            offer_probability=1.0,
            stock_level=2,
            include_null=False,
        )
        paths = simulate_dataset(config, 400, seed=8)
        summaries = [project_sales(p) for p in paths]
        result = fit(summaries, "sales-no-null")
        truth = catalog_probabilities(config.params, (0, 1), False)
        assert result.converged
        for a, p in truth.items():
            assert abs(result.probabilities[a] - p) < 0.05

    def test_fully_exhausted_no_null_visits_fit_cleanly(self):
        # visits where every product sells out put an empty assortment in
        # the final segment; its zero denominator must not poison the fit
        summaries = [
            SalesSummary(
                1.0, Assortment((0, 1), False), {0: 2, 1: 2}, {0: z0, 1: z1}
            )
            for z0, z1 in [(2, 2), (2, 1), (1, 2), (2, 0), (1, 1)]
        ]
        params = ModelParams(rate=4.0, weights={0: 1.0, 1: 1.0})
        value = dataset_log_likelihood(summaries, params, "sales-no-null")
        assert math.isfinite(value)
        result = fit(summaries, "sales-no-null")
        assert result.converged
        assert math.isfinite(result.loglik)


class TestNaiveBaseline:
    def test_agrees_with_correct_fit_without_stockouts(self):
        # huge stocks: nothing sells out, so ignoring stock-outs is exact
        config = two_product_config(stock=50)
        paths = simulate_dataset(config, 200, seed=9)
        summaries = [project_sales(p) for p in paths]
        correct = fit(summaries, "sales")
        naive = fit_naive(summaries)
        assert naive.loglik == pytest.approx(correct.loglik, abs=1e-5)
        for a in correct.probabilities:
            assert naive.probabilities[a] == pytest.approx(
                correct.probabilities[a], abs=1e-3
            )

    def test_rejects_non_sales_data(self):
        paths = simulate_dataset(two_product_config(), 5, seed=10)
        with pytest.raises(InvalidObservation):
            fit_naive(paths)


class TestSAAFit:
    def test_saa_fit_close_to_exact_with_many_samples(self):
        config = two_product_config()
        paths = simulate_dataset(config, 100, seed=11)
        summaries = [project_sales(p) for p in paths]
        exact = fit(summaries, "sales")
        # enough samples to cover every vector: identical likelihood surface
        saa = fit(summaries, "sales", saa_samples=10**6, seed=0)
        assert saa.loglik == pytest.approx(exact.loglik, rel=1e-9)
        for a in exact.probabilities:
            assert saa.probabilities[a] == pytest.approx(
                exact.probabilities[a], abs=1e-5
            )
        assert saa.saa_samples == 10**6
        assert saa.seed == 0
