"""Maximum-likelihood fitting across observation granularities.

A dataset is compiled once into flat arrays: identical visits are grouped
with multiplicities, every visit's likelihood terms are concatenated, and
assortment denominators are shared through a global registry.  Each
optimizer step is then a handful of vectorized array operations with
analytic gradients in ``(log rate, log weights)``.

Fitting maximizes the profile likelihood: a golden-section search over the
arrival rate, with the attraction weights re-optimized (warm-started
L-BFGS) at every rate.  Complete data admits a closed-form rate.  The
"naive" fit ignores stock-outs entirely and serves as the biased baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize

from .likelihood import (
    NEG_INF,
    TermTable,
    TimedSegmentTable,
    TruncationPolicy,
    table_complete,
    table_naive_sales,
    table_sales_attraction,
    table_sales_no_null,
    table_sales_saa,
    table_timed_transactions,
    table_transactions,
)
from .types import (
    CompletePath,
    InvalidObservation,
    ModelParams,
    SalesSummary,
    TransactionRecord,
)

__all__ = [
    "GRANULARITIES",
    "FitResult",
    "CompiledDataset",
    "compile_dataset",
    "dataset_log_likelihood",
    "naive_rate",
    "catalog_probabilities",
    "fit",
    "fit_complete",
    "fit_naive",
]

Observation = Union[CompletePath, TransactionRecord, SalesSummary]

GRANULARITIES = (
    "complete",
    "transactions-timed",
    "transactions",
    "sales",
    "sales-no-null",
)

#: factor applied to the naive rate when sizing adaptive truncation
RATE_CAP_FACTOR = 4.0


@dataclass
class FitResult:
    """Fitted parameters with optimization diagnostics.

    ``probabilities`` are full-catalog choice probabilities (the null
    entry, keyed ``None``, appears when the data include a null option);
    they sum to one and are invariant to the weight-scale flat direction
    of the no-null regime.
    """

    params: ModelParams
    loglik: float
    converged: bool
    iterations: int
    probabilities: Dict[Optional[int], float] = field(default_factory=dict)
    message: str = ""
    saa_samples: Optional[int] = None
    seed: Optional[int] = None


def catalog_probabilities(
    params: ModelParams, catalog: Sequence[int], includes_null: bool
) -> Dict[Optional[int], float]:
    """Choice probabilities if the whole catalog were offered at once."""
    base = 1.0 if includes_null else 0.0
    denom = base + sum(params.weights[a] for a in catalog)
    probs: Dict[Optional[int], float] = {
        a: params.weights[a] / denom for a in catalog
    }
    if includes_null:
        probs[None] = 1.0 / denom
    return probs


def _observed_count(obs: Observation) -> int:
    if isinstance(obs, CompletePath):
        return obs.arrivals
    if isinstance(obs, TransactionRecord):
        return obs.total
    return obs.total_sales


def naive_rate(observations: Sequence[Observation]) -> float:
    """Observed events per unit time, pooled; the rate scale reference."""
    total = sum(_observed_count(o) for o in observations)
    horizon = sum(o.horizon for o in observations)
    if horizon <= 0:
        raise InvalidObservation("dataset has no observation time")
    return max(total / horizon, 1e-8)


def _group_key(obs: Observation, granularity: str):
    assort = (obs.initial_assortment.products, obs.initial_assortment.includes_null)
    stocks = tuple(obs.stocks[a] for a in obs.initial_assortment.products)
    if isinstance(obs, CompletePath):
        return (obs.horizon, assort, stocks, obs.events)
    if isinstance(obs, TransactionRecord):
        times = obs.transactions if granularity == "transactions-timed" else obs.products
        return (obs.horizon, assort, stocks, times)
    return (
        obs.horizon,
        assort,
        stocks,
        tuple(obs.sales.get(a, 0) for a in obs.initial_assortment.products),
    )


class CompiledDataset:
    """Flat-array dataset representation evaluated per optimizer step.

    ``x = (log rate, log weight_a for a in catalog)``; :meth:`loglik_grad`
    returns the total log-likelihood and its gradient in ``x``.
    """

    def __init__(
        self,
        catalog: Tuple[int, ...],
        tables: Sequence[Tuple[TermTable, int]],
        timed: Sequence[Tuple[TimedSegmentTable, int]],
    ) -> None:
        self.catalog = catalog
        self._timed = list(timed)
        a_of = {a: i for i, a in enumerate(catalog)}
        # global assortment registry
        reg: Dict[Tuple[Tuple[int, ...], bool], int] = {}
        mem_rows: List[np.ndarray] = []
        null_rows: List[float] = []

        def register(key: Tuple[Tuple[int, ...], bool]) -> int:
            if key not in reg:
                reg[key] = len(reg)
                row = np.zeros(len(catalog))
                for a in key[0]:
                    row[a_of[a]] = 1.0
                mem_rows.append(row)
                null_rows.append(1.0 if key[1] else 0.0)
            return reg[key]

        width = max((t.seg_idx.shape[1] for t, _ in tables), default=1)
        n_parts, coef_parts, idx_parts, exp_parts = [], [], [], []
        bounds = [0]
        counts, Z_rows, T_g = [], [], []
        total = 0
        for table, count in tables:
            if table.impossible or table.n.size == 0:
                raise InvalidObservation("dataset contains an impossible observation")
            remap = np.array([register(key) for key in table.assortments])
            nt = table.n.size
            n_parts.append(table.n)
            coef_parts.append(table.coef)
            idx = np.zeros((nt, width), dtype=np.int64)
            ex = np.zeros((nt, width))
            idx[:, : table.seg_idx.shape[1]] = remap[table.seg_idx]
            ex[:, : table.seg_exp.shape[1]] = table.seg_exp
            # padded entries may alias assortment 0 after remapping; their
            # exponents are zero so they contribute nothing
            idx_parts.append(idx)
            exp_parts.append(ex)
            total += nt
            bounds.append(total)
            counts.append(count)
            z = np.zeros(len(catalog))
            for j, a in enumerate(table.catalog):
                z[a_of[a]] = table.sales[j]
            Z_rows.append(z)
            T_g.append(table.horizon)
        self.n_assort = len(reg)
        self.membership = (
            np.vstack(mem_rows) if mem_rows else np.zeros((1, len(catalog)))
        )
        self.nulls = np.asarray(null_rows) if null_rows else np.zeros(1)
        self.n = np.concatenate(n_parts) if n_parts else np.zeros(0, dtype=np.int64)
        self.coef = np.concatenate(coef_parts) if coef_parts else np.zeros(0)
        self.seg_idx = (
            np.vstack(idx_parts) if idx_parts else np.zeros((0, width), dtype=np.int64)
        )
        self.seg_exp = np.vstack(exp_parts) if exp_parts else np.zeros((0, width))
        self.bounds = np.asarray(bounds[:-1], dtype=np.int64)
        self.counts = np.asarray(counts, dtype=float)
        self.Z = np.vstack(Z_rows) if Z_rows else np.zeros((0, len(catalog)))
        self.T_g = np.asarray(T_g)
        group_sizes = np.diff(np.append(self.bounds, total))
        self.group_of = np.repeat(np.arange(len(counts)), group_sizes)
        self.logT = np.log(self.T_g)[self.group_of] if total else np.zeros(0)
        self.T_term = self.T_g[self.group_of] if total else np.zeros(0)
        self.visits = int(self.counts.sum()) + sum(c for _, c in self._timed)
        # timed tables: per-table column map into the global catalog
        self._timed_cols = [
            np.array([a_of[a] for a in t.catalog], dtype=np.int64)
            for t, _ in self._timed
        ]

    def params_of(self, x: np.ndarray) -> ModelParams:
        return ModelParams(
            rate=float(math.exp(x[0])),
            weights={a: float(math.exp(x[1 + i])) for i, a in enumerate(self.catalog)},
        )

    def loglik_grad(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        log_rate = x[0]
        theta = np.asarray(x[1:], dtype=float)
        beta = np.exp(theta)
        rate = math.exp(log_rate)
        dim = 1 + len(self.catalog)
        value = 0.0
        grad = np.zeros(dim)
        if self.n.size:
            denom = self.nulls + self.membership @ beta
            # the empty no-null assortment has a zero denominator but only
            # ever appears with exponent zero; keep 0 * log(0) out
            safe = np.where(denom > 0, denom, 1.0)
            log_denom = np.where(denom > 0, np.log(safe), 0.0)
            t = (
                self.coef
                + self.n * (log_rate + self.logT)
                - self.T_term * rate
                - (self.seg_exp * log_denom[self.seg_idx]).sum(axis=1)
            )
            mx = np.maximum.reduceat(t, self.bounds)
            lse = mx + np.log(np.add.reduceat(np.exp(t - mx[self.group_of]), self.bounds))
            value += float(self.counts @ (lse + self.Z @ theta))
            w = np.exp(t - lse[self.group_of]) * self.counts[self.group_of]
            grad[0] += float(w @ self.n) - rate * float(self.counts @ self.T_g)
            bucket = np.bincount(
                self.seg_idx.ravel(),
                weights=(w[:, None] * self.seg_exp).ravel(),
                minlength=self.n_assort,
            )
            share = self.membership * beta[None, :] / safe[:, None]
            grad[1:] += self.counts @ self.Z - bucket @ share
        for (table, count), cols in zip(self._timed, self._timed_cols):
            params = ModelParams(
                rate=rate, weights={a: float(beta[c]) for a, c in zip(table.catalog, cols)}
            )
            v, g = table.loglik_grad(params)
            value += count * v
            grad[0] += count * g[0]
            grad[1 + cols] += count * g[1:]
        return value, grad


def _build_table(
    obs: Observation,
    granularity: str,
    m: int,
    saa_samples: Optional[int],
    seed: int,
    key: int,
    naive: bool,
):
    if naive:
        if not isinstance(obs, SalesSummary):
            raise InvalidObservation("the naive baseline fits sales data")
        return table_naive_sales(obs, m)
    if granularity == "complete":
        return table_complete(obs)
    if granularity == "transactions-timed":
        return table_timed_transactions(obs)
    if granularity == "transactions":
        return table_transactions(obs, m)
    if granularity == "sales":
        if saa_samples is not None:
            return table_sales_saa(obs, m, saa_samples, seed, key)
        return table_sales_attraction(obs, m)
    if granularity == "sales-no-null":
        if saa_samples is not None:
            return table_sales_saa(obs, m, saa_samples, seed, key)
        return table_sales_no_null(obs)
    raise ValueError(f"unknown granularity {granularity!r}")


def compile_dataset(
    observations: Sequence[Observation],
    granularity: str,
    truncation: TruncationPolicy = TruncationPolicy(),
    saa_samples: Optional[int] = None,
    seed: int = 0,
    naive: bool = False,
    catalog: Optional[Sequence[int]] = None,
) -> CompiledDataset:
    """Group identical visits, build their term tables once, concatenate.

    SAA sample streams are keyed by visit content, so duplicate visits
    share one draw (common random numbers) and grouping stays effective.
    """
    if granularity not in GRANULARITIES:
        raise ValueError(f"unknown granularity {granularity!r}")
    if not observations:
        raise InvalidObservation("empty dataset")
    if catalog is None:
        catalog = sorted(
            {a for o in observations for a in o.initial_assortment.products}
        )
    rate_cap = RATE_CAP_FACTOR * naive_rate(observations)
    groups: Dict[object, List[int]] = {}
    for i, obs in enumerate(observations):
        groups.setdefault(_group_key(obs, granularity), []).append(i)
    tables: List[Tuple[TermTable, int]] = []
    timed: List[Tuple[TimedSegmentTable, int]] = []
    for key, members in groups.items():
        obs = observations[members[0]]
        m = truncation.resolve(obs.horizon, rate_cap, _observed_count(obs))
        # ints/floats hash deterministically, so this key is stable per run
        table = _build_table(
            obs, granularity, m, saa_samples, seed, hash(key) & 0x7FFFFFFF, naive
        )
        if isinstance(table, TimedSegmentTable):
            timed.append((table, len(members)))
        else:
            tables.append((table, len(members)))
    return CompiledDataset(tuple(catalog), tables, timed)


def dataset_log_likelihood(
    observations: Sequence[Observation],
    params: ModelParams,
    granularity: str,
    truncation: TruncationPolicy = TruncationPolicy(),
    saa_samples: Optional[int] = None,
    seed: int = 0,
    naive: bool = False,
) -> float:
    if not observations:
        return 0.0
    ds = compile_dataset(
        observations, granularity, truncation, saa_samples, seed, naive
    )
    x = np.concatenate(
        (
            [math.log(params.rate)],
            np.log([params.weights[a] for a in ds.catalog]),
        )
    )
    return ds.loglik_grad(x)[0]


#: relative golden-section bracket around the naive rate
RATE_BRACKET = (0.2, 5.0)
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _max_weights(
    ds: CompiledDataset, log_rate: float, theta0: np.ndarray
) -> Tuple[float, np.ndarray, bool]:
    """Inner problem: best weights at a fixed rate (warm-started L-BFGS)."""

    def negative(theta: np.ndarray):
        v, g = ds.loglik_grad(np.concatenate(([log_rate], theta)))
        return -v, -g[1:]

    def solve(start: np.ndarray):
        return minimize(
            negative,
            start,
            jac=True,
            method="L-BFGS-B",
            bounds=[(-30.0, 30.0)] * len(theta0),
            options={"maxiter": 500, "ftol": 1e-12, "gtol": 1e-9},
        )

    res = solve(theta0)
    # near-degenerate weights (e.g. warm starts carried over from a rate
    # whose optimum sits in a flat corner) leave L-BFGS with a vanishing
    # gradient; restart from neutral weights and keep the better solution
    if np.any(np.abs(res.x) > 20.0) or not res.success:
        alt = solve(np.zeros_like(theta0))
        if alt.fun < res.fun:
            res = alt
    # an abnormal line-search exit at an already-stationary point still
    # counts as converged
    ok = bool(res.success) or float(np.linalg.norm(res.jac, np.inf)) < 1e-4
    return -float(res.fun), res.x, ok


def _initial_theta(
    observations: Sequence[Observation], catalog: Sequence[int]
) -> np.ndarray:
    """Log naive sales shares (floored at 1e-6) as the weight start point."""
    counts = {a: 0.0 for a in catalog}
    for obs in observations:
        if isinstance(obs, SalesSummary):
            for a, z in obs.sales.items():
                counts[a] += z
        elif isinstance(obs, TransactionRecord):
            for a in obs.products:
                counts[a] += 1
        else:
            for c in obs.choices:
                if c is not None:
                    counts[c] += 1
    total = max(sum(counts.values()), 1.0)
    return np.log([max(counts[a] / total, 1e-6) for a in catalog])


def _profile_fit(
    ds: CompiledDataset,
    rate0: float,
    theta0: np.ndarray,
    includes_null: bool,
    tol: float = 1e-8,
) -> FitResult:
    """Golden-section search on ``log rate`` over the profile likelihood.

    Ties within tolerance keep the lower rate, so flat profile directions
    resolve deterministically.
    """
    lo = math.log(RATE_BRACKET[0] * rate0)
    hi = math.log(RATE_BRACKET[1] * rate0)
    theta_warm = np.asarray(theta0, dtype=float)
    inner_ok = True
    evals = 0

    cache: Dict[float, Tuple[float, np.ndarray]] = {}

    def profile(log_rate: float) -> float:
        nonlocal theta_warm, inner_ok, evals
        if log_rate not in cache:
            v, theta, ok = _max_weights(ds, log_rate, theta_warm)
            theta_warm = theta
            inner_ok = inner_ok and ok
            evals += 1
            cache[log_rate] = (v, theta)
        return cache[log_rate][0]

    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = profile(x1), profile(x2)
    iterations = 0
    while iterations < 200:
        iterations += 1
        if f1 >= f2 - tol:  # prefer the lower rate on ties
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = profile(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = profile(x2)
        if hi - lo < 1e-7:
            break
    best_log_rate = x1 if f1 >= f2 else x2
    best_value, best_theta = cache[best_log_rate]
    x = np.concatenate(([best_log_rate], best_theta))
    params = ds.params_of(x)
    return FitResult(
        params=params,
        loglik=best_value,
        converged=inner_ok and hi - lo < 1e-6,
        iterations=iterations,
        probabilities=catalog_probabilities(params, ds.catalog, includes_null),
        message=f"profile search: {evals} rate evaluations",
    )


def fit(
    observations: Sequence[Observation],
    granularity: str,
    truncation: TruncationPolicy = TruncationPolicy(),
    saa_samples: Optional[int] = None,
    seed: int = 0,
    naive: bool = False,
) -> FitResult:
    """Maximum-likelihood fit at the given observation granularity."""
    if granularity == "complete" and not naive:
        return fit_complete(observations)
    ds = compile_dataset(
        observations, granularity, truncation, saa_samples, seed, naive
    )
    includes_null = any(o.initial_assortment.includes_null for o in observations)
    result = _profile_fit(
        ds,
        naive_rate(observations),
        _initial_theta(observations, ds.catalog),
        includes_null,
    )
    result.saa_samples = saa_samples
    result.seed = seed if saa_samples is not None else None
    return result


def fit_complete(observations: Sequence[CompletePath]) -> FitResult:
    """Complete data: the rate MLE is arrivals per unit time, in closed
    form; weights then maximize the choice part alone.
    """
    if not observations:
        raise InvalidObservation("empty dataset")
    rate = sum(o.arrivals for o in observations) / sum(o.horizon for o in observations)
    rate = max(rate, 1e-8)
    ds = compile_dataset(observations, "complete")
    value, theta, ok = _max_weights(
        ds, math.log(rate), _initial_theta(observations, ds.catalog)
    )
    x = np.concatenate(([math.log(rate)], theta))
    params = ds.params_of(x)
    includes_null = any(o.initial_assortment.includes_null for o in observations)
    return FitResult(
        params=params,
        loglik=value,
        converged=ok,
        iterations=1,
        probabilities=catalog_probabilities(params, ds.catalog, includes_null),
        message="closed-form rate, one weight optimization",
    )


def fit_naive(
    observations: Sequence[SalesSummary],
    truncation: TruncationPolicy = TruncationPolicy(),
) -> FitResult:
    """Stock-out-blind baseline: every arrival is assumed to face the full
    initial assortment.  Biased whenever products sell out.
    """
    return fit(observations, "sales", truncation, naive=True)
