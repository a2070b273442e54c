"""Domain types for the inventory-constrained choice process.

A visit is one replenishment interval: customers arrive over ``[0, T]``,
each picks a product from whatever is still in stock (or walks away, the
"null" option), and purchases deplete inventory.  Three observation
granularities of the same visit are modelled here:

* :class:`CompletePath` -- every arrival, with time and choice;
* :class:`TransactionRecord` -- purchases only, timestamps optional;
* :class:`SalesSummary` -- cumulative per-product sales.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Tuple

__all__ = [
    "Choice",
    "NULL",
    "Assortment",
    "ModelParams",
    "CompletePath",
    "TransactionRecord",
    "SalesSummary",
    "SegmentDecomposition",
    "ValidationReport",
    "InvalidObservation",
    "validate_complete_path",
    "hide_product",
    "project_transactions",
    "project_sales",
    "assortment_after",
    "transaction_segments",
    "segment_decomposition",
]

# A product id is a small non-negative int; the null alternative is the
# sentinel None (never a product id, so the no-null regime is a flag flip
# on the assortment, not a catalog edit).
ProductId = int
Choice = Optional[int]
NULL: Choice = None

# Stock level treated as never-exhausting.  Kept finite so stock maps stay
# plain ints; no simulated visit gets anywhere near it.
UNLIMITED_STOCK = 10**9


class InvalidObservation(ValueError):
    """Raised when an observation violates its feasibility invariants."""


@dataclass(frozen=True)
class Assortment:
    """An ordered, duplicate-free set of products, with or without null."""

    products: Tuple[ProductId, ...]
    includes_null: bool = True

    def __post_init__(self) -> None:
        if len(set(self.products)) != len(self.products):
            raise InvalidObservation(f"duplicate products in {self.products}")
        if any(p < 0 for p in self.products):
            raise InvalidObservation("product ids must be non-negative")

    def __contains__(self, choice: Choice) -> bool:
        if choice is NULL:
            return self.includes_null
        return choice in self.products

    def without(self, *removed: ProductId) -> "Assortment":
        gone = set(removed)
        return Assortment(
            tuple(p for p in self.products if p not in gone), self.includes_null
        )


@dataclass(frozen=True)
class ModelParams:
    """Arrival rate and per-product attraction weights."""

    rate: float
    weights: Mapping[ProductId, float]

    def __post_init__(self) -> None:
        if not self.rate > 0:
            raise InvalidObservation(f"arrival rate must be positive, got {self.rate}")
        for a, w in self.weights.items():
            if not w > 0:
                raise InvalidObservation(f"weight for product {a} must be positive")


@dataclass(frozen=True)
class CompletePath:
    """One visit's full outcome: every arrival's time and choice."""

    horizon: float
    initial_assortment: Assortment
    stocks: Mapping[ProductId, int]
    events: Tuple[Tuple[float, Choice], ...]

    @property
    def arrivals(self) -> int:
        return len(self.events)

    @property
    def choices(self) -> Tuple[Choice, ...]:
        return tuple(c for _, c in self.events)


@dataclass(frozen=True)
class TransactionRecord:
    """Purchases only; null choices unobserved.  Timestamps all-or-none."""

    horizon: float
    initial_assortment: Assortment
    stocks: Mapping[ProductId, int]
    transactions: Tuple[Tuple[Optional[float], ProductId], ...]
    timestamps_present: bool

    @property
    def products(self) -> Tuple[ProductId, ...]:
        return tuple(p for _, p in self.transactions)

    @property
    def total(self) -> int:
        return len(self.transactions)


@dataclass(frozen=True)
class SalesSummary:
    """Per-product cumulative sales; order and null choices latent."""

    horizon: float
    initial_assortment: Assortment
    stocks: Mapping[ProductId, int]
    sales: Mapping[ProductId, int]

    @property
    def total_sales(self) -> int:
        return sum(self.sales.values())

    @property
    def stocked_out(self) -> Tuple[ProductId, ...]:
        return tuple(
            a
            for a in self.initial_assortment.products
            if self.sales.get(a, 0) == self.stocks[a]
        )

    @property
    def stockout_count(self) -> int:
        return len(self.stocked_out)

    def validate(self) -> None:
        for a in self.initial_assortment.products:
            n_a = self.sales.get(a, 0)
            if not 0 <= n_a <= self.stocks[a]:
                raise InvalidObservation(
                    f"sales {n_a} of product {a} outside [0, {self.stocks[a]}]"
                )
        for a in self.sales:
            if a not in self.initial_assortment.products:
                raise InvalidObservation(f"sales recorded for unoffered product {a}")


@dataclass(frozen=True)
class SegmentDecomposition:
    """Stock-out order and arrival counts per constant-assortment segment.

    ``segment_sizes`` has ``k + 1`` entries; each excludes the arrival that
    triggers the segment's closing stock-out.  Total arrivals are
    ``sum(segment_sizes) + k``.
    """

    stockout_order: Tuple[ProductId, ...]
    segment_sizes: Tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.segment_sizes) != len(self.stockout_order) + 1:
            raise InvalidObservation("need k+1 segment sizes for k stock-outs")
        if any(s < 0 for s in self.segment_sizes):
            raise InvalidObservation("segment sizes must be non-negative")

    @property
    def total_arrivals(self) -> int:
        return sum(self.segment_sizes) + len(self.stockout_order)


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, index: int, message: str) -> None:
        self.violations.append((index, message))


def validate_complete_path(
    path: CompletePath,
    assortment: Optional[Assortment] = None,
    stocks: Optional[Mapping[ProductId, int]] = None,
) -> ValidationReport:
    """Report every invariant violated by ``path``: inventory overruns,
    choices of unavailable products, and time ordering.

    Sequence order, not timestamps, drives feasibility; equal timestamps
    (possible after rounding) are allowed.
    """
    assortment = assortment if assortment is not None else path.initial_assortment
    stocks = stocks if stocks is not None else path.stocks
    report = ValidationReport()
    remaining = {a: stocks[a] for a in assortment.products}
    prev_time = 0.0
    for i, (t, c) in enumerate(path.events, start=1):
        if t < 0 or t > path.horizon:
            report.add(i, f"time {t} outside [0, {path.horizon}]")
        if t < prev_time:
            report.add(i, f"time {t} decreases from {prev_time}")
        prev_time = max(prev_time, t)
        if c is NULL:
            if not assortment.includes_null:
                report.add(i, "null choice in a no-null visit")
            continue
        if c not in remaining:
            report.add(i, f"choice of product {c} not in the initial assortment")
        elif remaining[c] <= 0:
            report.add(i, f"choice of product {c} after it stocked out")
        else:
            remaining[c] -= 1
    return report


def project_transactions(path: CompletePath, keep_times: bool) -> TransactionRecord:
    """Drop null choices, keeping purchases in order (times iff requested)."""
    report = validate_complete_path(path)
    if not report.ok:
        raise InvalidObservation(f"invalid path: {report.violations}")
    txns = tuple(
        (t if keep_times else None, c) for t, c in path.events if c is not NULL
    )
    return TransactionRecord(
        horizon=path.horizon,
        initial_assortment=path.initial_assortment,
        stocks=path.stocks,
        transactions=txns,
        timestamps_present=keep_times,
    )


def project_sales(path: CompletePath) -> SalesSummary:
    """Collapse a path to per-product cumulative sales."""
    report = validate_complete_path(path)
    if not report.ok:
        raise InvalidObservation(f"invalid path: {report.violations}")
    sales = {a: 0 for a in path.initial_assortment.products}
    for _, c in path.events:
        if c is not NULL:
            sales[c] += 1
    return SalesSummary(
        horizon=path.horizon,
        initial_assortment=path.initial_assortment,
        stocks=path.stocks,
        sales=sales,
    )


def hide_product(summary: SalesSummary, product: ProductId) -> SalesSummary:
    """Drop one product from a sales summary, treating its purchases as
    unobserved null choices.

    Only sensible for a product that can never stock out (its presence
    then never perturbs anyone else's assortment); an always-available
    outside option folded into the null alternative this way rescales the
    remaining attraction weights by its own.
    """
    if product not in summary.initial_assortment.products:
        raise InvalidObservation(f"product {product} not in the assortment")
    if summary.sales.get(product, 0) >= summary.stocks[product]:
        raise InvalidObservation(
            f"cannot hide product {product}: it can stock out"
        )
    return SalesSummary(
        horizon=summary.horizon,
        initial_assortment=Assortment(
            summary.initial_assortment.without(product).products, True
        ),
        stocks={a: s for a, s in summary.stocks.items() if a != product},
        sales={a: s for a, s in summary.sales.items() if a != product},
    )


def assortment_after(
    initial: Assortment,
    stocks: Mapping[ProductId, int],
    prefix: Sequence[Choice],
) -> Assortment:
    """Products still in stock after the given choice prefix."""
    remaining = {a: stocks[a] for a in initial.products}
    for i, c in enumerate(prefix, start=1):
        if c is NULL:
            continue
        if c not in remaining or remaining[c] <= 0:
            raise InvalidObservation(f"infeasible prefix at index {i}: product {c}")
        remaining[c] -= 1
    return Assortment(
        tuple(a for a in initial.products if remaining[a] > 0),
        initial.includes_null,
    )


def transaction_segments(
    initial: Assortment,
    stocks: Mapping[ProductId, int],
    products: Sequence[ProductId],
) -> Tuple[Tuple[ProductId, ...], Tuple[int, ...], Tuple[Assortment, ...], Tuple[int, ...]]:
    """Replay a purchase sequence and split it at stock-outs.

    Returns ``(stockout_order, per-segment purchase counts excluding the
    stock-out purchase, per-segment assortments, 1-based purchase indices
    of the stock-outs)``.
    """
    remaining = {a: stocks[a] for a in initial.products}
    current = initial
    stockout_order: list = []
    seg_counts: list = []
    assortments: list = [current]
    stockout_indices: list = []
    count = 0
    for i, p in enumerate(products, start=1):
        if p not in remaining or remaining[p] <= 0:
            raise InvalidObservation(f"infeasible purchase of {p} at index {i}")
        remaining[p] -= 1
        if remaining[p] == 0:
            stockout_order.append(p)
            seg_counts.append(count)
            stockout_indices.append(i)
            count = 0
            current = current.without(p)
            assortments.append(current)
        else:
            count += 1
    seg_counts.append(count)
    return (
        tuple(stockout_order),
        tuple(seg_counts),
        tuple(assortments),
        tuple(stockout_indices),
    )


def segment_decomposition(path: CompletePath) -> SegmentDecomposition:
    """Segment a complete path at its stock-out arrivals."""
    report = validate_complete_path(path)
    if not report.ok:
        raise InvalidObservation(f"invalid path: {report.violations}")
    remaining = {a: path.stocks[a] for a in path.initial_assortment.products}
    order: list = []
    sizes: list = []
    count = 0
    for _, c in path.events:
        if c is not NULL:
            remaining[c] -= 1
        if c is not NULL and remaining[c] == 0:
            order.append(c)
            sizes.append(count)
            count = 0
        else:
            count += 1
    sizes.append(count)
    return SegmentDecomposition(tuple(order), tuple(sizes))
