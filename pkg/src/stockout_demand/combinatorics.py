"""Stock-out index vectors: feasibility, counting, enumeration, sampling.

Within a visit of ``n`` arrivals where products with stocks
``s_1, ..., s_k`` sell out, the latent arrival indices at which each one
hits zero form a "stock-out vector".  These vectors index the inner sums
of the sales likelihoods; this module provides the closed-form count, a
brute-force enumerator used as an oracle, uniform sampling without
replacement via a linear congruential generator with rejection, and the
bijection onto segment decompositions.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from itertools import product as iter_product
from typing import Iterator, List, Sequence, Tuple

from .types import ProductId, SegmentDecomposition

__all__ = [
    "StockoutVector",
    "is_feasible",
    "count_stockout_vectors",
    "enumerate_stockout_vectors",
    "sample_stockout_vectors",
    "raw_stockout_draws",
    "to_segments",
    "from_segments",
    "log_multinomial",
    "multinomial_exact",
    "log_binomial",
]

ENUMERATION_GUARD = 10**7


@dataclass(frozen=True)
class StockoutVector:
    """Arrival indices (1-based) at which each listed product sells out."""

    products: Tuple[ProductId, ...]
    stocks: Tuple[int, ...]
    indices: Tuple[int, ...]
    n: int

    def __post_init__(self) -> None:
        if not (len(self.products) == len(self.stocks) == len(self.indices)):
            raise ValueError("products, stocks and indices must align")

    def sorted_order(self) -> Tuple[Tuple[ProductId, int, int], ...]:
        """(product, stock, index) triples in stock-out order."""
        return tuple(
            sorted(zip(self.products, self.stocks, self.indices), key=lambda t: t[2])
        )


def is_feasible(v: StockoutVector) -> bool:
    """Whether some feasible choice sequence realizes these stock-out indices.

    Rules: indices in ``[1, n]``, pairwise distinct, and each index leaves
    room for all units sold out at or before it:
    ``r_j >= s_j + sum_{i: r_i < r_j} s_i``.
    """
    r = v.indices
    if len(set(r)) != len(r):
        return False
    if any(not 1 <= x <= v.n for x in r):
        return False
    cum = 0
    for _, s, idx in v.sorted_order():
        cum += s
        if idx < cum:
            return False
    return True


def count_stockout_vectors(stocks: Sequence[int], n: int) -> int:
    """Closed-form count of distinct feasible stock-out vectors.

    ``f = (n+1)!/(n+1-h)! - n!/(n+1-h)! * sum(stocks)`` for ``h`` products,
    or 0 when fewer arrivals than total units (no feasible sequence).
    Exact big-integer arithmetic throughout.
    """
    h = len(stocks)
    if h == 0:
        return 1
    if n < sum(stocks) or n + 1 - h < 1:
        return 0
    falling = math.factorial(n) // math.factorial(n + 1 - h)
    return (n + 1) * falling - falling * sum(stocks)


def enumerate_stockout_vectors(
    stocks: Sequence[int], n: int, products: Sequence[ProductId] | None = None
) -> Iterator[StockoutVector]:
    """Yield every feasible vector exactly once (brute force over ``n^k``)."""
    k = len(stocks)
    if products is None:
        products = tuple(range(k))
    if k == 0:
        yield StockoutVector((), (), (), n)
        return
    if n**k > ENUMERATION_GUARD:
        raise ValueError(f"refusing to enumerate {n}^{k} > {ENUMERATION_GUARD} candidates")
    stocks = tuple(stocks)
    products = tuple(products)
    for indices in iter_product(range(1, n + 1), repeat=k):
        v = StockoutVector(products, stocks, indices, n)
        if is_feasible(v):
            yield v


def _lcg_params(modulus: int, rng: random.Random) -> Tuple[int, int, int]:
    """Full-period mixed LCG parameters for a power-of-two modulus."""
    a = (rng.randrange(modulus // 8) * 8 + 5) % modulus or 5
    c = rng.randrange(modulus) | 1
    state = rng.randrange(modulus)
    return a, c, state

# Minimum LCG modulus.  The paper's procedure walks the smallest power of
# two >= n^k, but for tiny ranges that leaves too few distinct generators
# per seed for the sampled subsets to look uniform across seeds; a larger
# modulus with cycle-walking keeps the draw exact and well mixed.
_MIN_MODULUS_BITS = 16


def _decompose(x: int, n: int, k: int) -> Tuple[int, ...]:
    """Base-``n`` remainders of ``x``, each shifted to 1-based indices."""
    digits: List[int] = []
    for _ in range(k):
        x, rem = divmod(x, n)
        digits.append(rem + 1)
    return tuple(digits)


def raw_stockout_draws(
    stocks: Sequence[int],
    n: int,
    seed: int,
    products: Sequence[ProductId] | None = None,
) -> Iterator[Tuple[StockoutVector, bool]]:
    """Endless stream of raw candidate vectors with their feasibility flag.

    Each full LCG period visits every integer in ``[0, n^k)`` exactly once
    (out-of-range states are skipped); successive periods re-key the
    generator from the seed.
    """
    k = len(stocks)
    stocks = tuple(stocks)
    if products is None:
        products = tuple(range(k))
    products = tuple(products)
    total = n**k
    bits = max(total.bit_length(), _MIN_MODULUS_BITS)
    modulus = 1 << bits
    cycle = 0
    while True:
        a, c, state = _lcg_params(modulus, random.Random(f"{seed}:{cycle}"))
        for _ in range(modulus):
            state = (a * state + c) % modulus
            if state >= total:
                continue
            v = StockoutVector(products, stocks, _decompose(state, n, k), n)
            yield v, is_feasible(v)
        cycle += 1


def sample_stockout_vectors(
    stocks: Sequence[int],
    n: int,
    sample_size: int,
    seed: int,
    products: Sequence[ProductId] | None = None,
) -> List[StockoutVector]:
    """Uniform sample of feasible vectors, without replacement.

    One full-period LCG pass visits each candidate integer once; base-``n``
    decomposition turns it into indices and infeasible candidates are
    rejected, so the kept vectors are a uniform without-replacement draw.
    """
    count = count_stockout_vectors(stocks, n)
    if sample_size > count:
        raise ValueError(f"sample_size {sample_size} exceeds feasible count {count}")
    out: List[StockoutVector] = []
    if sample_size == 0:
        return out
    for v, ok in raw_stockout_draws(stocks, n, seed, products):
        if ok:
            out.append(v)
            if len(out) == sample_size:
                return out
    raise AssertionError("unreachable: stream is endless")


def to_segments(v: StockoutVector) -> SegmentDecomposition:
    """Map a feasible vector to its segment decomposition.

    With stock-out order ``r[1] < ... < r[k]`` the segment sizes are
    ``r[1]-1, r[j]-r[j-1]-1, ..., n-r[k]``.
    """
    if not is_feasible(v):
        raise ValueError(f"infeasible stock-out vector {v.indices}")
    order = v.sorted_order()
    sizes: List[int] = []
    prev = 0
    for _, _, idx in order:
        sizes.append(idx - prev - 1)
        prev = idx
    sizes.append(v.n - prev)
    return SegmentDecomposition(tuple(p for p, _, _ in order), tuple(sizes))


def from_segments(
    seg: SegmentDecomposition, stocks: Sequence[int], products: Sequence[ProductId]
) -> StockoutVector:
    """Inverse of :func:`to_segments`; ``stocks`` aligned with ``products``."""
    by_product = dict(zip(products, stocks))
    indices = {}
    pos = 0
    for j, a in enumerate(seg.stockout_order):
        pos += seg.segment_sizes[j] + 1
        indices[a] = pos
    n = seg.total_arrivals
    return StockoutVector(
        tuple(products),
        tuple(by_product[a] for a in products),
        tuple(indices[a] for a in products),
        n,
    )


def log_multinomial(counts: Sequence[int]) -> float:
    """``log[(sum counts)! / prod(counts!)]`` via log-gamma."""
    total = sum(counts)
    return math.lgamma(total + 1) - sum(math.lgamma(c + 1) for c in counts)


def multinomial_exact(counts: Sequence[int]) -> int:
    """Exact big-integer multinomial coefficient (test oracle)."""
    total = sum(counts)
    out = math.factorial(total)
    for c in counts:
        out //= math.factorial(c)
    return out


def log_binomial(n: int, k: int) -> float:
    """``log C(n, k)``; minus infinity outside the triangle."""
    if k < 0 or k > n:
        return float("-inf")
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
