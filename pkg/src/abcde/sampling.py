"""Deterministic weighted sampling built on per-element exponential clocks.

Each element of a weighted population gets an initial draw time that is
exponentially distributed with rate equal to its weight. The n elements
with the smallest clocks form a without-replacement sample; keeping the
maximum selected clock M and extending each selected element's draws to
a Poisson count over its remaining time (or, equivalently, replaying
successive exponential inter-draw gaps up to M) yields a
with-replacement sample of n unique elements with draw counts.

All randomness is counter-based: every variate comes from hashing
(seed, scope, element key, counter), so results are reproducible and
independent of input order and sharding.
"""

from __future__ import annotations

import hashlib
import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from .errors import EmptySample, InvalidWeight, NoDiff
from .impact import ImpactTriple, _impact_of_record, impact_of_set, partition_affected
from .model import Dataset, Scalar

# Poisson sampling switches from CDF inversion to transformed rejection
# (Hormann's PTRS) at this mean; inversion degrades and the rejection
# method's acceptance region is valid from about 10 upward.
POISSON_INVERSION_MAX_MEAN = 10.0


class KeyedRng:
    """Uniform / exponential / Poisson variates from a keyed counter stream.

    Two instances constructed with the same (seed, scope, element key)
    produce identical streams no matter where or when they are created.
    """

    __slots__ = ("_key", "_counter")

    def __init__(self, seed: int, scope: str, element_key: str = "") -> None:
        payload = f"{seed}\x1f{scope}\x1f{element_key}".encode()
        self._key = hashlib.blake2b(payload, digest_size=32).digest()
        self._counter = 0

    def uniform(self) -> float:
        """Uniform variate in the open interval (0, 1)."""
        digest = hashlib.blake2b(
            self._counter.to_bytes(8, "little"), digest_size=8, key=self._key
        ).digest()
        self._counter += 1
        return (int.from_bytes(digest, "little") + 0.5) * 2.0**-64

    def exponential(self, rate: float) -> float:
        if rate <= 0 or not math.isfinite(rate):
            raise InvalidWeight(f"exponential rate must be finite and > 0, got {rate!r}")
        return -math.log(self.uniform()) / rate

    def poisson(self, mean: float) -> int:
        if mean < 0 or not math.isfinite(mean):
            raise InvalidWeight(f"poisson mean must be finite and >= 0, got {mean!r}")
        if mean == 0.0:
            return 0
        if mean < POISSON_INVERSION_MAX_MEAN:
            return self._poisson_inversion(mean)
        return self._poisson_ptrs(mean)

    def _poisson_inversion(self, mean: float) -> int:
        # Sequential search on the CDF; one uniform per draw.
        u = self.uniform()
        p = math.exp(-mean)
        cumulative = p
        k = 0
        while u > cumulative:
            k += 1
            p *= mean / k
            cumulative += p
        return k

    def _poisson_ptrs(self, mean: float) -> int:
        # Transformed rejection with squeeze (Hormann 1993).
        log_mean = math.log(mean)
        b = 0.931 + 2.53 * math.sqrt(mean)
        a = -0.059 + 0.02483 * b
        inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
        v_r = 0.9277 - 3.6224 / (b - 2.0)
        while True:
            u = self.uniform() - 0.5
            v = self.uniform()
            us = 0.5 - abs(u)
            k = math.floor((2.0 * a / us + b) * u + mean + 0.43)
            if us >= 0.07 and v <= v_r:
                return int(k)
            if k < 0 or (us < 0.013 and v > us):
                continue
            if (
                math.log(v) + math.log(inv_alpha) - math.log(a / (us * us) + b)
                <= k * log_mean - mean - math.lgamma(k + 1.0)
            ):
                return int(k)


@dataclass(frozen=True)
class ClockedElement:
    """An element with its weight and initial draw time."""

    key: str
    weight: float
    dt0: float


@dataclass(frozen=True)
class DrawResult:
    """A unique sampled element with its with-replacement draw count."""

    key: str
    draw_count: int


def assign_clocks(
    elements: Iterable[tuple[str, float]],
    seed: int,
    scope: str = "clock",
) -> list[ClockedElement]:
    """Attach an initial draw time Exp(weight) to every element.

    The clock of an element depends only on (seed, scope, key), never on
    the order or grouping in which elements are presented.
    """
    clocked = []
    for key, weight in elements:
        if weight <= 0 or not math.isfinite(weight):
            raise InvalidWeight(f"element {key!r}: weight must be finite and > 0")
        rng = KeyedRng(seed, scope, key)
        clocked.append(ClockedElement(key=key, weight=weight, dt0=rng.exponential(weight)))
    return clocked


def _clock_order(element: ClockedElement) -> tuple[float, str]:
    # Equal clocks are a probability-zero event; break ties by key so that
    # selection is still a total, deterministic order.
    return (element.dt0, element.key)


def select_sample_set(
    clocked: Iterable[ClockedElement], n_unique: int
) -> tuple[list[ClockedElement], float]:
    """The n elements with the smallest clocks, and the largest selected
    clock M (the conceptual end of the sampling period)."""
    smallest = heapq.nsmallest(max(n_unique, 0), clocked, key=_clock_order)
    if not smallest:
        return [], 0.0
    return smallest, max(e.dt0 for e in smallest)


def sample_without_replacement(clocked: Iterable[ClockedElement], n: int) -> list[str]:
    """Keys of the n smallest-clock elements (all of them if fewer)."""
    return [e.key for e in heapq.nsmallest(max(n, 0), clocked, key=_clock_order)]


def sample_with_replacement(
    clocked: Iterable[ClockedElement],
    n_unique: int,
    seed: int,
    scope: str = "draws",
) -> list[DrawResult]:
    """With-replacement sample of n unique elements with draw counts.

    The selected set S is the n smallest clocks; each element is then
    drawn 1 + Poisson(weight * (M - dt0)) times, where M is the largest
    clock in S. The element attaining M has exactly one draw.
    """
    if n_unique < 1:
        raise EmptySample("n_unique must be >= 1")
    selected, horizon = select_sample_set(clocked, n_unique)
    results = []
    for element in selected:
        rng = KeyedRng(seed, f"{scope}/pois", element.key)
        extra = rng.poisson(element.weight * (horizon - element.dt0))
        results.append(DrawResult(key=element.key, draw_count=1 + extra))
    return results


def iter_draw_events(
    selected: Sequence[ClockedElement],
    horizon: float,
    seed: int,
    scope: str = "draws",
) -> Iterator[tuple[float, str]]:
    """Successive draw events (time, key) in time order up to `horizon`.

    Each element's first draw happens at its clock; after every draw its
    next draw time moves forward by a fresh Exp(weight) gap. Pass
    ``math.inf`` as the horizon for an endless merged draw stream.
    """
    heap: list[tuple[float, str]] = []
    rngs: dict[str, KeyedRng] = {}
    weights: dict[str, float] = {}
    for element in selected:
        rngs[element.key] = KeyedRng(seed, f"{scope}/gap", element.key)
        weights[element.key] = element.weight
        if element.dt0 <= horizon:
            heap.append((element.dt0, element.key))
    heapq.heapify(heap)
    while heap:
        time, key = heapq.heappop(heap)
        yield time, key
        nxt = time + rngs[key].exponential(weights[key])
        if nxt <= horizon:
            heapq.heappush(heap, (nxt, key))


def incremental_draws(
    selected: Sequence[ClockedElement],
    horizon: float,
    stop: Callable[[list[tuple[str, float]]], bool] | None,
    seed: int,
    scope: str = "draws",
) -> list[DrawResult]:
    """Draw elements one by one until `stop` is satisfied or the horizon
    is exhausted.

    `stop` sees the accumulated (key, time) draws after each event; pass
    None to consume the whole horizon, which reproduces the draw-count
    distribution of :func:`sample_with_replacement`.
    """
    draws: list[tuple[str, float]] = []
    counts: dict[str, int] = {}
    order: list[str] = []
    for time, key in iter_draw_events(selected, horizon, seed, scope):
        draws.append((key, time))
        if key not in counts:
            counts[key] = 0
            order.append(key)
        counts[key] += 1
        if stop is not None and stop(draws):
            break
    return [DrawResult(key=k, draw_count=counts[k]) for k in order]


@dataclass(frozen=True)
class SampledItem:
    """A unique item drawn for impact exploration."""

    item_id: str
    draw_count: int
    importance_weight: float
    impact: ImpactTriple
    weight: float
    attributes: Mapping[str, Scalar] = field(default_factory=dict)


@dataclass(frozen=True)
class ItemSample:
    """An importance sample of affected items plus its provenance.

    The importance weights satisfy sum(w(i) * jd(i)) == overall Jaccard
    distance identically, so slice sums estimate slice contributions to
    the overall metrics. When the requested number of uniques covers the
    whole affected population the sample is exhaustive: weights are then
    the exact expected draw fractions and every slice sum is an exact
    quadrature rather than an estimate.
    """

    items: tuple[SampledItem, ...]
    seed: int
    requested_unique: int
    exhaustive: bool
    overall: ImpactTriple

    def __iter__(self):
        return iter(self.items)

    def __len__(self) -> int:
        return len(self.items)


def importance_sample_items(dataset: Dataset, n_unique: int, seed: int) -> ItemSample:
    """Sample affected items with replacement, biased by weight * impact.

    Each item's selection probability is proportional to its weight times
    its Jaccard distance, which keeps high-impact light items visible.
    Every sampled item carries the importance weight
    draw_fraction * jd_overall / jd(item); unaffected items are never
    sampled. Raises NoDiff when the clusterings are identical.
    """
    if n_unique < 1:
        raise EmptySample("n_unique must be >= 1")
    affected, _ = partition_affected(dataset)
    if not affected:
        raise NoDiff("clusterings are identical; no affected items to sample")
    overall = impact_of_set(dataset, dataset.item_ids)

    triples = {i: _impact_of_record(dataset, dataset.item(i)) for i in sorted(affected)}
    jd_overall = overall.jaccard_distance

    def build(item_id: str, dc: int, w: float) -> SampledItem:
        rec = dataset.item(item_id)
        return SampledItem(
            item_id=item_id,
            draw_count=dc,
            importance_weight=w,
            impact=triples[item_id],
            weight=rec.weight,
            attributes=rec.attributes,
        )

    if n_unique >= len(affected):
        # Exhaustive: no randomness needed. Use the exact selection
        # probabilities in place of realized draw fractions so downstream
        # slice sums reproduce exact metrics.
        mass = math.fsum(
            dataset.item(i).weight * triples[i].jaccard_distance for i in sorted(affected)
        )
        items = tuple(
            build(
                i,
                1,
                (dataset.item(i).weight * triples[i].jaccard_distance / mass)
                * jd_overall
                / triples[i].jaccard_distance,
            )
            for i in sorted(affected)
        )
        return ItemSample(
            items=items,
            seed=seed,
            requested_unique=n_unique,
            exhaustive=True,
            overall=overall,
        )

    elements = [
        (i, dataset.item(i).weight * triples[i].jaccard_distance) for i in sorted(affected)
    ]
    clocked = assign_clocks(elements, seed, scope="items/clock")
    results = sample_with_replacement(clocked, n_unique, seed, scope="items/draws")
    total_draws = sum(r.draw_count for r in results)
    items = tuple(
        build(
            r.key,
            r.draw_count,
            (r.draw_count / total_draws) * jd_overall / triples[r.key].jaccard_distance,
        )
        for r in sorted(results, key=lambda r: r.key)
    )
    return ItemSample(
        items=items,
        seed=seed,
        requested_unique=n_unique,
        exhaustive=False,
        overall=overall,
    )
