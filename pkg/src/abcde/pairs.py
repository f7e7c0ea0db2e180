"""The weighted pair population of a clustering change, and pair sampling.

From each vantage item i, every member j of i's baseline or experiment
cluster forms a pair. Split pairs (j left i's cluster) carry label -1,
merge pairs (j newly joined) carry +1, stable pairs (j stayed) carry the
sign of the cluster weight change. Each pair's weight u makes the
population totals per category equal the overall split and merge rates,
and makes the label-weighted judged sum equal the precision delta.

Sampling pairs proportionally to u never materializes the quadratic pair
population. A pair draw is factored by the chain rule into two stages:
draw the vantage item proportionally to its total pair weight (one
exponential-clock draw stream over items), then draw the partner within
the chosen category proportionally to its item weight. The resulting
merged draw stream, stopped when enough unique pairs have appeared,
realizes exactly the clock construction over the pair population: each
pair's first appearance time is its initial draw time.

Internally the clock process runs on unnormalized pair weights (the
1/weight(T) factor is applied once, in exposed u values and totals), so
rates stay well-scaled for very large populations.
"""

from __future__ import annotations

import bisect
import hashlib
import itertools
import math
from dataclasses import dataclass, replace
from typing import Iterator

from .errors import EmptySample, FormatError, NoDiff, NotInPopulation
from .model import Dataset, ItemRecord
from .sampling import ClockedElement, KeyedRng, assign_clocks, incremental_draws, iter_draw_events

CATEGORIES = ("split", "merge", "stable")


@dataclass(frozen=True)
class PairKey:
    vantage_id: str
    other_id: str
    category: str
    is_self: bool


@dataclass(frozen=True)
class WeightedPair:
    """An ordered pair with its sampling weight, label and draw count."""

    key: PairKey
    u: float
    label: int
    draw_count: int = 1
    dt0: float | None = None


@dataclass(frozen=True)
class CategoryTotals:
    """Total pair weight per category.

    The split and merge totals coincide with the overall split and merge
    rates; the sum of all three is the multiplier that turns a judged
    pair average into a precision delta estimate.
    """

    split_total: float
    merge_total: float
    stable_total: float

    @property
    def all_total(self) -> float:
        return math.fsum((self.split_total, self.merge_total, self.stable_total))


@dataclass(frozen=True)
class JudgementTask:
    """One blinded question for a human rater: are these two equivalent?

    Deliberately carries no category, label or weight. The id is a
    content hash of the unordered item pair, stable across reruns.
    """

    task_id: str
    item_a: str
    item_b: str


def task_id_for(item_a: str, item_b: str) -> str:
    first, second = sorted((item_a, item_b))
    return hashlib.sha256(f"{first}\x1f{second}".encode()).hexdigest()[:16]


def _row_weights(dataset: Dataset, rec: ItemRecord) -> tuple[float, float, float]:
    """Unnormalized per-vantage pair-weight row sums (split, merge, stable)."""
    wb = dataset.base_cluster_weight[rec.base_cluster_id]
    we = dataset.exp_cluster_weight[rec.exp_cluster_id]
    wo, _ = dataset.overlap(rec.base_cluster_id, rec.exp_cluster_id)
    split_row = rec.weight * (wb - wo) / wb
    merge_row = rec.weight * (we - wo) / we
    stable_row = rec.weight * abs(wb - we) / (wb * we) * wo
    return split_row, merge_row, stable_row


def pair_weight(dataset: Dataset, vantage_id: str, other_id: str) -> WeightedPair:
    """Weight and label of one ordered pair."""
    i = dataset.item(vantage_id)
    j = dataset.item(other_id)
    in_base = j.base_cluster_id == i.base_cluster_id
    in_exp = j.exp_cluster_id == i.exp_cluster_id
    if not (in_base or in_exp):
        raise NotInPopulation(f"({vantage_id!r}, {other_id!r}) is not a pair of this change")
    wb = dataset.base_cluster_weight[i.base_cluster_id]
    we = dataset.exp_cluster_weight[i.exp_cluster_id]
    share = i.weight / dataset.total_weight
    if in_base and in_exp:
        u = share * abs(wb - we) / (wb * we) * j.weight
        label = 1 if wb >= we else -1
        category = "stable"
    elif in_base:
        u = share * j.weight / wb
        label = -1
        category = "split"
    else:
        u = share * j.weight / we
        label = 1
        category = "merge"
    return WeightedPair(
        key=PairKey(
            vantage_id=vantage_id,
            other_id=other_id,
            category=category,
            is_self=vantage_id == other_id,
        ),
        u=u,
        label=label,
    )


def category_totals(dataset: Dataset) -> CategoryTotals:
    """Total pair weight per category, in one pass over items.

    Uses per-vantage row sums, so the quadratic pair population is never
    enumerated.
    """
    splits, merges, stables = [], [], []
    for rec in dataset:
        s, m, st = _row_weights(dataset, rec)
        splits.append(s)
        merges.append(m)
        stables.append(st)
    total = dataset.total_weight
    return CategoryTotals(
        split_total=math.fsum(splits) / total,
        merge_total=math.fsum(merges) / total,
        stable_total=math.fsum(stables) / total,
    )


def positive_pair_count(dataset: Dataset) -> int:
    """Number of pairs with positive weight, without enumerating them."""
    count = 0
    for rec in dataset:
        wb = dataset.base_cluster_weight[rec.base_cluster_id]
        we = dataset.exp_cluster_weight[rec.exp_cluster_id]
        _, n_overlap = dataset.overlap(rec.base_cluster_id, rec.exp_cluster_id)
        count += len(dataset.base_index[rec.base_cluster_id]) - n_overlap
        count += len(dataset.exp_index[rec.exp_cluster_id]) - n_overlap
        if wb != we:
            count += n_overlap
    return count


def enumerate_pairs(dataset: Dataset) -> Iterator[WeightedPair]:
    """Every ordered pair of the population. Quadratic in cluster sizes;
    meant for desk-scale datasets and exact evaluation."""
    for rec in dataset:
        partners = set(dataset.base_index[rec.base_cluster_id])
        partners.update(dataset.exp_index[rec.exp_cluster_id])
        for other in sorted(partners):
            yield pair_weight(dataset, rec.item_id, other)


def _pair_element_key(key: PairKey) -> str:
    return f"{key.vantage_id}\x1f{key.other_id}\x1f{key.category}"


@dataclass(frozen=True)
class PairSample:
    """A with-replacement pair sample plus everything needed to replay it.

    `horizon` is the end of the sampling period on the internal clock
    scale; together with each pair's dt0 and weight it allows draws to be
    re-walked one by one later (e.g. to fill a judgement budget exactly).
    """

    pairs: tuple[WeightedPair, ...]
    seed: int
    requested_unique: int
    horizon: float
    totals: CategoryTotals
    total_weight: float
    truncated: bool

    def __iter__(self) -> Iterator[WeightedPair]:
        return iter(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class ExportResult:
    tasks: tuple[JudgementTask, ...]
    sample: PairSample
    budget_filled: bool


class _PartnerPicker:
    """Stage-two draw: a partner within one category of one vantage item,
    chosen proportionally to item weight. Cumulative weight tables are
    cached per (base cluster, exp cluster) combination."""

    def __init__(self, dataset: Dataset) -> None:
        self._dataset = dataset
        self._cache: dict[tuple[str, str, str], tuple[list[str], list[float]]] = {}

    def _table(self, rec: ItemRecord, category: str) -> tuple[list[str], list[float]]:
        cache_key = (rec.base_cluster_id, rec.exp_cluster_id, category)
        cached = self._cache.get(cache_key)
        if cached is not None:
            return cached
        dataset = self._dataset
        if category == "split":
            members = [
                m
                for m in dataset.base_index[rec.base_cluster_id]
                if dataset.item(m).exp_cluster_id != rec.exp_cluster_id
            ]
        elif category == "merge":
            members = [
                m
                for m in dataset.exp_index[rec.exp_cluster_id]
                if dataset.item(m).base_cluster_id != rec.base_cluster_id
            ]
        else:
            members = [
                m
                for m in dataset.base_index[rec.base_cluster_id]
                if dataset.item(m).exp_cluster_id == rec.exp_cluster_id
            ]
        cumulative = list(itertools.accumulate(dataset.item(m).weight for m in members))
        entry = (members, cumulative)
        self._cache[cache_key] = entry
        return entry

    def pick(self, rec: ItemRecord, category: str, u: float) -> str:
        members, cumulative = self._table(rec, category)
        index = bisect.bisect_right(cumulative, u * cumulative[-1])
        return members[min(index, len(members) - 1)]


def iter_pair_draws(dataset: Dataset, seed: int) -> Iterator[tuple[float, PairKey]]:
    """Endless merged draw stream over the pair population, in time order.

    Each event picks its vantage item from the item-level clock stream
    (rate: the item's pair-weight row sum) and then its partner within a
    category, which by the chain rule makes every event an independent
    pick of a pair proportional to its weight. A pair's first event time
    is therefore its initial draw time in the pair-level clock process.
    """
    rows: dict[str, tuple[float, float, float]] = {}
    elements = []
    for rec in dataset:
        row = _row_weights(dataset, rec)
        row_total = math.fsum(row)
        if row_total > 0.0:
            rows[rec.item_id] = row
            elements.append((rec.item_id, row_total))
    if not elements:
        raise NoDiff("clusterings are identical; the pair population is empty")

    picker = _PartnerPicker(dataset)
    pick_rngs: dict[str, KeyedRng] = {}
    vantage_clocks = assign_clocks(elements, seed, scope="pairs/vclock")
    for time, vantage_id in iter_draw_events(
        vantage_clocks, math.inf, seed, scope="pairs/vantage"
    ):
        rng = pick_rngs.get(vantage_id)
        if rng is None:
            rng = pick_rngs[vantage_id] = KeyedRng(seed, "pairs/pick", vantage_id)
        split_row, merge_row, stable_row = rows[vantage_id]
        rec = dataset.item(vantage_id)
        v = rng.uniform() * (split_row + merge_row + stable_row)
        if v < split_row:
            category = "split"
        elif v < split_row + merge_row:
            category = "merge"
        else:
            category = "stable"
        other_id = picker.pick(rec, category, rng.uniform())
        yield time, PairKey(
            vantage_id=vantage_id,
            other_id=other_id,
            category=category,
            is_self=vantage_id == other_id,
        )


def sample_pairs(dataset: Dataset, n_unique: int, seed: int) -> PairSample:
    """Sample pairs with replacement, proportionally to their weight.

    Runs the merged two-stage draw stream until `n_unique` distinct pairs
    have appeared (or the positive-weight pair population is exhausted,
    which flags the sample as truncated), then assigns each pair its
    draw count over the realized sampling period.
    """
    if n_unique < 1:
        raise EmptySample("n_unique must be >= 1")
    totals = category_totals(dataset)
    if totals.all_total <= 0.0:
        raise NoDiff("clusterings are identical; the pair population is empty")

    population = positive_pair_count(dataset)
    target = min(n_unique, population)

    first_seen: dict[PairKey, float] = {}
    order: list[PairKey] = []
    horizon = 0.0
    for time, key in iter_pair_draws(dataset, seed):
        if key not in first_seen:
            first_seen[key] = time
            order.append(key)
            if len(order) == target:
                horizon = time
                break

    clocked = [
        ClockedElement(
            key=_pair_element_key(k),
            weight=_unnormalized_u(dataset, k),
            dt0=first_seen[k],
        )
        for k in order
    ]
    counts = {
        r.key: r.draw_count
        for r in incremental_draws(clocked, horizon, None, seed, scope="pairs/draw")
    }
    pairs = []
    for k in order:
        base = pair_weight(dataset, k.vantage_id, k.other_id)
        pairs.append(
            replace(base, draw_count=counts[_pair_element_key(k)], dt0=first_seen[k])
        )
    return PairSample(
        pairs=tuple(pairs),
        seed=seed,
        requested_unique=n_unique,
        horizon=horizon,
        totals=totals,
        total_weight=dataset.total_weight,
        truncated=target < n_unique,
    )


def _unnormalized_u(dataset: Dataset, key: PairKey) -> float:
    return pair_weight(dataset, key.vantage_id, key.other_id).u * dataset.total_weight


def export_judgement_tasks(sample: PairSample, budget: int) -> ExportResult:
    """Turn a pair sample into blinded judgement tasks, filling a budget.

    Self pairs are never exported (they are equivalent by definition) but
    stay in the sample; mirrored ordered pairs collapse into one task.
    With a positive budget the sample's draws are re-walked one by one
    and consumption stops the moment the budget-th distinct exportable
    task appears, so the retained sample is a valid prefix of the draw
    process. Budget zero exports nothing and leaves the sample intact.
    """
    if budget < 0:
        raise FormatError("budget must be >= 0")
    if budget == 0:
        return ExportResult(tasks=(), sample=sample, budget_filled=True)

    by_element_key = {_pair_element_key(p.key): p for p in sample.pairs}
    clocked = [
        ClockedElement(
            key=_pair_element_key(p.key),
            weight=p.u * sample.total_weight,
            dt0=p.dt0 if p.dt0 is not None else 0.0,
        )
        for p in sample.pairs
    ]
    counts: dict[str, int] = {}
    tasks: list[JudgementTask] = []
    task_ids: set[str] = set()
    for _, element_key in iter_draw_events(
        clocked, sample.horizon, sample.seed, scope="pairs/draw"
    ):
        counts[element_key] = counts.get(element_key, 0) + 1
        pair = by_element_key[element_key]
        if not pair.key.is_self:
            tid = task_id_for(pair.key.vantage_id, pair.key.other_id)
            if tid not in task_ids:
                task_ids.add(tid)
                first, second = sorted((pair.key.vantage_id, pair.key.other_id))
                tasks.append(JudgementTask(task_id=tid, item_a=first, item_b=second))
                if len(task_ids) == budget:
                    break

    retained = tuple(
        replace(p, draw_count=counts[_pair_element_key(p.key)])
        for p in sample.pairs
        if _pair_element_key(p.key) in counts
    )
    trimmed = replace(sample, pairs=retained)
    return ExportResult(
        tasks=tuple(tasks),
        sample=trimmed,
        budget_filled=len(task_ids) >= budget,
    )
