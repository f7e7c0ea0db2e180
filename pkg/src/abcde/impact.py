"""Exact impact metrics for a clustering change.

Every metric is defined from the vantage point of a single item and
lifted to sets of items by weighted averaging, so slice values compose
exactly into population values. The three per-item metrics are

* split_rate: weight fraction of the item's baseline cluster that is no
  longer with it in the experiment clustering;
* merge_rate: weight fraction of the item's experiment cluster that is
  newly merged in;
* jaccard_distance: weight of the symmetric difference of the two
  clusters over the weight of their union.

All three are zero exactly when the item's two clusters hold the same
members; cluster ids are labels only and renaming never creates impact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Iterable, Sequence

from .errors import EmptySample, EmptySlice, FormatError, NotFound
from .model import Dataset, ItemRecord

if TYPE_CHECKING:  # pragma: no cover
    from .sampling import SampledItem

METRICS = ("split", "merge", "jd")


@dataclass(frozen=True)
class ImpactTriple:
    split_rate: float
    merge_rate: float
    jaccard_distance: float

    def get(self, metric: str) -> float:
        if metric == "split":
            return self.split_rate
        if metric == "merge":
            return self.merge_rate
        if metric == "jd":
            return self.jaccard_distance
        raise FormatError(f"unknown metric {metric!r}")

    def as_dict(self) -> dict[str, float]:
        return {
            "split_rate": self.split_rate,
            "merge_rate": self.merge_rate,
            "jaccard_distance": self.jaccard_distance,
        }


ZERO_IMPACT = ImpactTriple(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class ClusterContribution:
    """One cluster's share of an overall impact metric."""

    cluster_id: str
    side: str  # "base" | "exp"
    cluster_weight: float
    metric_value: float
    contribution: float


@dataclass(frozen=True)
class SampleEstimate:
    """Result of evaluating a metric over (a slice of) an item sample."""

    value: float
    weight: float  # estimated weight fraction of the slice's affected mass
    count: int
    empty_slice: bool


def impact_of_item(dataset: Dataset, item_id: str) -> ImpactTriple:
    rec = dataset.item(item_id)
    return _impact_of_record(dataset, rec)


def _impact_of_record(dataset: Dataset, rec: ItemRecord) -> ImpactTriple:
    if dataset.same_extent(rec):
        return ZERO_IMPACT
    wb = dataset.base_cluster_weight[rec.base_cluster_id]
    we = dataset.exp_cluster_weight[rec.exp_cluster_id]
    wo, _ = dataset.overlap(rec.base_cluster_id, rec.exp_cluster_id)
    return ImpactTriple(
        split_rate=(wb - wo) / wb,
        merge_rate=(we - wo) / we,
        jaccard_distance=(wb + we - 2.0 * wo) / (wb + we - wo),
    )


def impact_of_set(dataset: Dataset, item_ids: Iterable[str]) -> ImpactTriple:
    """Weight-weighted average of per-item impact over `item_ids`."""
    ids = list(item_ids)
    if not ids:
        raise EmptySlice("cannot compute impact of an empty item set")
    records = [dataset.item(i) for i in ids]
    triples = [_impact_of_record(dataset, r) for r in records]
    total = math.fsum(r.weight for r in records)
    return ImpactTriple(
        split_rate=math.fsum(r.weight * t.split_rate for r, t in zip(records, triples)) / total,
        merge_rate=math.fsum(r.weight * t.merge_rate for r, t in zip(records, triples)) / total,
        jaccard_distance=math.fsum(
            r.weight * t.jaccard_distance for r, t in zip(records, triples)
        ) / total,
    )


def partition_affected(dataset: Dataset) -> tuple[set[str], set[str]]:
    """Split the population into items whose cluster extents changed and
    items whose did not. Membership is decided by member-set equality,
    never by cluster ids."""
    affected: set[str] = set()
    unaffected: set[str] = set()
    for rec in dataset:
        if dataset.same_extent(rec):
            unaffected.add(rec.item_id)
        else:
            affected.add(rec.item_id)
    return affected, unaffected


def most_affected_clusters(
    dataset: Dataset,
    side: str = "base",
    metric: str = "jd",
    top_n: int = 100,
) -> list[ClusterContribution]:
    """Clusters ranked by their contribution to an overall impact metric.

    Contribution of a cluster is cluster_weight * metric(cluster members)
    / total_weight. Ties break by side then cluster id so reports are
    reproducible.
    """
    if top_n < 1:
        raise FormatError("top_n must be >= 1")
    if side not in ("base", "exp", "interleaved"):
        raise FormatError(f"unknown side {side!r}")
    sides = ("base", "exp") if side == "interleaved" else (side,)
    rows: list[ClusterContribution] = []
    for current in sides:
        index = dataset.base_index if current == "base" else dataset.exp_index
        weight_of = (
            dataset.base_cluster_weight if current == "base" else dataset.exp_cluster_weight
        )
        for cluster_id, members in index.items():
            value = impact_of_set(dataset, members).get(metric)
            rows.append(
                ClusterContribution(
                    cluster_id=cluster_id,
                    side=current,
                    cluster_weight=weight_of[cluster_id],
                    metric_value=value,
                    contribution=weight_of[cluster_id] * value / dataset.total_weight,
                )
            )
    rows.sort(key=lambda c: (-c.contribution, c.side, c.cluster_id))
    return rows[:top_n]


def estimate_impact_from_sample(
    sample: Sequence["SampledItem"],
    metric: str = "jd",
    predicate: Callable[["SampledItem"], bool] | None = None,
) -> SampleEstimate:
    """Estimate a slice's contribution to an overall metric from an
    importance-weighted item sample.

    Returns the sum of importance_weight * metric over the sampled items
    selected by `predicate` (all items when None). With the trivial
    predicate this estimates the overall metric; for the Jaccard distance
    the estimate is exact by construction. An empty slice is reported as
    zero with a flag rather than an error.
    """
    if not sample:
        raise EmptySample("item sample is empty")
    if metric not in METRICS:
        raise FormatError(f"unknown metric {metric!r}")
    selected = [s for s in sample if predicate is None or predicate(s)]
    value = math.fsum(s.importance_weight * s.impact.get(metric) for s in selected)
    weight = math.fsum(s.importance_weight for s in selected)
    return SampleEstimate(
        value=value,
        weight=weight,
        count=len(selected),
        empty_slice=not selected,
    )


def impact_report(dataset: Dataset, top_n: int = 100) -> dict:
    """Full impact report: overall rates, most affected clusters of both
    sides (interleaved, ranked by contribution), and the affected weight
    fraction."""
    overall = impact_of_set(dataset, dataset.item_ids)
    affected, _ = partition_affected(dataset)
    affected_weight = math.fsum(dataset.item(i).weight for i in affected)
    per_side = most_affected_clusters(dataset, "base", "jd", top_n) + most_affected_clusters(
        dataset, "exp", "jd", top_n
    )
    per_side.sort(key=lambda c: (-c.contribution, c.side, c.cluster_id))
    return {
        "overall": overall.as_dict(),
        "most_affected": [
            {
                "cluster_id": c.cluster_id,
                "side": c.side,
                "cluster_weight": c.cluster_weight,
                "jaccard_distance": c.metric_value,
                "contribution": c.contribution,
            }
            for c in per_side
        ],
        "affected_weight_fraction": affected_weight / dataset.total_weight,
        "affected_count": len(affected),
        "item_count": len(dataset),
        "total_weight": dataset.total_weight,
    }
