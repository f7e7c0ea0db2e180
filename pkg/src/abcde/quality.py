"""Quality estimation from judged pairs.

A judged pair contributes its label times an equivalence indicator; the
weighted mean of those contributions, scaled by the pair population's
total weight, estimates the precision delta between the two clusterings.
Restricting to split (merge) pairs and counting the complementary
indicator decomposes the split (merge) rate into its good and bad parts.

Self pairs are equivalent by definition and are auto-judged; pairs whose
judgements are missing or unavailable are dropped and the remaining
pairs of the same analysis class are reweighted so each class keeps its
originally sampled mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .errors import FormatError, NoJudgements
from .model import Dataset
from .pairs import CategoryTotals, WeightedPair, enumerate_pairs, task_id_for

VERDICTS = ("equivalent", "not_equivalent", "unavailable")
ANALYSIS_CLASSES = ("self", "split", "merge", "intersection")

Z_95 = 1.96  # normal-approximation quantile used for the 95% interval

Oracle = Callable[[str, str], bool]


@dataclass(frozen=True)
class Judgement:
    task_id: str
    verdict: str


@dataclass(frozen=True)
class JudgedPair:
    """A sampled pair that survived judgement collection.

    `sample_weight` is the pair's draw count for sampled data; exact
    (exhaustive) evaluation instead feeds every pair once with its pair
    weight, which turns every estimator below into an exact quadrature.
    """

    pair: WeightedPair
    verdict: str  # "equivalent" | "not_equivalent"
    analysis_class: str
    sample_weight: float
    rebalance_weight: float = 1.0

    @property
    def weight(self) -> float:
        return self.sample_weight * self.rebalance_weight

    @property
    def signed_indicator(self) -> float:
        return float(self.pair.label) if self.verdict == "equivalent" else 0.0


@dataclass(frozen=True)
class ClassStats:
    original_count: int
    remaining_count: int
    original_mass: float
    remaining_mass: float
    rebalance_weight: float


@dataclass(frozen=True)
class ApplyStats:
    classes: dict[str, ClassStats]
    unknown_tasks: int
    overwritten: int
    judged: int
    dropped: int


@dataclass(frozen=True)
class Estimate:
    estimate: float
    std_err: float | None
    n_effective: float

    def as_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "std_err": self.std_err,
            "n_effective": self.n_effective,
        }


@dataclass(frozen=True)
class DeltaPrecisionEstimate(Estimate):
    ci95: tuple[float, float] | None = None

    def as_dict(self) -> dict:
        out = super().as_dict()
        out["ci95"] = list(self.ci95) if self.ci95 is not None else None
        return out


@dataclass(frozen=True)
class SliceQuality:
    descriptor: str
    estimate: float
    std_err: float | None
    n_effective: float
    contribution: float
    pairweight: float
    weight: float
    insufficient: bool


def analysis_class_of(pair: WeightedPair) -> str:
    if pair.key.is_self:
        return "self"
    if pair.key.category == "stable":
        return "intersection"
    return pair.key.category


def apply_judgements(
    pairs: Sequence[WeightedPair],
    judgements: Iterable[Judgement],
) -> tuple[list[JudgedPair], ApplyStats]:
    """Attach verdicts to a pair sample and rebalance for missing ones.

    Later judgements for the same task overwrite earlier ones (the
    overwrite count is reported for auditing). Judgements whose task id
    matches no sampled pair are counted and skipped. Pairs left without a
    usable verdict are dropped; every remaining pair of an analysis class
    is reweighted by original class mass / remaining class mass, mass
    being draw-count weighted.
    """
    known_tasks = {
        task_id_for(p.key.vantage_id, p.key.other_id)
        for p in pairs
        if not p.key.is_self
    }
    verdict_of: dict[str, str] = {}
    overwritten = 0
    unknown = 0
    for judgement in judgements:
        if judgement.verdict not in VERDICTS:
            raise FormatError(f"unknown verdict {judgement.verdict!r}")
        if judgement.task_id not in known_tasks:
            unknown += 1
            continue
        if judgement.task_id in verdict_of:
            overwritten += 1
        verdict_of[judgement.task_id] = judgement.verdict

    kept: list[tuple[WeightedPair, str, str]] = []
    original_mass = {c: 0.0 for c in ANALYSIS_CLASSES}
    original_count = {c: 0 for c in ANALYSIS_CLASSES}
    remaining_mass = {c: 0.0 for c in ANALYSIS_CLASSES}
    remaining_count = {c: 0 for c in ANALYSIS_CLASSES}
    for pair in pairs:
        cls = analysis_class_of(pair)
        original_mass[cls] += pair.draw_count
        original_count[cls] += 1
        if cls == "self":
            verdict = "equivalent"
        else:
            verdict = verdict_of.get(task_id_for(pair.key.vantage_id, pair.key.other_id), "")
            if verdict not in ("equivalent", "not_equivalent"):
                continue
        remaining_mass[cls] += pair.draw_count
        remaining_count[cls] += 1
        kept.append((pair, verdict, cls))

    factors = {
        c: (original_mass[c] / remaining_mass[c]) if remaining_mass[c] > 0 else 1.0
        for c in ANALYSIS_CLASSES
    }
    judged = [
        JudgedPair(
            pair=pair,
            verdict=verdict,
            analysis_class=cls,
            sample_weight=float(pair.draw_count),
            rebalance_weight=factors[cls],
        )
        for pair, verdict, cls in kept
    ]
    stats = ApplyStats(
        classes={
            c: ClassStats(
                original_count=original_count[c],
                remaining_count=remaining_count[c],
                original_mass=original_mass[c],
                remaining_mass=remaining_mass[c],
                rebalance_weight=factors[c],
            )
            for c in ANALYSIS_CLASSES
        },
        unknown_tasks=unknown,
        overwritten=overwritten,
        judged=len(judged),
        dropped=len(pairs) - len(judged),
    )
    return judged, stats


def weighted_mean_std_err(
    values: Sequence[float], weights: Sequence[float]
) -> tuple[float, float | None]:
    """Weighted mean and its standard error, for weights that express the
    relative importance of observations.

    The standard error is None when fewer than two effective observations
    are available.
    """
    w_sum = math.fsum(weights)
    if w_sum <= 0:
        raise NoJudgements("total weight of observations is zero")
    mean = math.fsum(w * x for w, x in zip(weights, values)) / w_sum
    second_moment = math.fsum(w * x * x for w, x in zip(weights, values)) / w_sum
    variance_term = max(second_moment - mean * mean, 0.0)
    w_sq_sum = math.fsum(w * w for w in weights)
    denominator = w_sum * w_sum - w_sq_sum
    if denominator <= 0:
        return mean, None
    return mean, math.sqrt(variance_term * w_sq_sum / denominator)


def _kish_n_effective(weights: Sequence[float]) -> float:
    w_sum = math.fsum(weights)
    w_sq_sum = math.fsum(w * w for w in weights)
    return (w_sum * w_sum / w_sq_sum) if w_sq_sum > 0 else 0.0


def estimate_delta_precision(
    judged: Sequence[JudgedPair], totals: CategoryTotals
) -> DeltaPrecisionEstimate:
    """Precision delta estimate with standard error and 95% interval."""
    if totals.all_total == 0.0:
        # No pair has weight; the clusterings are identical and the delta
        # is exactly zero.
        return DeltaPrecisionEstimate(estimate=0.0, std_err=0.0, n_effective=0.0, ci95=(0.0, 0.0))
    if not judged:
        raise NoJudgements("no judged pairs available")
    values = [p.signed_indicator for p in judged]
    weights = [p.weight for p in judged]
    mean, se = weighted_mean_std_err(values, weights)
    estimate = totals.all_total * mean
    std_err = totals.all_total * se if se is not None else None
    ci = (
        (estimate - Z_95 * std_err, estimate + Z_95 * std_err)
        if std_err is not None
        else None
    )
    return DeltaPrecisionEstimate(
        estimate=estimate,
        std_err=std_err,
        n_effective=_kish_n_effective(weights),
        ci95=ci,
    )


@dataclass(frozen=True)
class RateEstimates:
    good_split: Estimate | None
    bad_split: Estimate | None
    good_merge: Estimate | None
    bad_merge: Estimate | None


def estimate_rates(judged: Sequence[JudgedPair], totals: CategoryTotals) -> RateEstimates:
    """Good/bad split and merge rate estimates.

    Each good rate is the corresponding impact rate times the weighted
    mean of its indicator over judged pairs of that category; the bad
    rate is the exact complement, so good + bad always reproduces the
    impact rate. A rate is None when no judged pair of its category
    exists.
    """

    def rate_pair(category: str, scale: float, good_means_equivalent: bool):
        subset = [p for p in judged if p.pair.key.category == category]
        if not subset:
            return None, None
        weights = [p.weight for p in subset]
        indicator = [
            1.0 if (p.verdict == "equivalent") == good_means_equivalent else 0.0
            for p in subset
        ]
        mean, se = weighted_mean_std_err(indicator, weights)
        n_eff = _kish_n_effective(weights)
        std_err = scale * se if se is not None else None
        good = Estimate(estimate=scale * mean, std_err=std_err, n_effective=n_eff)
        bad = Estimate(estimate=scale - good.estimate, std_err=std_err, n_effective=n_eff)
        return good, bad

    good_split, bad_split = rate_pair("split", totals.split_total, good_means_equivalent=False)
    good_merge, bad_merge = rate_pair("merge", totals.merge_total, good_means_equivalent=True)
    return RateEstimates(
        good_split=good_split,
        bad_split=bad_split,
        good_merge=good_merge,
        bad_merge=bad_merge,
    )


def pairweight_of_slice(dataset: Dataset, predicate: Callable[[str], bool]) -> float:
    """Total pair weight over pairs whose vantage item satisfies the
    predicate, via per-vantage row sums (no enumeration)."""
    from .pairs import _row_weights  # local import to keep module surfaces small

    rows = [
        math.fsum(_row_weights(dataset, rec)) for rec in dataset if predicate(rec.item_id)
    ]
    return math.fsum(rows) / dataset.total_weight


def estimate_slice_delta_precision(
    judged: Sequence[JudgedPair],
    predicate: Callable[[str], bool],
    *,
    weight_of_slice: float,
    weight_of_population: float,
    pairweight: float,
    descriptor: str = "",
) -> SliceQuality:
    """Precision delta for a slice, from the vantage-restricted sample.

    The multiplier (population weight / slice weight) * pairweight turns
    the restricted judged mean into the slice's precision delta; the
    contribution scales that back by the slice's weight share so that
    contributions over a partition add up to the overall delta.
    """
    subset = [p for p in judged if predicate(p.pair.key.vantage_id)]
    if pairweight == 0.0:
        # The slice spans no pair weight, so its precision delta is an
        # exact zero no matter what was sampled.
        return SliceQuality(
            descriptor=descriptor,
            estimate=0.0,
            std_err=0.0,
            n_effective=0.0,
            contribution=0.0,
            pairweight=0.0,
            weight=weight_of_slice,
            insufficient=False,
        )
    if not subset or math.fsum(p.weight for p in subset) <= 0:
        return SliceQuality(
            descriptor=descriptor,
            estimate=0.0,
            std_err=None,
            n_effective=0.0,
            contribution=0.0,
            pairweight=pairweight,
            weight=weight_of_slice,
            insufficient=True,
        )
    values = [p.signed_indicator for p in subset]
    weights = [p.weight for p in subset]
    mean, se = weighted_mean_std_err(values, weights)
    multiplier = (weight_of_population / weight_of_slice) * pairweight
    return SliceQuality(
        descriptor=descriptor,
        estimate=multiplier * mean,
        std_err=multiplier * se if se is not None else None,
        n_effective=_kish_n_effective(weights),
        contribution=pairweight * mean,
        pairweight=pairweight,
        weight=weight_of_slice,
        insufficient=False,
    )


def judged_pairs_from_oracle(
    pairs: Sequence[WeightedPair], oracle: Oracle
) -> list[Judgement]:
    """Synthesize judgements for every exportable pair using an oracle
    equivalence. Useful for tests and free-judgement evaluations."""
    judgements = []
    seen: set[str] = set()
    for pair in pairs:
        if pair.key.is_self:
            continue
        tid = task_id_for(pair.key.vantage_id, pair.key.other_id)
        if tid in seen:
            continue
        seen.add(tid)
        verdict = "equivalent" if oracle(pair.key.vantage_id, pair.key.other_id) else "not_equivalent"
        judgements.append(Judgement(task_id=tid, verdict=verdict))
    return judgements


def exhaustive_judged_pairs(dataset: Dataset, oracle: Oracle) -> list[JudgedPair]:
    """Every pair of the population judged by an oracle, weighted by its
    pair weight. Feeding these to the estimators reproduces the exact
    metrics (the estimators become quadratures)."""
    judged = []
    for pair in enumerate_pairs(dataset):
        equivalent = pair.key.is_self or oracle(pair.key.vantage_id, pair.key.other_id)
        judged.append(
            JudgedPair(
                pair=pair,
                verdict="equivalent" if equivalent else "not_equivalent",
                analysis_class=analysis_class_of(pair),
                sample_weight=pair.u,
            )
        )
    return judged


def quality_report(
    judged: Sequence[JudgedPair],
    totals: CategoryTotals,
    stats: ApplyStats | None = None,
) -> dict:
    """Assemble the JSON-ready quality report."""
    delta = estimate_delta_precision(judged, totals)
    rates = estimate_rates(judged, totals)

    def rate_dict(estimate: Estimate | None) -> dict | None:
        return estimate.as_dict() if estimate is not None else None

    report = {
        "delta_precision": delta.as_dict(),
        "good_split": rate_dict(rates.good_split),
        "bad_split": rate_dict(rates.bad_split),
        "good_merge": rate_dict(rates.good_merge),
        "bad_merge": rate_dict(rates.bad_merge),
        "category_totals": {
            "split_total": totals.split_total,
            "merge_total": totals.merge_total,
            "stable_total": totals.stable_total,
            "all_total": totals.all_total,
        },
        "counts": {
            "judged_pairs": len(judged),
            "by_class": {
                cls: sum(1 for p in judged if p.analysis_class == cls)
                for cls in ANALYSIS_CLASSES
            },
        },
    }
    if stats is not None:
        report["judgement_collection"] = {
            "unknown_tasks": stats.unknown_tasks,
            "overwritten": stats.overwritten,
            "judged": stats.judged,
            "dropped": stats.dropped,
            "classes": {
                cls: {
                    "original_count": cs.original_count,
                    "remaining_count": cs.remaining_count,
                    "original_mass": cs.original_mass,
                    "remaining_mass": cs.remaining_mass,
                    "rebalance_weight": cs.rebalance_weight,
                }
                for cls, cs in stats.classes.items()
            },
        }
    return report
