"""Brute-force reference implementations used to pin expected test values.

Everything in this module works on plain dicts and deliberately shares no
code with the package under test: per-item metrics materialize explicit
member sets, pair-level quantities come from full enumeration, lifted
metrics are literal weighted averages. Slow and obviously correct.
"""

from __future__ import annotations

from typing import Callable

Assignments = dict[str, str]  # item_id -> cluster_id
Weights = dict[str, float]
Equivalence = Callable[[str, str], bool]


def cluster_members(assign: Assignments) -> dict[str, set[str]]:
    out: dict[str, set[str]] = {}
    for item, cluster in assign.items():
        out.setdefault(cluster, set()).add(item)
    return out


def cluster_of(assign: Assignments, item: str) -> set[str]:
    """The full member set of the cluster containing `item`."""
    target = assign[item]
    return {j for j, c in assign.items() if c == target}


def wsum(ids, weights: Weights) -> float:
    return sum(weights[j] for j in ids)


def split_rate(item: str, base: Assignments, exp: Assignments, weights: Weights) -> float:
    b = cluster_of(base, item)
    e = cluster_of(exp, item)
    return wsum(b - e, weights) / wsum(b, weights)


def merge_rate(item: str, base: Assignments, exp: Assignments, weights: Weights) -> float:
    b = cluster_of(base, item)
    e = cluster_of(exp, item)
    return wsum(e - b, weights) / wsum(e, weights)


def jaccard_distance(item: str, base: Assignments, exp: Assignments, weights: Weights) -> float:
    b = cluster_of(base, item)
    e = cluster_of(exp, item)
    return (wsum(b - e, weights) + wsum(e - b, weights)) / wsum(b | e, weights)


def lifted(metric, ids, base, exp, weights: Weights) -> float:
    """Weighted average of a per-item metric over a set of items."""
    total = wsum(ids, weights)
    return sum(weights[i] * metric(i, base, exp, weights) for i in ids) / total


def affected_items(base: Assignments, exp: Assignments) -> set[str]:
    return {i for i in base if cluster_of(base, i) != cluster_of(exp, i)}


def all_pairs(base: Assignments, exp: Assignments, weights: Weights) -> list[tuple]:
    """Enumerate the full pair population.

    Yields (vantage, other, category, u, l) with the pair weight u carrying
    the 1/weight(T) normalization and l the +/-1 label. Categories are
    "split", "merge", "stable".
    """
    total = wsum(base, weights)
    rows = []
    for i in sorted(base):
        b = cluster_of(base, i)
        e = cluster_of(exp, i)
        wb = wsum(b, weights)
        we = wsum(e, weights)
        for j in sorted(b | e):
            if j in b and j in e:
                u = (weights[i] / total) * abs(wb - we) / (wb * we) * weights[j]
                l = 1 if wb >= we else -1
                rows.append((i, j, "stable", u, l))
            elif j in b:
                rows.append((i, j, "split", (weights[i] / total) * weights[j] / wb, -1))
            else:
                rows.append((i, j, "merge", (weights[i] / total) * weights[j] / we, 1))
    return rows


def delta_precision_item(item: str, base: Assignments, exp: Assignments,
                         weights: Weights, equiv: Equivalence) -> float:
    b = cluster_of(base, item)
    e = cluster_of(exp, item)
    wb = wsum(b, weights)
    we = wsum(e, weights)
    prec_exp = sum(weights[j] / we for j in e if equiv(item, j))
    prec_base = sum(weights[j] / wb for j in b if equiv(item, j))
    return prec_exp - prec_base


def delta_precision(ids, base: Assignments, exp: Assignments,
                    weights: Weights, equiv: Equivalence) -> float:
    total = wsum(ids, weights)
    return sum(weights[i] * delta_precision_item(i, base, exp, weights, equiv)
               for i in ids) / total


def good_bad_rates(ids, base: Assignments, exp: Assignments,
                   weights: Weights, equiv: Equivalence) -> dict[str, float]:
    """Lifted good/bad split and merge rates over `ids`."""
    total = wsum(ids, weights)
    out = {"good_split": 0.0, "bad_split": 0.0, "good_merge": 0.0, "bad_merge": 0.0}
    for i in ids:
        b = cluster_of(base, i)
        e = cluster_of(exp, i)
        wb = wsum(b, weights)
        we = wsum(e, weights)
        share = weights[i] / total
        for j in b - e:
            if equiv(i, j):
                out["bad_split"] += share * weights[j] / wb
            else:
                out["good_split"] += share * weights[j] / wb
        for j in e - b:
            if equiv(i, j):
                out["good_merge"] += share * weights[j] / we
            else:
                out["bad_merge"] += share * weights[j] / we
    return out


def pairweight(ids, base: Assignments, exp: Assignments, weights: Weights) -> float:
    """Total pair weight over pairs whose vantage item lies in `ids`."""
    members = set(ids)
    return sum(u for (i, _, _, u, _) in all_pairs(base, exp, weights) if i in members)


def delta_precision_contribution(ids, base: Assignments, exp: Assignments,
                                 weights: Weights, equiv: Equivalence) -> float:
    """Contribution of the slice `ids` to the overall precision delta."""
    members = set(ids)
    return sum(u * l * (1 if equiv(i, j) else 0)
               for (i, j, _, u, l) in all_pairs(base, exp, weights) if i in members)
