"""Ingestion, validation and indexing for a pair of clusterings.

The input is one weighted item population clustered two ways: a baseline
assignment and an experiment assignment. Validation is strict and happens
once, at construction; everything downstream treats a ``Dataset`` as
immutable, so concurrent readers are safe by design.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import (
    DuplicateItem,
    EmptyPopulation,
    FormatError,
    InvalidWeight,
    KeyMismatch,
    MissingAssignment,
    NotFound,
)

Scalar = bool | int | float | str

# Relative tolerance when cross-checking stored cluster weights against
# freshly summed member weights.
CLUSTER_WEIGHT_RTOL = 1e-9


@dataclass(frozen=True)
class ItemRecord:
    """One item: id, positive importance weight, both cluster assignments,
    and a flat scalar attribute map used for slicing."""

    item_id: str
    weight: float
    base_cluster_id: str
    exp_cluster_id: str
    attributes: Mapping[str, Scalar] = field(default_factory=dict)


@dataclass(frozen=True)
class RestrictionReport:
    """What a common-item restriction dropped from each side."""

    common_count: int
    removed_from_base_count: int
    removed_from_exp_count: int
    removed_weight_base: float
    removed_weight_exp: float
    sample_removed_base: tuple[str, ...]
    sample_removed_exp: tuple[str, ...]


def _flatten_attributes(raw: Mapping[str, object], item_id: str) -> dict[str, Scalar]:
    """Normalize an attribute map to flat scalars.

    List values expand into per-element boolean flags, e.g.
    ``{"color": ["red", "blue"]}`` becomes ``{"color:red": True,
    "color:blue": True}``.
    """
    out: dict[str, Scalar] = {}
    for name, value in raw.items():
        if isinstance(value, (list, tuple)):
            for element in value:
                out[f"{name}:{element}"] = True
        elif isinstance(value, (bool, int, float, str)):
            out[name] = value
        else:
            raise FormatError(
                f"item {item_id!r}: attribute {name!r} has unsupported type "
                f"{type(value).__name__}"
            )
    return out


class Dataset:
    """Two clusterings of the same weighted items, validated and indexed.

    Besides the per-side cluster indexes this precomputes, for every
    (base cluster, exp cluster) combination that actually occurs, the
    weight and count of its member overlap. Each per-item metric then
    needs only O(1) lookups, and each overlap is computed exactly once.
    """

    __slots__ = (
        "_items",
        "base_index",
        "exp_index",
        "base_cluster_weight",
        "exp_cluster_weight",
        "overlap_weight",
        "overlap_count",
        "total_weight",
    )

    def __init__(self, records: Iterable[ItemRecord]) -> None:
        items: dict[str, ItemRecord] = {}
        for rec in records:
            if not rec.item_id or not isinstance(rec.item_id, str):
                raise FormatError(f"bad item_id: {rec.item_id!r}")
            if rec.item_id in items:
                raise DuplicateItem(f"duplicate item_id {rec.item_id!r}")
            if isinstance(rec.weight, bool) or not isinstance(rec.weight, (int, float)):
                raise InvalidWeight(f"item {rec.item_id!r}: weight must be numeric")
            if not math.isfinite(rec.weight) or rec.weight <= 0:
                raise InvalidWeight(
                    f"item {rec.item_id!r}: weight must be finite and > 0, "
                    f"got {rec.weight!r}"
                )
            if not rec.base_cluster_id or not rec.exp_cluster_id:
                raise MissingAssignment(f"item {rec.item_id!r} lacks a cluster assignment")
            items[rec.item_id] = rec
        if not items:
            raise EmptyPopulation("dataset has no items")

        self._items = dict(sorted(items.items()))

        base_members: dict[str, list[str]] = {}
        exp_members: dict[str, list[str]] = {}
        overlap_members: dict[tuple[str, str], list[str]] = {}
        for item_id, rec in self._items.items():
            base_members.setdefault(rec.base_cluster_id, []).append(item_id)
            exp_members.setdefault(rec.exp_cluster_id, []).append(item_id)
            overlap_members.setdefault(
                (rec.base_cluster_id, rec.exp_cluster_id), []
            ).append(item_id)

        self.base_index = {c: tuple(m) for c, m in sorted(base_members.items())}
        self.exp_index = {c: tuple(m) for c, m in sorted(exp_members.items())}
        self.base_cluster_weight = {
            c: math.fsum(self._items[i].weight for i in m)
            for c, m in self.base_index.items()
        }
        self.exp_cluster_weight = {
            c: math.fsum(self._items[i].weight for i in m)
            for c, m in self.exp_index.items()
        }
        self.overlap_weight = {
            k: math.fsum(self._items[i].weight for i in m)
            for k, m in overlap_members.items()
        }
        self.overlap_count = {k: len(m) for k, m in overlap_members.items()}
        self.total_weight = math.fsum(r.weight for r in self._items.values())

    def __len__(self) -> int:
        return len(self._items)

    def __contains__(self, item_id: str) -> bool:
        return item_id in self._items

    def __iter__(self) -> Iterator[ItemRecord]:
        return iter(self._items.values())

    @property
    def item_ids(self) -> tuple[str, ...]:
        return tuple(self._items)

    def item(self, item_id: str) -> ItemRecord:
        try:
            return self._items[item_id]
        except KeyError:
            raise NotFound(f"unknown item {item_id!r}") from None

    def base_members(self, cluster_id: str) -> tuple[str, ...]:
        try:
            return self.base_index[cluster_id]
        except KeyError:
            raise NotFound(f"unknown base cluster {cluster_id!r}") from None

    def exp_members(self, cluster_id: str) -> tuple[str, ...]:
        try:
            return self.exp_index[cluster_id]
        except KeyError:
            raise NotFound(f"unknown exp cluster {cluster_id!r}") from None

    def overlap(self, base_cluster_id: str, exp_cluster_id: str) -> tuple[float, int]:
        """(weight, count) of items in both given clusters."""
        key = (base_cluster_id, exp_cluster_id)
        return self.overlap_weight.get(key, 0.0), self.overlap_count.get(key, 0)

    def same_extent(self, rec: ItemRecord) -> bool:
        """True when the item's base and exp clusters hold the same members."""
        _, n_overlap = self.overlap(rec.base_cluster_id, rec.exp_cluster_id)
        return (
            n_overlap == len(self.base_index[rec.base_cluster_id])
            and n_overlap == len(self.exp_index[rec.exp_cluster_id])
        )

    def validate(self) -> None:
        """Re-check the structural invariants; raises on violation."""
        for rec in self:
            assert rec.item_id in self.base_index[rec.base_cluster_id]
            assert rec.item_id in self.exp_index[rec.exp_cluster_id]
        for weights, index in (
            (self.base_cluster_weight, self.base_index),
            (self.exp_cluster_weight, self.exp_index),
        ):
            for cluster_id, members in index.items():
                fresh = math.fsum(self._items[i].weight for i in members)
                if abs(fresh - weights[cluster_id]) > CLUSTER_WEIGHT_RTOL * fresh:
                    raise InvalidWeight(f"cluster weight drift for {cluster_id!r}")
            total = math.fsum(weights.values())
            if abs(total - self.total_weight) > CLUSTER_WEIGHT_RTOL * self.total_weight:
                raise InvalidWeight("cluster weights do not sum to the total weight")


def _record_from_json(line: str, lineno: int) -> ItemRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FormatError(f"line {lineno}: invalid JSON ({exc})") from None
    if not isinstance(obj, dict):
        raise FormatError(f"line {lineno}: expected an object")
    missing = {"item_id", "weight", "base_cluster", "exp_cluster"} - obj.keys()
    if "base_cluster" in missing or "exp_cluster" in missing:
        raise MissingAssignment(f"line {lineno}: missing {sorted(missing)}")
    if missing:
        raise FormatError(f"line {lineno}: missing {sorted(missing)}")
    item_id = obj["item_id"]
    attributes = obj.get("attributes") or {}
    if not isinstance(attributes, dict):
        raise FormatError(f"line {lineno}: attributes must be an object")
    return ItemRecord(
        item_id=item_id,
        weight=obj["weight"],
        base_cluster_id=obj["base_cluster"],
        exp_cluster_id=obj["exp_cluster"],
        attributes=_flatten_attributes(attributes, str(item_id)),
    )


def _record_from_tsv(line: str, lineno: int) -> ItemRecord:
    parts = line.split("\t")
    if len(parts) != 4:
        raise FormatError(f"line {lineno}: expected 4 tab-separated fields")
    item_id, weight, base_cluster, exp_cluster = parts
    try:
        weight_value = float(weight)
    except ValueError:
        raise InvalidWeight(f"line {lineno}: weight {weight!r} is not a number") from None
    return ItemRecord(
        item_id=item_id,
        weight=weight_value,
        base_cluster_id=base_cluster,
        exp_cluster_id=exp_cluster,
    )


def load_dataset(path: str | Path, fmt: str = "jsonl") -> Dataset:
    """Load and validate a dataset file.

    ``jsonl`` rows look like ``{"item_id": ..., "weight": ...,
    "base_cluster": ..., "exp_cluster": ..., "attributes": {...}}``.
    ``tsv`` rows carry the same first four fields, tab-separated, and no
    attributes. The whole load is rejected on the first invalid row.
    """
    if fmt not in ("jsonl", "tsv"):
        raise FormatError(f"unsupported format {fmt!r}")
    parse = _record_from_json if fmt == "jsonl" else _record_from_tsv
    records = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            records.append(parse(line, lineno))
    return Dataset(records)


def restrict_to_common(
    base_assignments: Mapping[str, str],
    exp_assignments: Mapping[str, str],
    weights: Mapping[str, float],
    attributes: Mapping[str, Mapping[str, Scalar]] | None = None,
    sample_cap: int = 10,
) -> tuple[Dataset, RestrictionReport]:
    """Restrict two raw assignment maps to their common items.

    Returns the dataset over the id intersection plus a report of what was
    dropped from each side. Weights of dropped items are tallied where
    known; dropped ids are sampled up to ``sample_cap`` for debugging.
    """
    common = base_assignments.keys() & exp_assignments.keys()
    if not common:
        raise EmptyPopulation("the two clusterings share no items")
    only_base = sorted(base_assignments.keys() - common)
    only_exp = sorted(exp_assignments.keys() - common)

    records = []
    for item_id in sorted(common):
        if item_id not in weights:
            raise InvalidWeight(f"item {item_id!r} has no weight")
        records.append(
            ItemRecord(
                item_id=item_id,
                weight=weights[item_id],
                base_cluster_id=base_assignments[item_id],
                exp_cluster_id=exp_assignments[item_id],
                attributes=dict((attributes or {}).get(item_id, {})),
            )
        )
    report = RestrictionReport(
        common_count=len(common),
        removed_from_base_count=len(only_base),
        removed_from_exp_count=len(only_exp),
        removed_weight_base=math.fsum(weights.get(i, 0.0) for i in only_base),
        removed_weight_exp=math.fsum(weights.get(i, 0.0) for i in only_exp),
        sample_removed_base=tuple(only_base[:sample_cap]),
        sample_removed_exp=tuple(only_exp[:sample_cap]),
    )
    return Dataset(records), report


def propagate_past_weights(
    clustering: Mapping[str, str],
    past_weights: Mapping[str, float],
    intrinsic: Mapping[str, float],
) -> dict[str, float]:
    """Spread historical per-item weights over a present clustering.

    Each cluster's past weight is the sum of its members' past weights
    (zero for members without one); that total is then divided among all
    members proportionally to their intrinsic weights. The result is a
    total map over the clustering's items.
    """
    members: dict[str, list[str]] = {}
    for item_id, cluster_id in clustering.items():
        if item_id not in intrinsic:
            raise InvalidWeight(f"item {item_id!r} has no intrinsic weight")
        if intrinsic[item_id] <= 0 or not math.isfinite(intrinsic[item_id]):
            raise InvalidWeight(f"item {item_id!r}: intrinsic weight must be > 0")
        if past_weights.get(item_id, 0.0) < 0:
            raise InvalidWeight(f"item {item_id!r}: past weight must be >= 0")
        members.setdefault(cluster_id, []).append(item_id)

    out: dict[str, float] = {}
    for cluster_id, ids in members.items():
        cluster_past = math.fsum(past_weights.get(i, 0.0) for i in ids)
        denom = math.fsum(intrinsic[i] for i in ids)
        for i in ids:
            out[i] = cluster_past * intrinsic[i] / denom
    return out


def combine_weights(
    w_base: Mapping[str, float],
    w_exp: Mapping[str, float],
    mode: str = "max",
) -> dict[str, float]:
    """Pointwise combine two weight maps covering the same ids."""
    if w_base.keys() != w_exp.keys():
        diff = w_base.keys() ^ w_exp.keys()
        raise KeyMismatch(f"weight maps disagree on {len(diff)} ids, e.g. {sorted(diff)[:5]}")
    if mode == "max":
        return {i: max(w_base[i], w_exp[i]) for i in w_base}
    if mode == "mean":
        return {i: (w_base[i] + w_exp[i]) / 2.0 for i in w_base}
    raise FormatError(f"unsupported combine mode {mode!r}")
