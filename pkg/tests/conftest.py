"""Shared fixtures: the four-item desk fixture and random dataset makers."""

from __future__ import annotations

import json
import random
from pathlib import Path

import pytest

from abcde.model import Dataset, ItemRecord

# Desk fixture: items a..d with weights 1,2,3,4. Baseline clusters {a,b}
# and {c,d}; experiment clusters {a} and {b,c,d}. Oracle equivalence for
# quality tests: a=b and c=d.
FIXTURE_F_ROWS = [
    {
        "item_id": "a",
        "weight": 1.0,
        "base_cluster": "B1",
        "exp_cluster": "E1",
        "attributes": {"origin": "left", "size": 1, "tags": ["small"]},
    },
    {
        "item_id": "b",
        "weight": 2.0,
        "base_cluster": "B1",
        "exp_cluster": "E2",
        "attributes": {"origin": "left", "size": 2, "tags": ["small", "round"]},
    },
    {
        "item_id": "c",
        "weight": 3.0,
        "base_cluster": "B2",
        "exp_cluster": "E2",
        "attributes": {"origin": "right", "size": 3, "tags": ["round"]},
    },
    {
        "item_id": "d",
        "weight": 4.0,
        "base_cluster": "B2",
        "exp_cluster": "E2",
        "attributes": {"origin": "right", "size": 4, "tags": []},
    },
]

FIXTURE_F_BASE = {"a": "B1", "b": "B1", "c": "B2", "d": "B2"}
FIXTURE_F_EXP = {"a": "E1", "b": "E2", "c": "E2", "d": "E2"}
FIXTURE_F_WEIGHTS = {"a": 1.0, "b": 2.0, "c": 3.0, "d": 4.0}
FIXTURE_F_CLASSES = {"a": 0, "b": 0, "c": 1, "d": 1}


def fixture_f_oracle(i: str, j: str) -> bool:
    return FIXTURE_F_CLASSES[i] == FIXTURE_F_CLASSES[j]


def dataset_from_maps(base, exp, weights, attributes=None) -> Dataset:
    return Dataset(
        ItemRecord(
            item_id=i,
            weight=weights[i],
            base_cluster_id=base[i],
            exp_cluster_id=exp[i],
            attributes=(attributes or {}).get(i, {}),
        )
        for i in base
    )


@pytest.fixture
def fixture_f() -> Dataset:
    return dataset_from_maps(FIXTURE_F_BASE, FIXTURE_F_EXP, FIXTURE_F_WEIGHTS)


@pytest.fixture
def fixture_f_path(tmp_path: Path) -> Path:
    path = tmp_path / "fixture_f.jsonl"
    with open(path, "w", encoding="utf-8") as handle:
        for row in FIXTURE_F_ROWS:
            handle.write(json.dumps(row) + "\n")
    return path


def random_clustering_maps(
    seed: int,
    n_items: int = 50,
    max_clusters: int = 8,
    weight_range: tuple[float, float] = (0.1, 10.0),
):
    """Random (base, exp, weights) maps over n_items items."""
    rng = random.Random(seed)
    items = [f"i{k:03d}" for k in range(n_items)]
    n_base = rng.randint(1, max_clusters)
    n_exp = rng.randint(1, max_clusters)
    base = {i: f"b{rng.randrange(n_base)}" for i in items}
    exp = {i: f"e{rng.randrange(n_exp)}" for i in items}
    weights = {i: rng.uniform(*weight_range) for i in items}
    return base, exp, weights


def make_quality_maps(seed: int, n_classes: int = 30, class_size: tuple[int, int] = (4, 8)):
    """Random fixture with a known true equivalence.

    Items belong to true classes. Classes are assigned roles that
    guarantee all four quality phenomena exist: the baseline overmerging
    two classes that the experiment separates (good splits), the
    experiment splitting a true class (bad splits), the experiment
    overmerging two classes (bad merges), and the experiment reuniting a
    class the baseline had split (good merges). Remaining classes stay
    intact on both sides. Returns (base, exp, weights, oracle).
    """
    rng = random.Random(seed)
    weights: dict[str, float] = {}
    true_class: dict[str, int] = {}
    item_counter = 0
    members_of: list[list[str]] = []
    for c in range(n_classes):
        members = []
        for _ in range(rng.randint(*class_size)):
            item_id = f"q{item_counter:05d}"
            item_counter += 1
            true_class[item_id] = c
            weights[item_id] = rng.uniform(0.5, 2.0)
            members.append(item_id)
        members_of.append(members)

    roles = ["base_merge", "exp_merge", "base_split", "exp_split", "intact"]
    role_of = [roles[c % len(roles)] for c in range(n_classes)]
    rng.shuffle(role_of)

    base: dict[str, str] = {}
    exp: dict[str, str] = {}
    merge_partner: dict[str, int] = {}  # role -> previous unpaired class
    for c, members in enumerate(members_of):
        role = role_of[c]
        base_label, exp_label = f"B{c}", f"E{c}"
        if role in ("base_merge", "exp_merge"):
            # Pair up consecutive classes of the same merge role.
            if role in merge_partner:
                partner = merge_partner.pop(role)
                shared = f"{role}-{partner}"
                if role == "base_merge":
                    base_label = shared
                else:
                    exp_label = shared
            else:
                merge_partner[role] = c
                shared = f"{role}-{c}"
                if role == "base_merge":
                    base_label = shared
                else:
                    exp_label = shared
        for position, item_id in enumerate(members):
            b_label, e_label = base_label, exp_label
            half = position < len(members) // 2
            if role == "base_split" and len(members) > 1:
                b_label = f"{base_label}{'x' if half else 'y'}"
            if role == "exp_split" and len(members) > 1:
                e_label = f"{exp_label}{'x' if half else 'y'}"
            base[item_id] = b_label
            exp[item_id] = e_label

    def oracle(i: str, j: str) -> bool:
        return true_class[i] == true_class[j]

    return base, exp, weights, oracle
