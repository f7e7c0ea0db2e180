"""Ingestion, validation, weight derivation."""

from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abcde.errors import (
    DuplicateItem,
    EmptyPopulation,
    FormatError,
    InvalidWeight,
    KeyMismatch,
    MissingAssignment,
)
from abcde.model import (
    Dataset,
    ItemRecord,
    combine_weights,
    load_dataset,
    propagate_past_weights,
    restrict_to_common,
)

from conftest import FIXTURE_F_ROWS, dataset_from_maps, random_clustering_maps


class TestLoadDataset:
    def test_valid_rows(self, fixture_f_path):
        dataset = load_dataset(fixture_f_path)
        assert len(dataset) == 4
        assert dataset.base_index["B1"] == ("a", "b")
        assert dataset.exp_index["E2"] == ("b", "c", "d")
        assert dataset.total_weight == 10.0
        assert dataset.item("b").attributes["tags:round"] is True

    def test_zero_weight_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        rows = [dict(FIXTURE_F_ROWS[0])]
        rows[0]["weight"] = 0
        path.write_text("\n".join(json.dumps(r) for r in rows))
        with pytest.raises(InvalidWeight):
            load_dataset(path)

    @pytest.mark.parametrize("bad", [float("nan"), float("inf"), -1.5, "heavy", None])
    def test_non_finite_or_non_numeric_weight_rejected(self, tmp_path, bad):
        path = tmp_path / "bad.jsonl"
        row = dict(FIXTURE_F_ROWS[0])
        row["weight"] = bad
        path.write_text(json.dumps(row))
        with pytest.raises(InvalidWeight):
            load_dataset(path)

    def test_duplicate_item_rejected(self, tmp_path):
        path = tmp_path / "dup.jsonl"
        row = json.dumps(FIXTURE_F_ROWS[0])
        path.write_text(row + "\n" + row + "\n")
        with pytest.raises(DuplicateItem):
            load_dataset(path)

    def test_missing_cluster_rejected(self, tmp_path):
        path = tmp_path / "missing.jsonl"
        row = {k: v for k, v in FIXTURE_F_ROWS[0].items() if k != "exp_cluster"}
        path.write_text(json.dumps(row))
        with pytest.raises(MissingAssignment):
            load_dataset(path)

    def test_malformed_json_rejected(self, tmp_path):
        path = tmp_path / "garbage.jsonl"
        path.write_text("not json at all\n")
        with pytest.raises(FormatError):
            load_dataset(path)

    def test_tsv_roundtrip(self, tmp_path):
        path = tmp_path / "data.tsv"
        path.write_text("a\t1.5\tB1\tE1\nb\t2.5\tB1\tE2\n")
        dataset = load_dataset(path, fmt="tsv")
        assert len(dataset) == 2
        assert dataset.item("a").weight == 1.5
        assert dataset.item("b").exp_cluster_id == "E2"

    def test_list_attributes_become_flags(self, tmp_path):
        path = tmp_path / "attrs.jsonl"
        row = dict(FIXTURE_F_ROWS[0])
        row["attributes"] = {"colors": ["red", "blue"], "size": "large"}
        path.write_text(json.dumps(row))
        dataset = load_dataset(path)
        attrs = dataset.item("a").attributes
        assert attrs == {"colors:red": True, "colors:blue": True, "size": "large"}


class TestRestrictToCommon:
    def test_partial_overlap(self):
        base = {"a": "x", "b": "x", "c": "y"}
        exp = {"b": "p", "c": "q", "d": "q"}
        weights = {"a": 1.0, "b": 2.0, "c": 3.0, "d": 4.0}
        dataset, report = restrict_to_common(base, exp, weights)
        assert dataset.item_ids == ("b", "c")
        assert report.common_count == 2
        assert report.removed_from_base_count == 1
        assert report.removed_from_exp_count == 1
        assert report.removed_weight_base == 1.0
        assert report.removed_weight_exp == 4.0
        assert report.sample_removed_base == ("a",)
        assert report.sample_removed_exp == ("d",)

    def test_identical_id_sets(self):
        base = {"a": "x", "b": "x"}
        exp = {"a": "p", "b": "q"}
        weights = {"a": 1.0, "b": 2.0}
        _, report = restrict_to_common(base, exp, weights)
        assert report.removed_from_base_count == 0
        assert report.removed_from_exp_count == 0
        assert report.removed_weight_base == 0.0

    def test_disjoint_sets(self):
        with pytest.raises(EmptyPopulation):
            restrict_to_common({"a": "x"}, {"b": "y"}, {"a": 1.0, "b": 1.0})

    def test_idempotent(self):
        base = {"a": "x", "b": "x", "c": "y"}
        exp = {"b": "p", "c": "q", "d": "q"}
        weights = {"a": 1.0, "b": 2.0, "c": 3.0, "d": 4.0}
        dataset, _ = restrict_to_common(base, exp, weights)
        again, report = restrict_to_common(
            {r.item_id: r.base_cluster_id for r in dataset},
            {r.item_id: r.exp_cluster_id for r in dataset},
            {r.item_id: r.weight for r in dataset},
        )
        assert report.removed_from_base_count == 0
        assert report.removed_from_exp_count == 0
        assert again.item_ids == dataset.item_ids
        assert again.total_weight == dataset.total_weight

    def test_missing_weight_rejected(self):
        with pytest.raises(InvalidWeight):
            restrict_to_common({"a": "x"}, {"a": "y"}, {})


class TestPropagatePastWeights:
    def test_proportional_split_with_new_member(self):
        out = propagate_past_weights(
            {"a": "c1", "b": "c1"}, {"a": 10.0}, {"a": 1.0, "b": 1.0}
        )
        assert out == {"a": 5.0, "b": 5.0}

    def test_singleton_keeps_total(self):
        out = propagate_past_weights({"c": "c9"}, {"c": 4.0}, {"c": 2.0})
        assert out == {"c": 4.0}

    def test_zero_past_propagates_zero(self):
        out = propagate_past_weights({"a": "c1", "b": "c1"}, {}, {"a": 1.0, "b": 3.0})
        assert out == {"a": 0.0, "b": 0.0}

    def test_proportional_to_intrinsic(self):
        out = propagate_past_weights(
            {"a": "c1", "b": "c1"}, {"a": 6.0, "b": 6.0}, {"a": 1.0, "b": 2.0}
        )
        assert out["a"] == pytest.approx(4.0)
        assert out["b"] == pytest.approx(8.0)

    def test_negative_past_rejected(self):
        with pytest.raises(InvalidWeight):
            propagate_past_weights({"a": "c1"}, {"a": -1.0}, {"a": 1.0})

    def test_nonpositive_intrinsic_rejected(self):
        with pytest.raises(InvalidWeight):
            propagate_past_weights({"a": "c1"}, {}, {"a": 0.0})


class TestCombineWeights:
    def test_max(self):
        assert combine_weights({"a": 2.0}, {"a": 5.0}, mode="max") == {"a": 5.0}

    def test_mean(self):
        assert combine_weights({"a": 2.0}, {"a": 5.0}, mode="mean") == {"a": 3.5}

    def test_key_mismatch(self):
        with pytest.raises(KeyMismatch):
            combine_weights({"a": 1.0}, {"b": 1.0})


class TestDatasetInvariants:
    @given(seed=st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=40, deadline=None)
    def test_indexing_roundtrip_and_weight_sums(self, seed):
        base, exp, weights = random_clustering_maps(seed, n_items=30)
        dataset = dataset_from_maps(base, exp, weights)
        dataset.validate()
        for rec in dataset:
            assert rec.item_id in dataset.base_index[rec.base_cluster_id]
            assert rec.item_id in dataset.exp_index[rec.exp_cluster_id]

    def test_every_item_in_exactly_one_cluster_per_side(self, fixture_f):
        for index in (fixture_f.base_index, fixture_f.exp_index):
            seen = [m for members in index.values() for m in members]
            assert sorted(seen) == sorted(fixture_f.item_ids)

    def test_empty_dataset_rejected(self):
        with pytest.raises(EmptyPopulation):
            Dataset([])

    def test_direct_record_validation(self):
        with pytest.raises(InvalidWeight):
            Dataset([ItemRecord("a", -2.0, "b", "e")])
