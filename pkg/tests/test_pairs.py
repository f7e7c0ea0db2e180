"""Pair population weights, totals, sampling, and task export."""

from __future__ import annotations

import math
from dataclasses import replace

import pytest

import oracles
from abcde.errors import NoDiff, NotInPopulation
from abcde.pairs import (
    PairSample,
    category_totals,
    enumerate_pairs,
    export_judgement_tasks,
    iter_pair_draws,
    pair_weight,
    positive_pair_count,
    sample_pairs,
    task_id_for,
)

from conftest import (
    FIXTURE_F_BASE,
    FIXTURE_F_EXP,
    FIXTURE_F_WEIGHTS,
    dataset_from_maps,
    random_clustering_maps,
)


class TestPairWeight:
    def test_split_pair_a_b(self, fixture_f):
        pair = pair_weight(fixture_f, "a", "b")
        assert pair.key.category == "split"
        assert not pair.key.is_self
        assert pair.u == pytest.approx(1 / 15, abs=1e-15)
        assert pair.label == -1

    def test_merge_pair_b_c(self, fixture_f):
        pair = pair_weight(fixture_f, "b", "c")
        assert pair.key.category == "merge"
        assert pair.u == pytest.approx(1 / 15, abs=1e-15)
        assert pair.label == 1

    def test_stable_self_pair_a_a(self, fixture_f):
        pair = pair_weight(fixture_f, "a", "a")
        assert pair.key.category == "stable"
        assert pair.key.is_self
        assert pair.u == pytest.approx(1 / 15, abs=1e-15)
        assert pair.label == 1

    def test_outside_population(self, fixture_f):
        with pytest.raises(NotInPopulation):
            pair_weight(fixture_f, "a", "c")

    def test_matches_oracle_enumeration(self, fixture_f):
        oracle_rows = {
            (i, j): (category, u, l)
            for (i, j, category, u, l) in oracles.all_pairs(
                FIXTURE_F_BASE, FIXTURE_F_EXP, FIXTURE_F_WEIGHTS
            )
        }
        engine_rows = list(enumerate_pairs(fixture_f))
        assert len(engine_rows) == len(oracle_rows)
        for pair in engine_rows:
            category, u, l = oracle_rows[(pair.key.vantage_id, pair.key.other_id)]
            assert pair.key.category == category
            assert pair.u == pytest.approx(u, rel=1e-12, abs=1e-18)
            assert pair.label == l


class TestCategoryTotals:
    def test_fixture_f_totals(self, fixture_f):
        totals = category_totals(fixture_f)
        assert totals.split_total == pytest.approx(2 / 15, abs=1e-15)
        assert totals.merge_total == pytest.approx(14 / 45, abs=1e-15)

    def test_identical_clusterings_all_zero(self):
        dataset = dataset_from_maps(
            {"a": "x", "b": "x"}, {"a": "y", "b": "y"}, {"a": 1.0, "b": 2.0}
        )
        totals = category_totals(dataset)
        assert totals.split_total == 0.0
        assert totals.merge_total == 0.0
        assert totals.stable_total == 0.0

    def test_single_cluster_equal_weights_stable_zero(self):
        dataset = dataset_from_maps(
            {"a": "x", "b": "x"}, {"a": "p", "b": "p"}, {"a": 1.0, "b": 2.0}
        )
        assert category_totals(dataset).stable_total == 0.0

    @pytest.mark.parametrize("seed", range(12))
    def test_totals_equal_enumeration_and_rates(self, seed):
        base, exp, weights = random_clustering_maps(seed, n_items=30)
        dataset = dataset_from_maps(base, exp, weights)
        totals = category_totals(dataset)
        by_category = {"split": 0.0, "merge": 0.0, "stable": 0.0}
        for (_, _, category, u, _) in oracles.all_pairs(base, exp, weights):
            by_category[category] += u
        assert totals.split_total == pytest.approx(by_category["split"], rel=1e-9, abs=1e-15)
        assert totals.merge_total == pytest.approx(by_category["merge"], rel=1e-9, abs=1e-15)
        assert totals.stable_total == pytest.approx(by_category["stable"], rel=1e-9, abs=1e-15)
        assert totals.split_total == pytest.approx(
            oracles.lifted(oracles.split_rate, sorted(base), base, exp, weights),
            rel=1e-9,
            abs=1e-15,
        )
        assert totals.merge_total == pytest.approx(
            oracles.lifted(oracles.merge_rate, sorted(base), base, exp, weights),
            rel=1e-9,
            abs=1e-15,
        )


class TestPairDrawStream:
    def test_two_stage_matches_direct_pair_frequencies(self, fixture_f):
        expected = {
            (i, j): u / (34 / 45)
            for (i, j, _, u, _) in oracles.all_pairs(
                FIXTURE_F_BASE, FIXTURE_F_EXP, FIXTURE_F_WEIGHTS
            )
            if u > 0
        }
        n_events = 100_000
        counts: dict[tuple[str, str], int] = {}
        stream = iter_pair_draws(fixture_f, seed=2024)
        for _ in range(n_events):
            _, key = next(stream)
            counts[(key.vantage_id, key.other_id)] = (
                counts.get((key.vantage_id, key.other_id), 0) + 1
            )
        assert set(counts) <= set(expected)
        for pair, p in expected.items():
            sigma = math.sqrt(p * (1 - p) / n_events)
            assert counts.get(pair, 0) / n_events == pytest.approx(p, abs=3.5 * sigma)

    def test_equal_weight_stable_pairs_never_sampled(self):
        # Every item's two clusters weigh the same, so all stable pairs
        # (including self pairs) carry zero weight and must never appear.
        base = {"x": "b1", "y": "b1", "z": "b2", "w": "b2"}
        exp = {"x": "e1", "z": "e1", "y": "e2", "w": "e2"}
        weights = dict.fromkeys(base, 1.0)
        dataset = dataset_from_maps(base, exp, weights)
        stream = iter_pair_draws(dataset, seed=5)
        for _ in range(5000):
            _, key = next(stream)
            assert key.category != "stable"
            assert not key.is_self


class TestSamplePairs:
    def test_identical_clusterings_no_diff(self):
        dataset = dataset_from_maps(
            {"a": "x", "b": "x"}, {"a": "y", "b": "y"}, {"a": 1.0, "b": 2.0}
        )
        with pytest.raises(NoDiff):
            sample_pairs(dataset, 5, seed=1)

    def test_self_pairs_flagged(self, fixture_f):
        sample = sample_pairs(fixture_f, positive_pair_count(fixture_f), seed=3)
        selves = [p for p in sample if p.key.is_self]
        assert selves
        assert all(p.key.vantage_id == p.key.other_id for p in selves)
        assert all(p.key.category == "stable" for p in selves)

    def test_requesting_more_than_population_truncates(self, fixture_f):
        population = positive_pair_count(fixture_f)
        sample = sample_pairs(fixture_f, population + 50, seed=9)
        assert sample.truncated
        assert len(sample) == population

    def test_membership_invariant_reverified(self, fixture_f):
        sample = sample_pairs(fixture_f, 8, seed=11)
        for p in sample:
            fresh = pair_weight(fixture_f, p.key.vantage_id, p.key.other_id)
            assert fresh.key == p.key
            assert fresh.u == pytest.approx(p.u, rel=1e-12)
            assert fresh.label == p.label
            assert p.draw_count >= 1
            assert p.dt0 is not None and p.dt0 <= sample.horizon

    def test_deterministic_for_seed(self, fixture_f):
        a = sample_pairs(fixture_f, 8, seed=21)
        b = sample_pairs(fixture_f, 8, seed=21)
        assert a == b
        c = sample_pairs(fixture_f, 8, seed=22)
        assert c != a

    def test_empirical_category_mass_fraction(self, fixture_f):
        # Across seeds, the share of draw events landing on split pairs
        # approaches split_total / all_total.
        totals = category_totals(fixture_f)
        expected = totals.split_total / totals.all_total
        split_draws = 0
        total_draws = 0
        for seed in range(150):
            sample = sample_pairs(fixture_f, positive_pair_count(fixture_f), seed=seed)
            for p in sample:
                total_draws += p.draw_count
                if p.key.category == "split":
                    split_draws += p.draw_count
        sigma = math.sqrt(expected * (1 - expected) / total_draws)
        # Draw counts are correlated within a seed; allow a wide band.
        assert split_draws / total_draws == pytest.approx(expected, abs=6 * sigma)


class TestExportJudgementTasks:
    def test_budget_zero_exports_nothing_keeps_sample(self, fixture_f):
        sample = sample_pairs(fixture_f, 8, seed=2)
        result = export_judgement_tasks(sample, budget=0)
        assert result.tasks == ()
        assert result.sample == sample

    def test_only_self_pairs_export_nothing(self, fixture_f):
        full = sample_pairs(fixture_f, positive_pair_count(fixture_f), seed=4)
        selves = tuple(p for p in full if p.key.is_self)
        sample = replace(full, pairs=selves)
        result = export_judgement_tasks(sample, budget=5)
        assert result.tasks == ()
        assert not result.budget_filled
        assert len(result.sample) == len(selves)

    def test_symmetric_duplicates_collapse(self, fixture_f):
        full = sample_pairs(fixture_f, positive_pair_count(fixture_f), seed=6)
        keys = {(p.key.vantage_id, p.key.other_id) for p in full}
        assert ("b", "c") in keys and ("c", "b") in keys
        result = export_judgement_tasks(full, budget=100)
        ids = [t.task_id for t in result.tasks]
        assert len(ids) == len(set(ids))
        assert task_id_for("b", "c") == task_id_for("c", "b")
        assert sum(1 for t in result.tasks if {t.item_a, t.item_b} == {"b", "c"}) == 1

    def test_budget_filled_exactly(self, fixture_f):
        full = sample_pairs(fixture_f, positive_pair_count(fixture_f), seed=7)
        result = export_judgement_tasks(full, budget=3)
        assert len(result.tasks) == 3
        assert result.budget_filled
        # The retained sample is a prefix of the draw process: fewer or
        # equal draws per pair, every retained pair actually drawn.
        original = {(p.key.vantage_id, p.key.other_id): p.draw_count for p in full}
        for p in result.sample:
            assert p.draw_count >= 1
            assert p.draw_count <= original[(p.key.vantage_id, p.key.other_id)]

    def test_budget_beyond_available_returns_all(self, fixture_f):
        full = sample_pairs(fixture_f, positive_pair_count(fixture_f), seed=8)
        result = export_judgement_tasks(full, budget=10_000)
        assert not result.budget_filled
        unordered = {
            task_id_for(p.key.vantage_id, p.key.other_id)
            for p in full
            if not p.key.is_self
        }
        assert len(result.tasks) == len(unordered)
        # Replaying the full horizon reproduces the stored draw counts.
        assert {
            (p.key.vantage_id, p.key.other_id): p.draw_count for p in result.sample
        } == {(p.key.vantage_id, p.key.other_id): p.draw_count for p in full}

    def test_task_rows_are_blinded(self, fixture_f):
        full = sample_pairs(fixture_f, positive_pair_count(fixture_f), seed=10)
        result = export_judgement_tasks(full, budget=4)
        for task in result.tasks:
            assert set(vars(task)) == {"task_id", "item_a", "item_b"}
            assert task.item_a < task.item_b
