import itertools

import pytest

from dgmsim.errors import SelectionError
from dgmsim.selection import (
    DatasetRecord,
    EligibilityCriterion,
    apply_subset_rules,
    enforce_count_bounds,
    load_criteria,
    load_database,
    load_ordinal_csv,
    screen,
)


def crit(id, phase, key, op, value, requirement="R2-domain"):
    return EligibilityCriterion(id=id, level="dataset", requirement=requirement,
                                phase=phase, key=key, op=op, value=value)


def rec(id, **metadata):
    return DatasetRecord(id=id, metadata=metadata)


class TestScreenFixtures:
    def test_nejm_attrition(self, fixtures_dir):
        database = load_database(fixtures_dir / "nejm_database.jsonl")
        criteria = load_criteria(fixtures_dir / "nejm_criteria.json")
        assert len(database) == 270
        selected, log = screen(database, criteria)
        assert log.count_after("incl-ordinal-outcome") == 96
        assert log.count_after("excl-overlapping-data") == 94
        assert len(selected) == 15
        assert log.check_balance()

    def test_tcga_attrition(self, fixtures_dir):
        database = load_database(fixtures_dir / "tcga_database.jsonl")
        criteria = load_criteria(fixtures_dir / "tcga_criteria.json")
        assert len(database) == 33
        selected, log = screen(database, criteria)
        removed = {s.criterion_id: s.removed for s in log.stages}
        assert removed["excl-no-tumor-normal"] == 10
        assert removed["excl-few-matched-pairs"] == 9
        assert len(selected) == 14

    def test_empty_criteria_selects_all(self, fixtures_dir):
        database = load_database(fixtures_dir / "tcga_database.jsonl")
        selected, log = screen(database, [])
        assert len(selected) == len(database)
        assert log.stages == []
        assert log.initial == len(database)

    def test_flow_text(self, fixtures_dir):
        database = load_database(fixtures_dir / "nejm_database.jsonl")
        criteria = load_criteria(fixtures_dir / "nejm_criteria.json")
        _, log = screen(database, criteria)
        text = log.flow_text()
        assert "Records identified: 270" in text
        assert "Records selected: 15" in text


class TestScreenSemantics:
    DB = [
        rec("a", rct=True, k=7),
        rec("b", rct=True, k=5),
        rec("c", rct=False, k=7),
    ]

    def test_inclusion_then_exclusion(self):
        selected, log = screen(
            self.DB,
            [crit("i", "inclusion", "rct", "=", True),
             crit("e", "exclusion", "k", "!=", 7)],
        )
        assert [r.id for r in selected] == ["a"]
        assert log.check_balance()

    def test_inclusion_after_exclusion_rejected(self):
        with pytest.raises(SelectionError, match="precede"):
            screen(self.DB, [crit("e", "exclusion", "k", "!=", 7),
                             crit("i", "inclusion", "rct", "=", True)])

    def test_unassessable_record_removed_and_logged(self):
        db = self.DB + [rec("d", rct=True)]  # no "k" key
        selected, log = screen(
            db,
            [crit("i", "inclusion", "rct", "=", True),
             crit("e", "exclusion", "k", "!=", 7)],
        )
        assert [r.id for r in selected] == ["a"]
        unassessable = [s for s in log.stages if s.unassessable]
        assert len(unassessable) == 1 and unassessable[0].removed == 1
        assert log.check_balance()

    def test_unknown_key_is_config_error(self):
        with pytest.raises(SelectionError, match="present in no record"):
            screen(self.DB, [crit("x", "inclusion", "missing_key", "=", 1)])

    def test_exclusion_monotone(self):
        base, _ = screen(self.DB, [crit("i", "inclusion", "rct", "=", True)])
        tighter, _ = screen(
            self.DB,
            [crit("i", "inclusion", "rct", "=", True),
             crit("e", "exclusion", "k", "<", 6)],
        )
        assert {r.id for r in tighter} <= {r.id for r in base}

    def test_exclusion_order_changes_log_not_set(self):
        db = [rec(f"r{i}", a=i % 2, b=i % 3) for i in range(12)]
        exclusions = [crit("ea", "exclusion", "a", "=", 0),
                      crit("eb", "exclusion", "b", "=", 1)]
        finals = set()
        for perm in itertools.permutations(exclusions):
            selected, log = screen(db, list(perm))
            assert log.check_balance()
            finals.add(tuple(sorted(r.id for r in selected)))
        assert len(finals) == 1

    def test_operator_in_and_has(self):
        db = [rec("a", tag="x", labels=["p", "q"]), rec("b", tag="y", labels=["r"])]
        selected, _ = screen(db, [crit("i", "inclusion", "tag", "in", ["x", "z"])])
        assert [r.id for r in selected] == ["a"]
        selected, _ = screen(db, [crit("i", "inclusion", "labels", "has", "r")])
        assert [r.id for r in selected] == ["b"]


class TestCountBounds:
    RECORDS = [rec(f"r{i:02d}") for i in range(15)]

    def test_within_bounds(self):
        result = enforce_count_bounds(self.RECORDS, 3, 20, seed=1)
        assert result.status == "ok"
        assert len(result.records) == 15

    def test_downselection_deterministic(self):
        first = enforce_count_bounds(self.RECORDS, 3, 10, seed=7)
        second = enforce_count_bounds(self.RECORDS, 3, 10, seed=7)
        assert first.status == "downselected"
        assert len(first.records) == 10
        assert [r.id for r in first.records] == [r.id for r in second.records]
        other_seed = enforce_count_bounds(self.RECORDS, 3, 10, seed=8)
        assert [r.id for r in other_seed.records] != [r.id for r in first.records]

    def test_too_few(self):
        result = enforce_count_bounds(self.RECORDS[:2], 3, 20, seed=1)
        assert result.status == "too-few"
        assert result.deficit == 1

    def test_bad_bounds(self):
        with pytest.raises(SelectionError):
            enforce_count_bounds(self.RECORDS, 10, 3, seed=1)


class TestSubsetRules:
    def test_two_largest_arms(self):
        record = rec("rosas2021", arms=[
            {"id": "tocilizumab", "n": 294},
            {"id": "placebo", "n": 144},
            {"id": "open-label", "n": 30},
        ])
        subset = apply_subset_rules(record, [{"kind": "largest-arms", "count": 2}])
        assert subset.arm_ids == ("tocilizumab", "placebo")

    def test_two_arms_identity(self):
        record = rec("x", arms=[{"id": "a", "n": 50}, {"id": "b", "n": 40}])
        subset = apply_subset_rules(record, [{"kind": "largest-arms", "count": 2}])
        assert subset.arm_ids == ("a", "b")

    def test_tie_broken_by_declared_order(self):
        record = rec("x", arms=[
            {"id": "a", "n": 40}, {"id": "b", "n": 50}, {"id": "c", "n": 40},
        ])
        subset = apply_subset_rules(record, [{"kind": "largest-arms", "count": 2}])
        assert subset.arm_ids == ("a", "b")

    def test_outcome_priority_falls_through_to_complete(self):
        record = rec("x", outcomes=[
            {"id": "primary", "priority": 1, "complete": False, "n": 100},
            {"id": "secondary", "priority": 2, "complete": True, "n": 100},
        ])
        subset = apply_subset_rules(record, [{"kind": "preferred-outcome"}])
        assert subset.outcome_id == "secondary"

    def test_outcome_sample_size_tiebreak(self):
        record = rec("x", outcomes=[
            {"id": "o1", "priority": 1, "complete": True, "n": 80},
            {"id": "o2", "priority": 1, "complete": True, "n": 120},
        ])
        subset = apply_subset_rules(record, [{"kind": "preferred-outcome"}])
        assert subset.outcome_id == "o2"

    def test_too_few_arms(self):
        record = rec("x", arms=[{"id": "a", "n": 10}])
        with pytest.raises(SelectionError, match="arm"):
            apply_subset_rules(record, [{"kind": "largest-arms", "count": 2}])


class TestCsvIngestion:
    def test_table_schema_round_trip(self, fixtures_dir):
        records = load_ordinal_csv(fixtures_dir / "ordinal_datasets.csv")
        assert len(records) == 15
        tao = next(r for r in records if r.id == "tao2022")
        assert tao.metadata["n1"] == 226 and tao.metadata["n2"] == 114
        assert tao.metadata["p1"][6] == 0.37
