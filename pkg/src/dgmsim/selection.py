"""Systematic dataset selection: screening, count bounds, subset rules.

Screening operates on structured metadata records rather than raw
publications: every eligibility judgment is encoded as a metadata value and
criteria are declarative predicates over those values. This keeps the whole
pipeline re-runnable and the attrition accounting exact.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SelectionError

REQUIREMENTS = ("R1-accessibility", "R2-domain", "R3-information")
PHASES = ("inclusion", "exclusion")
LEVELS = ("dataset", "subset")
OPERATORS = ("=", "!=", "<", "<=", ">", ">=", "in", "has")


# --------------------------------------------------------------------------- #
# Domain types
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class DatasetRecord:
    """One candidate dataset: identifier, locator, and screening metadata."""

    id: str
    source: str = ""
    metadata: dict = field(default_factory=dict)
    payload: str | None = None


@dataclass(frozen=True)
class EligibilityCriterion:
    """One declarative inclusion/exclusion predicate over record metadata."""

    id: str
    level: str
    requirement: str
    phase: str
    key: str
    op: str
    value: object
    note: str = ""

    def __post_init__(self):
        if self.level not in LEVELS:
            raise SelectionError(f"criterion {self.id}: unknown level {self.level!r}")
        if self.requirement not in REQUIREMENTS:
            raise SelectionError(
                f"criterion {self.id}: unknown requirement {self.requirement!r}"
            )
        if self.phase not in PHASES:
            raise SelectionError(f"criterion {self.id}: unknown phase {self.phase!r}")
        if self.op not in OPERATORS:
            raise SelectionError(f"criterion {self.id}: unknown operator {self.op!r}")

    def evaluate(self, record: DatasetRecord) -> bool:
        """Evaluate the predicate; raises KeyError when the key is missing."""
        actual = record.metadata[self.key]
        op, expected = self.op, self.value
        if op == "=":
            return actual == expected
        if op == "!=":
            return actual != expected
        if op == "<":
            return actual < expected
        if op == "<=":
            return actual <= expected
        if op == ">":
            return actual > expected
        if op == ">=":
            return actual >= expected
        if op == "in":
            return actual in expected
        if op == "has":
            return expected in actual
        raise SelectionError(f"criterion {self.id}: unknown operator {op!r}")


@dataclass(frozen=True)
class SelectionStage:
    """One attrition step: how many records were assessed and removed."""

    criterion_id: str
    assessed: int
    removed: int
    unassessable: bool = False


@dataclass
class SelectionLog:
    """PRISMA-style accounting of the screening pipeline."""

    initial: int
    stages: list[SelectionStage] = field(default_factory=list)
    final_ids: list[str] = field(default_factory=list)
    seed: int | None = None

    @property
    def final_count(self) -> int:
        return len(self.final_ids)

    def count_after(self, criterion_id: str) -> int:
        """Remaining record count after the named stage has been applied."""
        remaining = self.initial
        found = False
        for stage in self.stages:
            remaining -= stage.removed
            if stage.criterion_id == criterion_id and not stage.unassessable:
                found = True
                break
        if not found:
            raise SelectionError(f"no stage for criterion {criterion_id!r}")
        return remaining

    def check_balance(self) -> bool:
        return self.initial - sum(s.removed for s in self.stages) == self.final_count

    def to_dict(self) -> dict:
        return {
            "initial": self.initial,
            "stages": [
                {
                    "criterion_id": s.criterion_id,
                    "assessed": s.assessed,
                    "removed": s.removed,
                    "unassessable": s.unassessable,
                }
                for s in self.stages
            ],
            "final_ids": list(self.final_ids),
            "seed": self.seed,
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def flow_text(self) -> str:
        """Plain-text PRISMA-style flow summary."""
        lines = [f"Records identified: {self.initial}"]
        remaining = self.initial
        for stage in self.stages:
            remaining -= stage.removed
            tag = " (unassessable)" if stage.unassessable else ""
            lines.append(
                f"  [{stage.criterion_id}]{tag} assessed {stage.assessed}, "
                f"removed {stage.removed}, remaining {remaining}"
            )
        if self.seed is not None:
            lines.append(f"Random down-selection seed: {self.seed}")
        lines.append(f"Records selected: {self.final_count}")
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------- #
# Screening
# --------------------------------------------------------------------------- #

def screen(
    database: list[DatasetRecord],
    criteria: list[EligibilityCriterion],
) -> tuple[list[DatasetRecord], SelectionLog]:
    """Apply dataset-level criteria in order and log per-criterion attrition.

    A record survives iff it satisfies every inclusion predicate and no
    exclusion predicate. Records missing a referenced metadata key are
    removed under a dedicated unassessable stage for that criterion. A
    criterion whose key appears in no record at all is a configuration error.
    Inclusion criteria must precede exclusion criteria.
    """
    ids = [r.id for r in database]
    if len(set(ids)) != len(ids):
        raise SelectionError("duplicate record ids in database")

    dataset_criteria = [c for c in criteria if c.level == "dataset"]
    seen_exclusion = False
    for crit in dataset_criteria:
        if crit.phase == "exclusion":
            seen_exclusion = True
        elif seen_exclusion:
            raise SelectionError(
                f"criterion {crit.id}: inclusion criteria must precede exclusions"
            )

    all_keys = set()
    for record in database:
        all_keys.update(record.metadata.keys())
    for crit in dataset_criteria:
        if database and crit.key not in all_keys:
            raise SelectionError(
                f"criterion {crit.id} references metadata key {crit.key!r} "
                f"present in no record"
            )

    remaining = list(database)
    log = SelectionLog(initial=len(database))
    for crit in dataset_criteria:
        assessed = len(remaining)
        kept, unassessable = [], []
        removed = 0
        for record in remaining:
            try:
                satisfied = crit.evaluate(record)
            except KeyError:
                unassessable.append(record)
                continue
            keep = satisfied if crit.phase == "inclusion" else not satisfied
            if keep:
                kept.append(record)
            else:
                removed += 1
        log.stages.append(SelectionStage(crit.id, assessed, removed))
        if unassessable:
            log.stages.append(
                SelectionStage(crit.id, assessed, len(unassessable), unassessable=True)
            )
        remaining = kept

    log.final_ids = [r.id for r in remaining]
    return remaining, log


# --------------------------------------------------------------------------- #
# Count bounds
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class CountBoundResult:
    """Outcome of the min/max dataset-count check."""

    status: str  # "ok" | "too-few" | "downselected"
    records: tuple[DatasetRecord, ...]
    deficit: int = 0
    seed: int | None = None


def enforce_count_bounds(
    selected: list[DatasetRecord], minimum: int, maximum: int, seed: int
) -> CountBoundResult:
    """Check bounds; down-select uniformly at random when over the maximum.

    Never fabricates records: a shortfall is reported as ``too-few`` with the
    deficit, and the caller is expected to expand the database. Down-selection
    preserves input order and is deterministic given the seed.
    """
    if minimum > maximum:
        raise SelectionError(f"minimum {minimum} exceeds maximum {maximum}")
    if minimum < 1:
        raise SelectionError("minimum dataset count must be at least 1")
    n = len(selected)
    if n < minimum:
        return CountBoundResult("too-few", tuple(selected), deficit=minimum - n)
    if n > maximum:
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(n, size=maximum, replace=False))
        return CountBoundResult(
            "downselected", tuple(selected[i] for i in keep), seed=seed
        )
    return CountBoundResult("ok", tuple(selected))


# --------------------------------------------------------------------------- #
# Subset rules
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class SubsetSelection:
    """Arms and outcome chosen within one selected dataset."""

    arm_ids: tuple[str, ...]
    outcome_id: str | None


def apply_subset_rules(record: DatasetRecord, rules: list[dict]) -> SubsetSelection:
    """Apply ordered subset-level rules to one record.

    Supported rule kinds:

    * ``largest-arms``: keep the ``count`` arms with the largest sample
      sizes; ties are broken by declared metadata order. Expects metadata
      ``arms`` as a list of ``{"id", "n"}`` mappings.
    * ``preferred-outcome``: among outcomes with complete data, choose the
      best priority rank (1 = most important); remaining ties go to the
      largest sample size, then declared order. Expects metadata
      ``outcomes`` as a list of ``{"id", "priority", "complete", "n"}``.
    """
    arm_ids: tuple[str, ...] = ()
    outcome_id: str | None = None
    for rule in rules:
        kind = rule.get("kind")
        if kind == "largest-arms":
            count = int(rule.get("count", 2))
            arms = record.metadata.get("arms")
            if arms is None:
                raise SelectionError(f"record {record.id}: no 'arms' metadata")
            if len(arms) < count:
                raise SelectionError(
                    f"record {record.id}: {len(arms)} arm(s), need {count}"
                )
            # stable sort on -n keeps declared order among equal sizes
            order = sorted(range(len(arms)), key=lambda i: -arms[i]["n"])
            arm_ids = tuple(arms[i]["id"] for i in sorted(order[:count]))
        elif kind == "preferred-outcome":
            outcomes = record.metadata.get("outcomes")
            if outcomes is None:
                raise SelectionError(f"record {record.id}: no 'outcomes' metadata")
            usable = [o for o in outcomes if o.get("complete", True)]
            if not usable:
                raise SelectionError(f"record {record.id}: no complete outcome")
            best = min(
                range(len(usable)),
                key=lambda i: (usable[i].get("priority", 1), -usable[i].get("n", 0), i),
            )
            outcome_id = usable[best]["id"]
        else:
            raise SelectionError(f"unknown subset rule kind {kind!r}")
    return SubsetSelection(arm_ids=arm_ids, outcome_id=outcome_id)


# --------------------------------------------------------------------------- #
# File ingestion
# --------------------------------------------------------------------------- #

def load_criteria(path) -> list[EligibilityCriterion]:
    """Read a JSON array of criterion objects."""
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, list):
        raise SelectionError(f"criteria file {path}: expected a JSON array")
    criteria = []
    for item in raw:
        try:
            criteria.append(
                EligibilityCriterion(
                    id=item["id"],
                    level=item.get("level", "dataset"),
                    requirement=item["requirement"],
                    phase=item["phase"],
                    key=item["key"],
                    op=item["op"],
                    value=item["value"],
                    note=item.get("note", ""),
                )
            )
        except KeyError as exc:
            raise SelectionError(f"criteria file {path}: missing field {exc}") from exc
    return criteria


def load_database(path) -> list[DatasetRecord]:
    """Read a record database from JSON-lines or the tabular CSV schema."""
    path = Path(path)
    if path.suffix == ".csv":
        return load_ordinal_csv(path)
    records = []
    with path.open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            data = json.loads(line)
            records.append(
                DatasetRecord(
                    id=data["id"],
                    source=data.get("source", ""),
                    metadata=data.get("metadata", {}),
                    payload=data.get("payload"),
                )
            )
    return records


def write_records(records: list[DatasetRecord], path) -> None:
    with Path(path).open("w") as fh:
        for record in records:
            fh.write(
                json.dumps(
                    {
                        "id": record.id,
                        "source": record.source,
                        "metadata": record.metadata,
                        "payload": record.payload,
                    }
                )
                + "\n"
            )


ORDINAL_CSV_COLUMNS = (
    ["dataset_id", "publication", "condition", "measure", "n1", "n2"]
    + [f"p1_{k}" for k in range(1, 8)]
    + [f"p2_{k}" for k in range(1, 8)]
)


def load_ordinal_csv(path) -> list[DatasetRecord]:
    """Read the two-arm ordinal dataset schema (7 categories per group)."""
    records = []
    with Path(path).open() as fh:
        reader = csv.DictReader(fh)
        missing = set(ORDINAL_CSV_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise SelectionError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            p1 = [float(row[f"p1_{k}"]) for k in range(1, 8)]
            p2 = [float(row[f"p2_{k}"]) for k in range(1, 8)]
            records.append(
                DatasetRecord(
                    id=row["dataset_id"],
                    source=row["publication"],
                    metadata={
                        "condition": row["condition"],
                        "measure": row["measure"],
                        "n1": int(row["n1"]),
                        "n2": int(row["n2"]),
                        "p1": p1,
                        "p2": p2,
                    },
                )
            )
    return records


def write_ordinal_csv(records: list[DatasetRecord], path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ORDINAL_CSV_COLUMNS)
        for record in records:
            md = record.metadata
            writer.writerow(
                [record.id, record.source, md.get("condition", ""), md.get("measure", ""),
                 md["n1"], md["n2"]]
                + list(md["p1"])
                + list(md["p2"])
            )
