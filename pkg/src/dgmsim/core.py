"""Core DGM machinery: component taxonomy, parameter vectors, and design crossing.

A data-generating mechanism (DGM) is a model structure (one of four closed
families) plus numeric parameter values. Parameters are split into
researcher-specified values (lambda) and values derived from real datasets
(theta). This module validates component declarations against the family's
required parameter set and crosses enumerated theta vectors with
researcher-specified grids into a deterministic list of DGM instances.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import TaxonomyError

# --------------------------------------------------------------------------- #
# Family definitions
# --------------------------------------------------------------------------- #

#: Required parameter ids and allowed structure options per family. The four
#: families are a closed set; there is no pluggable structure algebra.
FAMILIES: dict[str, dict] = {
    "ordinal-two-arm": {
        "parameters": {"n_groups", "n_obs", "n_categories", "pi_pair"},
        "structure_options": {},
    },
    "survival-two-arm": {
        "parameters": {"n_groups", "n_obs", "rate1", "rate2", "censor_upper"},
        "structure_options": {"event_dist": {"exponential", "weibull"}},
    },
    "meta-analysis": {
        "parameters": {
            "n_groups", "n_study", "effect_mean", "between_var",
            "size_min", "size_max", "group1_means", "within_var",
        },
        "structure_options": {},
    },
    "de-counts": {
        "parameters": {
            "n_groups", "n_obs", "n_genes", "p_de", "p_up",
            "min_fc", "fc_rate", "expr",
        },
        "structure_options": {},
    },
}

SPECIFICATIONS = ("researcher-interest", "researcher-convenience", "real-data-based")
KINDS = ("model-structure-part", "parameter")
KNOWLEDGE = ("known", "unknown")


def _normalize_value(value):
    """Coerce a parameter value to float / str / nested tuple of floats."""
    if isinstance(value, bool):
        raise TaxonomyError(f"boolean is not a valid parameter value: {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        return value
    if isinstance(value, (list, tuple)):
        return tuple(_normalize_value(v) for v in value)
    raise TaxonomyError(f"unsupported parameter value type: {type(value).__name__}")


# --------------------------------------------------------------------------- #
# Domain types
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class ComponentSpec:
    """One DGM component with its taxonomy classification.

    ``target_related`` is only meaningful for unknown components: whether the
    component appears (explicitly or implicitly) in the simulation target.
    """

    id: str
    kind: str
    specification: str
    knowledge: str
    target_related: bool = False
    constraint: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise TaxonomyError(f"component {self.id}: unknown kind {self.kind!r}")
        if self.specification not in SPECIFICATIONS:
            raise TaxonomyError(
                f"component {self.id}: unknown specification {self.specification!r}"
            )
        if self.knowledge not in KNOWLEDGE:
            raise TaxonomyError(
                f"component {self.id}: unknown knowledge class {self.knowledge!r}"
            )
        if self.target_related and self.knowledge == "known":
            raise TaxonomyError(
                f"component {self.id}: target_related requires knowledge=unknown"
            )

    @property
    def is_researcher_specified(self) -> bool:
        return self.specification in ("researcher-interest", "researcher-convenience")


@dataclass(frozen=True)
class ParameterVector:
    """Ordered named parameter values with provenance.

    ``provenance`` is ``"researcher"``, a source dataset id, or
    ``"aggregated"`` (values produced by aggregated inference). Values are
    floats, tuples (possibly nested, e.g. a pair of probability tuples), or
    strings referencing an external value pool (e.g. an expression dataset id).
    """

    entries: tuple[tuple[str, object], ...]
    provenance: str = "researcher"

    @classmethod
    def from_dict(cls, entries: dict, provenance: str = "researcher") -> "ParameterVector":
        return cls(
            entries=tuple((k, _normalize_value(v)) for k, v in entries.items()),
            provenance=provenance,
        )

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.entries)

    def as_dict(self) -> dict:
        return dict(self.entries)

    def get(self, param_id: str):
        for k, v in self.entries:
            if k == param_id:
                return v
        raise KeyError(param_id)

    def __contains__(self, param_id: str) -> bool:
        return any(k == param_id for k, _ in self.entries)


@dataclass(frozen=True)
class ModelStructureConfig:
    """Family identifier plus family-specific discrete structure choices."""

    family: str
    structure_options: tuple[tuple[str, object], ...] = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise TaxonomyError(f"unknown family {self.family!r}")
        allowed = FAMILIES[self.family]["structure_options"]
        for key, value in self.structure_options:
            if key not in allowed:
                raise TaxonomyError(
                    f"family {self.family}: unknown structure option {key!r}"
                )
            if value not in allowed[key]:
                raise TaxonomyError(
                    f"family {self.family}: structure option {key}={value!r} "
                    f"not in {sorted(allowed[key])}"
                )

    @classmethod
    def create(cls, family: str, options: dict | None = None) -> "ModelStructureConfig":
        items = tuple(sorted((options or {}).items()))
        return cls(family=family, structure_options=items)

    @property
    def required_parameters(self) -> set[str]:
        return set(FAMILIES[self.family]["parameters"])

    def options_dict(self) -> dict:
        return dict(self.structure_options)


@dataclass(frozen=True)
class DGMInstance:
    """One fully specified generator: structure + lambda values + theta values."""

    structure: ModelStructureConfig
    lam: ParameterVector
    theta: ParameterVector
    label: str

    def __post_init__(self):
        lam_ids = set(self.lam.ids)
        theta_ids = set(self.theta.ids)
        overlap = lam_ids & theta_ids
        if overlap:
            raise TaxonomyError(
                f"DGM {self.label}: parameters in both lambda and theta: {sorted(overlap)}"
            )
        required = self.structure.required_parameters
        covered = lam_ids | theta_ids
        missing = required - covered
        if missing:
            raise TaxonomyError(
                f"DGM {self.label}: missing required parameters {sorted(missing)}"
            )
        extra = covered - required
        if extra:
            raise TaxonomyError(
                f"DGM {self.label}: parameters unknown to family "
                f"{self.structure.family}: {sorted(extra)}"
            )

    def param(self, param_id: str):
        """Look up a parameter value regardless of lambda/theta placement."""
        if param_id in self.lam:
            return self.lam.get(param_id)
        return self.theta.get(param_id)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "family": self.structure.family,
            "structure": self.structure.options_dict(),
            "lambda": self.lam.as_dict(),
            "theta": self.theta.as_dict(),
            "provenance": self.theta.provenance,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DGMInstance":
        return cls(
            structure=ModelStructureConfig.create(data["family"], data.get("structure")),
            lam=ParameterVector.from_dict(data["lambda"], provenance="researcher"),
            theta=ParameterVector.from_dict(
                data["theta"], provenance=data.get("provenance", "researcher")
            ),
            label=data["label"],
        )


# --------------------------------------------------------------------------- #
# Component classification
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class Taxonomy:
    """Partition of parameter components by specification and knowledge class."""

    lambda_design: tuple[str, ...]
    lambda_target: tuple[str, ...]
    lambda_other: tuple[str, ...]
    theta_design: tuple[str, ...]
    theta_target: tuple[str, ...]
    theta_other: tuple[str, ...]
    structure_parts: tuple[str, ...]

    @property
    def lambda_ids(self) -> set[str]:
        return set(self.lambda_design) | set(self.lambda_target) | set(self.lambda_other)

    @property
    def theta_ids(self) -> set[str]:
        return set(self.theta_design) | set(self.theta_target) | set(self.theta_other)


def classify_components(
    components: list[ComponentSpec], structure: ModelStructureConfig
) -> Taxonomy:
    """Partition components into the six taxonomy cells and check coverage.

    The result is order-insensitive: ids within each cell are sorted. Raises
    ``TaxonomyError`` on duplicate ids, parameters missing from or unknown to
    the family, or a target flag on a known component (the latter is already
    rejected by ``ComponentSpec``).
    """
    if not components:
        raise TaxonomyError("component list is empty")
    seen: set[str] = set()
    for comp in components:
        if comp.id in seen:
            raise TaxonomyError(f"duplicate component id {comp.id!r}")
        seen.add(comp.id)

    params = [c for c in components if c.kind == "parameter"]
    parts = sorted(c.id for c in components if c.kind == "model-structure-part")

    declared = {c.id for c in params}
    required = structure.required_parameters
    missing = required - declared
    if missing:
        raise TaxonomyError(
            f"missing required parameter(s) for family {structure.family}: "
            f"{sorted(missing)}"
        )
    extra = declared - required
    if extra:
        raise TaxonomyError(
            f"parameter(s) not defined by family {structure.family}: {sorted(extra)}"
        )

    cells: dict[str, list[str]] = {
        "lambda_design": [], "lambda_target": [], "lambda_other": [],
        "theta_design": [], "theta_target": [], "theta_other": [],
    }
    for comp in params:
        side = "lambda" if comp.is_researcher_specified else "theta"
        if comp.knowledge == "known":
            cell = f"{side}_design"
        else:
            cell = f"{side}_target" if comp.target_related else f"{side}_other"
        cells[cell].append(comp.id)

    return Taxonomy(
        structure_parts=tuple(parts),
        **{k: tuple(sorted(v)) for k, v in cells.items()},
    )


# --------------------------------------------------------------------------- #
# Design crossing
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class LambdaGrid:
    """One researcher-specified design factor.

    ``ids`` usually holds a single parameter id; a joint factor binds several
    parameters that vary together (e.g. a sample size with its matched
    minimum fold change), in which case every value is a tuple aligned with
    ``ids``. ``labels``, when given, name the grid values in DGM labels.
    """

    ids: tuple[str, ...]
    values: tuple
    labels: tuple[str, ...] | None = None

    @classmethod
    def create(cls, ids, values, labels=None) -> "LambdaGrid":
        if isinstance(ids, str):
            ids = (ids,)
        ids = tuple(ids)
        norm = []
        for v in values:
            if len(ids) > 1:
                v = tuple(v)
                if len(v) != len(ids):
                    raise TaxonomyError(
                        f"joint grid {ids}: value {v!r} does not match id count"
                    )
                norm.append(tuple(_normalize_value(x) for x in v))
            else:
                norm.append(_normalize_value(v))
        if labels is not None:
            labels = tuple(labels)
            if len(labels) != len(norm):
                raise TaxonomyError(f"grid {ids}: {len(labels)} labels for {len(norm)} values")
        return cls(ids=ids, values=tuple(norm), labels=labels)

    def entry_items(self, index: int) -> list[tuple[str, object]]:
        value = self.values[index]
        if len(self.ids) == 1:
            return [(self.ids[0], value)]
        return list(zip(self.ids, value))


def _fmt_value(value) -> str:
    if isinstance(value, float):
        return str(int(value)) if value.is_integer() and abs(value) < 1e15 else repr(value)
    if isinstance(value, tuple):
        return "(" + ",".join(_fmt_value(v) for v in value) + ")"
    return str(value)


def _theta_sources(thetas) -> list[str | None]:
    """Provenance labels for theta vectors, disambiguated when repeated."""
    sources = [t.provenance if t is not None else None for t in thetas]
    counts: dict[str, int] = {}
    for s in sources:
        if s is not None:
            counts[s] = counts.get(s, 0) + 1
    seen: dict[str, int] = {}
    out = []
    for s in sources:
        if s is not None and counts[s] > 1:
            seen[s] = seen.get(s, 0) + 1
            out.append(f"{s}[{seen[s]}]")
        else:
            out.append(s)
    return out


def _instance_label(prefix, source, grids, grid_indices) -> str:
    lam_parts = []
    for grid, idx in zip(grids, grid_indices):
        if source is None and grid.labels is not None:
            source = grid.labels[idx]
            continue
        if len(grid.values) > 1:
            lam_parts.extend(f"{k}={_fmt_value(v)}" for k, v in grid.entry_items(idx))
    label = f"{prefix}:{source or '-'}"
    if lam_parts:
        label += "|" + ",".join(lam_parts)
    return label


def cross_design(
    theta_set,
    lambda_grids: list[LambdaGrid],
    structure: ModelStructureConfig,
    rule: str = "full-cross",
    label_prefix: str = "dgm",
) -> list[DGMInstance]:
    """Cross considered theta vectors with researcher grids into DGM instances.

    ``theta_set`` is a ``ConsideredParameterSet`` (or ``None`` for a study
    whose enumerated factor is itself researcher-specified, in which case the
    grids alone define the design). Under ``full-cross`` the output has
    ``len(theta_set) * prod(len(grid))`` instances with the theta index
    varying slowest, then grids in declared order (last grid fastest). Under
    ``paired`` every grid must have exactly one value per theta vector and
    values are zipped index-aligned.
    """
    thetas = list(theta_set.vectors) if theta_set is not None else [None]
    if theta_set is not None and not thetas:
        raise TaxonomyError("theta set is empty")
    if not lambda_grids and theta_set is None:
        raise TaxonomyError("no design factors: theta set and lambda grids both empty")
    for grid in lambda_grids:
        if not grid.values:
            raise TaxonomyError(f"lambda grid {grid.ids} is empty")

    if rule not in ("full-cross", "paired"):
        raise TaxonomyError(f"unknown crossing rule {rule!r}")

    instances = []
    if rule == "paired":
        if theta_set is None:
            raise TaxonomyError("paired crossing requires a theta set")
        for grid in lambda_grids:
            if len(grid.values) != len(thetas):
                raise TaxonomyError(
                    f"paired crossing: grid {grid.ids} has {len(grid.values)} values "
                    f"for {len(thetas)} theta vectors"
                )
        index_tuples = [(i, tuple([i] * len(lambda_grids))) for i in range(len(thetas))]
    else:
        import itertools

        ranges = [range(len(g.values)) for g in lambda_grids]
        index_tuples = [
            (ti, combo)
            for ti in range(len(thetas))
            for combo in itertools.product(*ranges)
        ]

    sources = _theta_sources(thetas)
    for ti, grid_indices in index_tuples:
        theta = thetas[ti]
        lam_entries: list[tuple[str, object]] = []
        for grid, idx in zip(lambda_grids, grid_indices):
            lam_entries.extend(grid.entry_items(idx))
        lam = ParameterVector(entries=tuple(lam_entries), provenance="researcher")
        theta_vec = theta if theta is not None else ParameterVector(entries=())
        label = _instance_label(label_prefix, sources[ti], lambda_grids, grid_indices)
        instances.append(
            DGMInstance(structure=structure, lam=lam, theta=theta_vec, label=label)
        )
    return instances


# --------------------------------------------------------------------------- #
# Serialization
# --------------------------------------------------------------------------- #

def write_dgm_instances(instances: list[DGMInstance], path) -> None:
    """Write instances as JSON-lines, one object per instance."""
    path = Path(path)
    with path.open("w") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_dict()) + "\n")


def read_dgm_instances(path) -> list[DGMInstance]:
    path = Path(path)
    instances = []
    with path.open() as fh:
        for line in fh:
            line = line.strip()
            if line:
                instances.append(DGMInstance.from_dict(json.loads(line)))
    return instances
