"""Parameter inference from selected datasets and mapping to parameter vectors.

Two inference modes per parameter: direct (one value per dataset, index
aligned) and aggregated (a chosen number of values generated from
dataset-level summaries such as ranges or fitted distributions). Inferred
value sets are then mapped to the considered parameter vectors one-to-one
(per dataset) or factorially.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .core import ParameterVector, _normalize_value
from .errors import InferenceError
from .families.ordinal import estimate_ordinal_probs, normalize_probs
from .selection import DatasetRecord

# --------------------------------------------------------------------------- #
# Inferred value sets
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class InferredValueSet:
    """Values inferred for one parameter, with full provenance.

    Direct mode: one value per source dataset, index aligned with
    ``dataset_ids``. Aggregated mode: exactly ``count`` values produced by
    ``strategy`` (with ``seed`` when sampling was involved).
    """

    parameter: str
    values: tuple
    mode: str  # "direct" | "aggregated"
    dataset_ids: tuple[str, ...] = ()
    strategy: str | None = None
    seed: int | None = None
    count: int | None = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if self.mode not in ("direct", "aggregated"):
            raise InferenceError(f"unknown inference mode {self.mode!r}")
        if self.mode == "direct" and len(self.values) != len(self.dataset_ids):
            raise InferenceError(
                f"parameter {self.parameter}: {len(self.values)} values for "
                f"{len(self.dataset_ids)} datasets"
            )
        if self.mode == "aggregated" and len(self.values) != self.count:
            raise InferenceError(
                f"parameter {self.parameter}: {len(self.values)} values, "
                f"declared count {self.count}"
            )

    def to_dict(self) -> dict:
        return {
            "parameter": self.parameter,
            "values": [list(v) if isinstance(v, tuple) else v for v in self.values],
            "mode": self.mode,
            "dataset_ids": list(self.dataset_ids),
            "strategy": self.strategy,
            "seed": self.seed,
            "count": self.count,
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class ConsideredParameterSet:
    """The enumerated parameter vectors, each defining one DGM with the structure.

    ``multiplicity`` records how many raw factorial combinations collapsed
    into each vector (always 1 for one-to-one).
    """

    vectors: tuple[ParameterVector, ...]
    design: str  # "one-to-one" | "full-factorial" | "partial-factorial"
    multiplicity: tuple[int, ...]

    def __post_init__(self):
        if len(self.vectors) != len(self.multiplicity):
            raise InferenceError("multiplicity must align with vectors")
        schemas = {v.ids for v in self.vectors}
        if len(schemas) > 1:
            raise InferenceError("vectors disagree on parameter ids")

    def __len__(self) -> int:
        return len(self.vectors)

    def to_dict(self) -> dict:
        return {
            "design": self.design,
            "multiplicity": list(self.multiplicity),
            "vectors": [
                {"provenance": v.provenance, "entries": _jsonify_entries(v)}
                for v in self.vectors
            ],
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_dict(cls, data: dict) -> "ConsideredParameterSet":
        vectors = tuple(
            ParameterVector.from_dict(v["entries"], provenance=v["provenance"])
            for v in data["vectors"]
        )
        return cls(
            vectors=vectors,
            design=data["design"],
            multiplicity=tuple(data["multiplicity"]),
        )

    @classmethod
    def read_json(cls, path) -> "ConsideredParameterSet":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _jsonify_entries(vector: ParameterVector) -> dict:
    out = {}
    for key, value in vector.entries:
        out[key] = _listify(value)
    return out


def _listify(value):
    if isinstance(value, tuple):
        return [_listify(v) for v in value]
    return value


# --------------------------------------------------------------------------- #
# Estimators
# --------------------------------------------------------------------------- #

def _est_total_observations(record: DatasetRecord):
    return float(record.metadata["n1"] + record.metadata["n2"])


def _est_group_sizes(record: DatasetRecord):
    return (float(record.metadata["n1"]), float(record.metadata["n2"]))


def _est_ordinal_proportions(record: DatasetRecord):
    """Published per-group proportions, renormalized against rounding error."""
    return (
        normalize_probs(record.metadata["p1"]),
        normalize_probs(record.metadata["p2"]),
    )


def _est_ordinal_proportions_from_counts(record: DatasetRecord):
    counts = np.asarray(
        [record.metadata["counts1"], record.metadata["counts2"]], dtype=float
    )
    return estimate_ordinal_probs(counts)


def _est_expression_reference(record: DatasetRecord):
    """Pool-backed parameters carry the dataset id; values are drawn at run time."""
    return record.id


ESTIMATORS = {
    "total-observations": _est_total_observations,
    "group-sizes": _est_group_sizes,
    "ordinal-proportions": _est_ordinal_proportions,
    "ordinal-proportions-from-counts": _est_ordinal_proportions_from_counts,
    "expression-reference": _est_expression_reference,
}


def resolve_estimator(spec):
    """Map an estimator spec (name, ``metadata:<key>``, or callable) to a callable."""
    if callable(spec):
        return spec
    if isinstance(spec, str):
        if spec.startswith("metadata:"):
            key = spec.split(":", 1)[1]
            return lambda record: _normalize_value(record.metadata[key])
        if spec in ESTIMATORS:
            return ESTIMATORS[spec]
    raise InferenceError(f"unknown estimator {spec!r}")


def direct_infer(
    datasets: list[DatasetRecord], estimators: dict
) -> list[InferredValueSet]:
    """Apply each parameter's estimator to every dataset (Table 4, left column).

    Returns one direct-mode value set per parameter, in declaration order,
    index aligned with the dataset order. An estimator failure aborts the
    run and names the offending dataset: the selection criteria are supposed
    to have guaranteed estimability.
    """
    if not datasets:
        raise InferenceError("no datasets to infer from")
    ids = tuple(r.id for r in datasets)
    out = []
    for parameter, spec in estimators.items():
        fn = resolve_estimator(spec)
        values = []
        for record in datasets:
            try:
                values.append(_normalize_value(fn(record)))
            except Exception as exc:
                raise InferenceError(
                    f"estimator for {parameter!r} failed on dataset {record.id!r}: {exc}"
                ) from exc
        out.append(
            InferredValueSet(
                parameter=parameter, values=tuple(values), mode="direct",
                dataset_ids=ids,
            )
        )
    return out


# --------------------------------------------------------------------------- #
# Aggregated inference
# --------------------------------------------------------------------------- #

AGGREGATION_STRATEGIES = ("range-equidistant", "range-uniform-sample", "fit-normal-sample")


def aggregate_infer(
    base: InferredValueSet, strategy: str, count: int, seed: int | None = None
) -> InferredValueSet:
    """Generate ``count`` values for a parameter from dataset-level summaries.

    ``range-equidistant``: evenly spaced from min to max inclusive (the
    midpoint when count is 1). ``range-uniform-sample``: iid
    Unif(min, max). ``fit-normal-sample``: moments-fitted normal draws.
    A degenerate base (zero range or zero variance) collapses to the
    constant, reported as a warning rather than an error.
    """
    if strategy not in AGGREGATION_STRATEGIES:
        raise InferenceError(f"unknown aggregation strategy {strategy!r}")
    if count < 1:
        raise InferenceError(f"count must be >= 1, got {count}")
    if any(isinstance(v, (tuple, str)) for v in base.values):
        raise InferenceError(
            f"parameter {base.parameter}: only scalar value sets can be aggregated"
        )
    needs_seed = strategy != "range-equidistant"
    if needs_seed and seed is None:
        raise InferenceError(f"strategy {strategy} requires a seed")

    values = np.asarray(base.values, dtype=float)
    lo, hi = float(values.min()), float(values.max())
    warnings: list[str] = []

    if strategy == "range-equidistant":
        if lo == hi:
            out = np.full(count, lo)
            warnings.append(f"degenerate range [{lo}, {hi}]: constant set")
        elif count == 1:
            out = np.array([(lo + hi) / 2.0])
        else:
            out = np.linspace(lo, hi, count)
    elif strategy == "range-uniform-sample":
        if lo == hi:
            out = np.full(count, lo)
            warnings.append(f"degenerate range [{lo}, {hi}]: constant set")
        else:
            out = np.random.default_rng(seed).uniform(lo, hi, size=count)
    else:  # fit-normal-sample
        mean = float(values.mean())
        sd = float(values.std(ddof=0))
        if sd == 0.0:
            out = np.full(count, mean)
            warnings.append("zero variance: constant set")
        else:
            out = np.random.default_rng(seed).normal(mean, sd, size=count)

    return InferredValueSet(
        parameter=base.parameter,
        values=tuple(float(v) for v in out),
        mode="aggregated",
        strategy=strategy,
        seed=seed if needs_seed else None,
        count=count,
        warnings=tuple(warnings),
    )


# --------------------------------------------------------------------------- #
# Mapping to considered parameter vectors
# --------------------------------------------------------------------------- #

def map_to_considered_vectors(
    value_sets: list[InferredValueSet],
    design: str = "one-to-one",
    subset: list[int] | None = None,
) -> ConsideredParameterSet:
    """Combine per-parameter value sets into the considered parameter vectors.

    ``one-to-one`` requires every set to be direct with identical dataset
    alignment and emits one vector per dataset. ``full-factorial`` takes the
    Cartesian product in declared parameter order (last parameter fastest),
    collapsing exact duplicate vectors with a multiplicity count.
    ``partial-factorial`` keeps only the given indices of the full-factorial
    enumeration (indices refer to the pre-collapse product order).
    """
    if not value_sets:
        raise InferenceError("no value sets to map")
    params = [s.parameter for s in value_sets]
    if len(set(params)) != len(params):
        raise InferenceError("duplicate parameter in value sets")

    if design == "one-to-one":
        alignments = {s.dataset_ids for s in value_sets}
        if any(s.mode != "direct" for s in value_sets):
            raise InferenceError("one-to-one mapping requires direct-mode sets only")
        if len(alignments) != 1:
            raise InferenceError("one-to-one mapping requires identical dataset order")
        ids = value_sets[0].dataset_ids
        vectors = tuple(
            ParameterVector(
                entries=tuple((s.parameter, s.values[i]) for s in value_sets),
                provenance=ids[i],
            )
            for i in range(len(ids))
        )
        return ConsideredParameterSet(
            vectors=vectors, design="one-to-one", multiplicity=(1,) * len(vectors)
        )

    if design not in ("full-factorial", "partial-factorial"):
        raise InferenceError(f"unknown mapping design {design!r}")
    if design == "partial-factorial" and subset is None:
        raise InferenceError("partial-factorial requires an index subset")

    import itertools

    index_ranges = [range(len(s.values)) for s in value_sets]
    combos = list(itertools.product(*index_ranges))
    if design == "partial-factorial":
        try:
            combos = [combos[i] for i in subset]
        except IndexError as exc:
            raise InferenceError(f"subset index out of range: {exc}") from exc

    single_direct = len(value_sets) == 1 and value_sets[0].mode == "direct"
    collapsed: dict[tuple, int] = {}
    vector_for: dict[tuple, ParameterVector] = {}
    order: list[tuple] = []
    for combo in combos:
        key = tuple(s.values[i] for s, i in zip(value_sets, combo))
        if key not in collapsed:
            if single_direct:
                provenance = value_sets[0].dataset_ids[combo[0]]
            else:
                provenance = "factorial"
            vector_for[key] = ParameterVector(
                entries=tuple(
                    (s.parameter, s.values[i]) for s, i in zip(value_sets, combo)
                ),
                provenance=provenance,
            )
            collapsed[key] = 0
            order.append(key)
        collapsed[key] += 1

    return ConsideredParameterSet(
        vectors=tuple(vector_for[k] for k in order),
        design=design,
        multiplicity=tuple(collapsed[k] for k in order),
    )


# --------------------------------------------------------------------------- #
# Data-driven distribution selection
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class DistributionChoice:
    family: str
    params: dict
    aic: dict


def _fit_exponential(x: np.ndarray):
    rate = 1.0 / x.mean()
    ll = x.size * math.log(rate) - rate * x.sum()
    return {"rate": rate}, ll, 1


def _fit_weibull(x: np.ndarray):
    """Profile ML: solve the shape equation, then the scale in closed form."""
    log_x = np.log(x)
    mean_log = log_x.mean()
    x_max = x.max()

    def shape_eq(k):
        # weights normalized by the largest observation to avoid overflow
        w = np.exp(k * (log_x - math.log(x_max)))
        return (w * log_x).sum() / w.sum() - 1.0 / k - mean_log

    try:
        shape = brentq(shape_eq, 1e-3, 1e3, xtol=1e-10)
    except ValueError as exc:
        raise InferenceError(f"weibull shape equation has no root: {exc}") from exc
    scale = x_max * (np.mean(np.exp(shape * (log_x - math.log(x_max))))) ** (1.0 / shape)
    z = x / scale
    ll = float(
        x.size * (math.log(shape) - shape * math.log(scale))
        + (shape - 1.0) * log_x.sum()
        - np.sum(z**shape)
    )
    return {"shape": shape, "scale": scale}, ll, 2


_DISTRIBUTION_FITTERS = {"exponential": _fit_exponential, "weibull": _fit_weibull}


def select_distribution(sample, candidates=("exponential", "weibull")) -> DistributionChoice:
    """Pick the minimum-AIC family among ML fits on uncensored observations.

    When multiple model structures emerge across datasets, parameter
    inference is then run separately per structure (see
    ``partition_by_distribution``).
    """
    x = np.asarray(sample, dtype=float)
    x = x[np.isfinite(x)]
    if x.size < 10:
        raise InferenceError(f"need at least 10 usable observations, got {x.size}")
    if np.any(x <= 0):
        raise InferenceError("observations must be strictly positive")
    unknown = set(candidates) - set(_DISTRIBUTION_FITTERS)
    if unknown:
        raise InferenceError(f"unknown candidate distribution(s): {sorted(unknown)}")
    if not candidates:
        raise InferenceError("no candidate distributions")

    aic: dict[str, float] = {}
    params: dict[str, dict] = {}
    errors: list[str] = []
    for family in candidates:
        try:
            fitted, ll, n_params = _DISTRIBUTION_FITTERS[family](x)
        except InferenceError as exc:
            errors.append(str(exc))
            continue
        params[family] = fitted
        aic[family] = 2.0 * n_params - 2.0 * ll
    if not aic:
        raise InferenceError(f"all candidate fits failed: {errors}")
    best = min(aic, key=lambda fam: (aic[fam], list(candidates).index(fam)))
    return DistributionChoice(family=best, params=params[best], aic=aic)


def partition_by_distribution(
    samples: dict[str, np.ndarray], candidates=("exponential", "weibull")
) -> dict[str, list[str]]:
    """Group dataset ids by their selected distribution family."""
    groups: dict[str, list[str]] = {}
    for dataset_id, sample in samples.items():
        choice = select_distribution(sample, candidates)
        groups.setdefault(choice.family, []).append(dataset_id)
    return groups


# --------------------------------------------------------------------------- #
# Plausibility checks
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class PlausibilityRule:
    """One check applied to every considered vector; ``check`` returns True when OK.

    ``parameter`` is None for joint rules, which receive the whole entry dict.
    """

    id: str
    check: callable
    parameter: str | None = None
    message: str = ""


def _flatten(value):
    if isinstance(value, tuple):
        for v in value:
            yield from _flatten(v)
    else:
        yield value


def rule_all_positive(parameter: str) -> PlausibilityRule:
    return PlausibilityRule(
        id=f"{parameter}-all-positive",
        parameter=parameter,
        check=lambda v: all(x > 0 for x in _flatten(v)),
        message=f"all entries of {parameter} must be > 0",
    )


def rule_min(parameter: str, bound: float) -> PlausibilityRule:
    return PlausibilityRule(
        id=f"{parameter}-min",
        parameter=parameter,
        check=lambda v: all(x >= bound for x in _flatten(v)),
        message=f"{parameter} must be >= {bound}",
    )


def rule_max(parameter: str, bound: float) -> PlausibilityRule:
    return PlausibilityRule(
        id=f"{parameter}-max",
        parameter=parameter,
        check=lambda v: all(x <= bound for x in _flatten(v)),
        message=f"{parameter} must be <= {bound}",
    )


@dataclass(frozen=True)
class PlausibilityViolation:
    vector_index: int
    provenance: str
    rule_id: str
    message: str


def plausibility_check(
    considered: ConsideredParameterSet, rules: list[PlausibilityRule]
) -> list[PlausibilityViolation]:
    """Report rule violations per vector; the set itself is never modified."""
    if not rules:
        return []
    schema = set(considered.vectors[0].ids) if considered.vectors else set()
    for rule in rules:
        if rule.parameter is not None and rule.parameter not in schema:
            raise InferenceError(
                f"plausibility rule {rule.id} references unknown parameter "
                f"{rule.parameter!r}"
            )
    violations = []
    for index, vector in enumerate(considered.vectors):
        for rule in rules:
            target = vector.get(rule.parameter) if rule.parameter else vector.as_dict()
            if not rule.check(target):
                violations.append(
                    PlausibilityViolation(
                        vector_index=index,
                        provenance=vector.provenance,
                        rule_id=rule.id,
                        message=rule.message,
                    )
                )
    return violations
