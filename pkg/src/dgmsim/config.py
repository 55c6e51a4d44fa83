"""Study configuration: a single YAML file drives the whole workflow.

Sections mirror the pipeline: components (taxonomy), selection (database,
criteria, bounds), inference (per-parameter estimators and mapping), design
(researcher grids and crossing), engine (replications, seed, methods), and
output. All cross-references are validated before any computation starts.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import yaml

from .core import FAMILIES, ComponentSpec, LambdaGrid, ModelStructureConfig
from .engine import VALIDITY_FILTERS, EngineContext, MethodCall
from .errors import ConfigError
from .inference import AGGREGATION_STRATEGIES, ESTIMATORS
from .stats import REGISTRY

_MAPPING_DESIGNS = ("one-to-one", "full-factorial", "partial-factorial")
_PLAUSIBILITY_RULES = ("all-positive", "min", "max")


@dataclass
class InferenceParam:
    id: str
    estimator: str
    mode: str = "direct"
    strategy: str | None = None
    count: int | None = None
    seed: int | None = None


@dataclass
class StudyConfig:
    path: Path
    study: str
    structure: ModelStructureConfig
    components: list[ComponentSpec]
    selection: dict | None
    inference_params: list[InferenceParam]
    mapping: str
    mapping_subset: list[int] | None
    plausibility: list[dict]
    expression_dir: Path | None
    mean_floor: float
    lambda_grids: list[LambdaGrid]
    crossing: str
    n_rep: int
    master_seed: int
    alpha: float
    measure: str
    methods: list[MethodCall]
    validity_filter: str
    min_valid_fraction: float
    min_valid_reps: int | None
    out_dir: Path

    def engine_context(self) -> EngineContext:
        return EngineContext(
            expression_dir=str(self.expression_dir) if self.expression_dir else None,
            mean_floor=self.mean_floor,
        )

    @property
    def theta_ids(self) -> set[str]:
        return {p.id for p in self.inference_params}

    @property
    def lambda_ids(self) -> set[str]:
        out: set[str] = set()
        for grid in self.lambda_grids:
            out.update(grid.ids)
        return out


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return section[key]


def _resolve_path(base: Path, value: str) -> Path:
    path = Path(value)
    return path if path.is_absolute() else (base / path)


def load_pair_grid_csv(path) -> tuple[list, list[str]]:
    """Read labeled probability-pair grid values: pair_id, p1_1..7, p2_1..7."""
    values, labels = [], []
    with Path(path).open() as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            p1 = tuple(float(row[f"p1_{k}"]) for k in range(1, 8))
            p2 = tuple(float(row[f"p2_{k}"]) for k in range(1, 8))
            values.append((p1, p2))
            labels.append(row["pair_id"])
    if not values:
        raise ConfigError(f"{path}: no grid rows")
    return values, labels


_GRID_LOADERS = {"ordinal-pairs": load_pair_grid_csv}


def _parse_lambda_grids(design: dict, base: Path) -> list[LambdaGrid]:
    grids = []
    for item in design.get("lambda", []):
        ids = item.get("id") or item.get("ids")
        if ids is None:
            raise ConfigError("design.lambda entry without id/ids")
        if "values_from" in item:
            loader_name = item.get("loader", "ordinal-pairs")
            if loader_name not in _GRID_LOADERS:
                raise ConfigError(f"unknown grid loader {loader_name!r}")
            values, labels = _GRID_LOADERS[loader_name](
                _resolve_path(base, item["values_from"])
            )
            grids.append(LambdaGrid.create(ids, values, labels))
        else:
            values = _require(item, "values", f"design.lambda[{ids}]")
            grids.append(LambdaGrid.create(ids, values, item.get("labels")))
    return grids


def _parse_components(raw: list, structure: ModelStructureConfig) -> list[ComponentSpec]:
    components = [
        ComponentSpec(
            id=item["id"],
            kind=item.get("kind", "parameter"),
            specification=item["specification"],
            knowledge=item["knowledge"],
            target_related=item.get("target_related", False),
            constraint=item.get("constraint"),
        )
        for item in raw
    ]
    if components:
        from .core import classify_components

        classify_components(components, structure)
    return components


def load_config(path) -> StudyConfig:
    """Parse and validate a study configuration file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    base = path.parent
    raw = yaml.safe_load(path.read_text())
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")

    study = _require(raw, "study", str(path))
    family = _require(raw, "family", str(path))
    if family not in FAMILIES:
        raise ConfigError(f"{path}: unknown family {family!r}")
    structure = ModelStructureConfig.create(family, raw.get("structure_options"))

    components = _parse_components(raw.get("components", []), structure)

    selection = raw.get("selection")
    if selection is not None:
        for key in ("database", "criteria"):
            _require(selection, key, "selection")

    inf = raw.get("inference", {}) or {}
    params = []
    for item in inf.get("parameters", []):
        param = InferenceParam(
            id=_require(item, "id", "inference.parameters"),
            estimator=_require(item, "estimator", "inference.parameters"),
            mode=item.get("mode", "direct"),
            strategy=item.get("strategy"),
            count=item.get("count"),
            seed=item.get("seed"),
        )
        if param.estimator not in ESTIMATORS and not param.estimator.startswith("metadata:"):
            raise ConfigError(f"unknown estimator {param.estimator!r} for {param.id}")
        if param.mode not in ("direct", "aggregated"):
            raise ConfigError(f"parameter {param.id}: unknown mode {param.mode!r}")
        if param.mode == "aggregated":
            if param.strategy not in AGGREGATION_STRATEGIES:
                raise ConfigError(
                    f"parameter {param.id}: unknown strategy {param.strategy!r}"
                )
            if not param.count or param.count < 1:
                raise ConfigError(f"parameter {param.id}: aggregated mode needs count >= 1")
        params.append(param)
    if params and selection is None:
        raise ConfigError("inference.parameters given but no selection section")

    mapping = inf.get("mapping", "one-to-one")
    if mapping not in _MAPPING_DESIGNS:
        raise ConfigError(f"unknown mapping design {mapping!r}")
    mapping_subset = inf.get("subset")
    if mapping == "partial-factorial" and not mapping_subset:
        raise ConfigError("partial-factorial mapping requires inference.subset")
    if mapping == "one-to-one" and any(p.mode == "aggregated" for p in params):
        raise ConfigError("one-to-one mapping cannot use aggregated parameters")

    plausibility = inf.get("plausibility", []) or []
    for rule in plausibility:
        kind = rule.get("rule")
        if kind not in _PLAUSIBILITY_RULES:
            raise ConfigError(f"unknown plausibility rule {kind!r}")
        if rule.get("parameter") not in {p.id for p in params}:
            raise ConfigError(
                f"plausibility rule {kind} references unknown parameter "
                f"{rule.get('parameter')!r}"
            )
        if kind in ("min", "max") and "bound" not in rule:
            raise ConfigError(f"plausibility rule {kind} requires a bound")

    expression = inf.get("expression") or {}
    expression_dir = (
        _resolve_path(base, expression["dir"]) if "dir" in expression else None
    )
    mean_floor = float(expression.get("mean_floor", 10.0))

    design = raw.get("design", {}) or {}
    lambda_grids = _parse_lambda_grids(design, base)
    crossing = design.get("crossing", "full-cross")
    if crossing not in ("full-cross", "paired"):
        raise ConfigError(f"unknown crossing rule {crossing!r}")

    # parameter coverage: lambda grids and inferred parameters must exactly
    # partition the family's parameter set
    theta_ids = {p.id for p in params}
    lambda_ids: set[str] = set()
    for grid in lambda_grids:
        for pid in grid.ids:
            if pid in lambda_ids:
                raise ConfigError(f"parameter {pid!r} appears in two lambda grids")
            lambda_ids.add(pid)
    overlap = theta_ids & lambda_ids
    if overlap:
        raise ConfigError(f"parameters in both design and inference: {sorted(overlap)}")
    required = structure.required_parameters
    missing = required - (theta_ids | lambda_ids)
    if missing:
        raise ConfigError(f"family {family}: uncovered parameters {sorted(missing)}")
    extra = (theta_ids | lambda_ids) - required
    if extra:
        raise ConfigError(f"family {family}: unknown parameters {sorted(extra)}")

    engine = raw.get("engine", {}) or {}
    methods = []
    for item in engine.get("methods", []):
        method_id = _require(item, "id", "engine.methods")
        if method_id not in REGISTRY:
            raise ConfigError(f"unregistered method {method_id!r}")
        options = {k: v for k, v in item.items() if k != "id"}
        methods.append(MethodCall.create(method_id, options))
    measure = engine.get("measure", "power")
    if measure not in ("power", "auc"):
        raise ConfigError(f"unknown measure {measure!r}")
    validity_filter = engine.get("validity_filter", "none")
    if validity_filter not in VALIDITY_FILTERS:
        raise ConfigError(f"unknown validity filter {validity_filter!r}")

    output = raw.get("output", {}) or {}
    out_dir = _resolve_path(base, output.get("dir", f"out/{study}"))

    return StudyConfig(
        path=path,
        study=study,
        structure=structure,
        components=components,
        selection=selection,
        inference_params=params,
        mapping=mapping,
        mapping_subset=mapping_subset,
        plausibility=plausibility,
        expression_dir=expression_dir,
        mean_floor=mean_floor,
        lambda_grids=lambda_grids,
        crossing=crossing,
        n_rep=int(engine.get("n_rep", 1000)),
        master_seed=int(engine.get("master_seed", 0)),
        alpha=float(engine.get("alpha", 0.05)),
        measure=measure,
        methods=methods,
        validity_filter=validity_filter,
        min_valid_fraction=float(engine.get("min_valid_fraction", 0.8)),
        min_valid_reps=engine.get("min_valid_reps"),
        out_dir=out_dir,
    )


def selection_paths(config: StudyConfig) -> tuple[Path, Path]:
    sel = config.selection
    if sel is None:
        raise ConfigError("config has no selection section")
    base = config.path.parent
    return (
        _resolve_path(base, sel["database"]),
        _resolve_path(base, sel["criteria"]),
    )
