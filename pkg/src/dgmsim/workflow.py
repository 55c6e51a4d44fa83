"""Pipeline steps behind the CLI: select, infer, plan, run, report."""

from __future__ import annotations

import csv
import time
from pathlib import Path

from .config import StudyConfig, selection_paths
from .core import cross_design, write_dgm_instances
from .engine import (
    StudyPlan,
    export_results,
    run_study,
    summarize,
    write_manifest,
    write_repetition_records,
)
from .errors import ConfigError
from .inference import (
    ConsideredParameterSet,
    aggregate_infer,
    direct_infer,
    map_to_considered_vectors,
    plausibility_check,
    rule_all_positive,
    rule_max,
    rule_min,
)
from .selection import (
    CountBoundResult,
    SelectionStage,
    apply_subset_rules,
    enforce_count_bounds,
    load_criteria,
    load_database,
    screen,
    write_ordinal_csv,
    write_records,
)


def do_select(config: StudyConfig, out_dir: Path):
    """Screen the database, enforce count bounds, and apply subset rules.

    Writes the selected records, the JSON selection log, and a plain-text
    flow summary. Returns (records, log, CountBoundResult).
    """
    sel = config.selection
    if sel is None:
        raise ConfigError("config has no selection section")
    database_path, criteria_path = selection_paths(config)
    database = load_database(database_path)
    criteria = load_criteria(criteria_path)
    records, log = screen(database, criteria)

    result: CountBoundResult | None = None
    if "min_datasets" in sel or "max_datasets" in sel:
        result = enforce_count_bounds(
            records,
            int(sel.get("min_datasets", 1)),
            int(sel.get("max_datasets", len(records) or 1)),
            int(sel.get("seed", 0)),
        )
        if result.status == "downselected":
            records = list(result.records)
            log.stages.append(
                SelectionStage(
                    criterion_id="random-downselection",
                    assessed=len(log.final_ids),
                    removed=len(log.final_ids) - len(records),
                )
            )
            log.final_ids = [r.id for r in records]
            log.seed = result.seed
    else:
        result = CountBoundResult("ok", tuple(records))

    subset_rules = sel.get("subset_rules", [])
    if subset_rules and result.status != "too-few":
        annotated = []
        for record in records:
            subset = apply_subset_rules(record, subset_rules)
            metadata = dict(record.metadata)
            metadata["selected_arms"] = list(subset.arm_ids)
            metadata["selected_outcome"] = subset.outcome_id
            annotated.append(type(record)(
                id=record.id, source=record.source, metadata=metadata,
                payload=record.payload,
            ))
        records = annotated

    out_dir.mkdir(parents=True, exist_ok=True)
    write_records(records, out_dir / "selected.jsonl")
    if records and all(
        k in r.metadata for r in records for k in ("n1", "n2", "p1", "p2")
    ):
        write_ordinal_csv(records, out_dir / "selected.csv")
    log.write_json(out_dir / "selection_log.json")
    (out_dir / "selection_flow.txt").write_text(log.flow_text())
    return records, log, result


def do_infer(config: StudyConfig, selected_records, out_dir: Path):
    """Run per-parameter inference, mapping, and the plausibility report."""
    if not config.inference_params:
        raise ConfigError("config has no inference parameters")
    estimators = {p.id: p.estimator for p in config.inference_params}
    value_sets = direct_infer(selected_records, estimators)
    by_id = {s.parameter: s for s in value_sets}
    final_sets = []
    for param in config.inference_params:
        base = by_id[param.id]
        if param.mode == "aggregated":
            final_sets.append(
                aggregate_infer(base, param.strategy, param.count, param.seed)
            )
        else:
            final_sets.append(base)

    considered = map_to_considered_vectors(
        final_sets, design=config.mapping, subset=config.mapping_subset
    )

    rules = []
    for item in config.plausibility:
        kind, parameter = item["rule"], item["parameter"]
        if kind == "all-positive":
            rules.append(rule_all_positive(parameter))
        elif kind == "min":
            rules.append(rule_min(parameter, float(item["bound"])))
        elif kind == "max":
            rules.append(rule_max(parameter, float(item["bound"])))
    violations = plausibility_check(considered, rules)

    out_dir.mkdir(parents=True, exist_ok=True)
    import json

    (out_dir / "inferred_values.json").write_text(
        json.dumps([s.to_dict() for s in final_sets], indent=2) + "\n"
    )
    considered.write_json(out_dir / "considered.json")

    (out_dir / "plausibility.json").write_text(
        json.dumps(
            [
                {
                    "vector_index": v.vector_index,
                    "provenance": v.provenance,
                    "rule_id": v.rule_id,
                    "message": v.message,
                }
                for v in violations
            ],
            indent=2,
        )
        + "\n"
    )
    return considered, violations


def do_plan(config: StudyConfig, considered: ConsideredParameterSet | None,
            out_dir: Path):
    """Cross the considered set with the researcher grids into DGM instances."""
    instances = cross_design(
        considered,
        config.lambda_grids,
        config.structure,
        rule=config.crossing,
        label_prefix=config.study,
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    write_dgm_instances(instances, out_dir / "dgms.jsonl")
    return instances


def build_study_plan(config: StudyConfig, instances, seed_override=None) -> StudyPlan:
    return StudyPlan(
        dgms=tuple(instances),
        methods=tuple(config.methods),
        measure=config.measure,
        n_rep=config.n_rep,
        master_seed=config.master_seed if seed_override is None else seed_override,
        alpha=config.alpha,
        validity_filter=config.validity_filter,
        min_valid_fraction=config.min_valid_fraction,
        min_valid_reps=config.min_valid_reps,
    )


def do_run(config: StudyConfig, instances, out_dir: Path, workers: int = 1,
           seed_override=None, progress=None):
    """Execute the plan; write records, summary CSV, and the manifest."""
    plan = build_study_plan(config, instances, seed_override)
    context = config.engine_context()
    started = time.time()
    records = run_study(plan, context, workers=workers, progress=progress)
    elapsed = time.time() - started
    out_dir.mkdir(parents=True, exist_ok=True)
    write_repetition_records(records, out_dir / "records.jsonl")
    summaries = summarize(records, plan, context)
    summary_path = out_dir / "summary.csv"
    export_results(summaries, summary_path)
    inputs = {"config": config.path}
    write_manifest(out_dir / "manifest.json", plan, inputs, summary_path)
    return summaries, summary_path, elapsed


# --------------------------------------------------------------------------- #
# Report
# --------------------------------------------------------------------------- #

def parse_label(label: str) -> tuple[str, str, dict]:
    """Split a DGM label into (study, source, lambda key/value dict)."""
    head, _, tail = label.partition("|")
    study, _, source = head.partition(":")
    factors = {}
    if tail:
        for pair in tail.split(","):
            key, _, value = pair.partition("=")
            try:
                factors[key] = float(value)
            except ValueError:
                factors[key] = value
    return study, source, factors


def do_report(summary_path, out_dir: Path):
    """Emit tidy plot-data CSVs: absolute performance and difference-to-best."""
    summary_path = Path(summary_path)
    if not summary_path.exists():
        raise ConfigError(f"summary file not found: {summary_path}")
    with summary_path.open() as fh:
        rows = list(csv.DictReader(fh))
    if rows and "covariate_value" not in rows[0]:
        raise ConfigError(f"{summary_path}: missing covariate columns")

    usable = [r for r in rows if r["excluded"] == "false" and r["estimate"] != ""]
    factor_keys = sorted(
        {key for r in usable for key in parse_label(r["dgm_label"])[2]}
    )
    header = (
        ["dgm_label", "study", "source", "method", "measure", "estimate", "mcse",
         "covariate_name", "covariate_value"] + factor_keys
    )

    def tidy(row):
        study, source, factors = parse_label(row["dgm_label"])
        return (
            [row["dgm_label"], study, source, row["method"], row["measure"],
             row["estimate"], row["mcse"], row["covariate_name"],
             row["covariate_value"]]
            + [_fmt_factor(factors.get(k)) for k in factor_keys]
        )

    out_dir.mkdir(parents=True, exist_ok=True)
    absolute_path = out_dir / "report_absolute.csv"
    with absolute_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in usable:
            writer.writerow(tidy(row))

    best: dict[str, float] = {}
    for row in usable:
        estimate = float(row["estimate"])
        label = row["dgm_label"]
        if label not in best or estimate > best[label]:
            best[label] = estimate
    diff_path = out_dir / "report_diff_to_best.csv"
    with diff_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header + ["diff_to_best"])
        for row in usable:
            diff = float(row["estimate"]) - best[row["dgm_label"]]
            writer.writerow(tidy(row) + [repr(diff)])
    return absolute_path, diff_path


def _fmt_factor(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)
