"""Deterministic, parallelizable replication runner.

Every repetition's randomness is derived from a counter-based seed
(master seed + DGM index + repetition index), so results are bit-identical
regardless of worker count or scheduling, and extending ``n_rep`` never
changes the repetitions already produced.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import DGMInstance
from .errors import EngineError
from .families.de import (
    DEConfig,
    ExpressionLibrary,
    assign_fold_changes,
    draw_expression_params,
    sample_counts,
)
from .families.ordinal import (
    OrdinalTwoArmConfig,
    relative_effect,
    sample_ordinal,
    tabulate_ordinal,
)
from .stats import REGISTRY, auc_score, power_and_mcse
from .stats.de_scores import de_gene_scores
from .stats.tests import (
    TestResult,
    chi_square_test,
    fisher_exact_mc,
    po_logistic_from_counts,
    wilcoxon_rank_sum,
)

VALIDITY_FILTERS = ("none", "all-categories-observed")


# --------------------------------------------------------------------------- #
# Plan and records
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class MethodCall:
    """A registered method id plus its per-study options."""

    id: str
    options: tuple[tuple[str, object], ...] = ()

    @classmethod
    def create(cls, id: str, options: dict | None = None) -> "MethodCall":
        return cls(id=id, options=tuple(sorted((options or {}).items())))

    def opt(self, key: str, default=None):
        return dict(self.options).get(key, default)


@dataclass(frozen=True)
class StudyPlan:
    """The replication schedule for a list of DGM instances."""

    dgms: tuple[DGMInstance, ...]
    methods: tuple[MethodCall, ...]
    measure: str  # "power" | "auc"
    n_rep: int
    master_seed: int
    alpha: float = 0.05
    validity_filter: str = "none"
    min_valid_fraction: float = 0.8
    min_valid_reps: int | None = None

    def __post_init__(self):
        if self.n_rep < 1:
            raise EngineError("n_rep must be >= 1")
        if self.measure not in ("power", "auc"):
            raise EngineError(f"unknown measure {self.measure!r}")
        if self.validity_filter not in VALIDITY_FILTERS:
            raise EngineError(f"unknown validity filter {self.validity_filter!r}")
        if not self.dgms:
            raise EngineError("plan has no DGM instances")
        for call in self.methods:
            if call.id not in REGISTRY:
                raise EngineError(f"unregistered method {call.id!r}")
        for dgm in self.dgms:
            family = dgm.structure.family
            if family not in _RUNNERS:
                raise EngineError(f"no runner for family {family!r}")
            runner = _RUNNERS[family]
            if self.measure != runner.measure:
                raise EngineError(
                    f"measure {self.measure!r} incompatible with family {family!r}"
                )
            for call in self.methods:
                if REGISTRY[call.id].kind != runner.method_kind:
                    raise EngineError(
                        f"method {call.id!r} incompatible with family {family!r}"
                    )

    @property
    def min_valid(self) -> int:
        """Exclusion threshold: explicit count, else the proportional default."""
        if self.min_valid_reps is not None:
            return self.min_valid_reps
        return int(round(self.min_valid_fraction * self.n_rep))

    def to_dict(self) -> dict:
        return {
            "dgms": [d.to_dict() for d in self.dgms],
            "methods": [{"id": m.id, "options": dict(m.options)} for m in self.methods],
            "measure": self.measure,
            "n_rep": self.n_rep,
            "master_seed": self.master_seed,
            "alpha": self.alpha,
            "validity_filter": self.validity_filter,
            "min_valid_reps": self.min_valid,
        }

    def content_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()


@dataclass(frozen=True)
class RepetitionRecord:
    """One row of raw output: either an invalid-repetition marker (method None)
    or one method result on a valid repetition."""

    dgm_index: int
    dgm_label: str
    rep_index: int
    valid: bool
    method: str | None = None
    value: float | None = None
    failed: bool = False
    reason: str | None = None

    def to_dict(self) -> dict:
        return {
            "dgm_index": self.dgm_index,
            "dgm_label": self.dgm_label,
            "rep_index": self.rep_index,
            "valid": self.valid,
            "method": self.method,
            "value": self.value,
            "failed": self.failed,
            "reason": self.reason,
        }


@dataclass(frozen=True)
class SummaryRecord:
    """Per-(DGM, method) performance with validity accounting."""

    dgm_label: str
    family: str
    method: str
    measure: str
    estimate: float | None
    mcse: float | None
    n_valid: int
    n_failures: int
    excluded: bool
    covariate_name: str
    covariate_value: float


# --------------------------------------------------------------------------- #
# Family runners
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class EngineContext:
    """Picklable per-study resources resolved inside each worker process."""

    expression_dir: str | None = None
    mean_floor: float = 10.0


class _OrdinalRunner:
    measure = "power"
    method_kind = "ordinal-test"

    def covariate(self, dgm: DGMInstance, context) -> tuple[str, float]:
        pi1, pi2 = dgm.param("pi_pair")
        _, dev = relative_effect(pi1, pi2)
        return "releff_dev", dev

    def run_repetition(self, dgm, plan, rep_index, rng, method_seeds, context):
        pi1, pi2 = dgm.param("pi_pair")
        config = OrdinalTwoArmConfig(
            n_obs=int(dgm.param("n_obs")),
            n_categories=int(dgm.param("n_categories")),
            pi1=pi1,
            pi2=pi2,
        )
        y, x = sample_ordinal(config, rng)
        verdict = filter_validity((y, x), plan.validity_filter, config.n_categories)
        if verdict is not None:
            return [_invalid(dgm, rep_index, verdict)]
        table = tabulate_ordinal(y, x, config.n_categories)
        records = []
        for call, seed in zip(plan.methods, method_seeds):
            result = self._apply(call, y, x, table, seed)
            records.append(_from_test(dgm, rep_index, call.id, result))
        return records

    @staticmethod
    def _apply(call: MethodCall, y, x, table, seed: int) -> TestResult:
        if call.id == "chisq":
            return chi_square_test(table)
        if call.id == "fisher-mc":
            return fisher_exact_mc(table, n_tables=int(call.opt("n_tables", 2000)),
                                   seed=seed)
        if call.id == "wilcoxon":
            return wilcoxon_rank_sum(y[x == 1], y[x == 2])
        if call.id == "po-logit":
            return po_logistic_from_counts(table)
        raise EngineError(f"method {call.id!r} is not an ordinal test")


class _DERunner:
    measure = "auc"
    method_kind = "de-scorer"

    _SCORE_VARIANT = {"de-logt": "log-t", "de-ranksum": "rank-sum"}

    def covariate(self, dgm: DGMInstance, context) -> tuple[str, float]:
        library = _expression_library(context)
        return "median_dispersion", library.median_dispersion(dgm.param("expr"))

    def run_repetition(self, dgm, plan, rep_index, rng, method_seeds, context):
        library = _expression_library(context)
        pool = library.pool(dgm.param("expr"))
        n_genes = int(dgm.param("n_genes"))
        # per-repetition draw order: gene subset, DE assignment, counts
        means, dispersions = draw_expression_params(pool, n_genes, rng)
        config = DEConfig(
            n_obs=int(dgm.param("n_obs")),
            n_genes=n_genes,
            p_de=dgm.param("p_de"),
            p_up=dgm.param("p_up"),
            min_fc=dgm.param("min_fc"),
            fc_rate=dgm.param("fc_rate"),
            means=means,
            dispersions=dispersions,
        )
        fc, labels = assign_fold_changes(config, rng)
        counts, groups = sample_counts(config, fc, rng)
        records = []
        for call in plan.methods:
            variant = self._SCORE_VARIANT[call.id]
            try:
                scores, _ = de_gene_scores(counts, groups, variant)
                value = auc_score(scores, labels)
                records.append(
                    RepetitionRecord(
                        dgm_index=0, dgm_label=dgm.label, rep_index=rep_index,
                        valid=True, method=call.id, value=value,
                    )
                )
            except Exception as exc:
                records.append(
                    RepetitionRecord(
                        dgm_index=0, dgm_label=dgm.label, rep_index=rep_index,
                        valid=True, method=call.id, value=None, failed=True,
                        reason=str(exc),
                    )
                )
        return records


_RUNNERS = {"ordinal-two-arm": _OrdinalRunner(), "de-counts": _DERunner()}

_LIBRARY_CACHE: dict[tuple, ExpressionLibrary] = {}


def _expression_library(context: EngineContext) -> ExpressionLibrary:
    if context.expression_dir is None:
        raise EngineError("DE study requires an expression directory in the context")
    key = (context.expression_dir, context.mean_floor)
    if key not in _LIBRARY_CACHE:
        _LIBRARY_CACHE[key] = ExpressionLibrary(
            context.expression_dir, mean_floor=context.mean_floor
        )
    return _LIBRARY_CACHE[key]


def _invalid(dgm, rep_index, reason) -> RepetitionRecord:
    return RepetitionRecord(
        dgm_index=0, dgm_label=dgm.label, rep_index=rep_index, valid=False,
        reason=reason,
    )


def _from_test(dgm, rep_index, method, result: TestResult) -> RepetitionRecord:
    if result.failed:
        return RepetitionRecord(
            dgm_index=0, dgm_label=dgm.label, rep_index=rep_index, valid=True,
            method=method, value=None, failed=True,
            reason=result.diagnostics.get("reason"),
        )
    return RepetitionRecord(
        dgm_index=0, dgm_label=dgm.label, rep_index=rep_index, valid=True,
        method=method, value=result.p_value,
    )


def filter_validity(dataset, predicate: str, n_categories: int | None = None):
    """Return None when the dataset is usable, else the invalidity reason."""
    if predicate == "none":
        return None
    if predicate == "all-categories-observed":
        y, _ = dataset
        observed = np.unique(y)
        for category in range(1, (n_categories or 0) + 1):
            if category not in observed:
                return f"category {category} unobserved"
        return None
    raise EngineError(f"unknown validity filter {predicate!r}")


# --------------------------------------------------------------------------- #
# Execution
# --------------------------------------------------------------------------- #

def _repetition_rng(master_seed: int, dgm_index: int, rep_index: int):
    return np.random.default_rng(
        np.random.SeedSequence(master_seed, spawn_key=(dgm_index, rep_index, 0))
    )


def _method_seed(master_seed: int, dgm_index: int, rep_index: int, method_index: int) -> int:
    ss = np.random.SeedSequence(
        master_seed, spawn_key=(dgm_index, rep_index, 1 + method_index)
    )
    return int(ss.generate_state(1)[0])


def _run_chunk(plan: StudyPlan, context: EngineContext, dgm_index: int,
               rep_start: int, rep_stop: int) -> list[RepetitionRecord]:
    dgm = plan.dgms[dgm_index]
    runner = _RUNNERS[dgm.structure.family]
    records: list[RepetitionRecord] = []
    for rep_index in range(rep_start, rep_stop):
        rng = _repetition_rng(plan.master_seed, dgm_index, rep_index)
        seeds = [
            _method_seed(plan.master_seed, dgm_index, rep_index, mi)
            for mi in range(len(plan.methods))
        ]
        for record in runner.run_repetition(dgm, plan, rep_index, rng, seeds, context):
            records.append(
                RepetitionRecord(
                    dgm_index=dgm_index,
                    dgm_label=record.dgm_label,
                    rep_index=record.rep_index,
                    valid=record.valid,
                    method=record.method,
                    value=record.value,
                    failed=record.failed,
                    reason=record.reason,
                )
            )
    return records


_WORKER_STATE: dict = {}


def _worker_init(plan: StudyPlan, context: EngineContext):
    _WORKER_STATE["plan"] = plan
    _WORKER_STATE["context"] = context


def _worker_run(task):
    dgm_index, rep_start, rep_stop = task
    return _run_chunk(
        _WORKER_STATE["plan"], _WORKER_STATE["context"], dgm_index, rep_start, rep_stop
    )


def run_study(
    plan: StudyPlan,
    context: EngineContext | None = None,
    workers: int = 1,
    progress=None,
) -> list[RepetitionRecord]:
    """Execute the plan and return repetition-level records in canonical order.

    Canonical order: DGM index, then repetition index, then method order.
    The output is bit-identical for any worker count.
    """
    context = context or EngineContext()
    chunk = max(1, -(-plan.n_rep // 8))
    tasks = []
    for dgm_index in range(len(plan.dgms)):
        for start in range(0, plan.n_rep, chunk):
            tasks.append((dgm_index, start, min(start + chunk, plan.n_rep)))

    results: list[list[RepetitionRecord]] = []
    if workers <= 1:
        for i, task in enumerate(tasks):
            results.append(_run_chunk(plan, context, *task))
            if progress:
                progress(i + 1, len(tasks))
    else:
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_worker_init, initargs=(plan, context)
        ) as pool:
            for i, chunk_records in enumerate(pool.map(_worker_run, tasks)):
                results.append(chunk_records)
                if progress:
                    progress(i + 1, len(tasks))
    return [record for chunk_records in results for record in chunk_records]


# --------------------------------------------------------------------------- #
# Summaries and export
# --------------------------------------------------------------------------- #

def summarize(
    records: list[RepetitionRecord],
    plan: StudyPlan,
    context: EngineContext | None = None,
) -> list[SummaryRecord]:
    """Aggregate repetition records per (DGM, method) with exclusion flags."""
    context = context or EngineContext()
    by_dgm: dict[int, list[RepetitionRecord]] = {}
    for record in records:
        by_dgm.setdefault(record.dgm_index, []).append(record)

    summaries = []
    for dgm_index, dgm in enumerate(plan.dgms):
        dgm_records = by_dgm.get(dgm_index, [])
        invalid = {r.rep_index for r in dgm_records if not r.valid}
        n_valid = plan.n_rep - len(invalid)
        excluded = n_valid < plan.min_valid
        runner = _RUNNERS[dgm.structure.family]
        cov_name, cov_value = runner.covariate(dgm, context)
        for call in plan.methods:
            method_records = [
                r for r in dgm_records if r.valid and r.method == call.id
            ]
            n_failures = sum(1 for r in method_records if r.failed)
            estimate: float | None = None
            mcse: float | None = None
            if not excluded and method_records:
                if plan.measure == "power":
                    values = [r.value for r in method_records]
                    if any(v is not None for v in values):
                        estimate, mcse, n_failures = power_and_mcse(values, plan.alpha)
                else:
                    usable = [r.value for r in method_records if not r.failed]
                    if usable:
                        estimate = float(np.mean(usable))
            summaries.append(
                SummaryRecord(
                    dgm_label=dgm.label,
                    family=dgm.structure.family,
                    method=call.id,
                    measure=plan.measure,
                    estimate=estimate,
                    mcse=mcse,
                    n_valid=n_valid,
                    n_failures=n_failures,
                    excluded=excluded,
                    covariate_name=cov_name,
                    covariate_value=cov_value,
                )
            )
    return summaries


SUMMARY_COLUMNS = (
    "dgm_label,family,method,measure,estimate,mcse,n_valid,n_failures,"
    "excluded,covariate_name,covariate_value"
)


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def export_results(summaries: list[SummaryRecord], path) -> None:
    """Write the summary CSV with deterministic formatting."""
    lines = [SUMMARY_COLUMNS]
    for s in summaries:
        lines.append(
            ",".join(
                _csv_cell(v)
                for v in (
                    s.dgm_label, s.family, s.method, s.measure, s.estimate, s.mcse,
                    s.n_valid, s.n_failures, s.excluded, s.covariate_name,
                    s.covariate_value,
                )
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_repetition_records(records: list[RepetitionRecord], path) -> None:
    with Path(path).open("w") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict()) + "\n")


def read_repetition_records(path) -> list[RepetitionRecord]:
    records = []
    with Path(path).open() as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(RepetitionRecord(**json.loads(line)))
    return records


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path, plan: StudyPlan, input_paths: dict, results_path) -> None:
    """Reproducibility manifest: seed, plan hash, input hashes, results hash."""
    from importlib.metadata import version

    try:
        pkg_version = version("dgmsim")
    except Exception:
        pkg_version = "unknown"
    manifest = {
        "master_seed": plan.master_seed,
        "plan_hash": plan.content_hash(),
        "inputs": {name: file_sha256(p) for name, p in input_paths.items()},
        "results_hash": file_sha256(results_path),
        "software_version": pkg_version,
    }
    Path(path).write_text(json.dumps(manifest, indent=2) + "\n")
