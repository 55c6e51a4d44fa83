"""Command-line driver: select -> infer -> plan -> run -> report.

Exit codes: 0 ok, 2 validation error, 3 too few datasets after screening,
4 runtime failure.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

import click

from .config import load_config
from .core import read_dgm_instances
from .errors import ConfigError, DgmsimError, EngineError, SelectionError, TaxonomyError
from .inference import ConsideredParameterSet
from .selection import load_database
from . import workflow

EXIT_VALIDATION = 2
EXIT_TOO_FEW = 3
EXIT_RUNTIME = 4


def _fail(message: str, code: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load(config_path, out_dir):
    try:
        config = load_config(config_path)
    except (ConfigError, TaxonomyError) as exc:
        _fail(str(exc), EXIT_VALIDATION)
    if out_dir is not None:
        config.out_dir = Path(out_dir)
    return config


@click.group()
def main():
    """Construct real-data-based parametric DGMs and run replication studies."""


_config_opt = click.option("--config", "config_path", required=True,
                           type=click.Path(exists=True), help="Study config file.")
_out_opt = click.option("--out-dir", default=None, type=click.Path(),
                        help="Override the config's output directory.")


@main.command()
@_config_opt
@_out_opt
def select(config_path, out_dir):
    """Screen the dataset database and write the selection with its log."""
    config = _load(config_path, out_dir)
    try:
        records, log, result = workflow.do_select(config, config.out_dir)
    except (ConfigError, SelectionError) as exc:
        _fail(str(exc), EXIT_VALIDATION)
    except DgmsimError as exc:
        _fail(str(exc), EXIT_RUNTIME)
    click.echo(log.flow_text(), nl=False)
    if result.status == "too-few":
        click.echo(
            f"too few datasets: deficit {result.deficit}; expand the database "
            f"(e.g. more publication years or related repositories)",
            err=True,
        )
        sys.exit(EXIT_TOO_FEW)
    click.echo(f"selected {len(records)} dataset(s) -> {config.out_dir}")


@main.command()
@_config_opt
@_out_opt
@click.option("--selected", "selected_path", default=None, type=click.Path(),
              help="Selected-records file (default: <out-dir>/selected.jsonl).")
def infer(config_path, out_dir, selected_path):
    """Infer parameter values from the selected datasets and map them."""
    config = _load(config_path, out_dir)
    selected_path = Path(selected_path or config.out_dir / "selected.jsonl")
    if not selected_path.exists():
        _fail(f"selected records not found: {selected_path}", EXIT_VALIDATION)
    try:
        records = load_database(selected_path)
        considered, violations = workflow.do_infer(config, records, config.out_dir)
    except (ConfigError, SelectionError) as exc:
        _fail(str(exc), EXIT_VALIDATION)
    except DgmsimError as exc:
        _fail(str(exc), EXIT_RUNTIME)
    click.echo(
        f"{len(considered)} considered parameter vector(s) "
        f"({considered.design}), {len(violations)} plausibility flag(s)"
    )


@main.command()
@_config_opt
@_out_opt
@click.option("--considered", "considered_path", default=None, type=click.Path(),
              help="Considered-set file (default: <out-dir>/considered.json).")
def plan(config_path, out_dir, considered_path):
    """Cross inferred vectors with researcher grids into DGM instances."""
    config = _load(config_path, out_dir)
    considered = None
    if config.inference_params:
        considered_path = Path(considered_path or config.out_dir / "considered.json")
        if not considered_path.exists():
            _fail(f"considered set not found: {considered_path}", EXIT_VALIDATION)
        considered = ConsideredParameterSet.read_json(considered_path)
    try:
        instances = workflow.do_plan(config, considered, config.out_dir)
    except (ConfigError, TaxonomyError) as exc:
        _fail(str(exc), EXIT_VALIDATION)
    click.echo(f"{len(instances)} DGM instance(s) -> {config.out_dir / 'dgms.jsonl'}")


@main.command()
@_config_opt
@_out_opt
@click.option("--dgms", "dgms_path", default=None, type=click.Path(),
              help="DGM instance file (default: <out-dir>/dgms.jsonl).")
@click.option("--workers", default=os.cpu_count() or 1, show_default="available cores",
              help="Worker processes for the replication engine.")
@click.option("--seed", default=None, type=int, help="Override the master seed.")
def run(config_path, out_dir, dgms_path, workers, seed):
    """Run the replication study and export summary + manifest."""
    config = _load(config_path, out_dir)
    dgms_path = Path(dgms_path or config.out_dir / "dgms.jsonl")
    if not dgms_path.exists():
        _fail(f"DGM instance file not found: {dgms_path}", EXIT_VALIDATION)
    try:
        instances = read_dgm_instances(dgms_path)
        n_dgms = len(instances)

        def progress(done, total):
            if done % max(1, total // n_dgms) == 0 or done == total:
                click.echo(f"  progress: {done}/{total} chunks", err=True)

        summaries, summary_path, elapsed = workflow.do_run(
            config, instances, config.out_dir, workers=workers,
            seed_override=seed, progress=progress,
        )
    except (ConfigError, TaxonomyError, EngineError) as exc:
        _fail(str(exc), EXIT_VALIDATION)
    except (DgmsimError, OSError) as exc:
        _fail(str(exc), EXIT_RUNTIME)
    excluded = sum(1 for s in summaries if s.excluded)
    click.echo(
        f"{len(summaries)} summary row(s), {excluded} excluded; "
        f"wall time {elapsed:.1f}s -> {summary_path}"
    )


@main.command()
@click.option("--summary", "summary_path", required=True, type=click.Path(exists=True),
              help="Summary CSV produced by `run`.")
@click.option("--out-dir", default=None, type=click.Path(),
              help="Output directory (default: alongside the summary).")
def report(summary_path, out_dir):
    """Emit tidy plot-data CSVs from a summary file."""
    out = Path(out_dir) if out_dir else Path(summary_path).parent
    try:
        absolute_path, diff_path = workflow.do_report(summary_path, out)
    except ConfigError as exc:
        _fail(str(exc), EXIT_VALIDATION)
    except (DgmsimError, OSError) as exc:
        _fail(str(exc), EXIT_RUNTIME)
    click.echo(f"wrote {absolute_path} and {diff_path}")


if __name__ == "__main__":
    main()
