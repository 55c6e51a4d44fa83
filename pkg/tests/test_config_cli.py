import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from dgmsim.cli import main
from dgmsim.config import load_config
from dgmsim.errors import ConfigError


class TestLoadConfig:
    def test_bundled_configs_validate(self, configs_dir):
        for name in ("ordinal_study.yaml", "ordinal_researcher.yaml",
                     "ordinal_desk.yaml", "de_study.yaml", "de_desk.yaml"):
            config = load_config(configs_dir / name)
            assert config.structure.family in ("ordinal-two-arm", "de-counts")

    def write(self, tmp_path, text):
        path = tmp_path / "study.yaml"
        path.write_text(text)
        return path

    BASE = """
study: t
family: ordinal-two-arm
selection:
  database: db.jsonl
  criteria: crit.json
inference:
  parameters:
    - {{id: pi_pair, estimator: ordinal-proportions}}
{extra_inference}
design:
  lambda:
    - {{id: n_groups, values: [2]}}
    - {{id: n_categories, values: [7]}}
    - {{id: n_obs, values: [{n_values}]}}
engine:
  methods:
    - {{id: {method}}}
"""

    def test_unregistered_method_rejected(self, tmp_path):
        path = self.write(tmp_path, self.BASE.format(
            extra_inference="", n_values="60", method="bogus"))
        with pytest.raises(ConfigError, match="unregistered"):
            load_config(path)

    def test_uncovered_parameter_rejected(self, tmp_path):
        text = self.BASE.format(extra_inference="", n_values="60",
                                method="wilcoxon")
        text = text.replace("    - {id: n_obs, values: [60]}\n", "")
        with pytest.raises(ConfigError, match="uncovered"):
            load_config(self.write(tmp_path, text))

    def test_unknown_plausibility_parameter_rejected(self, tmp_path):
        extra = "  plausibility:\n    - {rule: all-positive, parameter: ghost}"
        path = self.write(tmp_path, self.BASE.format(
            extra_inference=extra, n_values="60", method="wilcoxon"))
        with pytest.raises(ConfigError, match="ghost"):
            load_config(path)

    def test_aggregated_with_one_to_one_rejected(self, tmp_path):
        text = """
study: t
family: ordinal-two-arm
selection: {database: db.jsonl, criteria: crit.json}
inference:
  parameters:
    - {id: pi_pair, estimator: ordinal-proportions, mode: aggregated,
       strategy: range-equidistant, count: 3}
  mapping: one-to-one
design:
  lambda:
    - {id: n_groups, values: [2]}
    - {id: n_categories, values: [7]}
    - {id: n_obs, values: [60]}
engine:
  methods: [{id: wilcoxon}]
"""
        with pytest.raises(ConfigError, match="one-to-one"):
            load_config(self.write(tmp_path, text))

    def test_duplicate_lambda_parameter_rejected(self, tmp_path):
        text = self.BASE.format(extra_inference="", n_values="60",
                                method="wilcoxon")
        text = text.replace(
            "    - {id: n_groups, values: [2]}",
            "    - {id: n_groups, values: [2]}\n    - {id: n_groups, values: [2]}",
        )
        with pytest.raises(ConfigError, match="two lambda grids"):
            load_config(self.write(tmp_path, text))


@pytest.fixture()
def desk_outputs(tmp_path, configs_dir):
    """Run select -> infer -> plan on the DE desk config into a tmp dir."""
    runner = CliRunner()
    out = tmp_path / "out"
    args = ["--config", str(configs_dir / "de_desk.yaml"), "--out-dir", str(out)]
    for command in ("select", "infer", "plan"):
        result = runner.invoke(main, [command] + args)
        assert result.exit_code == 0, result.output
    return out


class TestCliPipeline:
    def test_select_nejm_prisma(self, tmp_path, configs_dir):
        runner = CliRunner()
        out = tmp_path / "out"
        result = runner.invoke(main, [
            "select", "--config", str(configs_dir / "ordinal_study.yaml"),
            "--out-dir", str(out),
        ])
        assert result.exit_code == 0, result.output
        assert "Records identified: 270" in result.output
        assert "Records selected: 15" in result.output
        assert (out / "selected.jsonl").exists()
        assert (out / "selected.csv").exists()
        flow = (out / "selection_flow.txt").read_text()
        assert "remaining 96" in flow and "remaining 94" in flow

    def test_select_too_few_exit_code(self, tmp_path, configs_dir):
        base = (configs_dir / "ordinal_study.yaml").read_text()
        amended = base.replace("min_datasets: 3", "min_datasets: 20").replace(
            "max_datasets: 20", "max_datasets: 30")
        config_path = tmp_path / "strict.yaml"
        config_path.write_text(amended)
        # keep fixture paths resolvable from the tmp location
        config_path = tmp_path / "strict.yaml"
        fixed = amended.replace("../fixtures", str(Path("fixtures").resolve()))
        config_path.write_text(fixed)
        runner = CliRunner()
        result = runner.invoke(main, [
            "select", "--config", str(config_path), "--out-dir",
            str(tmp_path / "out"),
        ])
        assert result.exit_code == 3
        assert "deficit 5" in result.output

    def test_select_tcga(self, tmp_path, configs_dir):
        runner = CliRunner()
        out = tmp_path / "out"
        result = runner.invoke(main, [
            "select", "--config", str(configs_dir / "de_study.yaml"),
            "--out-dir", str(out),
        ])
        assert result.exit_code == 0, result.output
        assert "Records selected: 14" in result.output

    def test_infer_and_plan_counts(self, desk_outputs):
        considered = json.loads((desk_outputs / "considered.json").read_text())
        assert len(considered["vectors"]) == 14
        dgms = (desk_outputs / "dgms.jsonl").read_text().strip().splitlines()
        assert len(dgms) == 14

    def test_validation_exit_code(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("study: x\nfamily: no-such-family\n")
        result = CliRunner().invoke(main, ["select", "--config", str(bad)])
        assert result.exit_code == 2

    def test_run_and_report_round_trip(self, tmp_path, configs_dir):
        # small self-contained study: 2 datasets, 2 sample sizes, 30 reps
        fixtures = Path("fixtures").resolve()
        config_path = tmp_path / "mini.yaml"
        config_path.write_text(f"""
study: mini
family: ordinal-two-arm
selection:
  database: {fixtures / 'ordinal_desk_datasets.csv'}
  criteria: {fixtures / 'empty_criteria.json'}
inference:
  parameters:
    - {{id: pi_pair, estimator: ordinal-proportions}}
design:
  lambda:
    - {{id: n_groups, values: [2]}}
    - {{id: n_categories, values: [7]}}
    - {{id: n_obs, values: [60, 200]}}
engine:
  n_rep: 30
  master_seed: 5
  measure: power
  methods:
    - {{id: wilcoxon}}
    - {{id: chisq}}
  validity_filter: all-categories-observed
  min_valid_fraction: 0.5
output:
  dir: {tmp_path / 'out'}
""")
        runner = CliRunner()
        args = ["--config", str(config_path)]
        for command in ("select", "infer", "plan"):
            result = runner.invoke(main, [command] + args)
            assert result.exit_code == 0, result.output
        result = runner.invoke(main, ["run"] + args + ["--workers", "1"])
        assert result.exit_code == 0, result.output
        summary_path = tmp_path / "out" / "summary.csv"
        first = summary_path.read_bytes()
        assert (tmp_path / "out" / "records.jsonl").exists()
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["master_seed"] == 5

        # idempotence: rerun produces identical bytes, manifest included
        manifest_first = (tmp_path / "out" / "manifest.json").read_bytes()
        result = runner.invoke(main, ["run"] + args + ["--workers", "1"])
        assert result.exit_code == 0
        assert summary_path.read_bytes() == first
        assert (tmp_path / "out" / "manifest.json").read_bytes() == manifest_first

        result = runner.invoke(main, ["report", "--summary", str(summary_path)])
        assert result.exit_code == 0, result.output
        diff_rows = (tmp_path / "out" / "report_diff_to_best.csv").read_text()
        lines = diff_rows.strip().splitlines()[1:]
        import csv as csv_mod
        from io import StringIO

        parsed = list(csv_mod.reader(StringIO("\n".join(lines))))
        diffs = {}
        for row in parsed:
            diffs.setdefault(row[0], []).append(float(row[-1]))
        for label, values in diffs.items():
            assert all(v <= 0 for v in values)
            assert any(v == 0 for v in values)

    def test_seed_override_changes_results(self, tmp_path, configs_dir):
        fixtures = Path("fixtures").resolve()
        config_path = tmp_path / "mini.yaml"
        config_path.write_text(f"""
study: mini
family: ordinal-two-arm
selection:
  database: {fixtures / 'ordinal_desk_datasets.csv'}
  criteria: {fixtures / 'empty_criteria.json'}
inference:
  parameters:
    - {{id: pi_pair, estimator: ordinal-proportions}}
design:
  lambda:
    - {{id: n_groups, values: [2]}}
    - {{id: n_categories, values: [7]}}
    - {{id: n_obs, values: [60]}}
engine:
  n_rep: 20
  master_seed: 5
  measure: power
  methods: [{{id: wilcoxon}}]
output:
  dir: {tmp_path / 'out'}
""")
        runner = CliRunner()
        args = ["--config", str(config_path)]
        for command in ("select", "infer", "plan"):
            assert runner.invoke(main, [command] + args).exit_code == 0
        assert runner.invoke(main, ["run"] + args + ["--workers", "1"]).exit_code == 0
        first = (tmp_path / "out" / "summary.csv").read_bytes()
        assert runner.invoke(
            main, ["run"] + args + ["--workers", "1", "--seed", "6"]
        ).exit_code == 0
        assert (tmp_path / "out" / "summary.csv").read_bytes() != first


class TestDownselection:
    def test_downselect_logged_with_seed(self, tmp_path, configs_dir):
        base = (configs_dir / "ordinal_study.yaml").read_text()
        amended = base.replace("max_datasets: 20", "max_datasets: 10")
        amended = amended.replace("../fixtures", str(Path("fixtures").resolve()))
        config_path = tmp_path / "capped.yaml"
        config_path.write_text(amended)
        runner = CliRunner()
        out = tmp_path / "out"
        result = runner.invoke(main, [
            "select", "--config", str(config_path), "--out-dir", str(out),
        ])
        assert result.exit_code == 0, result.output
        log = json.loads((out / "selection_log.json").read_text())
        assert len(log["final_ids"]) == 10
        assert log["seed"] == 108
        assert log["stages"][-1]["criterion_id"] == "random-downselection"
        removed_total = sum(s["removed"] for s in log["stages"])
        assert log["initial"] - removed_total == 10


class TestAggregatedInferenceConfig:
    def test_factorial_mapping_with_aggregated_parameter(self, tmp_path):
        # pi pairs direct (15 datasets) x n_obs aggregated into a 5-point
        # equidistant grid -> 75 considered vectors via the factorial design
        fixtures = Path("fixtures").resolve()
        config_path = tmp_path / "agg.yaml"
        config_path.write_text(f"""
study: agg
family: ordinal-two-arm
selection:
  database: {fixtures / 'ordinal_datasets.csv'}
  criteria: {fixtures / 'empty_criteria.json'}
inference:
  parameters:
    - {{id: pi_pair, estimator: ordinal-proportions}}
    - {{id: n_obs, estimator: total-observations, mode: aggregated,
       strategy: range-equidistant, count: 5}}
  mapping: full-factorial
design:
  lambda:
    - {{id: n_groups, values: [2]}}
    - {{id: n_categories, values: [7]}}
engine:
  methods: [{{id: wilcoxon}}]
output:
  dir: {tmp_path / 'out'}
""")
        from dgmsim.config import load_config
        from dgmsim import workflow
        from dgmsim.selection import load_ordinal_csv

        config = load_config(config_path)
        records = load_ordinal_csv(fixtures / "ordinal_datasets.csv")
        considered, _ = workflow.do_infer(config, records, tmp_path / "out")
        assert len(considered) == 75
        assert sum(considered.multiplicity) == 75
        n_values = sorted({v.get("n_obs") for v in considered.vectors})
        totals = [r.metadata["n1"] + r.metadata["n2"] for r in records]
        assert len(n_values) == 5
        assert n_values[0] == min(totals) and n_values[-1] == max(totals)
        inferred = json.loads((tmp_path / "out" / "inferred_values.json").read_text())
        assert inferred[1]["mode"] == "aggregated"
        assert inferred[1]["strategy"] == "range-equidistant"
        instances = workflow.do_plan(config, considered, tmp_path / "out")
        assert len(instances) == 75


class TestResearcherPlan:
    def test_plan_without_inference_section(self, tmp_path, configs_dir):
        runner = CliRunner()
        out = tmp_path / "out"
        result = runner.invoke(main, [
            "plan", "--config", str(configs_dir / "ordinal_researcher.yaml"),
            "--out-dir", str(out),
        ])
        assert result.exit_code == 0, result.output
        assert "20 DGM instance(s)" in result.output
        lines = (out / "dgms.jsonl").read_text().strip().splitlines()
        assert len(lines) == 20
        first = json.loads(lines[0])
        assert first["label"] == "ordinal-researcher:k7_id1|n_obs=60"
        assert first["theta"] == {}
        assert first["lambda"]["pi_pair"] == [
            [0.04, 0.07, 0.11, 0.14, 0.18, 0.21, 0.25],
            [0.14, 0.14, 0.14, 0.14, 0.14, 0.14, 0.14],
        ]


class TestSubsetRuleFixtureTrace:
    def test_fixture_records_annotated(self, tmp_path, configs_dir):
        from dgmsim.config import load_config
        from dgmsim import workflow

        config = load_config(configs_dir / "ordinal_study.yaml")
        records, _, _ = workflow.do_select(config, tmp_path / "out")
        by_id = {r.id: r for r in records}
        rosas = by_id["rosas2021"].metadata
        assert rosas["selected_arms"] == ["tocilizumab", "placebo"]
        cavalcanti = by_id["cavalcanti2020"].metadata
        assert cavalcanti["selected_outcome"] == "clinical-status-7d"
        # every selected record carries the subset annotations
        assert all("selected_arms" in r.metadata for r in records)


class TestDownselectWithoutCriteria:
    def test_empty_criteria_plus_cap(self, tmp_path):
        fixtures = Path("fixtures").resolve()
        config_path = tmp_path / "cap.yaml"
        config_path.write_text(f"""
study: cap
family: ordinal-two-arm
selection:
  database: {fixtures / 'ordinal_datasets.csv'}
  criteria: {fixtures / 'empty_criteria.json'}
  min_datasets: 1
  max_datasets: 4
  seed: 3
inference:
  parameters:
    - {{id: pi_pair, estimator: ordinal-proportions}}
design:
  lambda:
    - {{id: n_groups, values: [2]}}
    - {{id: n_categories, values: [7]}}
    - {{id: n_obs, values: [60]}}
engine:
  methods: [{{id: wilcoxon}}]
output:
  dir: {tmp_path / 'out'}
""")
        from dgmsim.config import load_config
        from dgmsim import workflow

        config = load_config(config_path)
        records, log, result = workflow.do_select(config, tmp_path / "out")
        assert result.status == "downselected"
        assert len(records) == 4
        assert log.check_balance()
