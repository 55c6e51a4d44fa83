import json

import pytest

from dgmsim.core import (
    ComponentSpec,
    DGMInstance,
    LambdaGrid,
    ModelStructureConfig,
    ParameterVector,
    classify_components,
    cross_design,
    read_dgm_instances,
    write_dgm_instances,
)
from dgmsim.errors import TaxonomyError
from dgmsim.inference import ConsideredParameterSet


def ordinal_components():
    return [
        ComponentSpec("n_obs", "parameter", "real-data-based", "known"),
        ComponentSpec("n_categories", "parameter", "real-data-based", "known"),
        ComponentSpec("pi_pair", "parameter", "real-data-based", "unknown",
                      target_related=True),
        ComponentSpec("n_groups", "parameter", "researcher-interest", "known"),
    ]


class TestClassifyComponents:
    def test_ordinal_partition(self):
        structure = ModelStructureConfig.create("ordinal-two-arm")
        tax = classify_components(ordinal_components(), structure)
        assert set(tax.theta_design) == {"n_obs", "n_categories"}
        assert tax.theta_target == ("pi_pair",)
        assert tax.theta_other == ()
        assert tax.lambda_design == ("n_groups",)
        assert tax.lambda_target == () and tax.lambda_other == ()

    def test_survival_partition(self):
        structure = ModelStructureConfig.create("survival-two-arm")
        components = [
            ComponentSpec("n_obs", "parameter", "real-data-based", "known"),
            ComponentSpec("rate1", "parameter", "real-data-based", "unknown",
                          target_related=True),
            ComponentSpec("rate2", "parameter", "real-data-based", "unknown",
                          target_related=True),
            ComponentSpec("censor_upper", "parameter", "real-data-based", "unknown"),
            ComponentSpec("n_groups", "parameter", "researcher-interest", "known"),
        ]
        tax = classify_components(components, structure)
        assert tax.theta_design == ("n_obs",)
        assert set(tax.theta_target) == {"rate1", "rate2"}
        assert tax.theta_other == ("censor_upper",)

    def test_missing_required_parameter(self):
        structure = ModelStructureConfig.create("de-counts")
        components = [
            ComponentSpec("n_groups", "parameter", "researcher-interest", "known"),
            ComponentSpec("n_obs", "parameter", "researcher-convenience", "known"),
        ]
        with pytest.raises(TaxonomyError, match="missing required"):
            classify_components(components, structure)

    def test_duplicate_id(self):
        structure = ModelStructureConfig.create("ordinal-two-arm")
        components = ordinal_components() + [
            ComponentSpec("n_obs", "parameter", "researcher-convenience", "known")
        ]
        with pytest.raises(TaxonomyError, match="duplicate"):
            classify_components(components, structure)

    def test_target_flag_on_known_component(self):
        with pytest.raises(TaxonomyError, match="target_related"):
            ComponentSpec("n_obs", "parameter", "real-data-based", "known",
                          target_related=True)

    def test_order_insensitive(self):
        structure = ModelStructureConfig.create("ordinal-two-arm")
        forward = classify_components(ordinal_components(), structure)
        backward = classify_components(ordinal_components()[::-1], structure)
        assert forward == backward


def make_theta_set(n, param="pi_pair"):
    vectors = tuple(
        ParameterVector.from_dict(
            {param: ((0.1 + 0.001 * i,) * 7, (0.2,) * 7)}, provenance=f"ds{i:02d}"
        )
        for i in range(n)
    )
    return ConsideredParameterSet(
        vectors=vectors, design="one-to-one", multiplicity=(1,) * n
    )


ORDINAL_GRIDS = [
    LambdaGrid.create("n_groups", [2]),
    LambdaGrid.create("n_categories", [7]),
    LambdaGrid.create("n_obs", [60, 120, 200, 300, 600]),
]


class TestCrossDesign:
    def test_real_data_based_count(self):
        structure = ModelStructureConfig.create("ordinal-two-arm")
        instances = cross_design(make_theta_set(15), ORDINAL_GRIDS, structure,
                                 label_prefix="ord")
        assert len(instances) == 75

    def test_researcher_specified_count(self):
        structure = ModelStructureConfig.create("ordinal-two-arm")
        pair_grid = LambdaGrid.create(
            "pi_pair",
            [((0.1,) * 7, (0.2,) * 7) for _ in range(4)],
            labels=[f"id{i}" for i in range(4)],
        )
        instances = cross_design(None, [pair_grid] + ORDINAL_GRIDS, structure,
                                 label_prefix="ord")
        assert len(instances) == 20
        assert instances[0].label == "ord:id0|n_obs=60"

    def test_de_count(self):
        structure = ModelStructureConfig.create("de-counts")
        thetas = tuple(
            ParameterVector.from_dict({"expr": f"DS{i:02d}"}, provenance=f"DS{i:02d}")
            for i in range(14)
        )
        theta_set = ConsideredParameterSet(thetas, "one-to-one", (1,) * 14)
        grids = [
            LambdaGrid.create(("n_obs", "min_fc"), [(6, 1.5), (20, 1.2)]),
            LambdaGrid.create("p_de", [0.05, 0.10, 0.30, 0.60]),
            LambdaGrid.create("n_groups", [2]),
            LambdaGrid.create("n_genes", [10000]),
            LambdaGrid.create("p_up", [0.5]),
            LambdaGrid.create("fc_rate", [1.0]),
        ]
        instances = cross_design(theta_set, grids, structure, label_prefix="de")
        assert len(instances) == 14 * 2 * 4
        # theta varies slowest; the last grid with >1 values varies fastest
        assert instances[0].theta.provenance == "DS00"
        assert instances[0].param("p_de") == 0.05
        assert instances[1].param("p_de") == 0.10
        assert instances[3].param("p_de") == 0.60
        assert instances[4].param("n_obs") == 20 and instances[4].param("min_fc") == 1.2
        assert instances[8].theta.provenance == "DS01"

    def test_full_cross_order_deterministic(self):
        structure = ModelStructureConfig.create("ordinal-two-arm")
        first = cross_design(make_theta_set(3), ORDINAL_GRIDS, structure)
        second = cross_design(make_theta_set(3), ORDINAL_GRIDS, structure)
        assert [i.label for i in first] == [i.label for i in second]

    def test_paired_rule(self):
        structure = ModelStructureConfig.create("ordinal-two-arm")
        grids = [
            LambdaGrid.create("n_groups", [2, 2, 2]),
            LambdaGrid.create("n_categories", [7, 7, 7]),
            LambdaGrid.create("n_obs", [60, 120, 200]),
        ]
        instances = cross_design(make_theta_set(3), grids, structure, rule="paired")
        assert len(instances) == 3
        assert [i.param("n_obs") for i in instances] == [60.0, 120.0, 200.0]

    def test_paired_length_mismatch(self):
        structure = ModelStructureConfig.create("ordinal-two-arm")
        with pytest.raises(TaxonomyError, match="paired"):
            cross_design(make_theta_set(3), ORDINAL_GRIDS, structure, rule="paired")

    def test_empty_grid_rejected(self):
        structure = ModelStructureConfig.create("ordinal-two-arm")
        grids = [LambdaGrid.create("n_groups", [2]),
                 LambdaGrid.create("n_categories", [7])]
        with pytest.raises(TaxonomyError):
            cross_design(make_theta_set(2), grids + [LambdaGrid("n_obs", ())], structure)

    def test_lambda_theta_overlap_rejected(self):
        structure = ModelStructureConfig.create("ordinal-two-arm")
        grids = ORDINAL_GRIDS + [LambdaGrid.create("pi_pair", [((0.5,) * 7, (0.5,) * 7)])]
        with pytest.raises(TaxonomyError, match="both lambda and theta"):
            cross_design(make_theta_set(2), grids, structure)


class TestSerialization:
    def test_round_trip(self, tmp_path):
        structure = ModelStructureConfig.create("ordinal-two-arm")
        instances = cross_design(make_theta_set(4), ORDINAL_GRIDS, structure,
                                 label_prefix="rt")
        path = tmp_path / "dgms.jsonl"
        write_dgm_instances(instances, path)
        loaded = read_dgm_instances(path)
        assert loaded == instances

    def test_serialized_keys(self, tmp_path):
        structure = ModelStructureConfig.create("ordinal-two-arm")
        instances = cross_design(make_theta_set(1), ORDINAL_GRIDS, structure)
        path = tmp_path / "dgms.jsonl"
        write_dgm_instances(instances, path)
        payload = json.loads(path.read_text().splitlines()[0])
        assert set(payload) == {"label", "family", "structure", "lambda", "theta",
                                "provenance"}

    def test_structure_option_validation(self):
        with pytest.raises(TaxonomyError, match="structure option"):
            ModelStructureConfig.create("survival-two-arm", {"event_dist": "gamma"})
        ok = ModelStructureConfig.create("survival-two-arm",
                                         {"event_dist": "weibull"})
        assert ok.options_dict() == {"event_dist": "weibull"}
