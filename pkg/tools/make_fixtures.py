#!/usr/bin/env python3
"""Regenerate the bundled fixture files under fixtures/.

Everything here is deterministic (fixed seeds), so the committed fixtures can
be reproduced byte-for-byte. The screening databases encode published
eligibility judgments as boolean/count metadata; the expression files are
synthetic stand-ins whose per-dataset median dispersions match the published
summaries.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

# --------------------------------------------------------------------------- #
# Ordinal trial datasets (two-arm, 7 ordinal categories)
# --------------------------------------------------------------------------- #

# dataset id, publication, condition, measure, n1, n2, p1 (7), p2 (7)
ORDINAL_TRIALS = [
    ("albers2018", "Albers 2018 (NEJM 378)", "stroke", "mRS", 92, 90,
     (0.10, 0.16, 0.18, 0.15, 0.18, 0.08, 0.14),
     (0.08, 0.04, 0.04, 0.16, 0.27, 0.16, 0.26)),
    ("campbell2018", "Campbell 2018 (NEJM 378)", "stroke", "mRS", 101, 101,
     (0.28, 0.21, 0.14, 0.14, 0.08, 0.06, 0.10),
     (0.18, 0.23, 0.09, 0.12, 0.14, 0.07, 0.18)),
    ("cavalcanti2020", "Cavalcanti 2020 (NEJM 383)", "covid-19", "clinical-status",
     159, 173,
     (0.64, 0.17, 0.08, 0.04, 0.01, 0.03, 0.03),
     (0.68, 0.17, 0.05, 0.03, 0.01, 0.04, 0.03)),
    ("goldman2020", "Goldman 2020 (NEJM 383)", "covid-19", "clinical-status",
     200, 197,
     (0.08, 0.08, 0.04, 0.10, 0.06, 0.04, 0.60),
     (0.11, 0.17, 0.05, 0.07, 0.07, 0.02, 0.52)),
    ("hutchinson2020", "Hutchinson 2020 (NEJM 383)", "subdural-hematoma", "mRS",
     341, 339,
     (0.48, 0.14, 0.04, 0.18, 0.03, 0.04, 0.09),
     (0.48, 0.16, 0.06, 0.19, 0.03, 0.02, 0.05)),
    ("jovin2022", "Jovin 2022 (NEJM 387)", "stroke", "mRS", 110, 107,
     (0.06, 0.18, 0.15, 0.07, 0.09, 0.14, 0.31),
     (0.01, 0.06, 0.07, 0.10, 0.19, 0.15, 0.42)),
    ("lecouffe2021", "LeCouffe 2021 (NEJM 385)", "stroke", "mRS", 273, 266,
     (0.04, 0.12, 0.33, 0.10, 0.10, 0.11, 0.21),
     (0.06, 0.09, 0.36, 0.09, 0.14, 0.09, 0.16)),
    ("ma2019", "Ma 2019 (NEJM 380)", "stroke", "mRS", 113, 112,
     (0.12, 0.23, 0.14, 0.13, 0.13, 0.12, 0.12),
     (0.11, 0.19, 0.13, 0.14, 0.21, 0.12, 0.09)),
    ("martins2020", "Martins 2020 (NEJM 382)", "stroke", "mRS", 111, 110,
     (0.08, 0.12, 0.15, 0.22, 0.13, 0.06, 0.24),
     (0.03, 0.06, 0.12, 0.15, 0.19, 0.16, 0.30)),
    # rounded zeros in the published table hide small positive estimates
    ("perkins2018", "Perkins 2018 (NEJM 379)", "cardiac-arrest", "mRS", 4007, 3994,
     (0.0030, 0.0042, 0.01, 0.01, 0.0020, 0.01, 0.97),
     (0.0025, 0.0030, 0.01, 0.01, 0.0022, 0.0035, 0.98)),
    ("rosas2021", "Rosas 2021 (NEJM 384)", "covid-19-pneumonia", "clinical-status",
     294, 144,
     (0.56, 0.02, 0.05, 0.02, 0.09, 0.06, 0.20),
     (0.49, 0.06, 0.03, 0.07, 0.10, 0.06, 0.19)),
    ("tao2022", "Tao 2022 (NEJM 387)", "stroke", "mRS", 226, 114,
     (0.05, 0.15, 0.13, 0.13, 0.05, 0.12, 0.37),
     (0.04, 0.04, 0.03, 0.12, 0.05, 0.17, 0.55)),
    ("thomalla2018", "Thomalla 2018 (NEJM 379)", "stroke", "mRS", 254, 249,
     (0.21, 0.32, 0.21, 0.12, 0.07, 0.02, 0.04),
     (0.15, 0.27, 0.23, 0.17, 0.13, 0.04, 0.01)),
    ("vandenberg2017", "van den Berg 2017 (NEJM 376)", "stroke", "mRS", 194, 197,
     (0.03, 0.05, 0.30, 0.18, 0.06, 0.08, 0.30),
     (0.01, 0.05, 0.18, 0.17, 0.10, 0.11, 0.39)),
    ("yang2020", "Yang 2022 (NEJM 387)", "stroke", "mRS", 326, 328,
     (0.13, 0.11, 0.12, 0.19, 0.11, 0.15, 0.18),
     (0.14, 0.09, 0.14, 0.15, 0.12, 0.18, 0.19)),
]

RESEARCHER_PAIRS = [
    ("k7_id1",
     (0.04, 0.07, 0.11, 0.14, 0.18, 0.21, 0.25),
     (0.14, 0.14, 0.14, 0.14, 0.14, 0.14, 0.14)),
    ("k7_id2",
     (0.14, 0.14, 0.14, 0.14, 0.14, 0.14, 0.14),
     (0.05, 0.05, 0.07, 0.10, 0.10, 0.28, 0.35)),
    ("k7_id3",
     (0.05, 0.05, 0.07, 0.10, 0.10, 0.28, 0.35),
     (0.05, 0.10, 0.20, 0.30, 0.20, 0.10, 0.05)),
    ("k7_id4",
     (0.05, 0.05, 0.20, 0.20, 0.30, 0.10, 0.10),
     (0.05, 0.10, 0.20, 0.30, 0.20, 0.10, 0.05)),
]

NEJM_CRITERIA = [
    {"id": "incl-rct", "level": "dataset", "requirement": "R2-domain",
     "phase": "inclusion", "key": "is_rct", "op": "=", "value": True,
     "note": "randomized controlled trials only"},
    {"id": "incl-ordinal-outcome", "level": "dataset", "requirement": "R2-domain",
     "phase": "inclusion", "key": "has_ordinal_outcome", "op": "=", "value": True,
     "note": "at least one ordinal outcome"},
    {"id": "excl-cluster-randomized", "level": "dataset", "requirement": "R2-domain",
     "phase": "exclusion", "key": "individually_randomized", "op": "=",
     "value": False, "note": "individuals randomized in groups or clusters"},
    {"id": "excl-overlapping-data", "level": "dataset",
     "requirement": "R3-information", "phase": "exclusion",
     "key": "overlaps_other_trial", "op": "=", "value": True,
     "note": "data overlaps with a larger trial already under consideration"},
    {"id": "excl-non-efficacy", "level": "dataset", "requirement": "R2-domain",
     "phase": "exclusion", "key": "outcome_efficacy", "op": "=", "value": False,
     "note": "ordinal outcomes are safety/procedural/adherence/economic only"},
    {"id": "excl-patient-reported", "level": "dataset", "requirement": "R2-domain",
     "phase": "exclusion", "key": "outcome_patient_reported", "op": "=",
     "value": True, "note": "ordinal outcomes are patient-reported"},
    {"id": "excl-not-itt", "level": "dataset", "requirement": "R2-domain",
     "phase": "exclusion", "key": "outcome_itt", "op": "=", "value": False,
     "note": "outcome not analyzed by intention to treat"},
    {"id": "excl-not-analyzed-ordinal", "level": "dataset",
     "requirement": "R2-domain", "phase": "exclusion",
     "key": "outcome_analyzed_as_ordinal", "op": "=", "value": False,
     "note": "outcome dichotomized or otherwise not analyzed as ordinal"},
    {"id": "excl-unclear-reporting", "level": "dataset",
     "requirement": "R3-information", "phase": "exclusion",
     "key": "outcome_clearly_reported", "op": "=", "value": False,
     "note": "category distribution not clearly reported for all categories"},
    {"id": "excl-wrong-category-count", "level": "dataset",
     "requirement": "R2-domain", "phase": "exclusion",
     "key": "outcome_categories", "op": "!=", "value": 7,
     "note": "ordinal outcome has more or fewer than 7 categories"},
    {"id": "excl-empty-categories", "level": "dataset",
     "requirement": "R3-information", "phase": "exclusion",
     "key": "outcome_empty_categories", "op": "=", "value": True,
     "note": "ordinal outcome has empty categories"},
]


def _passing_flags() -> dict:
    return {
        "is_rct": True,
        "has_ordinal_outcome": True,
        "individually_randomized": True,
        "overlaps_other_trial": False,
        "outcome_efficacy": True,
        "outcome_patient_reported": False,
        "outcome_itt": True,
        "outcome_analyzed_as_ordinal": True,
        "outcome_clearly_reported": True,
        "outcome_categories": 7,
        "outcome_empty_categories": False,
    }


def make_nejm_database(rng: np.random.Generator) -> list[dict]:
    """270 screening records: 174 fail inclusion, 2 fail trial exclusions,
    79 fail outcome exclusions, 15 selected."""
    removed: list[dict] = []
    years = rng.integers(2017, 2023, size=255)

    def blank(i: int) -> dict:
        return {
            "id": f"nejm-{years[i]}-{i + 1:04d}",
            "source": f"NEJM {years[i]}",
            "metadata": _passing_flags(),
        }

    cursor = 0

    def take(n: int) -> list[dict]:
        nonlocal cursor
        out = [blank(cursor + i) for i in range(n)]
        cursor += n
        removed.extend(out)
        return out

    for rec in take(102):
        rec["metadata"]["is_rct"] = False
        rec["metadata"]["has_ordinal_outcome"] = bool(rng.integers(0, 2))
    for rec in take(72):
        rec["metadata"]["has_ordinal_outcome"] = False
    for rec in take(1):
        rec["metadata"]["individually_randomized"] = False
    for rec in take(1):
        rec["metadata"]["overlaps_other_trial"] = True
    for rec in take(12):
        rec["metadata"]["outcome_efficacy"] = False
    for rec in take(9):
        rec["metadata"]["outcome_patient_reported"] = True
    for rec in take(4):
        rec["metadata"]["outcome_itt"] = False
    for rec in take(21):
        rec["metadata"]["outcome_analyzed_as_ordinal"] = False
    for rec in take(14):
        rec["metadata"]["outcome_clearly_reported"] = False
    for rec, k in zip(take(16), rng.choice([3, 4, 5, 6, 8, 9, 10, 11], size=16)):
        rec["metadata"]["outcome_categories"] = int(k)
    for rec in take(3):
        rec["metadata"]["outcome_empty_categories"] = True
    assert cursor == 255

    selected = []
    for (did, pub, condition, measure, n1, n2, p1, p2) in ORDINAL_TRIALS:
        md = _passing_flags()
        md.update(
            {
                "condition": condition,
                "measure": measure,
                "n1": n1,
                "n2": n2,
                "p1": list(p1),
                "p2": list(p2),
                "arms": [{"id": "arm-1", "n": n1}, {"id": "arm-2", "n": n2}],
                "outcomes": [
                    {"id": measure, "priority": 1, "complete": True, "n": n1 + n2}
                ],
            }
        )
        selected.append({"id": did, "source": pub, "metadata": md})

    by_id = {r["id"]: r for r in selected}
    # a third (small) arm so the largest-arms rule has something to drop
    by_id["rosas2021"]["metadata"]["arms"] = [
        {"id": "tocilizumab", "n": 294},
        {"id": "placebo", "n": 144},
        {"id": "open-label", "n": 30},
    ]
    # a primary outcome with incomplete reporting, so the priority chain must
    # fall through to the complete secondary outcome
    by_id["cavalcanti2020"]["metadata"]["outcomes"] = [
        {"id": "clinical-status-15d", "priority": 1, "complete": False, "n": 332},
        {"id": "clinical-status-7d", "priority": 2, "complete": True, "n": 332},
    ]

    database = removed + selected
    order = rng.permutation(len(database))
    return [database[i] for i in order]


# --------------------------------------------------------------------------- #
# TCGA-style cancer cohorts
# --------------------------------------------------------------------------- #

# study abbreviation, study name, total sample count, matched tumor/normal pairs
TCGA_INCLUDED = [
    ("BLCA", "Bladder urothelial carcinoma", 38, 19),
    ("BRCA", "Breast invasive carcinoma", 224, 112),
    ("COAD", "Colon adenocarcinoma", 52, 26),
    ("ESCA", "Esophageal carcinoma", 22, 11),
    ("HNSC", "Head and neck squamous cell carcinoma", 86, 43),
    ("KICH", "Kidney chromophobe", 50, 25),
    ("KIRC", "Kidney renal clear cell carcinoma", 144, 72),
    ("KIRP", "Kidney renal papillary cell carcinoma", 64, 32),
    ("LIHC", "Liver hepatocellular carcinoma", 100, 50),
    ("LUAD", "Lung adenocarcinoma", 116, 58),
    ("LUSC", "Lung squamous cell carcinoma", 102, 51),
    ("PRAD", "Prostate adenocarcinoma", 104, 52),
    ("STAD", "Stomach adenocarcinoma", 64, 32),
    ("THCA", "Thyroid carcinoma", 118, 59),
]

TCGA_NO_NORMAL = [
    ("ACC", "Adrenocortical carcinoma"),
    ("DLBC", "Lymphoid neoplasm diffuse large B-cell lymphoma"),
    ("GBM", "Glioblastoma multiforme"),
    ("LAML", "Acute myeloid leukemia"),
    ("LGG", "Brain lower grade glioma"),
    ("MESO", "Mesothelioma"),
    ("OV", "Ovarian serous cystadenocarcinoma"),
    ("TGCT", "Testicular germ cell tumors"),
    ("UCS", "Uterine carcinosarcoma"),
    ("UVM", "Uveal melanoma"),
]

# 7 cohorts below 10 samples in total; 2 more below 10 matched pairs
TCGA_FEW_PAIRS = [
    ("CESC", "Cervical squamous cell carcinoma", 6, 3),
    ("CHOL", "Cholangiocarcinoma", 45, 9),
    ("PAAD", "Pancreatic adenocarcinoma", 8, 4),
    ("PCPG", "Pheochromocytoma and paraganglioma", 6, 3),
    ("READ", "Rectum adenocarcinoma", 9, 4),
    ("SARC", "Sarcoma", 4, 2),
    ("SKCM", "Skin cutaneous melanoma", 2, 1),
    ("THYM", "Thymoma", 4, 2),
    ("UCEC", "Uterine corpus endometrial carcinoma", 60, 7),
]

TCGA_CRITERIA = [
    {"id": "excl-no-tumor-normal", "level": "dataset", "requirement": "R2-domain",
     "phase": "exclusion", "key": "has_tumor_and_normal", "op": "=", "value": False,
     "note": "dataset lacks primary-tumor or solid-normal samples"},
    {"id": "excl-few-matched-pairs", "level": "dataset",
     "requirement": "R3-information", "phase": "exclusion",
     "key": "n_matched_pairs", "op": "<", "value": 10,
     "note": "fewer than 10 matched tumor/normal sample pairs"},
]


def make_tcga_database(rng: np.random.Generator) -> list[dict]:
    records = []
    for abbr, name, n_total, n_pairs in TCGA_INCLUDED:
        records.append(
            {
                "id": abbr,
                "source": "TCGA",
                "metadata": {
                    "study_name": name,
                    "has_tumor_and_normal": True,
                    "n_total": n_total,
                    "n_matched_pairs": n_pairs,
                },
            }
        )
    for abbr, name in TCGA_NO_NORMAL:
        records.append(
            {
                "id": abbr,
                "source": "TCGA",
                "metadata": {
                    "study_name": name,
                    "has_tumor_and_normal": False,
                    "n_total": int(rng.integers(50, 500)),
                    "n_matched_pairs": 0,
                },
            }
        )
    for abbr, name, n_total, n_pairs in TCGA_FEW_PAIRS:
        records.append(
            {
                "id": abbr,
                "source": "TCGA",
                "metadata": {
                    "study_name": name,
                    "has_tumor_and_normal": True,
                    "n_total": n_total,
                    "n_matched_pairs": n_pairs,
                },
            }
        )
    order = rng.permutation(len(records))
    return [records[i] for i in order]


# --------------------------------------------------------------------------- #
# Expression parameter pools
# --------------------------------------------------------------------------- #

#: target median dispersion per cohort (over genes above the mean floor)
MEDIAN_DISPERSION = {
    "KICH": 0.161, "KIRC": 0.174, "PRAD": 0.185, "THCA": 0.199,
    "KIRP": 0.215, "LUSC": 0.234, "BRCA": 0.247, "LUAD": 0.262,
    "BLCA": 0.280, "LIHC": 0.305, "HNSC": 0.330, "COAD": 0.360,
    "STAD": 0.405, "ESCA": 0.451,
}

N_KEPT = 10601  # odd, so the median is an order statistic
N_BELOW = 400


def make_expression_file(abbr: str, target: float, out_path: Path) -> None:
    rng = np.random.default_rng(abs(hash_name(abbr)) % 2**32)
    kept_means = 10.0 ** rng.uniform(1.0001, 4.3, size=N_KEPT)
    below_means = 10.0 ** rng.uniform(-2.0, 0.9999, size=N_BELOW)

    raw = target * rng.lognormal(0.0, 0.55, size=N_KEPT)
    scaled = raw * (target / np.median(raw))
    disp = np.round(scaled, 6)
    # force the median order statistic to equal the target exactly
    mid = np.argsort(disp)[N_KEPT // 2]
    disp[mid] = target
    assert np.median(disp) == target, abbr

    below_disp = np.round(target * rng.lognormal(0.4, 0.5, size=N_BELOW) + 0.2, 6)

    means = np.concatenate([kept_means, below_means])
    disps = np.concatenate([disp, below_disp])
    order = rng.permutation(means.size)
    with out_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["gene_id", "mean", "dispersion"])
        for rank, idx in enumerate(order, start=1):
            writer.writerow([f"g{rank:05d}", f"{means[idx]:.4f}", f"{disps[idx]:.6f}"])


def hash_name(name: str) -> int:
    out = 0
    for ch in name:
        out = (out * 131 + ord(ch)) % (2**31)
    return out


# --------------------------------------------------------------------------- #
# Writers
# --------------------------------------------------------------------------- #

def write_jsonl(records: list[dict], path: Path) -> None:
    with path.open("w") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")


#: desk-scale subset spanning small to large relative-effect deviations
DESK_DATASET_IDS = (
    "yang2020", "cavalcanti2020", "goldman2020",
    "thomalla2018", "vandenberg2017", "tao2022",
)


def write_ordinal_csv(path: Path, dataset_ids=None) -> None:
    header = (
        ["dataset_id", "publication", "condition", "measure", "n1", "n2"]
        + [f"p1_{k}" for k in range(1, 8)]
        + [f"p2_{k}" for k in range(1, 8)]
    )
    rows = ORDINAL_TRIALS
    if dataset_ids is not None:
        rows = [t for t in ORDINAL_TRIALS if t[0] in dataset_ids]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for (did, pub, condition, measure, n1, n2, p1, p2) in rows:
            writer.writerow([did, pub, condition, measure, n1, n2]
                            + [f"{v:g}" for v in p1] + [f"{v:g}" for v in p2])


def write_researcher_csv(path: Path) -> None:
    header = (["pair_id"] + [f"p1_{k}" for k in range(1, 8)]
              + [f"p2_{k}" for k in range(1, 8)])
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for pair_id, p1, p2 in RESEARCHER_PAIRS:
            writer.writerow([pair_id] + [f"{v:g}" for v in p1] + [f"{v:g}" for v in p2])


def main() -> int:
    FIXTURES.mkdir(exist_ok=True)
    (FIXTURES / "expression").mkdir(exist_ok=True)

    rng = np.random.default_rng(20170101)
    write_jsonl(make_nejm_database(rng), FIXTURES / "nejm_database.jsonl")
    (FIXTURES / "nejm_criteria.json").write_text(
        json.dumps(NEJM_CRITERIA, indent=2) + "\n"
    )
    write_ordinal_csv(FIXTURES / "ordinal_datasets.csv")
    write_ordinal_csv(FIXTURES / "ordinal_desk_datasets.csv", DESK_DATASET_IDS)
    write_researcher_csv(FIXTURES / "ordinal_researcher_pairs.csv")
    (FIXTURES / "empty_criteria.json").write_text("[]\n")

    rng = np.random.default_rng(20090707)
    write_jsonl(make_tcga_database(rng), FIXTURES / "tcga_database.jsonl")
    (FIXTURES / "tcga_criteria.json").write_text(
        json.dumps(TCGA_CRITERIA, indent=2) + "\n"
    )

    for abbr, target in MEDIAN_DISPERSION.items():
        make_expression_file(abbr, target, FIXTURES / "expression" / f"{abbr}.csv")

    print(f"fixtures written under {FIXTURES}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
