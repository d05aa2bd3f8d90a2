from __future__ import annotations

import os

import pytest
import torch
from hypothesis import settings

from herbgraph.fixtures import planted_knowledge_graph

torch.set_num_threads(1)
settings.register_profile("ci", deadline=None, print_blob=True)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


TINY_FILES = {
    "vocabulary.csv": "kind,token\nnature,warm\nnature,cold\nflavor,bitter\nflavor,sweet\nmeridian,lung\n",
    "chp.csv": (
        "id,name,kingdom,taxid,natures,flavors,meridians,efficacy\n"
        "CHP00001,alpha,Plantae,3,warm,bitter,lung,tonify\n"
        "CHP00002,beta,Plantae,4,cold,bitter|sweet,,clear\n"
        "CHP00003,gamma,Mineralia,,warm,,lung,calm\n"
    ),
    "formulas.csv": "id,labels\nF1,10000\nF2,01001\n",
    "formula_members.csv": (
        "formula_id,chp_id,dose_g\nF1,CHP00001,10\nF1,CHP00002,30\nF2,CHP00002,5\nF2,CHP00003,\n"
    ),
    "compounds.csv": "inchikey,class,MolWt,LogP\nAAAAAAAAAAAAAA-BBBBBBBBBB-N,flavonoid,300.0,1.5\n"
                     "CCCCCCCCCCCCCC-DDDDDDDDDD-N,,700.0,6.0\n",
    "pairs.csv": "inchikey,entrez_id,affinity,provenance\nAAAAAAAAAAAAAA-BBBBBBBBBB-N,101,8.5,Recorded\n"
                 "CCCCCCCCCCCCCC-DDDDDDDDDD-N,102,4.0,Recorded\n",
    "chp_compounds.csv": "chp_id,inchikey\nCHP00001,AAAAAAAAAAAAAA-BBBBBBBBBB-N\n",
    "taxonomy.csv": "taxid,parent,rank\n1,,root\n2,1,family\n3,2,species\n4,2,species\n",
    "terms.csv": "term_id,type,name\nT1,etiology,wind\nT2,pattern,damp\n",
    "term_edges.csv": "src,dst,weight\nT1,T2,1.5\n",
    "pathways.csv": "pathway_id,entrez_id\nhsa00001,101\nhsa00001,102\nhsa00002,102\n",
}


def write_tiny(directory, **overrides):
    """Three-herb, two-formula dataset; ``overrides`` replace whole files (None deletes one)."""
    files = dict(TINY_FILES)
    files.update(overrides)
    for name, text in files.items():
        if text is not None:
            (directory / name).write_text(text, encoding="utf-8")
    return directory


@pytest.fixture
def tiny_dir(tmp_path):
    return write_tiny(tmp_path)


@pytest.fixture(scope="session")
def planted30():
    return planted_knowledge_graph(30, seed=0)


PLANTED_SEEDS = range(10)
VIRTUAL_KINDS = ("TherapeuticNature", "MedicinalFlavor", "MeridianTropism")


@pytest.fixture(scope="session")
def planted_runs():
    """Ten GAT seeds on the 300-formula planted corpus, with ablations on the validation split.

    Each entry: seed, val_auc, group deltas (mean over labels), node-kind
    deltas, the AUC with every group nulled, and the wall time of the whole run.
    """
    import time

    import numpy as np

    from herbgraph.embed import embed_herbs
    from herbgraph.formula_graph import encode_all
    from herbgraph.gnn import ModelConfig, TrainConfig, evaluate, ratio_counts, split_dataset, train
    from herbgraph.interpret import FeatureGroup, ablate_feature, mask_node_kind

    start = time.perf_counter()
    kg = planted_knowledge_graph(300, seed=0)
    feats, _, _ = embed_herbs(kg, seed=0)
    graphs = encode_all(kg.formulas.values(), feats, kg)
    splits = split_dataset(graphs, ratio_counts(len(graphs)), seed=0)
    runs = []
    for seed in PLANTED_SEEDS:
        model, _ = train(splits, ModelConfig("GAT", 64, 4, 0.5), TrainConfig(1e-4, 32, 200, seed))
        runs.append({
            "seed": seed,
            "val_auc": evaluate(model, splits.val, name="val").macro_auc("val"),
            "groups": {g.name: ablate_feature(model, splits.val, g).mean_delta for g in FeatureGroup},
            "kinds": {k: mask_node_kind(model, splits.val, k).mean_delta for k in ("CHP",) + VIRTUAL_KINDS},
            "all_groups_auc": float(np.mean(ablate_feature(model, splits.val, list(FeatureGroup)).ablated_auc)),
        })
    elapsed = time.perf_counter() - start
    for r in runs:
        r["elapsed"] = elapsed
    return runs


@pytest.fixture(scope="session")
def config_file(tmp_path_factory):
    from .pipeline import CONFIG

    p = tmp_path_factory.mktemp("cfg") / "run.toml"
    p.write_text(CONFIG)
    return p


@pytest.fixture(scope="session")
def two_runs(tmp_path_factory, config_file):
    """The 30-formula pipeline run twice into separate directories with one config."""
    from .pipeline import run_pipeline

    base = tmp_path_factory.mktemp("runs")
    a, b = base / "a", base / "b"
    run_pipeline(config_file, a)
    run_pipeline(config_file, b)
    return a, b


# One summary line per acceptance criterion, printed after the run.

_CRITERIA: dict[str, tuple[int, str]] = {}
_OUTCOMES: dict[str, str] = {}
_DETAILS: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _CRITERIA[item.nodeid] = (int(mark.args[0]), str(mark.args[1]))


def pytest_runtest_logreport(report):
    if report.nodeid not in _CRITERIA:
        return
    if report.failed:
        _OUTCOMES[report.nodeid] = "FAIL"
    elif report.skipped:
        _OUTCOMES.setdefault(report.nodeid, "SKIP")
    elif report.when == "call":
        _OUTCOMES.setdefault(report.nodeid, "PASS")
    for key, value in report.user_properties:
        if key == "detail":
            _DETAILS[report.nodeid] = str(value)


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, (number, title) in sorted(_CRITERIA.items(), key=lambda kv: kv[1][0]):
        if nodeid in _OUTCOMES:
            detail = _DETAILS.get(nodeid, "")
            terminalreporter.write_line(f"criterion {number:2d} {_OUTCOMES[nodeid]:4s} {title}"
                                        + (f" ({detail})" if detail else ""))
