from __future__ import annotations

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from herbgraph.errors import DuplicateId, MalformedRow, MissingFile, NoDosedFormulas
from herbgraph.kg import (
    CompoundTargetPair,
    Formula,
    HerbPiece,
    KnowledgeGraph,
    SchemaConfig,
    TaxonomyTable,
    Vocabulary,
    formula_stats,
    load_knowledge_graph,
    validate,
    write_knowledge_graph,
)

from .conftest import write_tiny


def test_tiny_fixture_counts(tiny_dir):
    kg = load_knowledge_graph(tiny_dir)
    c = kg.counts()
    assert (c["herbs"], c["formulas"], c["pairs"]) == (3, 2, 2)
    assert kg.issues == ()
    assert kg.formulas["F2"].members == (("CHP00002", 5.0), ("CHP00003", None))
    assert kg.herbs["CHP00002"].flavors == frozenset({"bitter", "sweet"})
    assert kg.compounds["CCCCCCCCCCCCCC-DDDDDDDDDD-N"].compound_class is None
    assert kg.pathways.universe == frozenset({101, 102})


def test_valid_fixture_has_empty_report(tiny_dir):
    assert len(validate(load_knowledge_graph(tiny_dir))) == 0


def test_empty_formulas_table(tmp_path):
    write_tiny(tmp_path, **{"formulas.csv": "id,labels\n", "formula_members.csv": "formula_id,chp_id,dose_g\n"})
    kg = load_knowledge_graph(tmp_path)
    assert len(kg.formulas) == 0 and kg.issues == ()


def test_dangling_member_is_dropped_and_recorded(tmp_path):
    members = "formula_id,chp_id,dose_g\nF1,CHP00001,10\nF1,CHP99999,3\nF2,CHP00002,5\n"
    kg = load_knowledge_graph(write_tiny(tmp_path, **{"formula_members.csv": members}))
    assert kg.formulas["F1"].herb_ids == ("CHP00001",)
    assert [(i.code, i.key) for i in kg.issues] == [("DanglingRef", "F1/CHP99999")]


def test_missing_required_file(tmp_path):
    write_tiny(tmp_path, **{"chp.csv": None})
    with pytest.raises(MissingFile):
        load_knowledge_graph(tmp_path)


def test_optional_tables_may_be_absent(tmp_path):
    write_tiny(tmp_path, **{"pairs.csv": None, "terms.csv": None, "term_edges.csv": None})
    kg = load_knowledge_graph(tmp_path)
    assert kg.pairs == () and kg.terms.types == {}


def test_malformed_row_reports_file_and_line(tmp_path):
    members = "formula_id,chp_id,dose_g\nF1,CHP00001,10\nF1,CHP00002,lots\n"
    write_tiny(tmp_path, **{"formula_members.csv": members})
    with pytest.raises(MalformedRow) as exc:
        load_knowledge_graph(tmp_path)
    assert exc.value.file == "formula_members.csv" and exc.value.line == 3


def test_bad_label_string(tmp_path):
    write_tiny(tmp_path, **{"formulas.csv": "id,labels\nF1,1000\nF2,01001\n"})
    with pytest.raises(MalformedRow):
        load_knowledge_graph(tmp_path)


def test_duplicate_herb_id(tmp_path):
    chp = "id,name,kingdom,taxid,natures,flavors,meridians\nCHP00001,a,Plantae,,,,\nCHP00001,b,Plantae,,,,\n"
    write_tiny(tmp_path, **{"chp.csv": chp})
    with pytest.raises(DuplicateId):
        load_knowledge_graph(tmp_path)


def test_schema_column_mapping(tmp_path):
    write_tiny(tmp_path, **{"formulas.csv": "formula,label_bits\nF1,10000\nF2,01001\n"})
    schema = SchemaConfig.from_mapping({"columns": {"formulas": {"id": "formula", "labels": "label_bits"}}})
    assert load_knowledge_graph(tmp_path, schema).formulas["F1"].labels == (1, 0, 0, 0, 0)


def test_taxonomy_cycle_detected(tiny_dir):
    kg = load_knowledge_graph(tiny_dir)
    bad = KnowledgeGraph(herbs=kg.herbs, taxonomy=TaxonomyTable({10: 11, 11: 10}), vocab=kg.vocab)
    assert "CycleDetected" in validate(bad).codes()


def test_nan_affinity_flagged(tiny_dir):
    kg = load_knowledge_graph(tiny_dir)
    bad = KnowledgeGraph(pairs=(CompoundTargetPair("AAAAAAAAAAAAAA-BBBBBBBBBB-N", 1, math.nan),))
    assert validate(bad).codes() == {"NonFiniteAffinity"}
    assert validate(kg) == validate(kg)


def test_unknown_token_and_kingdom():
    h = HerbPiece("CHP00001", "x", "Protista", natures=frozenset({"tepid"}))
    report = validate(KnowledgeGraph(herbs={h.id: h}, vocab=Vocabulary(("warm",), (), ())))
    assert {"UnknownToken", "BadKingdom"} <= report.codes()


def test_round_trip_is_identity(tiny_dir, tmp_path_factory, planted30):
    for kg in (load_knowledge_graph(tiny_dir), planted30):
        a = tmp_path_factory.mktemp("a")
        write_knowledge_graph(kg, a)
        first = load_knowledge_graph(a)
        b = tmp_path_factory.mktemp("b")
        write_knowledge_graph(first, b)
        second = load_knowledge_graph(b)
        assert first == second
        assert first.herbs == kg.herbs and first.formulas == kg.formulas and first.pairs == kg.pairs


def _kg_with(*formulas):
    herbs = {h: HerbPiece(h, h, "Plantae") for f in formulas for h, _ in f.members}
    return KnowledgeGraph(herbs=herbs, formulas={f.id: f for f in formulas})


def test_dose_ratio_hand_values():
    s = formula_stats(_kg_with(Formula("F", (("CHP00001", 10.0), ("CHP00002", 30.0)))))
    assert s.dose_ratios["F"] == (0.25, 0.75) and s.mean_dose_ratio == 0.5
    assert formula_stats(_kg_with(Formula("G", (("CHP00001", 7.0),)))).dose_ratios["G"] == (1.0,)


def test_unknown_doses_excluded_from_ratios():
    s = formula_stats(_kg_with(Formula("F", (("CHP00001", 10.0), ("CHP00002", None))),
                               Formula("G", (("CHP00003", 2.0), ("CHP00004", 2.0)))))
    assert set(s.dose_ratios) == {"G"} and s.n_formulas == 2 and s.members_histogram == {2: 2}
    with pytest.raises(NoDosedFormulas):
        formula_stats(_kg_with(Formula("F", (("CHP00001", None),))))


@given(st.lists(st.floats(0.01, 1e4, allow_nan=False), min_size=1, max_size=20))
def test_dose_ratios_sum_to_one(doses):
    f = Formula("F", tuple((f"CHP{i:05d}", d) for i, d in enumerate(doses)))
    assert abs(math.fsum(f.dose_ratios()) - 1.0) <= 1e-9
