import os
from pathlib import Path

import numpy as np
import pytest

from graphdrift.datasets import (SyntheticLetterSpec, class_template, generate_synthetic,
                                 load_gxl_collection, load_schema, parse_cxl, parse_gxl)
from graphdrift.errors import GXLParseError, InvalidInputError, SchemaError
from graphdrift.ged import GraphDistance

FIX = Path(__file__).parent / "fixtures" / "mini"


def test_parse_categorical_fixture():
    g = parse_gxl(FIX / "g1.gxl", "mutagenicity")
    assert g.vertex_ids == ("_0", "_1", "_2")
    assert g.vertex_attrs == ("C", "O", "N")
    assert dict(g.edges) == {("_0", "_1"): "2", ("_1", "_2"): "1"}


def test_parse_numeric_fixture():
    g = parse_gxl(FIX / "letter.gxl", "letter")
    assert g.vertex_attrs == ((0.5, 1.25), (2.0, -1.0))
    assert g.num_edges == 1 and dict(g.edges)[("_0", "_1")] is None


def test_repeated_undirected_edge_kept_once():
    assert parse_gxl(FIX / "g2.gxl", "mutagenicity").num_edges == 1


def test_collection_by_class_index():
    coll = load_gxl_collection(FIX, "index.cxl", "mutagenicity")
    assert {k: len(v) for k, v in coll.items()} == {"mutagen": 1, "nonmutagen": 1}
    assert parse_cxl(FIX / "index.cxl") == [("g1.gxl", "mutagen"), ("g2.gxl", "nonmutagen")]


def test_errors():
    with pytest.raises(GXLParseError, match="bad.gxl"):
        parse_gxl(FIX / "bad.gxl", "letter")
    with pytest.raises(SchemaError, match="unknown attribute"):
        parse_gxl(FIX / "g1.gxl", "letter")
    with pytest.raises(SchemaError):
        load_schema("no-such-dataset")


def test_aids_schema_ignores_extra_keys():
    s = load_schema("aids")
    assert "symbol" in s["node"]["keys"] and "charge" in s["ignore"]["node"]


def test_synthetic_noise_free_classes_are_constant():
    coll = generate_synthetic(SyntheticLetterSpec(num_classes=3, coordinate_noise=0.0,
                                                  graphs_per_class=5))
    assert list(coll) == ["A", "B", "C"]
    for gs in coll.values():
        assert all(g == gs[0] for g in gs)


def test_synthetic_separation_dominates_noise():
    spec = SyntheticLetterSpec(num_classes=3, vertices_range=(3, 4), coordinate_noise=0.02,
                               class_separation=1.0, graphs_per_class=4)
    coll = generate_synthetic(spec, seed=1)
    d = GraphDistance("exact")
    within = max(d(a, b) for gs in coll.values() for a in gs for b in gs)
    between = min(d(a, b) for x in coll for y in coll if x != y for a in coll[x] for b in coll[y])
    assert between > within


def test_synthetic_seeds_differ_but_agree_statistically():
    spec = SyntheticLetterSpec(num_classes=2, graphs_per_class=100)
    a, b = generate_synthetic(spec, 1), generate_synthetic(spec, 2)
    assert a["A"][0] != b["A"][0]
    mean = lambda gs: np.mean([np.mean(g.vertex_attrs, axis=0) for g in gs], axis=0)
    assert np.allclose(mean(a["A"]), mean(b["A"]), rtol=0.1)
    assert class_template(spec, 0)[1] == class_template(spec, 0)[1]


def test_synthetic_spec_validation():
    with pytest.raises(InvalidInputError):
        SyntheticLetterSpec(class_separation=0)


DATA = os.environ.get("GRAPHDRIFT_DATA")


@pytest.mark.iam
@pytest.mark.skipif(not DATA or not (Path(DATA or "") / "Letter" / "HIGH").exists(),
                    reason="IAM Letter data not available")
def test_letter_counts():
    coll = load_gxl_collection(Path(DATA) / "Letter" / "HIGH",
                               ["train.cxl", "validation.cxl", "test.cxl"], "letter")
    assert len(coll) == 15 and all(len(v) == 150 for v in coll.values())


@pytest.mark.iam
@pytest.mark.skipif(not DATA or not (Path(DATA or "") / "Mutagenicity").exists(),
                    reason="IAM Mutagenicity data not available")
def test_mutagenicity_counts():
    coll = load_gxl_collection(Path(DATA) / "Mutagenicity",
                               ["train.cxl", "valid.cxl", "test.cxl"], "mutagenicity")
    assert len(coll["mutagen"]) == 2401 and len(coll["nonmutagen"]) == 1963
