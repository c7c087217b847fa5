import copy
import json

import pytest

from mosskit.chart import (
    ChartDocument,
    ChartSchemaError,
    load_any,
    parse_chart,
    serialize_chart,
)
from mosskit.dga import FilteredDGA, dga_to_dict, validate
from mosskit.fixtures import FIXTURES, dga_fixture_dict, fixture_path, fixtures, hz2n, toy_dga
from mosskit.sseq import e1_from_filtered, er_page


def slice_dict():
    return json.loads(fixture_path("slice-fragment").read_text(encoding="utf-8"))


def test_empty_chart_has_zero_pages():
    doc = parse_chart("{}")
    assert isinstance(doc, ChartDocument)
    assert doc.classes == []
    for r in (1, 2, 3):
        assert er_page(doc, r).nonzero_keys() == []


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_round_trip(name):
    text = fixture_path(name).read_text(encoding="utf-8")
    if name == "slice-fragment":
        once = parse_chart(text)
        twice = parse_chart(serialize_chart(once))
        assert twice == once
        assert serialize_chart(twice) == serialize_chart(once)
    else:
        A = load_any(text)
        assert dga_to_dict(load_any(json.dumps(dga_to_dict(A)))) == dga_to_dict(A)


def test_slice_fixture_contents():
    doc = parse_chart(fixture_path("slice-fragment"))
    d = doc.differentials
    assert [(x.page, x.source, x.target) for x in d] == [(1, "τ²", "ρ²τα₁")]
    names = set(doc.by_name())
    assert {"ρ", "α₁", "τ²", "τα₁", "ρ²τα₁", "α_{2/2}"} <= names
    dets = {x.element: x.homotopy for x in doc.detections}
    assert dets["α₁"] == "η" and dets["α_{2/2}"] == "ν" and dets["2"] == "ω"
    zp = {tuple(z) for z in doc.homotopy["zero_products"]}
    assert zp == {("ω", "η"), ("ω", "ρ"), ("ρ²", "τη")}


def test_slice_e1_differential():
    P = e1_from_filtered(parse_chart(fixture_path("slice-fragment")))
    assert P.d(P.named("τ²")).format() == "ρ²τα₁"


def test_wrong_bidegree_differential_rejected():
    doc = slice_dict()
    doc["differentials"] = [{"page": 1, "source": "τ²", "target": "α₁", "coefficient": 1}]
    with pytest.raises(ChartSchemaError) as e:
        parse_chart(doc)
    (path, msg), = e.value.errors
    assert path == "$.differentials[0]"
    assert "τ²" in msg and "α₁" in msg
    assert "(-1, 1, -2)" in msg


def test_schema_errors_carry_paths():
    doc = slice_dict()
    doc["classes"][2]["order"] = 3
    doc["products"][0]["left"] = "nope"
    doc["extra"] = 1
    doc["classes"][8]["weights"] = []
    with pytest.raises(ChartSchemaError) as e:
        parse_chart(doc)
    paths = {p for p, _ in e.value.errors}
    assert paths == {"$.classes[2].order", "$.products[0].left", "$.extra", "$.classes[8].weights"}


def test_invalid_json():
    with pytest.raises(ChartSchemaError) as e:
        parse_chart("{ not json")
    assert e.value.errors[0][0] == "$"


def test_duplicate_class_and_bad_unit():
    doc = slice_dict()
    doc["classes"].append(copy.deepcopy(doc["classes"][1]))
    doc["unit"] = "u"
    with pytest.raises(ChartSchemaError) as e:
        parse_chart(doc)
    assert {p for p, _ in e.value.errors} == {f"$.classes[{len(doc['classes']) - 1}].name", "$.unit"}


def test_product_bidegree_checked():
    doc = slice_dict()
    doc["products"].append({"left": "ρ", "right": "ρ", "result": "τ²", "coefficient": 1})
    with pytest.raises(ChartSchemaError, match="must land in"):
        parse_chart(doc)


def test_detection_must_parse():
    doc = slice_dict()
    doc["detections"].append({"element": "β₁", "homotopy": "x"})
    with pytest.raises(ChartSchemaError) as e:
        parse_chart(doc)
    assert e.value.errors[0][0] == f"$.detections[{len(doc['detections']) - 1}].element"


def test_fixtures_match_builders():
    fx = fixtures()
    assert set(fx) == set(FIXTURES)
    assert isinstance(fx["slice-fragment"], ChartDocument)
    for name, build in (("hz2n", hz2n), ("toy-dga", toy_dga)):
        assert isinstance(fx[name], FilteredDGA)
        assert dga_to_dict(fx[name]) == dga_fixture_dict(name) == dga_to_dict(build())


@pytest.mark.parametrize("name", ["hz2n", "toy-dga"])
def test_dga_fixtures_validate(name):
    assert validate(fixtures()[name]).ok


def test_load_any_accepts_names_paths_text():
    a = load_any("slice-fragment")
    b = load_any(str(fixture_path("slice-fragment")))
    c = load_any(fixture_path("slice-fragment").read_text(encoding="utf-8"))
    assert a == b == c
