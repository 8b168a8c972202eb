"""
Scene model tests: answer extraction, parsing, validation and canonical
serialization of Zone-Graph layouts.
"""
import json

import numpy as np
import pytest

from conftest import asset, edge, make_scene, rect, scene_dict, single_zone_scene, zone
from layers.errors import (
    JsonSyntax,
    NoAnswerFound,
    SceneParseError,
    SchemaBadType,
    SchemaMissingField,
    UnknownRelation,
    ZoneKitError,
)
from layers.scene_model import (
    DEFAULT_HEIGHT,
    AssetRole,
    StructureType,
    TopoRelation,
    extract_answer,
    extract_think,
    parse_scene,
    read_scene,
    revision_count,
    serialize,
    validate,
)


def codes(report):
    return {v.code for v in report.violations}


def warning_codes(report):
    return {w.code for w in report.warnings}


def scene_text(**kwargs):
    kwargs.setdefault("boundary", rect(4, 4))
    kwargs.setdefault("zones", [zone("zone_a", [asset("obj_a", (2.0, 2.0, 0.5), role="zone_anchor")])])
    return json.dumps(scene_dict(**kwargs))


# ── Extraction ───────────────────────────────────────────────────────────────

def test_extract_answer_from_tags():
    text = '<think>plan</think><answer>{"meta":{}}</answer>'
    assert extract_answer(text) == '{"meta":{}}'


def test_extract_answer_without_tags():
    assert extract_answer('{"meta":{}}') == '{"meta":{}}'


def test_extract_answer_without_json():
    with pytest.raises(NoAnswerFound):
        extract_answer("no json here")


def test_extract_answer_strips_code_fences():
    text = '<answer>\n```json\n{"a": 1}\n```\n</answer>'
    assert extract_answer(text) == '{"a": 1}'


def test_extract_answer_skips_empty_answer_block():
    text = '<answer>  </answer> then <answer>{"b": 2}</answer>'
    assert extract_answer(text) == '{"b": 2}'


def test_extract_answer_takes_largest_balanced_object():
    text = 'first {"x": 1} then {"y": {"z": "a } inside a string"}} trailing {'
    assert extract_answer(text) == '{"y": {"z": "a } inside a string"}}'


def test_extract_answer_survives_many_unterminated_braces():
    text = "{ " * 20000 + '{"a": 1}' + " tail"
    assert extract_answer(text) == '{"a": 1}'
    assert extract_answer('{"a": {"b": 1}, "c": {"d": 2}}') == '{"a": {"b": 1}, "c": {"d": 2}}'


def test_extract_think_and_revisions(model_output):
    think = extract_think(model_output)
    assert think.startswith("The brief asks")
    assert revision_count(think) == 2
    assert revision_count(None) == 0
    assert extract_think('{"a": 1}') is None


def test_model_output_reads_and_validates(model_output):
    scene = read_scene(model_output)
    assert scene.meta.scene_type == "study"
    assert scene.architecture.height == pytest.approx(2.6)
    assert [a.id for a in scene.all_assets()] == ["obj_desk", "obj_chair"]
    assert validate(scene).ok


# ── Parsing ──────────────────────────────────────────────────────────────────

def test_minimal_scene_parses():
    scene = parse_scene(scene_text())
    assert len(scene.all_assets()) == 1
    a = scene.all_assets()[0]
    assert a.role == AssetRole.ZONE_ANCHOR
    assert a.pos == (2.0, 2.0, 0.5)
    assert scene.floor_polygon() == ((0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0))


def test_full_schema_blocks_parse(bedroom):
    assert bedroom.meta.instruction.startswith("A compact bedroom")
    kinds = [n.type for n in bedroom.architecture.structure_nodes]
    assert kinds.count(StructureType.WALL) == 4 and StructureType.DOOR in kinds
    assert bedroom.zone_topology.edges[0].relation == TopoRelation.ADJACENT_OPEN
    assert [z.id for z in bedroom.functional_zones] == ["zone_sleeping", "zone_reading"]
    assert len(bedroom.all_assets()) == 5


def test_unknown_relation_is_rejected():
    zones = [zone("zone_a", [asset("a", (1, 1, 0.5)), asset("b", (2, 2, 0.5))], [edge("a", "b", "next_to")])]
    with pytest.raises(UnknownRelation) as info:
        parse_scene(scene_text(zones=zones))
    assert info.value.value == "next_to"
    assert info.value.path == "/functional_zones/0/spatial_graph/0/relation"


def test_unknown_topology_relation_is_rejected():
    text = scene_text(topo_edges=[edge("zone_a", "zone_a", "touching")])
    with pytest.raises(UnknownRelation):
        parse_scene(text)


def test_json_syntax_error():
    with pytest.raises(JsonSyntax):
        parse_scene('{"meta": {"scene_type": "x"},}')
    with pytest.raises(JsonSyntax):
        parse_scene('{"meta": NaN}')


def test_deep_nesting_is_a_syntax_error():
    with pytest.raises(JsonSyntax):
        parse_scene("[" * 200000)
    with pytest.raises(JsonSyntax):
        read_scene("<answer>" + "[" * 200000 + "</answer>")


def test_non_finite_numbers_are_rejected():
    text = scene_text(height=12345.5)
    with pytest.raises(SchemaBadType) as info:
        parse_scene(text.replace("12345.5", "1e999"))
    assert info.value.path == "/architecture/height"
    with pytest.raises(SchemaBadType):
        parse_scene(text.replace("12345.5", "1" + "0" * 400))
    with pytest.raises(SceneParseError):
        parse_scene(text.replace("12345.5", "1" * 5000))


def test_missing_field_reports_path():
    data = scene_dict(rect(4, 4), [zone("zone_a", [asset("a", (1, 1, 0.5))])])
    del data["functional_zones"][0]["assets"][0]["size"]
    with pytest.raises(SchemaMissingField) as info:
        parse_scene(json.dumps(data))
    assert info.value.path == "/functional_zones/0/assets/0/size"


def test_bad_types_are_rejected():
    data = scene_dict(rect(4, 4), [zone("zone_a", [asset("a", (1, 1, 0.5))])])
    data["functional_zones"][0]["assets"][0]["pos"] = [1, True, 0.5]
    with pytest.raises(SchemaBadType):
        parse_scene(json.dumps(data))
    data["functional_zones"][0]["assets"][0]["pos"] = [1, 1]
    with pytest.raises(SchemaBadType):
        parse_scene(json.dumps(data))
    data["functional_zones"][0]["assets"][0]["pos"] = [1, 1, 0.5]
    data["functional_zones"][0]["assets"][0]["role"] = "decor"
    with pytest.raises(SchemaBadType):
        parse_scene(json.dumps(data))


def test_pose_nested_under_transform():
    data = scene_dict(rect(4, 4), [zone("zone_a", [asset("a", (1, 1, 0.5))])])
    a = data["functional_zones"][0]["assets"][0]
    a["transform"] = {"pos": a.pop("pos"), "rot": a.pop("rot"), "size": a.pop("size")}
    scene = parse_scene(json.dumps(data))
    assert scene.all_assets()[0].pos == (1.0, 1.0, 0.5)
    assert "transform" not in scene.all_assets()[0].extra


def test_clockwise_boundary_is_normalised():
    scene = parse_scene(scene_text(boundary=list(reversed(rect(4, 4))) + [rect(4, 4)[-1]]))
    poly = scene.floor_polygon()
    assert len(poly) == 4
    area = sum(poly[i][0] * poly[(i + 1) % 4][1] - poly[(i + 1) % 4][0] * poly[i][1] for i in range(4))
    assert area > 0


def test_missing_height_defaults():
    scene = parse_scene(scene_text(height=None))
    assert scene.architecture.height == DEFAULT_HEIGHT
    assert "HEIGHT_DEFAULTED" in warning_codes(validate(scene))


def test_congruent_prism_is_canonicalised():
    data = json.loads(scene_text(height=None))
    arch = data["architecture"]
    bottom = arch.pop("boundary_polygon")
    arch["bounds_bottom"] = bottom
    arch["bounds_top"] = [[x, y, 3.0] for x, y, _ in bottom]
    scene = parse_scene(json.dumps(data))
    assert scene.architecture.height == 3.0
    assert scene.architecture.prism_top is None
    assert validate(scene).ok
    assert "boundary_polygon" in json.loads(serialize(scene))["architecture"]


def test_incongruent_prism_is_reported_and_kept():
    data = json.loads(scene_text())
    arch = data["architecture"]
    bottom = arch.pop("boundary_polygon")
    arch["bounds_bottom"] = bottom
    arch["bounds_top"] = [[x + 0.5, y, 2.8] for x, y, _ in bottom]
    scene = parse_scene(json.dumps(data))
    assert "CONGRUENCE" in codes(validate(scene))
    out = json.loads(serialize(scene))["architecture"]
    assert out["bounds_top"][0] == [0.5, 0.0, 2.8]
    assert parse_scene(serialize(scene)) == scene


# ── Validation ───────────────────────────────────────────────────────────────

def test_valid_fixture_has_no_violations(bedroom):
    report = validate(bedroom)
    assert report.ok
    assert report.violations == ()
    assert report.warnings == ()


def test_duplicate_asset_id_across_zones():
    zones = [
        zone("zone_a", [asset("obj_x", (1, 1, 0.5), role="zone_anchor")]),
        zone("zone_b", [asset("obj_x", (3, 3, 0.5), role="zone_anchor")]),
    ]
    report = validate(make_scene(rect(4, 4), zones))
    assert not report.ok
    assert "DUP_ASSET_ID" in codes(report)


def test_duplicate_zone_id():
    zones = [zone("zone_a", [asset("a", (1, 1, 0.5))]), zone("zone_a", [asset("b", (3, 3, 0.5))])]
    assert "DUP_ZONE_ID" in codes(validate(make_scene(rect(4, 4), zones)))


def test_bowtie_boundary_is_not_simple():
    bowtie = [[0, 0, 0], [1, 1, 0], [1, 0, 0], [0, 1, 0]]
    assert "BOUNDARY_NOT_SIMPLE" in codes(validate(parse_scene(scene_text(boundary=bowtie))))


def test_boundary_problems():
    assert "BOUNDARY_TOO_FEW_VERTICES" in codes(validate(parse_scene(scene_text(boundary=[[0, 0, 0], [1, 0, 0]]))))
    flat = [[0, 0, 0], [1, 0, 0], [2, 0, 0]]
    assert "BOUNDARY_ZERO_AREA" in codes(validate(parse_scene(scene_text(boundary=flat))))
    raised = rect(4, 4)
    raised[2][2] = 0.5
    report = validate(parse_scene(scene_text(boundary=raised)))
    assert [v.path for v in report.violations] == ["/architecture/boundary_polygon/2"]
    assert "BAD_HEIGHT" in codes(validate(parse_scene(scene_text(height=0.0))))


def test_wall_normals():
    inward = {"id": "wall_04", "type": "wall", "segment": [[4, 0], [0, 0]], "normal": [0, 1, 0]}
    outward = dict(inward, normal=[0, -1, 0])
    skewed = dict(inward, normal=[0, 2, 0])
    assert validate(parse_scene(scene_text(structure_nodes=[inward]))).ok
    assert "WALL_NORMAL_OUTWARD" in codes(validate(parse_scene(scene_text(structure_nodes=[outward]))))
    assert "WALL_NORMAL_NOT_UNIT" in codes(validate(parse_scene(scene_text(structure_nodes=[skewed]))))


def test_asset_checks():
    report = validate(single_zone_scene(
        rect(4, 4),
        asset("flat", (1, 1, 0.5), size=(1, 1, 0)),
        asset("sunk", (2, 2, 0.2)),
        asset("tall", (3, 3, 1.5), size=(1, 3, 1)),
    ))
    assert {"ASSET_BAD_SIZE", "ASSET_BELOW_FLOOR"} <= codes(report)
    assert "ASSET_ABOVE_CEILING" in warning_codes(report)


def test_floating_asset_warns_unless_stacked():
    shelf, vase = asset("shelf", (1, 1, 0.5), role="zone_anchor"), asset("vase", (1, 1, 1.2), size=(0.2, 0.4, 0.2))
    loose = validate(single_zone_scene(rect(4, 4), shelf, vase))
    assert loose.ok and "ASSET_NOT_ON_FLOOR" in warning_codes(loose)
    stacked = validate(make_scene(rect(4, 4), [zone("zone_a", [shelf, vase], [edge("vase", "shelf", "on_top_of")])]))
    assert "ASSET_NOT_ON_FLOOR" not in warning_codes(stacked)


def test_tilted_asset_warns():
    report = validate(single_zone_scene(rect(4, 4), asset("a", (2, 2, 0.5), rot=(0.3, 0, 0), role="zone_anchor")))
    assert report.ok and "ASSET_TILTED" in warning_codes(report)


def test_graph_endpoints():
    zones = [zone("zone_a", [asset("a", (1, 1, 0.5))], [edge("a", "ghost", "side_by_side")])]
    report = validate(make_scene(rect(4, 4), zones, topo_edges=[edge("zone_a", "wall_99", "anchored_against")]))
    assert {"GRAPH_UNKNOWN_ENDPOINT", "TOPOLOGY_UNKNOWN_ENDPOINT"} <= codes(report)


def test_zone_warnings():
    zones = [zone("zone_a", [asset("a", (1, 1, 0.5))]), zone("zone_b", [])]
    report = validate(make_scene(rect(4, 4), zones))
    assert report.ok
    assert {"ZONE_WITHOUT_ANCHOR", "EMPTY_ZONE", "ZONE_UNANCHORED"} <= warning_codes(report)


def test_violation_line_format():
    zones = [zone("z1", [asset("x", (1, 1, 0.5))]), zone("z2", [asset("x", (3, 3, 0.5))])]
    line = validate(make_scene(rect(4, 4), zones)).violations[0].line()
    assert line.startswith("DUP_ASSET_ID /functional_zones/1/assets/0/id ")


# ── Serialization ────────────────────────────────────────────────────────────

def test_serialize_is_byte_stable(bedroom):
    first = serialize(bedroom)
    assert first == serialize(parse_scene(first))
    assert first == serialize(bedroom)


def test_unknown_fields_are_reemitted():
    data = json.loads(scene_text())
    data["version"] = 3
    data["functional_zones"][0]["assets"][0]["material"] = {"finish": "matte", "tags": ["oak"]}
    data["architecture"]["floor_finish"] = "tile"
    out = json.loads(serialize(parse_scene(json.dumps(data))))
    assert out["version"] == 3
    assert out["functional_zones"][0]["assets"][0]["material"] == {"finish": "matte", "tags": ["oak"]}
    assert out["architecture"]["floor_finish"] == "tile"
    assert list(out["functional_zones"][0]["assets"][0])[:7] == [
        "id", "category", "role", "description", "pos", "rot", "size"]


def _random_scene_text(rng, index):
    zones = []
    for zi in range(int(rng.integers(1, 4))):
        assets = []
        for ai in range(int(rng.integers(0, 4))):
            a = asset(f"obj_{zi}_{ai}", [float(v) for v in rng.uniform(0.5, 5.5, 2)] + [0.4],
                      size=[float(v) for v in rng.uniform(0.2, 1.5, 3)],
                      rot=(0.0, 0.0, float(rng.uniform(-3, 3))),
                      role="zone_anchor" if ai == 0 else "satellite")
            if rng.random() < 0.3:
                a["style"] = {"seed": index, "palette": ["#aa0000", "#00bb00"]}
            assets.append(a)
        zones.append(zone(f"zone_{zi}", assets))
    data = scene_dict(rect(6, 6), zones, height=None if index % 5 == 0 else 2.7)
    if index % 4 == 0:
        data["meta"]["source"] = f"fixture-{index}"
    return json.dumps(data)


def test_parse_serialize_parse_round_trip():
    rng = np.random.default_rng(99)
    for i in range(20):
        scene = parse_scene(_random_scene_text(rng, i))
        again = parse_scene(serialize(scene))
        assert again == scene, f"fixture {i}"


def test_truncated_inputs_fail_with_domain_errors(bedroom_text):
    # every prefix either reads or raises a ZoneKitError, never anything else
    cut_points = np.linspace(1, len(bedroom_text) - 1, 30).astype(int)
    outcomes = []
    for cut in cut_points:
        try:
            read_scene(bedroom_text[:cut])
            outcomes.append("ok")
        except (SceneParseError, NoAnswerFound):
            outcomes.append("error")
        except ZoneKitError as e:
            pytest.fail(f"unexpected {type(e).__name__} at {cut}")
    assert "error" in outcomes
