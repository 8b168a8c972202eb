"""
Shared scene builders for the test modules.
Scenes are assembled as plain dicts and parsed, so every test also goes
through the real parser.
"""
import json
import os
from typing import Any, Dict, List, Optional, Sequence

import pytest

from layers.scene_model import Scene, parse_scene

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")

L_SHAPE = [(0.0, 0.0), (4.0, 0.0), (4.0, 2.0), (2.0, 2.0), (2.0, 4.0), (0.0, 4.0)]


def rect(w: float, d: float, x0: float = 0.0, y0: float = 0.0) -> List[List[float]]:
    return [[x0, y0, 0.0], [x0 + w, y0, 0.0], [x0 + w, y0 + d, 0.0], [x0, y0 + d, 0.0]]


def lift(points: Sequence[Sequence[float]]) -> List[List[float]]:
    return [[float(p[0]), float(p[1]), 0.0] for p in points]


def asset(id: str, pos: Sequence[float], size: Sequence[float] = (1.0, 1.0, 1.0),
          rot: Sequence[float] = (0.0, 0.0, 0.0), role: str = "satellite",
          category: str = "box") -> Dict[str, Any]:
    return {
        "id": id,
        "category": category,
        "role": role,
        "description": "",
        "pos": list(pos),
        "rot": list(rot),
        "size": list(size),
    }


def zone(id: str, assets: Sequence[Dict[str, Any]], graph: Sequence[Dict[str, Any]] = ()) -> Dict[str, Any]:
    return {"id": id, "semantic_label": id, "assets": list(assets), "spatial_graph": list(graph)}


def edge(source: str, target: str, relation: str) -> Dict[str, str]:
    return {"source": source, "target": target, "relation": relation}


def scene_dict(boundary: Sequence[Sequence[float]], zones: Sequence[Dict[str, Any]],
               height: Optional[float] = 2.8, structure_nodes: Sequence[Dict[str, Any]] = (),
               topo_edges: Sequence[Dict[str, Any]] = (), scene_type: str = "test_room") -> Dict[str, Any]:
    arch: Dict[str, Any] = {"boundary_polygon": [list(v) for v in boundary],
                            "structure_nodes": list(structure_nodes)}
    if height is not None:
        arch["height"] = height
    return {
        "meta": {"scene_type": scene_type},
        "architecture": arch,
        "zone_topology": {
            "nodes": [{"id": z["id"], "type": "primary"} for z in zones],
            "edges": list(topo_edges),
        },
        "functional_zones": list(zones),
    }


def make_scene(boundary: Sequence[Sequence[float]], zones: Sequence[Dict[str, Any]], **kwargs) -> Scene:
    return parse_scene(json.dumps(scene_dict(boundary, zones, **kwargs)))


def single_zone_scene(boundary: Sequence[Sequence[float]], *assets: Dict[str, Any], **kwargs) -> Scene:
    return make_scene(boundary, [zone("zone_a", assets)], **kwargs)


def read_data(*parts: str) -> str:
    with open(os.path.join(DATA_DIR, *parts), "r", encoding="utf-8") as f:
        return f.read()


@pytest.fixture
def bedroom_text() -> str:
    return read_data("scenes", "bedroom.json")


@pytest.fixture
def bedroom(bedroom_text) -> Scene:
    return parse_scene(bedroom_text)


@pytest.fixture
def cubes_text() -> str:
    return read_data("scenes", "overlap_cubes.json")


@pytest.fixture
def model_output() -> str:
    return read_data("model_output.txt")


@pytest.fixture
def half_out_scene() -> Scene:
    return single_zone_scene(rect(4, 4), asset("obj_box", (4.0, 2.0, 0.5), role="zone_anchor"))
