"""
Layer 1: Scene Model (Zone-Graph data model)
Extracts layout JSON from raw model output, parses it into immutable
dataclasses, validates structural invariants and serializes canonically.

A scene is meta + architecture + zone topology + functional zones. Unknown
JSON fields are kept in per-object `extra` maps and written back after the
known keys; unknown vocabulary values are rejected.
"""
import json
import logging
import math
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Set, Tuple

from layers.errors import (
    JsonSyntax,
    NoAnswerFound,
    SchemaBadType,
    SchemaMissingField,
    UnknownRelation,
)
from layers.geom_kernel import EPS, Polygon2D, is_simple, point_in_polygon, signed_area

logger = logging.getLogger(__name__)

DEFAULT_HEIGHT = 2.8   # m, used when the architecture omits height
TILT_TOLERANCE = 0.05  # rad
NORMAL_PROBE = 0.01    # m step along a wall normal for the inward test

Vec3 = Tuple[float, float, float]


# ── Vocabularies ─────────────────────────────────────────────────────────────

class IntraZoneRelation(str, Enum):
    SUPPORTED_BY = "supported_by"
    EMBEDDED_IN = "embedded_in"
    ON_TOP_OF = "on_top_of"
    UNDER = "under"
    FACING_DIRECT = "facing_direct"
    FACING_ANGLED = "facing_angled"
    BACK_TO = "back_to"
    SIDE_BY_SIDE = "side_by_side"
    PERPENDICULAR = "perpendicular"
    SURROUNDING_RADIAL = "surrounding_radial"
    SURROUNDING_LINEAR = "surrounding_linear"
    FLANKING = "flanking"
    ALIGNED_FLUSH = "aligned_flush"
    PARALLEL_OFFSET = "parallel_offset"
    CORNER_PLACEMENT = "corner_placement"


STACKING_RELATIONS = frozenset({
    IntraZoneRelation.SUPPORTED_BY,
    IntraZoneRelation.ON_TOP_OF,
    IntraZoneRelation.EMBEDDED_IN,
    IntraZoneRelation.UNDER,
})


class TopoRelation(str, Enum):
    ADJACENT_OPEN = "adjacent_open"
    ADJACENT_PASSAGEWAY = "adjacent_passageway"
    CONNECTED_VIA_DOOR = "connected_via_door"
    SEPARATED_VISUAL = "separated_visual"
    ANCHORED_AGAINST = "anchored_against"
    CORNER_ANCHORED = "corner_anchored"
    FLOATING_CENTER = "floating_center"
    CLEARANCE_PATH = "clearance_path"


ANCHORING_RELATIONS = frozenset({
    TopoRelation.ANCHORED_AGAINST,
    TopoRelation.CORNER_ANCHORED,
    TopoRelation.FLOATING_CENTER,
    TopoRelation.CLEARANCE_PATH,
})


class OffsetDescriptor(str, Enum):
    NORTH_OF = "north_of"
    SOUTH_OF = "south_of"
    EAST_OF = "east_of"
    WEST_OF = "west_of"
    ADJACENT_TO = "adjacent_to"
    ACROSS_FROM = "across_from"
    DIAGONAL_TO = "diagonal_to"


class AssetRole(str, Enum):
    ZONE_ANCHOR = "zone_anchor"
    SATELLITE = "satellite"


class StructureType(str, Enum):
    WALL = "wall"
    DOOR = "door"
    WINDOW = "window"
    OPENING = "opening"
    VIRTUAL_BOUNDARY = "virtual_boundary"


class ZoneNodeType(str, Enum):
    PRIMARY = "primary"
    SECONDARY = "secondary"


# ── Data model ───────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Meta:
    scene_type: str
    instruction: Optional[str] = None
    extra: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class StructureNode:
    id: str
    type: StructureType
    segment: Optional[Tuple[Tuple[float, float], Tuple[float, float]]] = None
    normal: Optional[Vec3] = None
    pos: Optional[Vec3] = None
    parent_wall: Optional[str] = None
    extra: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Architecture:
    boundary_polygon: Tuple[Vec3, ...]
    height: float
    structure_nodes: Tuple[StructureNode, ...] = ()
    prism_top: Optional[Tuple[Vec3, ...]] = None   # kept only when not congruent
    extra: Dict[str, Any] = field(default_factory=dict)
    height_defaulted: bool = field(default=False, compare=False)

    def floor_polygon(self) -> Polygon2D:
        return tuple((v[0], v[1]) for v in self.boundary_polygon)


@dataclass(frozen=True)
class Asset:
    id: str
    category: str
    role: AssetRole
    pos: Vec3
    rot: Vec3
    size: Vec3
    description: str = ""
    extra: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class SpatialEdge:
    source: str
    target: str
    relation: IntraZoneRelation
    extra: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class FunctionalZone:
    id: str
    semantic_label: str
    assets: Tuple[Asset, ...]
    spatial_graph: Tuple[SpatialEdge, ...] = ()
    extra: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class TopologyNode:
    id: str
    type: ZoneNodeType
    extra: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class TopologyEdge:
    source: str
    target: str
    relation: TopoRelation
    spatial_offset: Optional[OffsetDescriptor] = None
    extra: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ZoneTopology:
    nodes: Tuple[TopologyNode, ...] = ()
    edges: Tuple[TopologyEdge, ...] = ()
    extra: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Scene:
    meta: Meta
    architecture: Architecture
    zone_topology: ZoneTopology
    functional_zones: Tuple[FunctionalZone, ...]
    extra: Dict[str, Any] = field(default_factory=dict)

    def all_assets(self) -> List[Asset]:
        return [a for z in self.functional_zones for a in z.assets]

    def structure_ids(self) -> Set[str]:
        return {n.id for n in self.architecture.structure_nodes}

    def floor_polygon(self) -> Polygon2D:
        return self.architecture.floor_polygon()

    def with_assets(self, updates: Mapping[str, Asset]) -> "Scene":
        """Copy of the scene with the given assets (by id) swapped in."""
        zones = tuple(
            replace(z, assets=tuple(updates.get(a.id, a) for a in z.assets))
            for z in self.functional_zones
        )
        return replace(self, functional_zones=zones)


# ── Validation records ───────────────────────────────────────────────────────

@dataclass(frozen=True)
class Violation:
    code: str
    path: str
    message: str
    severity: str = "error"

    def line(self) -> str:
        return f"{self.code} {self.path} {self.message}"

    def to_dict(self) -> Dict[str, str]:
        return {"code": self.code, "path": self.path, "message": self.message, "severity": self.severity}


@dataclass(frozen=True)
class ValidationReport:
    violations: Tuple[Violation, ...] = ()
    warnings: Tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ok": self.ok,
            "violations": [v.to_dict() for v in self.violations],
            "warnings": [w.to_dict() for w in self.warnings],
        }


# ── Extraction ───────────────────────────────────────────────────────────────

_ANSWER_RE = re.compile(r"<answer>(.*?)</answer>", re.DOTALL | re.IGNORECASE)
_THINK_RE = re.compile(r"<think>(.*?)</think>", re.DOTALL | re.IGNORECASE)
_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+|\n+")


def _strip_fences(s: str) -> str:
    s = s.strip()
    if s.startswith("```"):
        newline = s.find("\n")
        s = s[newline + 1:] if newline != -1 else s[3:]
    if s.endswith("```"):
        s = s[:-3]
    return s.strip()


def _balanced_spans(text: str) -> List[Tuple[int, int]]:
    """
    Outermost brace-balanced spans in one pass; quotes and escapes inside
    braces are honoured. An unterminated brace never hides the balanced
    objects nested after it.
    """
    spans: List[Tuple[int, int]] = []
    opens: List[int] = []
    in_string = escaped = False
    for i, ch in enumerate(text):
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
        elif ch == "{":
            opens.append(i)
        elif not opens:
            continue
        elif ch == '"':
            in_string = True
        elif ch == "}":
            start = opens.pop()
            while spans and spans[-1][0] > start:
                spans.pop()
            spans.append((start, i + 1))
    return spans


def extract_answer(text: str) -> str:
    """
    Raw layout JSON from model output: the first non-empty <answer> block,
    otherwise the largest brace-balanced object in the text.
    """
    for match in _ANSWER_RE.finditer(text):
        body = _strip_fences(match.group(1))
        if body:
            return body
    spans = _balanced_spans(text)
    if not spans:
        raise NoAnswerFound("no <answer> block and no JSON object in text")
    start, end = max(spans, key=lambda s: s[1] - s[0])
    return text[start:end].strip()


def extract_think(text: str) -> Optional[str]:
    match = _THINK_RE.search(text)
    return match.group(1).strip() if match else None


def revision_count(think: Optional[str]) -> int:
    """Number of self-correction sentences (those opening with "wait")."""
    if not think:
        return 0
    return sum(1 for s in _SENTENCE_SPLIT.split(think) if s.strip().lower().startswith("wait"))


# ── Parsing ──────────────────────────────────────────────────────────────────

def _reject_constant(name: str):
    raise JsonSyntax(f"non-finite constant {name}")


def _obj(value: Any, path: str) -> Dict[str, Any]:
    if not isinstance(value, dict):
        raise SchemaBadType(path, "object")
    return value


def _list(value: Any, path: str) -> list:
    if not isinstance(value, list):
        raise SchemaBadType(path, "array")
    return value


def _req(obj: Dict[str, Any], key: str, path: str) -> Any:
    if key not in obj:
        raise SchemaMissingField(f"{path}/{key}")
    return obj[key]


def _str(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise SchemaBadType(path, "string")
    return value


def _num(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaBadType(path, "number")
    try:
        number = float(value)
    except OverflowError:
        raise SchemaBadType(path, "finite number") from None
    if not math.isfinite(number):
        raise SchemaBadType(path, "finite number")
    return number


def _vec(value: Any, path: str, lengths: Sequence[int] = (3,)) -> Tuple[float, ...]:
    items = _list(value, path)
    if len(items) not in lengths:
        raise SchemaBadType(path, f"array of {' or '.join(map(str, lengths))} numbers")
    return tuple(_num(v, f"{path}/{i}") for i, v in enumerate(items))


def _enum(cls, value: Any, path: str, closed_vocabulary: bool = False):
    if not isinstance(value, str):
        raise SchemaBadType(path, "string")
    try:
        return cls(value)
    except ValueError:
        if closed_vocabulary:
            raise UnknownRelation(value, path) from None
        raise SchemaBadType(path, f"one of {', '.join(m.value for m in cls)}") from None


def _extra(obj: Dict[str, Any], known: Sequence[str]) -> Dict[str, Any]:
    return {k: v for k, v in obj.items() if k not in known}


def _point3(value: Any, path: str) -> Vec3:
    v = _vec(value, path, (2, 3))
    return (v[0], v[1], v[2] if len(v) == 3 else 0.0)


_META_KEYS = ("scene_type", "instruction")
_ARCH_KEYS = ("boundary_polygon", "height", "structure_nodes", "bounds_bottom", "bounds_top")
_NODE_KEYS = ("id", "type", "segment", "normal", "pos", "parent_wall")
_ASSET_KEYS = ("id", "category", "role", "description", "pos", "rot", "size")
_EDGE_KEYS = ("source", "target", "relation")
_ZONE_KEYS = ("id", "semantic_label", "assets", "spatial_graph")
_TOPO_KEYS = ("nodes", "edges")
_TOPO_NODE_KEYS = ("id", "type")
_TOPO_EDGE_KEYS = ("source", "target", "relation", "spatial_offset")
_SCENE_KEYS = ("meta", "architecture", "zone_topology", "functional_zones")


def _parse_meta(raw: Any, path: str) -> Meta:
    obj = _obj(raw, path)
    instruction = obj.get("instruction")
    return Meta(
        scene_type=_str(_req(obj, "scene_type", path), f"{path}/scene_type"),
        instruction=None if instruction is None else _str(instruction, f"{path}/instruction"),
        extra=_extra(obj, _META_KEYS),
    )


def _parse_structure_node(raw: Any, path: str) -> StructureNode:
    obj = _obj(raw, path)
    segment = None
    if obj.get("segment") is not None:
        seg = _list(obj["segment"], f"{path}/segment")
        if len(seg) != 2:
            raise SchemaBadType(f"{path}/segment", "two endpoints")
        a = _vec(seg[0], f"{path}/segment/0", (2,))
        b = _vec(seg[1], f"{path}/segment/1", (2,))
        segment = ((a[0], a[1]), (b[0], b[1]))
    normal = None
    if obj.get("normal") is not None:
        normal = _point3(obj["normal"], f"{path}/normal")
    pos = None
    if obj.get("pos") is not None:
        pos = _point3(obj["pos"], f"{path}/pos")
    parent = obj.get("parent_wall")
    return StructureNode(
        id=_str(_req(obj, "id", path), f"{path}/id"),
        type=_enum(StructureType, _req(obj, "type", path), f"{path}/type"),
        segment=segment,
        normal=normal,
        pos=pos,
        parent_wall=None if parent is None else _str(parent, f"{path}/parent_wall"),
        extra=_extra(obj, _NODE_KEYS),
    )


def _congruent(bottom: Sequence[Vec3], top: Sequence[Vec3]) -> bool:
    if len(bottom) != len(top) or not top:
        return False
    z = top[0][2]
    if z <= EPS:
        return False
    return all(
        abs(b[0] - t[0]) <= EPS and abs(b[1] - t[1]) <= EPS and abs(t[2] - z) <= EPS
        for b, t in zip(bottom, top)
    )


def _parse_architecture(raw: Any, path: str) -> Architecture:
    obj = _obj(raw, path)
    prism_top = None
    if "boundary_polygon" in obj or "bounds_bottom" not in obj:
        key = "boundary_polygon"
    else:
        key = "bounds_bottom"
    verts = _list(_req(obj, key, path), f"{path}/{key}")
    polygon = tuple(_point3(v, f"{path}/{key}/{i}") for i, v in enumerate(verts))
    if len(polygon) > 3 and polygon[0] == polygon[-1]:
        polygon = polygon[:-1]

    height: Optional[float] = None
    if "height" in obj:
        height = _num(obj["height"], f"{path}/height")
    if key == "bounds_bottom" and "bounds_top" in obj:
        top_raw = _list(obj["bounds_top"], f"{path}/bounds_top")
        top = tuple(_point3(v, f"{path}/bounds_top/{i}") for i, v in enumerate(top_raw))
        if len(top) > 3 and top[0] == top[-1]:
            top = top[:-1]
        if _congruent(polygon, top):
            if height is None:
                height = top[0][2]
        else:
            prism_top = top

    if signed_area([(v[0], v[1]) for v in polygon]) < 0:
        polygon = tuple(reversed(polygon))
        if prism_top is not None:
            prism_top = tuple(reversed(prism_top))

    defaulted = height is None
    if defaulted:
        height = DEFAULT_HEIGHT
    nodes_raw = _list(obj.get("structure_nodes", []), f"{path}/structure_nodes")
    return Architecture(
        boundary_polygon=polygon,
        height=height,
        structure_nodes=tuple(
            _parse_structure_node(n, f"{path}/structure_nodes/{i}") for i, n in enumerate(nodes_raw)
        ),
        prism_top=prism_top,
        extra=_extra(obj, _ARCH_KEYS),
        height_defaulted=defaulted,
    )


def _parse_asset(raw: Any, path: str) -> Asset:
    obj = _obj(raw, path)
    # stage-wise annotations nest the pose under "transform"
    pose = obj
    if "pos" not in obj and isinstance(obj.get("transform"), dict):
        pose = obj["transform"]
    known = _ASSET_KEYS + (("transform",) if pose is not obj else ())
    description = obj.get("description", "")
    return Asset(
        id=_str(_req(obj, "id", path), f"{path}/id"),
        category=_str(_req(obj, "category", path), f"{path}/category"),
        role=_enum(AssetRole, _req(obj, "role", path), f"{path}/role"),
        pos=_vec(_req(pose, "pos", path), f"{path}/pos"),
        rot=_vec(_req(pose, "rot", path), f"{path}/rot"),
        size=_vec(_req(pose, "size", path), f"{path}/size"),
        description=_str(description, f"{path}/description"),
        extra=_extra(obj, known),
    )


def _parse_edge(raw: Any, path: str) -> SpatialEdge:
    obj = _obj(raw, path)
    return SpatialEdge(
        source=_str(_req(obj, "source", path), f"{path}/source"),
        target=_str(_req(obj, "target", path), f"{path}/target"),
        relation=_enum(IntraZoneRelation, _req(obj, "relation", path), f"{path}/relation", True),
        extra=_extra(obj, _EDGE_KEYS),
    )


def _parse_zone(raw: Any, path: str) -> FunctionalZone:
    obj = _obj(raw, path)
    assets = _list(_req(obj, "assets", path), f"{path}/assets")
    graph = _list(obj.get("spatial_graph", []), f"{path}/spatial_graph")
    return FunctionalZone(
        id=_str(_req(obj, "id", path), f"{path}/id"),
        semantic_label=_str(obj.get("semantic_label", ""), f"{path}/semantic_label"),
        assets=tuple(_parse_asset(a, f"{path}/assets/{i}") for i, a in enumerate(assets)),
        spatial_graph=tuple(_parse_edge(e, f"{path}/spatial_graph/{i}") for i, e in enumerate(graph)),
        extra=_extra(obj, _ZONE_KEYS),
    )


def _parse_topology(raw: Any, path: str) -> ZoneTopology:
    obj = _obj(raw, path)
    nodes = []
    for i, n in enumerate(_list(obj.get("nodes", []), f"{path}/nodes")):
        p = f"{path}/nodes/{i}"
        n = _obj(n, p)
        nodes.append(TopologyNode(
            id=_str(_req(n, "id", p), f"{p}/id"),
            type=_enum(ZoneNodeType, _req(n, "type", p), f"{p}/type"),
            extra=_extra(n, _TOPO_NODE_KEYS),
        ))
    edges = []
    for i, e in enumerate(_list(obj.get("edges", []), f"{path}/edges")):
        p = f"{path}/edges/{i}"
        e = _obj(e, p)
        offset = e.get("spatial_offset")
        edges.append(TopologyEdge(
            source=_str(_req(e, "source", p), f"{p}/source"),
            target=_str(_req(e, "target", p), f"{p}/target"),
            relation=_enum(TopoRelation, _req(e, "relation", p), f"{p}/relation", True),
            spatial_offset=None if offset is None else _enum(
                OffsetDescriptor, offset, f"{p}/spatial_offset", True),
            extra=_extra(e, _TOPO_EDGE_KEYS),
        ))
    return ZoneTopology(nodes=tuple(nodes), edges=tuple(edges), extra=_extra(obj, _TOPO_KEYS))


def parse_scene(text: str) -> Scene:
    """Parse layout JSON into a Scene. Numbers become float64."""
    try:
        raw = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise JsonSyntax(f"{e.msg} (line {e.lineno}, column {e.colno})") from None
    except RecursionError:
        raise JsonSyntax("nesting too deep") from None
    except ValueError as e:
        # int literals past the interpreter's digit limit
        raise JsonSyntax(str(e)) from None
    root = _obj(raw, "")
    zones = _list(_req(root, "functional_zones", ""), "/functional_zones")
    return Scene(
        meta=_parse_meta(_req(root, "meta", ""), "/meta"),
        architecture=_parse_architecture(_req(root, "architecture", ""), "/architecture"),
        zone_topology=_parse_topology(_req(root, "zone_topology", ""), "/zone_topology"),
        functional_zones=tuple(_parse_zone(z, f"/functional_zones/{i}") for i, z in enumerate(zones)),
        extra=_extra(root, _SCENE_KEYS),
    )


def read_scene(text: str) -> Scene:
    """extract_answer followed by parse_scene."""
    return parse_scene(extract_answer(text))


# ── Validation ───────────────────────────────────────────────────────────────

def _wrap_angle(a: float) -> float:
    return math.atan2(math.sin(a), math.cos(a))


def _validate_architecture(arch: Architecture, errors: List[Violation], warnings: List[Violation]) -> None:
    base = "/architecture"
    poly = arch.floor_polygon()
    polygon_ok = False
    if len(poly) < 3:
        errors.append(Violation("BOUNDARY_TOO_FEW_VERTICES", f"{base}/boundary_polygon",
                                f"{len(poly)} vertices, need at least 3"))
    else:
        area = abs(signed_area(poly))
        if area <= EPS:
            errors.append(Violation("BOUNDARY_ZERO_AREA", f"{base}/boundary_polygon",
                                    f"polygon area {area:.6g} m2"))
        simple = is_simple(poly)
        if not simple:
            errors.append(Violation("BOUNDARY_NOT_SIMPLE", f"{base}/boundary_polygon",
                                    "boundary edges intersect"))
        polygon_ok = simple and area > EPS
    for i, v in enumerate(arch.boundary_polygon):
        if abs(v[2]) > EPS:
            errors.append(Violation("BOUNDARY_NOT_ON_FLOOR", f"{base}/boundary_polygon/{i}",
                                    f"vertex z={v[2]:g}, expected 0"))
    if arch.height <= 0:
        errors.append(Violation("BAD_HEIGHT", f"{base}/height", f"height {arch.height:g} must be > 0"))
    if arch.height_defaulted:
        warnings.append(Violation("HEIGHT_DEFAULTED", f"{base}/height",
                                  f"no height given, using {DEFAULT_HEIGHT} m", "warning"))
    if arch.prism_top is not None:
        errors.append(Violation("CONGRUENCE", f"{base}/bounds_top",
                                "bounds_top is not a congruent lift of bounds_bottom"))

    wall_ids = {n.id for n in arch.structure_nodes if n.type == StructureType.WALL}
    for i, node in enumerate(arch.structure_nodes):
        path = f"{base}/structure_nodes/{i}"
        if node.type == StructureType.WALL and node.normal is not None:
            length = math.sqrt(sum(c * c for c in node.normal))
            if abs(length - 1.0) > EPS:
                errors.append(Violation("WALL_NORMAL_NOT_UNIT", f"{path}/normal",
                                        f"normal length {length:.6g}"))
            elif node.segment is not None and polygon_ok:
                (x1, y1), (x2, y2) = node.segment
                probe = (0.5 * (x1 + x2) + NORMAL_PROBE * node.normal[0],
                         0.5 * (y1 + y2) + NORMAL_PROBE * node.normal[1])
                if not point_in_polygon(probe, poly):
                    errors.append(Violation("WALL_NORMAL_OUTWARD", f"{path}/normal",
                                            f"normal of {node.id} points out of the room"))
        if node.type == StructureType.DOOR and node.parent_wall is not None and node.parent_wall not in wall_ids:
            warnings.append(Violation("DOOR_UNKNOWN_PARENT_WALL", f"{path}/parent_wall",
                                      f"no wall named {node.parent_wall}", "warning"))


def _validate_zones(scene: Scene, errors: List[Violation], warnings: List[Violation]) -> None:
    structure = scene.structure_ids()
    height = scene.architecture.height
    seen_assets: Set[str] = set()
    seen_zones: Set[str] = set()
    for zi, zone in enumerate(scene.functional_zones):
        zpath = f"/functional_zones/{zi}"
        if zone.id in seen_zones:
            errors.append(Violation("DUP_ZONE_ID", f"{zpath}/id", f"zone id {zone.id} repeated"))
        seen_zones.add(zone.id)
        if not zone.assets:
            warnings.append(Violation("EMPTY_ZONE", zpath, f"zone {zone.id} has no assets", "warning"))
        elif not any(a.role == AssetRole.ZONE_ANCHOR for a in zone.assets):
            warnings.append(Violation("ZONE_WITHOUT_ANCHOR", zpath,
                                      f"zone {zone.id} has no zone_anchor asset", "warning"))

        stacked = {e.source for e in zone.spatial_graph if e.relation in STACKING_RELATIONS}
        for ai, asset in enumerate(zone.assets):
            apath = f"{zpath}/assets/{ai}"
            if asset.id in seen_assets:
                errors.append(Violation("DUP_ASSET_ID", f"{apath}/id", f"asset id {asset.id} repeated"))
            seen_assets.add(asset.id)
            if any(s <= 0 for s in asset.size):
                errors.append(Violation("ASSET_BAD_SIZE", f"{apath}/size",
                                        f"size {list(asset.size)} must be strictly positive"))
                continue
            bottom = asset.pos[2] - 0.5 * asset.size[1]
            if bottom < -EPS:
                errors.append(Violation("ASSET_BELOW_FLOOR", f"{apath}/pos",
                                        f"bottom at z={bottom:.6g}"))
            elif bottom > EPS and asset.id not in stacked:
                warnings.append(Violation("ASSET_NOT_ON_FLOOR", f"{apath}/pos",
                                          f"bottom at z={bottom:.6g}, expected pos_z = h/2", "warning"))
            if bottom + asset.size[1] > height + EPS:
                warnings.append(Violation("ASSET_ABOVE_CEILING", f"{apath}/pos",
                                          f"top above room height {height:g}", "warning"))
            if abs(_wrap_angle(asset.rot[0])) > TILT_TOLERANCE or abs(_wrap_angle(asset.rot[1])) > TILT_TOLERANCE:
                warnings.append(Violation("ASSET_TILTED", f"{apath}/rot",
                                          "rx/ry ignored by footprint geometry", "warning"))

        local = {a.id for a in zone.assets} | structure
        for ei, edge in enumerate(zone.spatial_graph):
            for end in ("source", "target"):
                ref = getattr(edge, end)
                if ref not in local:
                    errors.append(Violation("GRAPH_UNKNOWN_ENDPOINT", f"{zpath}/spatial_graph/{ei}/{end}",
                                            f"{ref} is neither an asset of {zone.id} nor a structure node"))


def _validate_topology(scene: Scene, errors: List[Violation], warnings: List[Violation]) -> None:
    topo = scene.zone_topology
    zone_ids = [z.id for z in scene.functional_zones]
    known = set(zone_ids) | scene.structure_ids()
    for ei, edge in enumerate(topo.edges):
        for end in ("source", "target"):
            ref = getattr(edge, end)
            if ref not in known:
                errors.append(Violation("TOPOLOGY_UNKNOWN_ENDPOINT", f"/zone_topology/edges/{ei}/{end}",
                                        f"{ref} is neither a zone nor a structure node"))
    node_ids = {n.id for n in topo.nodes}
    anchored = {e.source for e in topo.edges if e.relation in ANCHORING_RELATIONS}
    for zi, zid in enumerate(zone_ids):
        if zid not in node_ids:
            warnings.append(Violation("ZONE_NOT_IN_TOPOLOGY", f"/functional_zones/{zi}",
                                      f"zone {zid} missing from zone_topology.nodes", "warning"))
        if zid not in anchored:
            warnings.append(Violation("ZONE_UNANCHORED", f"/functional_zones/{zi}",
                                      f"zone {zid} has no anchoring relation", "warning"))


def validate(scene: Scene) -> ValidationReport:
    """Check every structural invariant; violations are data, never raised."""
    errors: List[Violation] = []
    warnings: List[Violation] = []
    _validate_architecture(scene.architecture, errors, warnings)
    _validate_zones(scene, errors, warnings)
    _validate_topology(scene, errors, warnings)
    return ValidationReport(violations=tuple(errors), warnings=tuple(warnings))


# ── Serialization ────────────────────────────────────────────────────────────

def _with_extra(known: Dict[str, Any], extra: Dict[str, Any]) -> Dict[str, Any]:
    out = dict(known)
    for k, v in extra.items():
        out.setdefault(k, v)
    return out


def _asset_dict(a: Asset) -> Dict[str, Any]:
    return _with_extra({
        "id": a.id,
        "category": a.category,
        "role": a.role.value,
        "description": a.description,
        "pos": list(a.pos),
        "rot": list(a.rot),
        "size": list(a.size),
    }, a.extra)


def _node_dict(n: StructureNode) -> Dict[str, Any]:
    d: Dict[str, Any] = {"id": n.id, "type": n.type.value}
    if n.segment is not None:
        d["segment"] = [list(n.segment[0]), list(n.segment[1])]
    if n.normal is not None:
        d["normal"] = list(n.normal)
    if n.pos is not None:
        d["pos"] = list(n.pos)
    if n.parent_wall is not None:
        d["parent_wall"] = n.parent_wall
    return _with_extra(d, n.extra)


def scene_to_dict(scene: Scene) -> Dict[str, Any]:
    meta: Dict[str, Any] = {"scene_type": scene.meta.scene_type}
    if scene.meta.instruction is not None:
        meta["instruction"] = scene.meta.instruction

    arch_obj = scene.architecture
    verts = [list(v) for v in arch_obj.boundary_polygon]
    if arch_obj.prism_top is not None:
        arch: Dict[str, Any] = {"bounds_bottom": verts, "bounds_top": [list(v) for v in arch_obj.prism_top]}
    else:
        arch = {"boundary_polygon": verts}
    arch["height"] = arch_obj.height
    arch["structure_nodes"] = [_node_dict(n) for n in arch_obj.structure_nodes]

    topo = scene.zone_topology
    edges = []
    for e in topo.edges:
        d = {"source": e.source, "target": e.target, "relation": e.relation.value}
        if e.spatial_offset is not None:
            d["spatial_offset"] = e.spatial_offset.value
        edges.append(_with_extra(d, e.extra))

    return _with_extra({
        "meta": _with_extra(meta, scene.meta.extra),
        "architecture": _with_extra(arch, arch_obj.extra),
        "zone_topology": _with_extra({
            "nodes": [_with_extra({"id": n.id, "type": n.type.value}, n.extra) for n in topo.nodes],
            "edges": edges,
        }, topo.extra),
        "functional_zones": [
            _with_extra({
                "id": z.id,
                "semantic_label": z.semantic_label,
                "assets": [_asset_dict(a) for a in z.assets],
                "spatial_graph": [
                    _with_extra({"source": e.source, "target": e.target, "relation": e.relation.value}, e.extra)
                    for e in z.spatial_graph
                ],
            }, z.extra)
            for z in scene.functional_zones
        ],
    }, scene.extra)


def serialize(scene: Scene) -> str:
    """Canonical JSON: schema key order, shortest round-trip floats, extras last."""
    return json.dumps(scene_to_dict(scene), indent=2, ensure_ascii=False)
