"""
Layer 6: Boundary Forge
Parametric floor-plan generator for the nine room-shape families, plus the
wall reconstruction that turns a polygon into wall structure nodes.

Most shapes are a w x d rectangle whose corners are kept plain, notched
(a rectangle removed) or cut (a diagonal chamfer). U, H and nook shapes
modify the middle of an edge instead and are laid out directly.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from layers.errors import BadDims
from layers.geom_kernel import EPS, Polygon2D, ensure_ccw, is_simple, signed_area
from layers.scene_model import (
    DEFAULT_HEIGHT,
    Architecture,
    Meta,
    Scene,
    StructureNode,
    StructureType,
    ZoneTopology,
)

logger = logging.getLogger(__name__)


class Shape(str, Enum):
    RECTANGULAR = "rectangular"
    L_SHAPED = "l_shaped"
    T_SHAPED = "t_shaped"
    U_SHAPED = "u_shaped"
    H_SHAPED = "h_shaped"
    TRAPEZOIDAL = "trapezoidal"
    DIAGONAL_CUT = "diagonal_cut"
    NOOK = "nook"
    IRREGULAR = "irregular"


RECTILINEAR_SHAPES = frozenset({
    Shape.RECTANGULAR, Shape.L_SHAPED, Shape.T_SHAPED, Shape.U_SHAPED, Shape.H_SHAPED, Shape.NOOK,
})


@dataclass(frozen=True)
class CatalogEntry:
    shape: Shape
    label: str
    params: Tuple[str, ...]
    defaults: Dict[str, float]


_CATALOG = (
    CatalogEntry(Shape.RECTANGULAR, "Rectangular", ("w", "d"), {"w": 4.0, "d": 5.0}),
    CatalogEntry(Shape.L_SHAPED, "L-shaped", ("w", "d", "notch_w", "notch_d"),
                 {"w": 4.0, "d": 4.0, "notch_w": 2.0, "notch_d": 2.0}),
    CatalogEntry(Shape.T_SHAPED, "T-shaped", ("w", "bar_d", "stem_w", "stem_d"),
                 {"w": 7.0, "bar_d": 3.0, "stem_w": 3.0, "stem_d": 4.0}),
    CatalogEntry(Shape.U_SHAPED, "U-shaped", ("w", "d", "notch_w", "notch_d"),
                 {"w": 7.0, "d": 6.0, "notch_w": 3.0, "notch_d": 3.0}),
    CatalogEntry(Shape.H_SHAPED, "H-shaped", ("w", "d", "notch_w", "top_notch_d", "bottom_notch_d"),
                 {"w": 8.0, "d": 7.0, "notch_w": 3.0, "top_notch_d": 2.5, "bottom_notch_d": 2.5}),
    CatalogEntry(Shape.TRAPEZOIDAL, "Trapezoidal", ("base_bottom", "base_top", "height"),
                 {"base_bottom": 6.0, "base_top": 4.0, "height": 5.0}),
    CatalogEntry(Shape.DIAGONAL_CUT, "Room with a diagonal wall cut", ("w", "d", "cut_x", "cut_y"),
                 {"w": 5.0, "d": 5.0, "cut_x": 2.0, "cut_y": 2.0}),
    CatalogEntry(Shape.NOOK, "Room with a protruding nook/alcove", ("w", "d", "nook_w", "nook_d", "nook_offset"),
                 {"w": 5.0, "d": 4.0, "nook_w": 2.0, "nook_d": 1.2, "nook_offset": 1.5}),
    CatalogEntry(Shape.IRREGULAR, "Other irregular shapes", ("w", "d"), {"w": 7.0, "d": 6.0}),
)


def shape_catalog() -> List[CatalogEntry]:
    return list(_CATALOG)


@dataclass(frozen=True)
class ShapeSpec:
    shape: Shape
    dims: Dict[str, float] = field(default_factory=dict)
    seed: int = 0


# ── Corner treatments ────────────────────────────────────────────────────────

# corners in CCW order: bottom-left, bottom-right, top-right, top-left
Treatment = Tuple[str, float, float]   # ("plain" | "notch" | "cut", extent along x, extent along y)
PLAIN: Treatment = ("plain", 0.0, 0.0)


def _corner_polygon(w: float, d: float, treatments: Sequence[Treatment]) -> List[Tuple[float, float]]:
    out: List[Tuple[float, float]] = []
    for corner, (kind, a, b) in enumerate(treatments):
        if corner == 0:
            pts = {"plain": [(0.0, 0.0)], "notch": [(0.0, b), (a, b), (a, 0.0)], "cut": [(0.0, b), (a, 0.0)]}
        elif corner == 1:
            pts = {"plain": [(w, 0.0)], "notch": [(w - a, 0.0), (w - a, b), (w, b)], "cut": [(w - a, 0.0), (w, b)]}
        elif corner == 2:
            pts = {"plain": [(w, d)], "notch": [(w, d - b), (w - a, d - b), (w - a, d)], "cut": [(w, d - b), (w - a, d)]}
        else:
            pts = {"plain": [(0.0, d)], "notch": [(a, d), (a, d - b), (0.0, d - b)], "cut": [(a, d), (0.0, d - b)]}
        if kind not in pts:
            raise BadDims(f"unknown corner treatment {kind!r}")
        out.extend(pts[kind])
    return out


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise BadDims(message)


# ── Shapes ───────────────────────────────────────────────────────────────────

def _rectangular(p: Dict[str, float], seed: int):
    return _corner_polygon(p["w"], p["d"], [PLAIN] * 4)


def _l_shaped(p, seed):
    _require(p["notch_w"] < p["w"] and p["notch_d"] < p["d"], "L notch must be smaller than the room")
    return _corner_polygon(p["w"], p["d"], [PLAIN, PLAIN, ("notch", p["notch_w"], p["notch_d"]), PLAIN])


def _t_shaped(p, seed):
    w, stem_w, stem_d = p["w"], p["stem_w"], p["stem_d"]
    _require(stem_w < w, "T stem must be narrower than the bar")
    side = 0.5 * (w - stem_w)
    notch = ("notch", side, stem_d)
    return _corner_polygon(w, stem_d + p["bar_d"], [notch, notch, PLAIN, PLAIN])


def _u_shaped(p, seed):
    w, d, nw, nd = p["w"], p["d"], p["notch_w"], p["notch_d"]
    _require(nw < w and nd < d, "U notch must be smaller than the room")
    x0, x1 = 0.5 * (w - nw), 0.5 * (w + nw)
    return [(0.0, 0.0), (w, 0.0), (w, d), (x1, d), (x1, d - nd), (x0, d - nd), (x0, d), (0.0, d)]


def _h_shaped(p, seed):
    w, d, nw = p["w"], p["d"], p["notch_w"]
    td, bd = p["top_notch_d"], p["bottom_notch_d"]
    _require(nw < w, "H notches must be narrower than the room")
    _require(td + bd < d, "H notches must leave a connecting bar")
    x0, x1 = 0.5 * (w - nw), 0.5 * (w + nw)
    return [
        (0.0, 0.0), (x0, 0.0), (x0, bd), (x1, bd), (x1, 0.0), (w, 0.0),
        (w, d), (x1, d), (x1, d - td), (x0, d - td), (x0, d), (0.0, d),
    ]


def _trapezoidal(p, seed):
    bb, bt, h = p["base_bottom"], p["base_top"], p["height"]
    return [(0.0, 0.0), (bb, 0.0), (0.5 * (bb + bt), h), (0.5 * (bb - bt), h)]


def _diagonal_cut(p, seed):
    _require(p["cut_x"] < p["w"] and p["cut_y"] < p["d"], "diagonal cut must be smaller than the room")
    return _corner_polygon(p["w"], p["d"], [PLAIN, PLAIN, ("cut", p["cut_x"], p["cut_y"]), PLAIN])


def _nook(p, seed):
    w, d, nw, nd, off = p["w"], p["d"], p["nook_w"], p["nook_d"], p["nook_offset"]
    _require(off + nw < w, "nook must fit inside the wall it extends")
    return [(0.0, 0.0), (w, 0.0), (w, d), (off + nw, d), (off + nw, d + nd), (off, d + nd), (off, d), (0.0, d)]


def _irregular(p, seed):
    """2-3 notched corners plus one diagonal cut on a remaining plain corner."""
    w, d = p["w"], p["d"]
    rng = np.random.default_rng(seed)
    n_notches = int(rng.integers(2, 4))
    corners = [int(c) for c in rng.permutation(4)]
    treatments: List[Treatment] = [PLAIN] * 4
    for c in corners[:n_notches]:
        fx, fy = rng.uniform(0.15, 0.35, size=2)
        treatments[c] = ("notch", round(float(fx) * w, 3), round(float(fy) * d, 3))
    cx, cy = rng.uniform(0.1, 0.3, size=2)
    treatments[corners[n_notches]] = ("cut", round(float(cx) * w, 3), round(float(cy) * d, 3))
    return _corner_polygon(w, d, treatments)


_BUILDERS = {
    Shape.RECTANGULAR: _rectangular,
    Shape.L_SHAPED: _l_shaped,
    Shape.T_SHAPED: _t_shaped,
    Shape.U_SHAPED: _u_shaped,
    Shape.H_SHAPED: _h_shaped,
    Shape.TRAPEZOIDAL: _trapezoidal,
    Shape.DIAGONAL_CUT: _diagonal_cut,
    Shape.NOOK: _nook,
    Shape.IRREGULAR: _irregular,
}


def _entry(shape: Shape) -> CatalogEntry:
    return next(e for e in _CATALOG if e.shape == shape)


def generate_boundary(spec: ShapeSpec) -> Polygon2D:
    """Simple CCW polygon for the requested shape; deterministic for (shape, dims, seed)."""
    try:
        shape = Shape(spec.shape)
    except ValueError:
        raise BadDims(f"unknown shape {spec.shape!r}") from None
    entry = _entry(shape)
    unknown = sorted(set(spec.dims) - set(entry.params))
    if unknown:
        raise BadDims(f"{shape.value} does not take {', '.join(unknown)}")
    params = dict(entry.defaults)
    params.update({k: float(v) for k, v in spec.dims.items()})
    for name, value in params.items():
        _require(math.isfinite(value) and value > 0, f"{name} must be > 0, got {value}")

    pts = _BUILDERS[shape](params, spec.seed)
    polygon = ensure_ccw(pts)
    _require(abs(signed_area(polygon)) > EPS and is_simple(polygon),
             f"{shape.value} dimensions {params} give a degenerate polygon")
    logger.debug("Generated %s boundary with %d vertices", shape.value, len(polygon))
    return polygon


def parse_dims(text: Optional[str]) -> Dict[str, float]:
    """`k=v,k=v` as used on the command line."""
    dims: Dict[str, float] = {}
    if not text:
        return dims
    for item in text.split(","):
        if not item.strip():
            continue
        key, sep, value = item.partition("=")
        if not sep:
            raise BadDims(f"expected key=value, got {item!r}")
        try:
            dims[key.strip()] = float(value)
        except ValueError:
            raise BadDims(f"{key.strip()} is not a number: {value!r}") from None
    return dims


# ── Walls ────────────────────────────────────────────────────────────────────

def derive_walls(polygon: Sequence[Tuple[float, float]]) -> List[StructureNode]:
    """
    One wall per edge, named wall_01..wall_N, walked clockwise from the
    min-x vertex; normals point into the room.
    """
    ccw = ensure_ccw(polygon)
    cw = list(reversed(ccw))
    start = min(range(len(cw)), key=lambda i: (cw[i][0], cw[i][1]))
    ordered = cw[start:] + cw[:start]
    walls = []
    for i, a in enumerate(ordered):
        b = ordered[(i + 1) % len(ordered)]
        dx, dy = b[0] - a[0], b[1] - a[1]
        length = math.hypot(dx, dy)
        walls.append(StructureNode(
            id=f"wall_{i + 1:02d}",
            type=StructureType.WALL,
            segment=((a[0], a[1]), (b[0], b[1])),
            normal=(dy / length + 0.0, -dx / length + 0.0, 0.0),
        ))
    return walls


def boundary_stub(polygon: Sequence[Tuple[float, float]], height: float = DEFAULT_HEIGHT,
                  scene_type: str = "empty_room") -> Scene:
    """Boundary-only scene: architecture with walls, no zones."""
    ccw = ensure_ccw(polygon)
    return Scene(
        meta=Meta(scene_type=scene_type),
        architecture=Architecture(
            boundary_polygon=tuple((x, y, 0.0) for x, y in ccw),
            height=float(height),
            structure_nodes=tuple(derive_walls(ccw)),
        ),
        zone_topology=ZoneTopology(),
        functional_zones=(),
    )
