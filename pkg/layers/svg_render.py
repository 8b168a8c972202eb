"""
Layer 8: SVG Floor-Plan Renderer
Top-down drawing of a scene: boundary outline, translucent zone hulls and
one rotated footprint path per asset, labelled with its id.
World metres map to 100 user units per metre with the y axis flipped.
"""
import logging
from typing import List, Sequence, Tuple

import svgwrite

from layers.geom_kernel import bbox, footprint_of
from layers.reward_engine import zone_hulls
from layers.scene_model import Scene

logger = logging.getLogger(__name__)

PX_PER_M = 100.0
MARGIN_M = 0.5
ZONE_PALETTE = ("#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948", "#b07aa1", "#9c755f")
FONT = "Arial"


class _Frame:
    """World (m, y up) to SVG user units (y down) for one boundary."""

    def __init__(self, polygon: Sequence[Tuple[float, float]]):
        x0, y0, x1, y1 = bbox(polygon)
        self.x0 = x0 - MARGIN_M
        self.y1 = y1 + MARGIN_M
        self.width = round((x1 - x0 + 2 * MARGIN_M) * PX_PER_M, 2)
        self.height = round((y1 - y0 + 2 * MARGIN_M) * PX_PER_M, 2)

    def map(self, p: Tuple[float, float]) -> Tuple[float, float]:
        return round((p[0] - self.x0) * PX_PER_M, 2), round((self.y1 - p[1]) * PX_PER_M, 2)

    def points(self, pts: Sequence[Tuple[float, float]]) -> List[Tuple[float, float]]:
        return [self.map(p) for p in pts]


def _path_data(points: Sequence[Tuple[float, float]]) -> str:
    head, *rest = points
    parts = [f"M {head[0]:.2f},{head[1]:.2f}"]
    parts += [f"L {x:.2f},{y:.2f}" for x, y in rest]
    parts.append("Z")
    return " ".join(parts)


def build_drawing(scene: Scene, path: str = "scene.svg") -> svgwrite.Drawing:
    frame = _Frame(scene.floor_polygon())
    dwg = svgwrite.Drawing(
        path,
        profile="full",
        size=(f"{frame.width:.2f}px", f"{frame.height:.2f}px"),
        viewBox=f"0 0 {frame.width:.2f} {frame.height:.2f}",
    )
    dwg.add(dwg.polygon(frame.points(scene.floor_polygon()), class_="boundary",
                        fill="#fafafa", stroke="black", stroke_width=3))

    for zi, hull in enumerate(zone_hulls(scene)):
        if not hull:
            continue
        color = ZONE_PALETTE[zi % len(ZONE_PALETTE)]
        dwg.add(dwg.polygon(frame.points(hull), class_="zone",
                            fill=color, fill_opacity=0.25, stroke=color, stroke_width=1))

    for zi, zone in enumerate(scene.functional_zones):
        color = ZONE_PALETTE[zi % len(ZONE_PALETTE)]
        for asset in zone.assets:
            pts = frame.points(footprint_of(asset))
            dwg.add(dwg.path(d=_path_data(pts), class_="asset",
                             fill="white", fill_opacity=0.8, stroke=color, stroke_width=2))
            cx, cy = frame.map((asset.pos[0], asset.pos[1]))
            dwg.add(dwg.text(asset.id, insert=(cx, cy), font_size=12, font_family=FONT,
                             text_anchor="middle", class_="label"))
    return dwg


def scene_to_svg(scene: Scene) -> str:
    return build_drawing(scene).tostring()


def render_svg(scene: Scene, path: str) -> None:
    """Write the floor plan to `path`; identical scenes give identical files."""
    dwg = build_drawing(scene, path)
    with open(path, "w", encoding="utf-8") as f:
        dwg.write(f)
    logger.info("Rendered %d assets to %s", len(scene.all_assets()), path)
