"""
Layer 2: Geometry Kernel
Exact 2D/3D computational geometry behind every reward and metric.

Footprints, shoelace areas, Sutherland-Hodgman convex clipping, ear-clipping
triangulation, convex hulls and hull IoU, box intersection volumes, and the
maximal-rectangle decomposition of rectilinear floor plans.

Everything here is a pure function over plain tuples. Polygons are ordered
counter-clockwise; a closing vertex equal to the first one is dropped.
"""
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Sequence, Tuple

import numpy as np
import shapely
from shapely.geometry import LinearRing, Point, Polygon

from layers.errors import DegeneratePolygon, NotRectilinear

EPS = 1e-6          # coordinate tolerance (m)
CLIP_EPS = 1e-12    # clipped areas below this are exactly 0
ZERO_AREA = 1e-9    # outside areas below this are exactly 0

Point2 = Tuple[float, float]
Polygon2D = Tuple[Point2, ...]
Footprint = Tuple[Point2, Point2, Point2, Point2]
Triangle = Tuple[Point2, Point2, Point2]
ZoneHull = Polygon2D
EMPTY_HULL: ZoneHull = ()


# ── Primitives ───────────────────────────────────────────────────────────────

def _cross(o: Point2, a: Point2, b: Point2) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def signed_area(points: Sequence[Point2]) -> float:
    """Shoelace area; positive for counter-clockwise order."""
    n = len(points)
    s = 0.0
    for i in range(n):
        x1, y1 = points[i]
        x2, y2 = points[(i + 1) % n]
        s += x1 * y2 - x2 * y1
    return 0.5 * s


def ensure_ccw(points: Sequence[Sequence[float]]) -> Polygon2D:
    pts = tuple((float(p[0]), float(p[1])) for p in points)
    if len(pts) > 1 and pts[0] == pts[-1]:
        pts = pts[:-1]
    if signed_area(pts) < 0:
        pts = tuple(reversed(pts))
    return pts


def bbox(points: Sequence[Point2]) -> Tuple[float, float, float, float]:
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    return min(xs), min(ys), max(xs), max(ys)


def _boxes_disjoint(a, b) -> bool:
    return a[2] <= b[0] or b[2] <= a[0] or a[3] <= b[1] or b[3] <= a[1]


def polygon_area(p: Sequence[Point2]) -> float:
    """Positive area of a simple polygon regardless of winding."""
    if len(p) < 3:
        raise DegeneratePolygon(f"polygon has {len(p)} vertices")
    xy = np.asarray(p, dtype=float)[:, :2]
    x, y = xy[:, 0], xy[:, 1]
    area = 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))
    if area <= EPS:
        raise DegeneratePolygon(f"polygon area {area:.3g} m2 is not positive")
    return area


# ── Footprints ───────────────────────────────────────────────────────────────

def rotated_rect(cx: float, cy: float, w: float, d: float, yaw: float) -> Footprint:
    c, s = math.cos(yaw), math.sin(yaw)
    hw, hd = 0.5 * w, 0.5 * d
    return tuple(
        (cx + lx * c - ly * s, cy + lx * s + ly * c)
        for lx, ly in ((-hw, -hd), (hw, -hd), (hw, hd), (-hw, hd))
    )


def footprint_of(asset) -> Footprint:
    """
    Floor projection of an asset box: (w, d) about (pos_x, pos_y), yawed by rz.
    rx and ry are ignored; tilt is reported by validation instead.
    """
    return rotated_rect(asset.pos[0], asset.pos[1], asset.size[0], asset.size[2], asset.rot[2])


def vertical_interval(asset) -> Tuple[float, float]:
    half = 0.5 * asset.size[1]
    return asset.pos[2] - half, asset.pos[2] + half


def footprints_separated(a: Sequence[Point2], b: Sequence[Point2]) -> bool:
    """Separating-axis test over the edge normals of two convex polygons."""
    for poly in (a, b):
        n = len(poly)
        for i in range(n):
            x1, y1 = poly[i]
            x2, y2 = poly[(i + 1) % n]
            ax, ay = y1 - y2, x2 - x1
            pa = [ax * x + ay * y for x, y in a]
            pb = [ax * x + ay * y for x, y in b]
            if max(pa) <= min(pb) or max(pb) <= min(pa):
                return True
    return False


# ── Convex clipping ──────────────────────────────────────────────────────────

def _cut(p: Point2, q: Point2, sp: float, sq: float) -> Point2:
    t = sp / (sp - sq)
    return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))


def clip_convex(subject: Sequence[Point2], clip: Sequence[Point2]) -> List[Point2]:
    """Sutherland-Hodgman: subject clipped by a convex CCW window."""
    output = list(subject)
    n = len(clip)
    for i in range(n):
        if not output:
            break
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        candidates, output = output, []
        prev = candidates[-1]
        prev_side = ex * (prev[1] - ay) - ey * (prev[0] - ax)
        for cur in candidates:
            cur_side = ex * (cur[1] - ay) - ey * (cur[0] - ax)
            if cur_side >= 0:
                if prev_side < 0:
                    output.append(_cut(prev, cur, prev_side, cur_side))
                output.append(cur)
            elif prev_side >= 0:
                output.append(_cut(prev, cur, prev_side, cur_side))
            prev, prev_side = cur, cur_side
    return output


def _clip_area_ccw(subject: Sequence[Point2], clip: Sequence[Point2]) -> float:
    if _boxes_disjoint(bbox(subject), bbox(clip)):
        return 0.0
    piece = clip_convex(subject, clip)
    if len(piece) < 3:
        return 0.0
    area = abs(signed_area(piece))
    return area if area > CLIP_EPS else 0.0


def convex_clip_area(subject: Sequence[Point2], clip: Sequence[Point2]) -> float:
    """Area of the intersection of two convex polygons (either winding)."""
    if len(subject) < 3 or len(clip) < 3:
        return 0.0
    return _clip_area_ccw(ensure_ccw(subject), ensure_ccw(clip))


# ── Triangulation ────────────────────────────────────────────────────────────

def _drop_collinear(pts: Polygon2D) -> Polygon2D:
    changed = True
    out = list(pts)
    while changed and len(out) > 3:
        changed = False
        for i in range(len(out)):
            if abs(_cross(out[i - 1], out[i], out[(i + 1) % len(out)])) <= CLIP_EPS:
                del out[i]
                changed = True
                break
    return tuple(out)


def _in_triangle(p: Point2, a: Point2, b: Point2, c: Point2) -> bool:
    if p == a or p == b or p == c:
        return False
    return _cross(a, b, p) >= -CLIP_EPS and _cross(b, c, p) >= -CLIP_EPS and _cross(c, a, p) >= -CLIP_EPS


@lru_cache(maxsize=512)
def triangulate(polygon: Polygon2D) -> Tuple[Triangle, ...]:
    """
    Ear clipping. Collinear vertices are filtered first; among the candidate
    ears the one with the lowest remaining vertex index is clipped.
    """
    pts = _drop_collinear(ensure_ccw(polygon))
    if len(pts) < 3:
        raise DegeneratePolygon("fewer than 3 non-collinear vertices")
    idx = list(range(len(pts)))
    triangles: List[Triangle] = []
    while len(idx) > 3:
        m = len(idx)
        ear = None
        for k in range(m):
            a, b, c = pts[idx[k - 1]], pts[idx[k]], pts[idx[(k + 1) % m]]
            if _cross(a, b, c) <= CLIP_EPS:
                continue
            if any(_in_triangle(pts[j], a, b, c) for j in idx if pts[j] not in (a, b, c)):
                continue
            ear = k
            break
        if ear is None:
            # numerically stuck: take the most convex corner
            ear = max(range(m), key=lambda k: _cross(pts[idx[k - 1]], pts[idx[k]], pts[idx[(k + 1) % m]]))
        triangles.append((pts[idx[ear - 1]], pts[idx[ear]], pts[idx[(ear + 1) % m]]))
        del idx[ear]
    triangles.append((pts[idx[0]], pts[idx[1]], pts[idx[2]]))
    return tuple(triangles)


def polygon_clip_area(subject: Sequence[Point2], clip: Sequence[Point2]) -> float:
    """Area of convex `subject` inside the simple (possibly non-convex) `clip`."""
    polygon_area(clip)
    if len(subject) < 3:
        return 0.0
    subj = ensure_ccw(subject)
    return sum(_clip_area_ccw(subj, tri) for tri in triangulate(ensure_ccw(clip)))


# ── Hulls and IoU ────────────────────────────────────────────────────────────

def convex_hull(points: Sequence[Sequence[float]]) -> ZoneHull:
    """Monotone chain, CCW, collinear points dropped; EMPTY_HULL when degenerate."""
    pts = sorted({(float(p[0]), float(p[1])) for p in points})
    if len(pts) < 3:
        return EMPTY_HULL
    lower: List[Point2] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: List[Point2] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3 or abs(signed_area(hull)) <= CLIP_EPS:
        return EMPTY_HULL
    return tuple(hull)


def convex_iou(a: ZoneHull, b: ZoneHull) -> float:
    if not a or not b:
        return 0.0
    inter = _clip_area_ccw(a, b)
    if inter <= 0.0:
        return 0.0
    union = abs(signed_area(a)) + abs(signed_area(b)) - inter
    if union <= CLIP_EPS:
        return 0.0
    return min(1.0, inter / union)


# ── Boxes ────────────────────────────────────────────────────────────────────

def vertical_overlap(a, b) -> float:
    a_lo, a_hi = vertical_interval(a)
    b_lo, b_hi = vertical_interval(b)
    return max(0.0, min(a_hi, b_hi) - max(a_lo, b_lo))


def box_intersection_volume(a, b) -> float:
    """Footprint overlap area times the overlap of the vertical extents."""
    dz = vertical_overlap(a, b)
    if dz <= 0.0:
        return 0.0
    fa, fb = footprint_of(a), footprint_of(b)
    if footprints_separated(fa, fb):
        return 0.0
    return _clip_area_ccw(fa, fb) * dz


# ── Point and ring predicates ────────────────────────────────────────────────

def point_in_polygon(pt: Sequence[float], polygon: Sequence[Point2]) -> bool:
    """Strict interior test; points on an edge are outside."""
    return Polygon(polygon).contains(Point(pt[0], pt[1]))


def points_in_polygon(xy: np.ndarray, polygon: Sequence[Point2]) -> np.ndarray:
    """Vectorised interior test for an (N, 2) array of points."""
    return shapely.contains_xy(Polygon(polygon), xy[:, 0], xy[:, 1])


def is_simple(points: Sequence[Sequence[float]]) -> bool:
    """No self-intersections, no zero-length edges, no edge doubling back."""
    pts = [(float(p[0]), float(p[1])) for p in points]
    n = len(pts)
    if n < 3:
        return False
    if any(math.dist(pts[i], pts[(i + 1) % n]) <= EPS for i in range(n)):
        return False
    return LinearRing(pts).is_simple


# ── Rectilinear decomposition ────────────────────────────────────────────────

@dataclass(frozen=True)
class Rect:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def as_polygon(self) -> Polygon2D:
        return ((self.x_min, self.y_min), (self.x_max, self.y_min),
                (self.x_max, self.y_max), (self.x_min, self.y_max))


RectSet = List[Rect]


def is_rectilinear(polygon: Sequence[Point2], eps: float = EPS) -> bool:
    n = len(polygon)
    for i in range(n):
        x1, y1 = polygon[i][0], polygon[i][1]
        x2, y2 = polygon[(i + 1) % n][0], polygon[(i + 1) % n][1]
        if abs(x2 - x1) > eps and abs(y2 - y1) > eps:
            return False
    return True


def _slab_intervals(poly: Polygon2D, y: float) -> List[Tuple[float, float]]:
    xs = []
    n = len(poly)
    for i in range(n):
        (x1, y1), (x2, y2) = poly[i], poly[(i + 1) % n]
        if abs(x2 - x1) <= EPS and min(y1, y2) < y < max(y1, y2):
            xs.append(x1)
    xs.sort()
    return [(xs[k], xs[k + 1]) for k in range(0, len(xs) - 1, 2)]


def _intersect_intervals(a, b) -> List[Tuple[float, float]]:
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        lo, hi = max(a[i][0], b[j][0]), min(a[i][1], b[j][1])
        if hi - lo > EPS:
            out.append((lo, hi))
        if a[i][1] < b[j][1]:
            i += 1
        else:
            j += 1
    return out


def _covered(iv, slab) -> bool:
    return any(lo - EPS <= iv[0] and iv[1] <= hi + EPS for lo, hi in slab)


def maximal_rectangles(p: Sequence[Point2]) -> RectSet:
    """
    Plane sweep over the polygon's distinct y-levels. For every run of slabs
    the x-intervals common to all of them give contained rectangles; those
    that cannot grow by one more slab above or below are maximal.
    """
    poly = ensure_ccw(p)
    polygon_area(poly)
    if not is_rectilinear(poly):
        raise NotRectilinear("boundary has an edge that is not axis-parallel")
    ys: List[float] = []
    for y in sorted(v[1] for v in poly):
        if not ys or y - ys[-1] > EPS:
            ys.append(y)
    slabs = [_slab_intervals(poly, 0.5 * (ys[k] + ys[k + 1])) for k in range(len(ys) - 1)]

    found = set()
    for i in range(len(slabs)):
        common = slabs[i]
        for j in range(i + 1, len(ys)):
            if j > i + 1:
                common = _intersect_intervals(common, slabs[j - 1])
            if not common:
                break
            for iv in common:
                if i > 0 and _covered(iv, slabs[i - 1]):
                    continue
                if j < len(slabs) and _covered(iv, slabs[j]):
                    continue
                found.add(Rect(iv[0], ys[i], iv[1], ys[j]))
    return sorted(found, key=lambda r: (r.y_min, r.x_min, r.y_max, r.x_max))


def rect_union_cells(rects: Sequence[Rect]) -> RectSet:
    """Disjoint rectangles whose union equals the union of `rects`."""
    xs = sorted({r.x_min for r in rects} | {r.x_max for r in rects})
    ys = sorted({r.y_min for r in rects} | {r.y_max for r in rects})
    cells: RectSet = []
    for y0, y1 in zip(ys, ys[1:]):
        cy = 0.5 * (y0 + y1)
        run_start = None
        for x0, x1 in zip(xs, xs[1:]):
            cx = 0.5 * (x0 + x1)
            covered = any(r.x_min < cx < r.x_max and r.y_min < cy < r.y_max for r in rects)
            if covered and run_start is None:
                run_start = x0
            elif not covered and run_start is not None:
                cells.append(Rect(run_start, y0, x0, y1))
                run_start = None
        if run_start is not None:
            cells.append(Rect(run_start, y0, xs[-1], y1))
    return cells


class BoundaryIndex:
    """
    A floor polygon prepared for repeated containment queries.

    method "rects" measures containment against the union of maximal
    rectangles (rectilinear floors only), "clip" against the ear-clipped
    triangulation, "auto" picks "rects" whenever the floor is rectilinear.
    """

    def __init__(self, polygon: Sequence[Sequence[float]], method: str = "auto"):
        self.polygon = ensure_ccw(polygon)
        self.area = polygon_area(self.polygon)
        self.rectilinear = is_rectilinear(self.polygon)
        if method == "auto":
            method = "rects" if self.rectilinear else "clip"
        if method == "rects":
            self.rects: RectSet = maximal_rectangles(self.polygon)
            self.pieces: Tuple[Polygon2D, ...] = tuple(c.as_polygon() for c in rect_union_cells(self.rects))
        elif method == "clip":
            self.rects = []
            self.pieces = triangulate(self.polygon)
        else:
            raise ValueError(f"unknown containment method {method!r}")
        self.method = method
        self._piece_boxes = [bbox(p) for p in self.pieces]

    def inside_area(self, convex: Sequence[Point2]) -> float:
        box = bbox(convex)
        total = 0.0
        for piece, piece_box in zip(self.pieces, self._piece_boxes):
            if _boxes_disjoint(box, piece_box):
                continue
            total += _clip_area_ccw(convex, piece)
        return total

    def outside_area(self, convex: Sequence[Point2]) -> float:
        """Area of a convex CCW polygon lying outside the floor."""
        if len(convex) < 3:
            return 0.0
        out = abs(signed_area(convex)) - self.inside_area(convex)
        return out if out > ZERO_AREA else 0.0


# ── Monte-Carlo oracle ───────────────────────────────────────────────────────

def monte_carlo_clip_area(subject: Sequence[Point2], clip: Sequence[Point2],
                          n: int = 100_000, seed: int = 0) -> Tuple[float, float]:
    """
    Estimate area(subject ∩ clip) by stratified jittered sampling over the
    subject's bounding box. Returns (estimate, standard error); the error is
    the i.i.d. binomial bound, which overstates the stratified error.
    """
    rng = np.random.default_rng(seed)
    x0, y0, x1, y1 = bbox(subject)
    k = max(1, int(math.ceil(math.sqrt(n))))
    gx, gy = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
    u = (gx.ravel() + rng.random(k * k)) / k
    v = (gy.ravel() + rng.random(k * k)) / k
    xy = np.column_stack([x0 + u * (x1 - x0), y0 + v * (y1 - y0)])
    hits = points_in_polygon(xy, ensure_ccw(subject)) & points_in_polygon(xy, ensure_ccw(clip))
    total = k * k
    box_area = (x1 - x0) * (y1 - y0)
    p = float(hits.mean())
    stderr = box_area * math.sqrt(max(p * (1.0 - p), 1.0 / total) / total)
    return box_area * p, stderr
