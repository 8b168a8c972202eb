"""
Layer 3: Reward Engine
Format, boundary, zone-disentanglement and collision terms of the staged
layout reward, and their composite R = r_fmt + r_bound + r_zone + r_col.

The geometric terms are penalties (≤ 0) weighted by lambda1..3; r_fmt is a
flat bonus for output that parses and validates without errors.
"""
import json
import logging
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, FrozenSet, List, Optional, Set, Tuple, Union

from layers.errors import ConfigError, ZoneKitError
from layers.geom_kernel import (
    EMPTY_HULL,
    BoundaryIndex,
    ZoneHull,
    box_intersection_volume,
    convex_hull,
    convex_iou,
    footprint_of,
)
from layers.scene_model import (
    STACKING_RELATIONS,
    Scene,
    ValidationReport,
    read_scene,
    validate,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RewardConfig:
    lambda1: float = 1.0   # boundary
    lambda2: float = 0.5   # zone
    lambda3: float = 2.0   # collision
    fmt_reward: float = 1.0
    ordered_zone_pairs: bool = False

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RewardConfig":
        allowed = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - allowed)
        if unknown:
            raise ConfigError(f"unknown reward config keys: {', '.join(unknown)}")
        values: Dict[str, Any] = {}
        for key, value in data.items():
            if key == "ordered_zone_pairs":
                if not isinstance(value, bool):
                    raise ConfigError("ordered_zone_pairs must be true or false")
            elif isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{key} must be a number")
            else:
                value = float(value)
            values[key] = value
        return cls(**values)

    @classmethod
    def from_json(cls, path: str) -> "RewardConfig":
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read reward config {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"reward config {path} must hold a JSON object")
        return cls.from_dict(data)


@dataclass(frozen=True)
class RewardBreakdown:
    r_fmt: float = 0.0
    r_bound: float = 0.0
    r_zone: float = 0.0
    r_col: float = 0.0

    @property
    def total(self) -> float:
        return self.r_fmt + self.r_bound + self.r_zone + self.r_col

    @property
    def geometric(self) -> float:
        return self.r_bound + self.r_zone + self.r_col

    def to_dict(self) -> Dict[str, float]:
        d = asdict(self)
        d["total"] = self.total
        return d


# ── Helpers ──────────────────────────────────────────────────────────────────

def boundary_index(scene: Scene, method: str = "auto") -> BoundaryIndex:
    return BoundaryIndex(scene.floor_polygon(), method)


def zone_hulls(scene: Scene) -> List[ZoneHull]:
    """Convex hull of every zone's footprint corners, in zone order."""
    hulls = []
    for zone in scene.functional_zones:
        corners = [c for a in zone.assets for c in footprint_of(a)]
        hulls.append(convex_hull(corners) if corners else EMPTY_HULL)
    return hulls


def support_pairs(scene: Scene) -> Set[FrozenSet[str]]:
    """Unordered asset pairs linked by a stacking relation (exempt from collision)."""
    pairs = set()
    for zone in scene.functional_zones:
        for e in zone.spatial_graph:
            if e.relation in STACKING_RELATIONS and e.source != e.target:
                pairs.add(frozenset((e.source, e.target)))
    return pairs


def collision_pairs(scene: Scene) -> List[Tuple[str, str, float]]:
    """(id_a, id_b, volume) for every non-exempt overlapping pair."""
    assets = scene.all_assets()
    exempt = support_pairs(scene)
    out = []
    for i in range(len(assets)):
        for j in range(i + 1, len(assets)):
            a, b = assets[i], assets[j]
            if frozenset((a.id, b.id)) in exempt:
                continue
            vol = box_intersection_volume(a, b)
            if vol > 0.0:
                out.append((a.id, b.id, vol))
    return out


def zone_penalty(hulls: List[ZoneHull], index: BoundaryIndex, ordered_pairs: bool = False) -> float:
    """Unweighted zone term: pairwise hull IoU plus hull area outside the floor."""
    overlap = 0.0
    for i in range(len(hulls)):
        for j in range(i + 1, len(hulls)):
            overlap += convex_iou(hulls[i], hulls[j])
    if ordered_pairs:
        overlap *= 2.0
    spill = sum(index.outside_area(h) for h in hulls if h)
    return overlap + spill


# ── Terms ────────────────────────────────────────────────────────────────────

def r_bound(scene: Scene, cfg: RewardConfig, method: str = "auto",
            index: Optional[BoundaryIndex] = None) -> float:
    """-lambda1 * footprint area outside the boundary, summed over assets."""
    index = index or boundary_index(scene, method)
    outside = sum(index.outside_area(footprint_of(a)) for a in scene.all_assets())
    return -cfg.lambda1 * outside if outside else 0.0


def r_zone(scene: Scene, cfg: RewardConfig, index: Optional[BoundaryIndex] = None) -> float:
    index = index or boundary_index(scene)
    penalty = zone_penalty(zone_hulls(scene), index, cfg.ordered_zone_pairs)
    return -cfg.lambda2 * penalty if penalty else 0.0


def r_col(scene: Scene, cfg: RewardConfig) -> float:
    volume = sum(v for _, _, v in collision_pairs(scene))
    return -cfg.lambda3 * volume if volume else 0.0


def r_fmt(outcome: Union[ValidationReport, BaseException], cfg: RewardConfig) -> float:
    if isinstance(outcome, ValidationReport) and outcome.ok:
        return cfg.fmt_reward
    return 0.0


def geometric_terms(scene: Scene, cfg: RewardConfig, method: str = "auto") -> Tuple[float, float, float]:
    index = boundary_index(scene, method)
    return r_bound(scene, cfg, index=index), r_zone(scene, cfg, index=index), r_col(scene, cfg)


def composite_reward(text_or_scene: Union[str, Scene], cfg: Optional[RewardConfig] = None) -> RewardBreakdown:
    """
    Score raw model text or a parsed scene. Text that cannot be extracted or
    parsed scores all zeros; a scene that parses but fails validation keeps
    its geometric terms and loses r_fmt.
    """
    cfg = cfg or RewardConfig()
    if isinstance(text_or_scene, Scene):
        scene = text_or_scene
    else:
        try:
            scene = read_scene(text_or_scene)
        except ZoneKitError as e:
            logger.debug("unparseable layout: %s", e)
            return RewardBreakdown()

    report = validate(scene)
    fmt = r_fmt(report, cfg)
    if any(v.code.startswith("BOUNDARY_") for v in report.violations):
        return RewardBreakdown(r_fmt=fmt)
    try:
        bound, zone, col = geometric_terms(scene, cfg)
    except ZoneKitError as e:
        # degenerate boundary: nothing geometric can be measured
        logger.debug("geometry skipped: %s", e)
        bound = zone = col = 0.0
    return RewardBreakdown(r_fmt=fmt, r_bound=bound, r_zone=zone, r_col=col)
