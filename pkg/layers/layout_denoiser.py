"""
Layer 5: Layout Denoiser (reward-driven geometric repair)

Simulated annealing over per-asset planar poses (x, y, yaw) that maximises
r_bound + r_zone + r_col. Zone membership, sizes, heights and every graph
edge stay fixed. The scorer is incremental: a move touches one asset, so
only that asset's outside area, its collision pairs and its zone's hull are
recomputed.
"""
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from layers.errors import ConfigError, EmptyScene
from layers.geom_kernel import (
    EMPTY_HULL,
    BoundaryIndex,
    box_intersection_volume,
    convex_hull,
    convex_iou,
    footprint_of,
)
from layers.reward_engine import RewardBreakdown, RewardConfig, composite_reward, support_pairs
from layers.scene_model import Asset, IntraZoneRelation, Scene, StructureType

logger = logging.getLogger(__name__)

TERM_EPS = 1e-9       # a geometric term above -TERM_EPS counts as satisfied
FLUSH_DRIFT = 0.1     # m
TRANSLATE_PROB = 0.7  # otherwise the move is a rotation


@dataclass(frozen=True)
class DenoiseConfig:
    seed: int = 7
    max_iters: int = 20000
    init_temp: float = 0.02
    cooling: float = 0.95
    cooling_interval: int = 100
    move_sigma_pos: float = 0.25
    move_sigma_rot: float = 0.1
    rot_snap: Optional[Tuple[float, ...]] = None
    min_temp: float = 1e-4

    def __post_init__(self):
        if self.max_iters <= 0:
            raise ConfigError("max_iters must be > 0")
        if self.move_sigma_pos <= 0 or self.move_sigma_rot <= 0:
            raise ConfigError("move sigmas must be > 0")
        if not 0.0 < self.cooling < 1.0:
            raise ConfigError(f"cooling must lie in (0, 1), got {self.cooling}")
        if self.init_temp <= 0 or self.cooling_interval <= 0:
            raise ConfigError("init_temp and cooling_interval must be > 0")
        if self.rot_snap is not None and not self.rot_snap:
            raise ConfigError("rot_snap must list at least one yaw")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DenoiseConfig":
        allowed = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - allowed)
        if unknown:
            raise ConfigError(f"unknown denoise config keys: {', '.join(unknown)}")
        values = dict(data)
        try:
            for key in ("seed", "max_iters", "cooling_interval"):
                if key in values:
                    values[key] = int(values[key])
            for key in ("init_temp", "cooling", "move_sigma_pos", "move_sigma_rot", "min_temp"):
                if key in values:
                    values[key] = float(values[key])
            if values.get("rot_snap") is not None:
                values["rot_snap"] = tuple(float(v) for v in values["rot_snap"])
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad denoise config value: {e}") from e
        return cls(**values)

    @classmethod
    def from_json(cls, path: str) -> "DenoiseConfig":
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read denoise config {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"denoise config {path} must hold a JSON object")
        return cls.from_dict(data)


@dataclass(frozen=True)
class TraceStep:
    iter: int
    asset_id: str
    old_total: float
    new_total: float
    phase: str
    best_total: float


@dataclass
class DenoiseTrace:
    steps: List[TraceStep]
    final: RewardBreakdown
    iterations: int = 0
    seed: int = 0
    flags: List[Dict[str, Any]] = field(default_factory=list)

    def to_jsonl(self) -> str:
        lines = [json.dumps(asdict(s)) for s in self.steps]
        lines.append(json.dumps({
            "final": self.final.to_dict(),
            "iterations": self.iterations,
            "seed": self.seed,
            "flags": self.flags,
        }))
        return "\n".join(lines) + "\n"


# ── Moves ────────────────────────────────────────────────────────────────────

def _draw_move(assets: Sequence[Asset], rng: np.random.Generator, cfg: DenoiseConfig) -> Tuple[int, Asset]:
    k = int(rng.integers(len(assets)))
    a = assets[k]
    x, y, z = a.pos
    rx, ry, rz = a.rot
    if rng.random() < TRANSLATE_PROB:
        dx, dy = rng.normal(0.0, cfg.move_sigma_pos, size=2)
        return k, replace(a, pos=(x + float(dx), y + float(dy), z))
    if cfg.rot_snap:
        yaw = float(cfg.rot_snap[int(rng.integers(len(cfg.rot_snap)))])
    else:
        yaw = rz + float(rng.normal(0.0, cfg.move_sigma_rot))
    return k, replace(a, rot=(rx, ry, yaw))


def propose_move(scene: Scene, rng: np.random.Generator, cfg: Optional[DenoiseConfig] = None) -> Scene:
    """Perturb one uniformly chosen asset's planar position or yaw."""
    cfg = cfg or DenoiseConfig()
    assets = scene.all_assets()
    if not assets:
        raise EmptyScene("scene has no assets to move")
    _, moved = _draw_move(assets, rng, cfg)
    return scene.with_assets({moved.id: moved})


# ── Incremental scorer ───────────────────────────────────────────────────────

class LayoutDenoiser:
    def __init__(self, scene: Scene, reward_cfg: Optional[RewardConfig] = None,
                 cfg: Optional[DenoiseConfig] = None):
        self.scene = scene
        self.reward_cfg = reward_cfg or RewardConfig()
        self.cfg = cfg or DenoiseConfig()
        self.assets: List[Asset] = scene.all_assets()
        if not self.assets:
            raise EmptyScene("scene has no assets to move")
        self.index = BoundaryIndex(scene.floor_polygon())

        self.zone_members: List[List[int]] = []
        self.zone_of: List[int] = []
        for zi, zone in enumerate(scene.functional_zones):
            start = len(self.zone_of)
            self.zone_members.append(list(range(start, start + len(zone.assets))))
            self.zone_of.extend([zi] * len(zone.assets))

        n = len(self.assets)
        exempt = support_pairs(scene)
        ids = [a.id for a in self.assets]
        self.pair_keys = [(i, j) for i in range(n) for j in range(i + 1, n)
                          if frozenset((ids[i], ids[j])) not in exempt]
        self.pairs_of: List[List[Tuple[int, int]]] = [[] for _ in range(n)]
        for key in self.pair_keys:
            self.pairs_of[key[0]].append(key)
            self.pairs_of[key[1]].append(key)
        nz = len(self.zone_members)
        self.zone_pair_keys = [(a, b) for a in range(nz) for b in range(a + 1, nz)]
        self.zone_pairs_of: List[List[Tuple[int, int]]] = [[] for _ in range(nz)]
        for key in self.zone_pair_keys:
            self.zone_pairs_of[key[0]].append(key)
            self.zone_pairs_of[key[1]].append(key)

        self.footprints = [footprint_of(a) for a in self.assets]
        self.outside = [self.index.outside_area(f) for f in self.footprints]
        self.pair_vol = {key: box_intersection_volume(self.assets[key[0]], self.assets[key[1]])
                         for key in self.pair_keys}
        self.hulls = [self._hull(zi) for zi in range(nz)]
        self.spill = [self.index.outside_area(h) if h else 0.0 for h in self.hulls]
        self.iou = {key: convex_iou(self.hulls[key[0]], self.hulls[key[1]]) for key in self.zone_pair_keys}

    def _hull(self, zi: int):
        members = self.zone_members[zi]
        if not members:
            return EMPTY_HULL
        return convex_hull([c for i in members for c in self.footprints[i]])

    def terms(self) -> Tuple[float, float, float]:
        c = self.reward_cfg
        outside = sum(self.outside)
        volume = sum(self.pair_vol.values())
        overlap = sum(self.iou.values())
        if c.ordered_zone_pairs:
            overlap *= 2.0
        zone = overlap + sum(self.spill)
        return (
            -c.lambda1 * outside if outside else 0.0,
            -c.lambda2 * zone if zone else 0.0,
            -c.lambda3 * volume if volume else 0.0,
        )

    def _apply(self, k: int, asset: Asset) -> tuple:
        zi = self.zone_of[k]
        saved = (
            self.assets[k], self.footprints[k], self.outside[k],
            {key: self.pair_vol[key] for key in self.pairs_of[k]},
            self.hulls[zi], self.spill[zi],
            {key: self.iou[key] for key in self.zone_pairs_of[zi]},
        )
        self.assets[k] = asset
        self.footprints[k] = footprint_of(asset)
        self.outside[k] = self.index.outside_area(self.footprints[k])
        for key in self.pairs_of[k]:
            self.pair_vol[key] = box_intersection_volume(self.assets[key[0]], self.assets[key[1]])
        hull = self._hull(zi)
        self.hulls[zi] = hull
        self.spill[zi] = self.index.outside_area(hull) if hull else 0.0
        for key in self.zone_pairs_of[zi]:
            self.iou[key] = convex_iou(self.hulls[key[0]], self.hulls[key[1]])
        return saved

    def _restore(self, k: int, saved: tuple) -> None:
        zi = self.zone_of[k]
        self.assets[k], self.footprints[k], self.outside[k], pairs, self.hulls[zi], self.spill[zi], ious = saved
        self.pair_vol.update(pairs)
        self.iou.update(ious)

    def run(self) -> Tuple[Scene, DenoiseTrace]:
        cfg = self.cfg
        terms = self.terms()
        if all(t >= -TERM_EPS for t in terms):
            logger.info("Layout already satisfies all geometric terms; nothing to repair")
            return self.scene, DenoiseTrace(steps=[], final=composite_reward(self.scene, self.reward_cfg),
                                            iterations=0, seed=cfg.seed)

        logger.info("Denoising %d assets (seed %d, max %d iterations)", len(self.assets), cfg.seed, cfg.max_iters)
        rng = np.random.default_rng(cfg.seed)
        temp = cfg.init_temp
        current = sum(terms)
        best_total = current
        best_assets = list(self.assets)
        steps: List[TraceStep] = []
        iterations = 0

        for it in range(1, cfg.max_iters + 1):
            iterations = it
            phase = "anneal" if temp >= cfg.min_temp else "greedy"
            k, candidate = _draw_move(self.assets, rng, cfg)
            saved = self._apply(k, candidate)
            new_terms = self.terms()
            new_total = sum(new_terms)
            delta = new_total - current
            if delta >= 0:
                accept = True
            elif phase == "anneal":
                accept = rng.random() < math.exp(delta / temp)
            else:
                accept = False

            if accept:
                if new_total > best_total:
                    best_total = new_total
                    best_assets = list(self.assets)
                    logger.debug("iter %d: best total %.6f", it, best_total)
                steps.append(TraceStep(it, candidate.id, current, new_total, phase, best_total))
                current = new_total
                if all(t >= -TERM_EPS for t in new_terms):
                    break
            else:
                self._restore(k, saved)
            if it % cfg.cooling_interval == 0:
                temp *= cfg.cooling

        out = self.scene.with_assets({a.id: a for a in best_assets})
        final = composite_reward(out, self.reward_cfg)
        logger.info("Denoise finished after %d iterations: %d accepted, best geometric total %.6f",
                    iterations, len(steps), final.geometric)
        trace = DenoiseTrace(steps=steps, final=final, iterations=iterations, seed=cfg.seed,
                             flags=flush_drift_flags(self.scene, out))
        return out, trace


def denoise(scene: Scene, reward_cfg: Optional[RewardConfig] = None,
            cfg: Optional[DenoiseConfig] = None) -> Tuple[Scene, DenoiseTrace]:
    return LayoutDenoiser(scene, reward_cfg, cfg).run()


# ── Relation drift flags ─────────────────────────────────────────────────────

def _point_segment_distance(p, a, b) -> float:
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    length2 = dx * dx + dy * dy
    if length2 == 0.0:
        return math.hypot(p[0] - ax, p[1] - ay)
    t = max(0.0, min(1.0, ((p[0] - ax) * dx + (p[1] - ay) * dy) / length2))
    return math.hypot(p[0] - (ax + t * dx), p[1] - (ay + t * dy))


def flush_drift_flags(before: Scene, after: Scene) -> List[Dict[str, Any]]:
    """aligned_flush sources that moved and now sit more than FLUSH_DRIFT from their wall."""
    walls = {n.id: n for n in after.architecture.structure_nodes
             if n.type == StructureType.WALL and n.segment is not None}
    old = {a.id: a for a in before.all_assets()}
    new = {a.id: a for a in after.all_assets()}
    flags = []
    for zone in after.functional_zones:
        for edge in zone.spatial_graph:
            if edge.relation != IntraZoneRelation.ALIGNED_FLUSH:
                continue
            asset, wall = new.get(edge.source), walls.get(edge.target)
            if asset is None or wall is None or asset == old.get(edge.source):
                continue
            gap = min(_point_segment_distance(c, *wall.segment) for c in footprint_of(asset))
            if gap > FLUSH_DRIFT:
                flags.append({"asset_id": asset.id, "wall_id": wall.id, "gap": round(gap, 6)})
    return flags
