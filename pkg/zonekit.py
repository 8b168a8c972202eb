"""
ZoneKit - Orchestrator
Connects the scene-engine layers into one object used by the CLI and tests.
"""
import logging
import os
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from dotenv import load_dotenv

from layers.boundary_forge import ShapeSpec, boundary_stub, generate_boundary
from layers.errors import ConfigError, ZoneKitError, describe
from layers.eval_report import CorpusReport, corpus_report, load_inputs, scene_metrics
from layers.grpo_core import GrpoConfig, SampleGroup, batch_objective, group_stats, grpo_objective, load_groups
from layers.layout_denoiser import DenoiseConfig, DenoiseTrace, denoise
from layers.reward_engine import RewardConfig, composite_reward
from layers.scene_model import (
    DEFAULT_HEIGHT,
    Scene,
    ValidationReport,
    extract_answer,
    extract_think,
    parse_scene,
    revision_count,
    validate,
)
from layers.svg_render import render_svg

logger = logging.getLogger(__name__)

StepCallback = Callable[[str, Dict[str, Any]], None]


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {raw!r}") from None


class ZoneKit:
    def __init__(self, config_path: Optional[str] = None, denoise_config_path: Optional[str] = None,
                 jobs: Optional[int] = None, grpo_cfg: Optional[GrpoConfig] = None):
        load_dotenv()

        config_path = config_path or os.getenv("ZONEKIT_CONFIG") or None
        denoise_config_path = denoise_config_path or os.getenv("ZONEKIT_DENOISE_CONFIG") or None
        self.jobs = jobs if jobs is not None else _env_int("ZONEKIT_JOBS", os.cpu_count() or 1)
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")

        logger.info("Initializing Layer 1: Scene Model...")
        logger.info("Initializing Layer 2: Geometry Kernel...")

        logger.info("Initializing Layer 3: Reward Engine...")
        self.reward_cfg = RewardConfig.from_json(config_path) if config_path else RewardConfig()
        if config_path:
            logger.info("Reward config loaded from %s", config_path)

        logger.info("Initializing Layer 4: GRPO Core...")
        self.grpo_cfg = grpo_cfg or GrpoConfig()

        logger.info("Initializing Layer 5: Layout Denoiser...")
        self.denoise_cfg = DenoiseConfig.from_json(denoise_config_path) if denoise_config_path else DenoiseConfig()

        logger.info("Initializing Layer 6: Boundary Forge...")
        logger.info("Initializing Layer 7: Evaluation Report...")
        logger.info("ZoneKit initialized (jobs=%d)", self.jobs)

    @staticmethod
    def _step(step_callback: Optional[StepCallback], name: str, data: Dict[str, Any]) -> None:
        if step_callback:
            try:
                step_callback(name, data)
            except Exception:
                logger.debug("step callback failed for %s", name, exc_info=True)

    # ── Single scenes ────────────────────────────────────────────────────────

    def load(self, text: str) -> Scene:
        return parse_scene(extract_answer(text))

    def check(self, text: str) -> Tuple[Scene, ValidationReport]:
        scene = self.load(text)
        return scene, validate(scene)

    def score(self, text: str, step_callback: Optional[StepCallback] = None) -> Dict[str, Any]:
        """
        Reward breakdown plus physical-validity metrics for raw text or JSON.

        Returns:
            {r_fmt, r_bound, r_zone, r_col, total, oob, col, cnt, parsed, revisions}
        """
        breakdown = composite_reward(text, self.reward_cfg)
        result: Dict[str, Any] = breakdown.to_dict()
        result.update({"oob": None, "col": None, "cnt": None, "parsed": False})
        result["revisions"] = revision_count(extract_think(text))
        try:
            scene = self.load(text)
        except ZoneKitError as e:
            result["error"] = describe(e)
            self._step(step_callback, "parse", {"parsed": False, "error": result["error"]})
            return result
        result["parsed"] = True
        self._step(step_callback, "parse", {"parsed": True, "assets": len(scene.all_assets())})
        self._step(step_callback, "reward", breakdown.to_dict())
        try:
            metrics = scene_metrics(scene)
            result.update({"oob": metrics.oob_volume, "col": metrics.collision_volume, "cnt": metrics.asset_count})
            self._step(step_callback, "metrics", metrics.to_dict())
        except ZoneKitError as e:
            result["cnt"] = len(scene.all_assets())
            result["error"] = describe(e)
        return result

    def repair(self, scene: Scene, seed: Optional[int] = None, iters: Optional[int] = None,
               step_callback: Optional[StepCallback] = None) -> Tuple[Scene, DenoiseTrace]:
        cfg = self.denoise_cfg
        overrides: Dict[str, Any] = {}
        if seed is not None:
            overrides["seed"] = seed
        if iters is not None:
            overrides["max_iters"] = iters
        if overrides:
            cfg = DenoiseConfig.from_dict({**cfg.__dict__, **overrides})
        out, trace = denoise(scene, self.reward_cfg, cfg)
        self._step(step_callback, "denoise", {"accepted": len(trace.steps), "final": trace.final.to_dict()})
        return out, trace

    def boundary(self, shape: str, seed: int = 0, dims: Optional[Mapping[str, float]] = None,
                 height: Optional[float] = None) -> Scene:
        polygon = generate_boundary(ShapeSpec(shape=shape, dims=dict(dims or {}), seed=seed))
        return boundary_stub(polygon, height=DEFAULT_HEIGHT if height is None else height,
                             scene_type=f"{shape}_room")

    def render(self, scene: Scene, path: str) -> None:
        render_svg(scene, path)

    # ── Corpora and groups ───────────────────────────────────────────────────

    def report(self, paths: Sequence[str], judge_scores: Optional[Mapping[str, Mapping[str, float]]] = None,
               step_callback: Optional[StepCallback] = None) -> CorpusReport:
        items = load_inputs(paths)
        report = corpus_report(items, jobs=self.jobs, judge_scores=judge_scores)
        self._step(step_callback, "report", report.to_summary())
        return report

    def score_group(self, texts: Sequence[str], ratios: Optional[Sequence[float]] = None,
                    kl_estimates: Optional[Sequence[float]] = None) -> SampleGroup:
        """Composite reward for each sampled output, normalised within the group."""
        rewards = [composite_reward(t, self.reward_cfg).total for t in texts]
        return SampleGroup.from_rewards(rewards, self.grpo_cfg, ratios, kl_estimates)

    def grpo(self, path: str) -> Dict[str, Any]:
        groups = load_groups(path, self.grpo_cfg)
        rows: List[Dict[str, Any]] = []
        complete = []
        for g in groups:
            row = {"stats": group_stats(g.rewards), "advantages": g.advantages, "objective": None}
            if g.ratios is not None and g.kl_estimates is not None:
                row["objective"] = grpo_objective(g, self.grpo_cfg)
                complete.append(g)
            rows.append(row)
        return {
            "groups": rows,
            "batch_objective": batch_objective(complete, self.grpo_cfg) if complete else None,
            "clip_eps": self.grpo_cfg.clip_eps,
            "beta": self.grpo_cfg.beta,
        }
