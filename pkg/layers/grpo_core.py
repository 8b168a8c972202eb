"""
Layer 4: GRPO Core (group-relative policy optimisation math)
Advantage normalisation over a sampling group and the clipped, KL-regularised
surrogate objective. Pure numerics on numpy arrays; no model involved.
"""
import json
import logging
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from layers.errors import (
    ConfigError,
    GroupTooSmall,
    LengthMismatch,
    MissingKl,
    MissingRatios,
    ZoneKitError,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GrpoConfig:
    clip_eps: float = 0.2
    beta: float = 0.04
    std_floor: float = 1e-8

    def __post_init__(self):
        if not 0.0 < self.clip_eps < 1.0:
            raise ConfigError(f"clip_eps must lie in (0, 1), got {self.clip_eps}")
        if self.beta < 0:
            raise ConfigError(f"beta must be >= 0, got {self.beta}")
        if self.std_floor <= 0:
            raise ConfigError("std_floor must be > 0")


def _as_array(values: Sequence[float]) -> np.ndarray:
    return np.asarray(list(values), dtype=np.float64)


def group_stats(rewards: Sequence[float]) -> Dict[str, float]:
    r = _as_array(rewards)
    if r.size == 0:
        raise GroupTooSmall("empty group")
    return {
        "mean": float(r.mean()),
        "std": float(r.std()),
        "min": float(r.min()),
        "max": float(r.max()),
        "size": int(r.size),
    }


def group_advantages(rewards: Sequence[float], cfg: Optional[GrpoConfig] = None) -> List[float]:
    """
    A_i = (R_i - mean) / std with the population std (ddof=0).
    Groups whose std falls below cfg.std_floor get all-zero advantages.
    """
    cfg = cfg or GrpoConfig()
    r = _as_array(rewards)
    if r.size < 2:
        raise GroupTooSmall(f"group of {r.size}, need at least 2")
    scale = float(np.max(np.abs(r)))
    if scale == 0.0:
        return [0.0] * int(r.size)
    # work on r / max|r| so sums of huge finite rewards cannot overflow
    unit = r / scale
    centered = unit - unit.mean()
    std = float(np.sqrt(np.mean(centered * centered)))
    if std * scale < cfg.std_floor or std == 0.0:
        return [0.0] * int(r.size)
    return (centered / std).tolist()


def clipped_surrogate(ratios: Sequence[float], advantages: Sequence[float],
                      cfg: Optional[GrpoConfig] = None) -> float:
    """(1/G) * sum(min(r_i * A_i, clip(r_i, 1-eps, 1+eps) * A_i))."""
    cfg = cfg or GrpoConfig()
    r, a = _as_array(ratios), _as_array(advantages)
    if r.shape != a.shape:
        raise LengthMismatch(f"{r.size} ratios vs {a.size} advantages")
    if r.size == 0:
        raise GroupTooSmall("empty group")
    clipped = np.clip(r, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps)
    return float(np.mean(np.minimum(r * a, clipped * a)))


def importance_ratios(new_logprobs: Sequence[float], old_logprobs: Sequence[float]) -> List[float]:
    """r_i = exp(log pi_new - log pi_old) per sample."""
    new, old = _as_array(new_logprobs), _as_array(old_logprobs)
    if new.shape != old.shape:
        raise LengthMismatch(f"{new.size} new vs {old.size} old log-probabilities")
    return np.exp(new - old).tolist()


@dataclass(frozen=True)
class SampleGroup:
    rewards: List[float]
    advantages: List[float]
    ratios: Optional[List[float]] = None
    kl_estimates: Optional[List[float]] = None

    @classmethod
    def from_rewards(cls, rewards: Sequence[float], cfg: Optional[GrpoConfig] = None,
                     ratios: Optional[Sequence[float]] = None,
                     kl_estimates: Optional[Sequence[float]] = None) -> "SampleGroup":
        rewards = [float(x) for x in rewards]
        for name, values in (("ratios", ratios), ("kl", kl_estimates)):
            if values is not None and len(values) != len(rewards):
                raise LengthMismatch(f"{len(values)} {name} for {len(rewards)} rewards")
        return cls(
            rewards=rewards,
            advantages=group_advantages(rewards, cfg),
            ratios=None if ratios is None else [float(x) for x in ratios],
            kl_estimates=None if kl_estimates is None else [float(x) for x in kl_estimates],
        )

    @classmethod
    def from_record(cls, record: Dict[str, Any], cfg: Optional[GrpoConfig] = None) -> "SampleGroup":
        if "rewards" not in record:
            raise ZoneKitError("group record has no rewards")
        return cls.from_rewards(record["rewards"], cfg, record.get("ratios"), record.get("kl"))

    def to_dict(self) -> Dict[str, Any]:
        d: Dict[str, Any] = {"rewards": self.rewards, "advantages": self.advantages}
        if self.ratios is not None:
            d["ratios"] = self.ratios
        if self.kl_estimates is not None:
            d["kl"] = self.kl_estimates
        return d


def grpo_objective(group: SampleGroup, cfg: Optional[GrpoConfig] = None) -> float:
    """Clipped surrogate minus beta times the mean per-sample KL estimate."""
    cfg = cfg or GrpoConfig()
    if group.ratios is None:
        raise MissingRatios("group has no importance ratios")
    if group.kl_estimates is None:
        raise MissingKl("group has no KL estimates")
    surrogate = clipped_surrogate(group.ratios, group.advantages, cfg)
    return surrogate - cfg.beta * float(np.mean(_as_array(group.kl_estimates)))


def batch_objective(groups: Iterable[SampleGroup], cfg: Optional[GrpoConfig] = None) -> float:
    """Mean objective over groups (one group per instruction)."""
    values = [grpo_objective(g, cfg) for g in groups]
    if not values:
        raise GroupTooSmall("no groups in batch")
    return float(np.mean(values))


def load_groups(path: str, cfg: Optional[GrpoConfig] = None) -> List[SampleGroup]:
    """One JSON object per line: {"rewards": [...], "ratios": [...], "kl": [...]}."""
    groups = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise ZoneKitError(f"{path}:{lineno}: {e.msg}") from None
            groups.append(SampleGroup.from_record(record, cfg))
    logger.info("Loaded %d groups from %s", len(groups), path)
    return groups
