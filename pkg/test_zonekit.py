"""
Orchestrator tests: group scoring for GRPO and the step callbacks fired by
score, repair and report.
"""
import os

import pytest

from conftest import DATA_DIR, asset, make_scene, rect, zone
from layers.errors import LengthMismatch
from layers.grpo_core import grpo_objective
from layers.reward_engine import composite_reward
from layers.scene_model import parse_scene, serialize
from zonekit import ZoneKit


@pytest.fixture
def kit(monkeypatch):
    for name in ("ZONEKIT_CONFIG", "ZONEKIT_DENOISE_CONFIG", "ZONEKIT_JOBS"):
        monkeypatch.delenv(name, raising=False)
    return ZoneKit(jobs=1)


class Recorder:
    def __init__(self):
        self.calls = []

    def __call__(self, name, data):
        self.calls.append((name, data))

    @property
    def names(self):
        return [name for name, _ in self.calls]


def half_out_text():
    return serialize(make_scene(rect(4, 4), [zone("zone_a", [asset("a", (4.0, 2.0, 0.5), role="zone_anchor")])]))


# ── score_group ──────────────────────────────────────────────────────────────

def test_score_group_rewards_match_composite(kit, bedroom_text):
    texts = [bedroom_text, "no layout", half_out_text(), bedroom_text]
    group = kit.score_group(texts)
    assert group.rewards == pytest.approx([composite_reward(t).total for t in texts])
    assert group.rewards[0] == 1.0
    assert group.rewards[1] == 0.0
    assert sum(group.advantages) == pytest.approx(0.0, abs=1e-9)
    assert group.advantages[0] == group.advantages[3] > 0
    assert group.advantages[1] < 0


def test_score_group_feeds_the_objective(kit, bedroom_text):
    texts = [bedroom_text, "no layout"]
    group = kit.score_group(texts, ratios=[1.0, 1.0], kl_estimates=[0.0, 0.0])
    assert grpo_objective(group, kit.grpo_cfg) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(LengthMismatch):
        kit.score_group(texts, ratios=[1.0])


# ── Step callbacks ───────────────────────────────────────────────────────────

def test_score_steps(kit, bedroom_text):
    rec = Recorder()
    result = kit.score(bedroom_text, step_callback=rec)
    assert rec.names == ["parse", "reward", "metrics"]
    assert rec.calls[0][1] == {"parsed": True, "assets": 5}
    assert rec.calls[1][1]["total"] == result["total"]
    assert rec.calls[2][1]["cnt"] == result["cnt"]


def test_score_steps_on_garbage(kit):
    rec = Recorder()
    result = kit.score("the model wrote a poem", step_callback=rec)
    assert rec.names == ["parse"]
    assert rec.calls[0][1]["parsed"] is False
    assert rec.calls[0][1]["error"] == result["error"]


def test_repair_step(kit, cubes_text):
    rec = Recorder()
    out, trace = kit.repair(parse_scene(cubes_text), seed=7, iters=2000, step_callback=rec)
    assert rec.names == ["denoise"]
    data = rec.calls[0][1]
    assert data["accepted"] == len(trace.steps)
    assert data["final"] == trace.final.to_dict()
    assert data["final"]["total"] == pytest.approx(composite_reward(out).total)


def test_report_step(kit, tmp_path):
    junk = tmp_path / "junk.txt"
    junk.write_text("nothing", encoding="utf-8")
    rec = Recorder()
    report = kit.report([os.path.join(DATA_DIR, "scenes", "bedroom.json"), str(junk)], step_callback=rec)
    assert rec.names == ["report"]
    assert rec.calls[0][1] == report.to_summary()
    assert rec.calls[0][1]["succ_rate"] == 0.5


def test_failing_callback_does_not_break_scoring(kit, bedroom_text):
    def explode(name, data):
        raise RuntimeError(name)

    assert kit.score(bedroom_text, step_callback=explode)["total"] == 1.0
