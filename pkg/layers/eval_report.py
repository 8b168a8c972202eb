"""
Layer 7: Evaluation Report
Physical-validity metrics per scene (out-of-bounds volume, collision volume,
asset count) and corpus aggregation with the generation success rate.

A corpus input counts as a success when its text extracts, parses and
validates without error-level violations; means are taken over successes only.
"""
import csv
import io
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from layers.errors import EmptyCorpus, ZoneKitError, describe
from layers.geom_kernel import BoundaryIndex, footprint_of
from layers.reward_engine import collision_pairs
from layers.scene_model import Scene, read_scene, validate

logger = logging.getLogger(__name__)

JUDGE_COLUMNS = ("aes", "real", "str", "geo", "sem", "func")
CSV_COLUMNS = ("id", "parsed", "oob", "col", "cnt")


@dataclass(frozen=True)
class SceneMetrics:
    oob_volume: float
    collision_volume: float
    asset_count: int
    oob_assets: int = 0
    collision_pairs: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "oob": self.oob_volume,
            "col": self.collision_volume,
            "cnt": self.asset_count,
            "oob_assets": self.oob_assets,
            "collision_pairs": self.collision_pairs,
        }


def scene_metrics(scene: Scene, index: Optional[BoundaryIndex] = None) -> SceneMetrics:
    """OOB = outside footprint area x asset height; Col = summed non-exempt pair volumes."""
    index = index or BoundaryIndex(scene.floor_polygon())
    assets = scene.all_assets()
    oob = 0.0
    oob_assets = 0
    for a in assets:
        outside = index.outside_area(footprint_of(a))
        if outside > 0.0:
            oob += outside * a.size[1]
            oob_assets += 1
    pairs = collision_pairs(scene)
    return SceneMetrics(
        oob_volume=oob,
        collision_volume=sum(v for _, _, v in pairs),
        asset_count=len(assets),
        oob_assets=oob_assets,
        collision_pairs=len(pairs),
    )


# ── Corpus ───────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class ReportRow:
    id: str
    parsed: bool
    metrics: Optional[SceneMetrics] = None
    error: Optional[str] = None
    judge: Dict[str, float] = field(default_factory=dict)


def score_input(item: Tuple[str, Union[str, bytes]]) -> ReportRow:
    input_id, text = item
    try:
        if isinstance(text, bytes):
            text = text.decode("utf-8")
        scene = read_scene(text)
        report = validate(scene)
        if not report.ok:
            first = report.violations[0]
            return ReportRow(input_id, False, error=f"{first.code} {first.path}")
        return ReportRow(input_id, True, metrics=scene_metrics(scene))
    except (ZoneKitError, UnicodeDecodeError) as e:
        return ReportRow(input_id, False, error=describe(e))


def _mean(values: List[float]) -> Optional[float]:
    return sum(values) / len(values) if values else None


@dataclass(frozen=True)
class CorpusReport:
    n_inputs: int
    n_parsed: int
    succ_rate: float
    mean_oob: Optional[float]
    mean_col: Optional[float]
    mean_cnt: Optional[float]
    rows: Tuple[ReportRow, ...]

    @classmethod
    def from_rows(cls, rows: Iterable[ReportRow]) -> "CorpusReport":
        rows = tuple(sorted(rows, key=lambda r: r.id))
        if not rows:
            raise EmptyCorpus("no inputs to report on")
        ok = [r.metrics for r in rows if r.parsed and r.metrics is not None]
        return cls(
            n_inputs=len(rows),
            n_parsed=len(ok),
            succ_rate=len(ok) / len(rows),
            mean_oob=_mean([m.oob_volume for m in ok]),
            mean_col=_mean([m.collision_volume for m in ok]),
            mean_cnt=_mean([float(m.asset_count) for m in ok]),
            rows=rows,
        )

    def judge_columns(self) -> List[str]:
        present = {k for r in self.rows for k in r.judge}
        return [c for c in JUDGE_COLUMNS if c in present]

    def to_csv(self) -> str:
        extra = self.judge_columns()
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(list(CSV_COLUMNS) + extra)
        for r in self.rows:
            m = r.metrics if r.parsed else None
            row = [
                r.id,
                "true" if r.parsed else "false",
                f"{m.oob_volume:.6f}" if m else "",
                f"{m.collision_volume:.6f}" if m else "",
                str(m.asset_count) if m else "",
            ]
            row += [f"{r.judge[c]:.6f}" if c in r.judge else "" for c in extra]
            writer.writerow(row)
        return buf.getvalue()

    def to_summary(self) -> Dict[str, Any]:
        summary: Dict[str, Any] = {
            "n_inputs": self.n_inputs,
            "n_parsed": self.n_parsed,
            "succ_rate": self.succ_rate,
            "mean_oob": self.mean_oob,
            "mean_col": self.mean_col,
            "mean_cnt": self.mean_cnt,
        }
        for c in self.judge_columns():
            summary[f"mean_{c}"] = _mean([r.judge[c] for r in self.rows if c in r.judge])
        summary["failures"] = [{"id": r.id, "error": r.error} for r in self.rows if not r.parsed]
        return summary


def corpus_report(inputs: Sequence[Tuple[str, Union[str, bytes]]], jobs: int = 1,
                  judge_scores: Optional[Mapping[str, Mapping[str, float]]] = None) -> CorpusReport:
    """
    Score (id, text) pairs. jobs > 1 fans scoring out to worker processes;
    aggregation runs after a sort by id, so results do not depend on jobs.
    """
    if not inputs:
        raise EmptyCorpus("no inputs to report on")
    items = list(inputs)
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(score_input, items))
    else:
        rows = [score_input(item) for item in items]

    if judge_scores:
        unknown = {k for scores in judge_scores.values() for k in scores} - set(JUDGE_COLUMNS)
        if unknown:
            raise ZoneKitError(f"unknown judge columns: {', '.join(sorted(unknown))}")
        rows = [
            ReportRow(r.id, r.parsed, r.metrics, r.error, dict(judge_scores.get(r.id, {})))
            for r in rows
        ]
    report = CorpusReport.from_rows(rows)
    logger.info("Scored %d inputs: %d succeeded (%.1f%%)", report.n_inputs, report.n_parsed,
                100.0 * report.succ_rate)
    return report


def merge_reports(a: CorpusReport, b: CorpusReport) -> CorpusReport:
    """Concatenate two corpora; means become count-weighted."""
    return CorpusReport.from_rows(a.rows + b.rows)


def load_inputs(paths: Sequence[str]) -> List[Tuple[str, Union[str, bytes]]]:
    """
    Read files as (id, text); the id is the file name without directory.
    Files that are not valid UTF-8 keep their raw bytes and score as failures.
    """
    items: List[Tuple[str, Union[str, bytes]]] = []
    for path in paths:
        with open(path, "rb") as f:
            raw = f.read()
        try:
            items.append((os.path.basename(path), raw.decode("utf-8")))
        except UnicodeDecodeError:
            logger.warning("%s is not valid UTF-8", path)
            items.append((os.path.basename(path), raw))
    return items
