import argparse
import glob
import json
import logging
import os
import sys
from dataclasses import dataclass
from typing import Any, List, Optional, Sequence

from dotenv import load_dotenv

from layers.boundary_forge import parse_dims
from layers.errors import ConfigError, NoAnswerFound, SceneParseError, ZoneKitError, describe
from layers.grpo_core import GrpoConfig
from layers.scene_model import serialize, validate
from zonekit import ZoneKit

logger = logging.getLogger("zonekit")

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_ENV = 2


@dataclass
class CliConfig:
    config_path: Optional[str] = None
    denoise_config_path: Optional[str] = None
    out_dir: Optional[str] = None
    verbosity: int = 0

    def check(self) -> None:
        for path in (self.config_path, self.denoise_config_path):
            if path and not os.path.isfile(path):
                raise ConfigError(f"config file not found: {path}")
        if self.out_dir:
            os.makedirs(self.out_dir, exist_ok=True)

    def output_path(self, explicit: Optional[str], default_name: str) -> str:
        path = explicit or default_name
        if self.out_dir and not os.path.isabs(path):
            path = os.path.join(self.out_dir, path)
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        return path


def _emit(payload: Any) -> None:
    print(json.dumps(payload, indent=2, ensure_ascii=False))


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as f:
        return f.read()


def _stem(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


# ── Commands ─────────────────────────────────────────────────────────────────

def cmd_validate(kit: ZoneKit, cli: CliConfig, args) -> int:
    _, report = kit.check(_read(args.input))
    for v in report.violations:
        print(v.line())
    for w in report.warnings:
        logger.warning("%s", w.line())
    return EXIT_OK if report.ok else EXIT_VIOLATION


def cmd_score(kit: ZoneKit, cli: CliConfig, args) -> int:
    _emit(kit.score(_read(args.input)))
    return EXIT_OK


def cmd_denoise(kit: ZoneKit, cli: CliConfig, args) -> int:
    scene = kit.load(_read(args.input))
    out_path = cli.output_path(args.out, f"{_stem(args.input)}.denoised.json")
    out, trace = kit.repair(scene, seed=args.seed, iters=args.iters)
    trace_path = os.path.splitext(out_path)[0] + ".trace.jsonl"
    with open(out_path, "w", encoding="utf-8") as f:
        f.write(serialize(out) + "\n")
    with open(trace_path, "w", encoding="utf-8") as f:
        f.write(trace.to_jsonl())
    _emit({
        "out": out_path,
        "trace": trace_path,
        "accepted": len(trace.steps),
        "iterations": trace.iterations,
        "final": trace.final.to_dict(),
        "flags": trace.flags,
    })
    return EXIT_OK


def cmd_gen_boundary(kit: ZoneKit, cli: CliConfig, args) -> int:
    scene = kit.boundary(args.shape, seed=args.seed, dims=parse_dims(args.dims), height=args.height)
    text = serialize(scene)
    if args.out:
        path = cli.output_path(args.out, args.out)
        with open(path, "w", encoding="utf-8") as f:
            f.write(text + "\n")
        logger.info("Boundary stub written to %s", path)
    else:
        print(text)
    return EXIT_OK


def _expand(patterns: Sequence[str]) -> List[str]:
    paths: List[str] = []
    for pattern in patterns:
        matches = sorted(glob.glob(pattern))
        if not matches and os.path.exists(pattern):
            matches = [pattern]
        if not matches:
            raise FileNotFoundError(f"no input matches {pattern}")
        paths.extend(matches)
    return paths


def cmd_report(kit: ZoneKit, cli: CliConfig, args) -> int:
    judge = json.loads(_read(args.judge)) if args.judge else None
    report = kit.report(_expand(args.inputs), judge_scores=judge)
    csv_path = cli.output_path(args.out_csv, "report.csv")
    with open(csv_path, "w", encoding="utf-8", newline="") as f:
        f.write(report.to_csv())
    summary = report.to_summary()
    summary["csv"] = csv_path
    _emit(summary)
    return EXIT_OK


def cmd_render(kit: ZoneKit, cli: CliConfig, args) -> int:
    scene = kit.load(_read(args.input))
    path = cli.output_path(args.out, f"{_stem(args.input)}.svg")
    kit.render(scene, path)
    _emit({"out": path, "assets": len(scene.all_assets()), "ok": validate(scene).ok})
    return EXIT_OK


def cmd_grpo(kit: ZoneKit, cli: CliConfig, args) -> int:
    _emit(kit.grpo(args.groups))
    return EXIT_OK


# ── Parser ───────────────────────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zonekit", description="Zone-Graph scene engine CLI")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="Only warnings and errors")
    parser.add_argument("--config", help="Reward config JSON (default: $ZONEKIT_CONFIG)")
    parser.add_argument("--denoise-config", help="Denoise config JSON (default: $ZONEKIT_DENOISE_CONFIG)")
    parser.add_argument("--out-dir", help="Directory for output files")
    parser.add_argument("--jobs", type=int, help="Worker processes for report (default: $ZONEKIT_JOBS or cores)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="Validate a scene (raw model text or JSON)")
    p.add_argument("input")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("score", help="Reward breakdown and validity metrics as JSON")
    p.add_argument("input")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("denoise", help="Repair asset poses by simulated annealing")
    p.add_argument("input")
    p.add_argument("--seed", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("gen-boundary", help="Boundary-only scene stub for a room shape")
    p.add_argument("--shape", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dims", help="k=v,k=v overrides of the shape defaults")
    p.add_argument("--height", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_boundary)

    p = sub.add_parser("report", help="Corpus metrics as CSV + JSON summary")
    p.add_argument("inputs", nargs="+", help="Files or glob patterns")
    p.add_argument("--out-csv")
    p.add_argument("--judge", help="JSON map of id -> judge scores")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("render", help="Top-down SVG floor plan")
    p.add_argument("input")
    p.add_argument("--out")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("grpo", help="Advantages and objective for JSON-lines groups")
    p.add_argument("groups")
    p.add_argument("--clip-eps", type=float, default=0.2)
    p.add_argument("--beta", type=float, default=0.04)
    p.set_defaults(func=cmd_grpo)
    return parser


def _configure_logging(args) -> None:
    level = os.getenv("ZONEKIT_LOG_LEVEL", "INFO").upper()
    if args.verbose:
        level = "DEBUG"
    elif args.quiet:
        level = "WARNING"
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    _configure_logging(args)
    cli = CliConfig(
        config_path=args.config,
        denoise_config_path=args.denoise_config,
        out_dir=args.out_dir,
        verbosity=1 if args.verbose else (-1 if args.quiet else 0),
    )
    try:
        cli.check()
        grpo_cfg = None
        if args.command == "grpo":
            grpo_cfg = GrpoConfig(clip_eps=args.clip_eps, beta=args.beta)
        kit = ZoneKit(cli.config_path, cli.denoise_config_path, jobs=args.jobs, grpo_cfg=grpo_cfg)
        return args.func(kit, cli, args)
    except (ConfigError, SceneParseError, NoAnswerFound) as e:
        print(f"error: {describe(e)}", file=sys.stderr)
        return EXIT_ENV
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
        print(f"error: {describe(e)}", file=sys.stderr)
        return EXIT_ENV
    except ZoneKitError as e:
        print(f"error: {describe(e)}", file=sys.stderr)
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
