"""Command-line front end.

Subcommands: ``generate`` (scene documents), ``replay`` (headless log
evaluation), ``agent`` (ideal-operator logs), ``schedule`` (counterbalanced
participant plans), ``analyze`` (statistics over trial results).

Exit codes: 0 ok, 1 domain error, 2 usage or schema error, 3 incomplete
trial, 4 internal invariant breach.  All outputs are deterministic given
the flags and input files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from primo import analysis, study
from primo.geometry import Aabb, Vec3
from primo.navigation import Display, NavConfig, Style, octant_colors
from primo.object_model import (
    DefectRegion,
    LatticeSpec,
    TriangleMesh,
    generate_lattice,
    place_defects,
    rods_for_target,
)

SCHEMA_VERSION = 1


class SchemaError(Exception):
    """Input file failed schema or format validation."""


def _dump(obj) -> str:
    return json.dumps(obj, separators=(",", ":"))


def _write_text(path: str, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def _config_to_json(config: NavConfig) -> Dict:
    return {
        "style": config.style.value,
        "display": config.display.value,
        "max_depth": config.max_depth,
        "scale_factor": config.scale_factor,
        "animation_ms": config.animation_ms,
    }


def _config_from_json(doc: Dict) -> NavConfig:
    try:
        return NavConfig(
            style=Style(doc["style"]),
            display=Display(doc["display"]),
            max_depth=int(doc["max_depth"]),
            scale_factor=float(doc["scale_factor"]),
            animation_ms=float(doc["animation_ms"]),
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"bad nav config: {exc}") from exc


def build_scene(
    seed: int,
    depth: int,
    n_defects: int,
    lattice: LatticeSpec,
    config: NavConfig,
    target_index: int,
) -> Dict:
    """Assemble the self-contained scene document the viewer consumes."""
    mesh = generate_lattice(lattice)
    defects = place_defects(seed, depth, n_defects)
    if not 0 <= target_index < len(defects):
        raise ValueError(f"target index {target_index} out of range")
    rods = rods_for_target(defects[target_index].center)
    return {
        "primo_schema": SCHEMA_VERSION,
        "kind": "scene",
        "seed": seed,
        "config": _config_to_json(config),
        "lattice": {
            "cells_per_axis": lattice.cells_per_axis,
            "strut_thickness": lattice.strut_thickness,
            "pattern": lattice.pattern,
        },
        "object": {
            "vertices": mesh.vertices.tolist(),
            "triangles": mesh.triangles.tolist(),
        },
        "defects": [
            {
                "id": d.id,
                "center": list(d.center),
                "radius": d.radius,
                "cell_path": list(d.cell_path),
            }
            for d in defects
        ],
        "target_index": target_index,
        "rods": [{"axis": r.axis, "through": list(r.through)} for r in rods],
        "octant_palette": [list(octant_colors()[i]) for i in range(8)],
    }


def load_scene(path: str) -> Tuple[TriangleMesh, List[DefectRegion], DefectRegion, NavConfig, Dict]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise SchemaError(f"cannot read scene: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"scene is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("primo_schema") != SCHEMA_VERSION:
        raise SchemaError("scene missing primo_schema version 1")
    if doc.get("kind") != "scene":
        raise SchemaError(f"expected a scene document, got {doc.get('kind')!r}")
    try:
        mesh = TriangleMesh(
            np.asarray(doc["object"]["vertices"], dtype=np.float64),
            np.asarray(doc["object"]["triangles"], dtype=np.int64),
        )
        defects = [
            DefectRegion(
                id=int(d["id"]),
                center=Vec3(*(float(c) for c in d["center"])),
                radius=float(d["radius"]),
                cell_path=tuple(int(b) for b in d["cell_path"]),
            )
            for d in doc["defects"]
        ]
        target = defects[int(doc["target_index"])]
        config = _config_from_json(doc["config"])
    except (KeyError, IndexError, TypeError) as exc:
        raise SchemaError(f"malformed scene document: {exc}") from exc
    return mesh, defects, target, config, doc


def cmd_generate(args: argparse.Namespace) -> int:
    lattice = LatticeSpec(
        cells_per_axis=args.lattice_cells,
        strut_thickness=args.strut_thickness,
        pattern=args.pattern,
    )
    config = NavConfig(
        style=Style(args.style),
        display=Display(args.display),
        max_depth=args.depth,
        scale_factor=args.scale_factor,
        animation_ms=args.animation_ms,
    )
    scene = build_scene(args.seed, args.depth, args.defects, lattice, config, args.target)
    _write_text(args.out, _dump(scene) + "\n")
    print(args.out)
    return 0


def _metrics_json(outcome: study.ReplayOutcome) -> Dict:
    m = outcome.metrics
    focus = outcome.final_state.focus
    return {
        "clipping_ms": None if m is None else m.clipping_ms,
        "navigation_ms": None if m is None else m.navigation_ms,
        "total_ms": None if m is None else m.total_ms,
        "rejections": outcome.rejections,
        "completed": outcome.completed,
        "final_depth": outcome.final_state.depth,
        "final_scale": outcome.final_state.transform.scale,
        "final_focus": [list(focus.lo), list(focus.hi)],
    }


def cmd_replay(args: argparse.Namespace) -> int:
    mesh, defects, target, config, _ = load_scene(args.scene)
    try:
        text = Path(args.log).read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read log: {exc}") from exc
    events = study.parse_event_log(text)
    outcome = study.replay_events(mesh, defects, target, events, config)
    if args.annotated_out:
        _write_text(args.annotated_out, study.serialize_events(outcome.annotated))
    print(_dump(_metrics_json(outcome)))
    return 0 if outcome.completed else 3


def cmd_agent(args: argparse.Namespace) -> int:
    mesh, defects, target, config, _ = load_scene(args.scene)
    try:
        events = study.oracle_agent_log(mesh, defects, target, config)
        outcome = study.replay_events(mesh, defects, target, events, config)
        if not outcome.completed:
            raise RuntimeError("agent log did not complete the trial")
    except RuntimeError as exc:
        raise RuntimeError(f"agent failed on a valid scene: {exc}") from exc
    _write_text(args.out, study.serialize_events(events))
    counts = {"aim": 0, "confirm": 0, "ascend": 0, "clip": 0, "tick": 0}
    for ev in events:
        if ev.e in counts:
            counts[ev.e] += 1
    report = {
        "aims": counts["aim"],
        "confirms": counts["confirm"],
        "ascends": counts["ascend"],
        "clips": counts["clip"],
        "ticks": counts["tick"],
        "log": args.out,
    }
    report.update(_metrics_json(outcome))
    print(_dump(report))
    return 0


def cmd_schedule(args: argparse.Namespace) -> int:
    if args.n <= 0 or args.n % 4 != 0:
        print(f"error: --n must be a positive multiple of 4, got {args.n}", file=sys.stderr)
        return 2
    schedules = study.build_schedule(args.n)
    doc: Dict = {
        "primo_schema": SCHEMA_VERSION,
        "kind": "schedule",
        "n": args.n,
        "participants": [
            {
                "participant": s.participant,
                "group": s.participant % 4,
                "condition_order": [
                    {"display": c.display.value, "style": c.style.value}
                    for c in s.condition_order
                ],
            }
            for s in schedules
        ],
    }
    if args.trials:
        for entry, sched in zip(doc["participants"], schedules):
            trials = study.build_trials(sched, args.master_seed)
            entry["trials"] = [
                {
                    "object_seed": t.object_seed,
                    "display": t.condition.display.value,
                    "style": t.condition.style.value,
                    "defect_index": t.defect_index,
                    "measure": t.measure.value,
                    "phase": t.phase.value,
                }
                for t in trials
            ]
    _write_text(args.out, _dump(doc) + "\n")
    print(args.out)
    return 0


def _load_trial_results(directory: str) -> List[Dict]:
    root = Path(directory)
    if not root.is_dir():
        raise SchemaError(f"not a directory: {directory}")
    rows = []
    for path in sorted(root.glob("*.json")):
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaError(f"{path.name}: {exc}") from exc
        if not isinstance(doc, dict) or doc.get("primo_schema") != SCHEMA_VERSION:
            raise SchemaError(f"{path.name}: missing primo_schema version 1")
        if doc.get("kind") != "trial_result":
            raise SchemaError(f"{path.name}: expected kind trial_result")
        rows.append(doc)
    if not rows:
        raise SchemaError(f"no trial_result documents in {directory}")
    return rows


def _effect_json(e: analysis.EffectResult) -> Dict:
    return {
        "ss": e.ss,
        "df": list(e.df),
        "F": e.F,
        "p": e.p,
        "eta_p_sq": e.eta_p_sq,
    }


def _analyze_measure(rows: List[Dict], value_key: str) -> Dict:
    samples = [
        analysis.SampleRow(
            display=str(r["display"]),
            style=str(r["style"]),
            value=float(r[value_key]),
            participant=int(r.get("participant", 0)),
        )
        for r in rows
    ]
    result = analysis.anova_2x2(samples)
    cells = {}
    for (d, s), stat in sorted(result.cells.items()):
        cells[f"{d}/{s}"] = {
            "mean": stat.mean,
            "sd": None if stat.n == 1 else stat.sd,
            "n": stat.n,
        }
    return {
        "value": value_key,
        "cells": cells,
        "anova": {
            "display": _effect_json(result.display),
            "style": _effect_json(result.style),
            "interaction": _effect_json(result.interaction),
            "ss_error": result.ss_error,
            "ss_total": result.ss_total,
            "grand_mean": result.grand_mean,
        },
    }


def _text_table(report: Dict) -> str:
    lines = []
    for measure, block in report["measures"].items():
        lines.append(f"== {measure} ({block['value']}) ==")
        lines.append(f"{'cell':<28}{'mean':>14}{'sd':>14}{'n':>6}")
        for cell, stat in block["cells"].items():
            sd = "n/a" if stat["sd"] is None else f"{stat['sd']:.2f}"
            lines.append(f"{cell:<28}{stat['mean']:>14.2f}{sd:>14}{stat['n']:>6}")
        for effect in ("display", "style", "interaction"):
            e = block["anova"][effect]
            lines.append(
                f"{effect:<16}F({e['df'][0]},{e['df'][1]}) = {e['F']:.3f}  "
                f"p = {e['p']:.4f}  eta_p_sq = {e['eta_p_sq']:.3f}"
            )
        lines.append("")
    return "\n".join(lines)


def cmd_analyze(args: argparse.Namespace) -> int:
    try:
        rows = _load_trial_results(args.results)
    except SchemaError:
        raise
    main_rows = [r for r in rows if r.get("phase", "MAIN") == "MAIN"]
    report: Dict = {"primo_schema": SCHEMA_VERSION, "kind": "report", "measures": {}}
    by_measure: Dict[str, List[Dict]] = {}
    for r in main_rows:
        by_measure.setdefault(str(r.get("measure", "TIME")), []).append(r)
    try:
        if "TIME" in by_measure:
            report["measures"]["TIME"] = _analyze_measure(by_measure["TIME"], "total_ms")
        if "AWARENESS" in by_measure:
            aw = [dict(r, correct=1.0 if r["correct"] else 0.0) for r in by_measure["AWARENESS"]]
            report["measures"]["AWARENESS"] = _analyze_measure(aw, "correct")
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"trial results missing fields: {exc}") from exc
    if args.out:
        _write_text(args.out, _dump(report) + "\n")
    if args.text:
        print(_text_table(report))
    else:
        print(_dump(report))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="primo",
        description="Progressive-refinement inspection toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a deterministic scene document")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--depth", type=int, default=3)
    g.add_argument("--defects", type=int, default=4)
    g.add_argument("--lattice-cells", type=int, default=4)
    g.add_argument("--strut-thickness", type=float, default=0.05)
    g.add_argument("--pattern", choices=["grid-struts", "gyroid-approx"], default="grid-struts")
    g.add_argument("--style", choices=[s.value for s in Style], default=Style.STRUCTURED.value)
    g.add_argument("--display", choices=[d.value for d in Display], default=Display.EVERYTHING.value)
    g.add_argument("--scale-factor", type=float, default=2.0)
    g.add_argument("--animation-ms", type=float, default=500.0)
    g.add_argument("--target", type=int, default=0, help="index into the defect list")
    g.add_argument("-o", "--out", default="scene.json")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("replay", help="evaluate an event log against a scene")
    r.add_argument("scene")
    r.add_argument("log")
    r.add_argument("--annotated-out", help="write the log with gate/reveal annotations")
    r.set_defaults(func=cmd_replay)

    a = sub.add_parser("agent", help="synthesize an ideal-operator log")
    a.add_argument("scene")
    a.add_argument("-o", "--out", default="agent_log.jsonl")
    a.set_defaults(func=cmd_agent)

    s = sub.add_parser("schedule", help="counterbalanced participant plan")
    s.add_argument("--n", type=int, required=True, help="participant count, multiple of 4")
    s.add_argument("--master-seed", default="primo-study")
    s.add_argument("--trials", action="store_true", help="include per-participant trial lists")
    s.add_argument("-o", "--out", default="schedule.json")
    s.set_defaults(func=cmd_schedule)

    z = sub.add_parser("analyze", help="statistics over a directory of trial results")
    z.add_argument("results", help="directory of trial_result JSON files")
    z.add_argument("--text", action="store_true", help="print a plain-text table")
    z.add_argument("-o", "--out", help="also write the report JSON to a file")
    z.set_defaults(func=cmd_analyze)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except study.ReplayError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
