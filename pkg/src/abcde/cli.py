"""Command-line pipeline: stage commands over a run directory plus `serve`.

Typical flow:

    abcde impact --dataset data.jsonl --run runs/change1
    abcde sample-items --run runs/change1 --n 100000 --seed 7
    abcde sample-pairs --run runs/change1 --n 5000 --seed 7
    abcde export-tasks --run runs/change1 --budget 500
    abcde import-judgements --run runs/change1 verdicts.jsonl
    abcde quality --run runs/change1
    abcde serve --run runs/change1 --port 8080
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from pathlib import Path

from .errors import AbcdeError
from .runs import (
    Run,
    stage_export_tasks,
    stage_impact,
    stage_import_judgements,
    stage_quality,
    stage_sample_items,
    stage_sample_pairs,
)


def _open_run(args) -> Run:
    if getattr(args, "dataset", None):
        return Run.init(args.run, args.dataset)
    run = Run(args.run)
    run.manifest()  # fail early with a clear message
    return run


def cmd_impact(args) -> int:
    run = _open_run(args)
    report = stage_impact(run, top_n=args.top_n)
    if args.out:
        shutil.copyfile(run.path_of("impact"), args.out)
    overall = report["overall"]
    print(
        "impact: split_rate={split_rate:.6g} merge_rate={merge_rate:.6g} "
        "jaccard_distance={jaccard_distance:.6g}".format(**overall)
    )
    print(
        f"affected: {report['affected_count']} items, "
        f"{report['affected_weight_fraction']:.6g} of total weight"
    )
    print(f"wrote {run.path_of('impact')}")
    return 0


def cmd_sample_items(args) -> int:
    run = _open_run(args)
    sample = stage_sample_items(run, args.n, args.seed)
    kind = "exhaustive" if sample.exhaustive else "randomized"
    print(f"sampled {len(sample)} unique items ({kind}) -> {run.path_of('item_sample')}")
    return 0


def cmd_sample_pairs(args) -> int:
    run = _open_run(args)
    sample = stage_sample_pairs(run, args.n, args.seed)
    note = " (population exhausted)" if sample.truncated else ""
    print(f"sampled {len(sample)} unique pairs{note} -> {run.path_of('pair_sample')}")
    return 0


def cmd_export_tasks(args) -> int:
    run = _open_run(args)
    result = stage_export_tasks(run, args.budget)
    if args.out:
        shutil.copyfile(run.path_of("tasks"), args.out)
    filled = "filled" if result.budget_filled else "not filled (sample exhausted)"
    print(
        f"exported {len(result.tasks)} tasks (budget {args.budget}, {filled}); "
        f"{len(result.sample)} pairs retained for estimation"
    )
    return 0


def cmd_import_judgements(args) -> int:
    run = _open_run(args)
    stats = stage_import_judgements(run, args.file)
    print(
        f"imported {stats['imported']} judgements "
        f"({stats['unknown_tasks']} unknown tasks skipped); "
        f"log now has {stats['log_length']} entries"
    )
    return 0


def cmd_quality(args) -> int:
    run = _open_run(args)
    report = stage_quality(run)
    if args.out:
        shutil.copyfile(run.path_of("quality"), args.out)
    delta = report["delta_precision"]
    se = delta["std_err"]
    se_text = f"{se:.6g}" if se is not None else "n/a"
    print(f"delta_precision: {delta['estimate']:.6g} (std_err {se_text})")
    for rate in ("good_split", "bad_split", "good_merge", "bad_merge"):
        entry = report[rate]
        if entry is None:
            print(f"{rate}: unavailable")
        else:
            print(f"{rate}: {entry['estimate']:.6g}")
    print(f"wrote {run.path_of('quality')}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    Run(args.run).manifest()  # fail early if this is not a run directory
    ui_dir = args.ui
    if ui_dir is None:
        candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        ui_dir = candidate if candidate.is_dir() else None
    app = create_app(args.run, ui_dir=ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abcde",
        description="Impact and quality evaluation for a clustering change.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("impact", help="compute the exact impact report")
    p.add_argument("--dataset", help="dataset file (initializes the run)")
    p.add_argument("--run", required=True, help="run directory")
    p.add_argument("--out", help="also copy the report to this path")
    p.add_argument("--top-n", type=int, default=100, help="most-affected list size")
    p.set_defaults(func=cmd_impact)

    p = sub.add_parser("sample-items", help="importance-sample items for exploration")
    p.add_argument("--dataset", help="dataset file (initializes the run)")
    p.add_argument("--run", required=True)
    p.add_argument("--n", type=int, required=True, help="unique items to sample")
    p.add_argument("--seed", type=int, help="sampling seed (recorded in the run)")
    p.set_defaults(func=cmd_sample_items)

    p = sub.add_parser("sample-pairs", help="sample pairs for judgement")
    p.add_argument("--dataset", help="dataset file (initializes the run)")
    p.add_argument("--run", required=True)
    p.add_argument("--n", type=int, required=True, help="unique pairs to sample")
    p.add_argument("--seed", type=int, help="sampling seed (recorded in the run)")
    p.set_defaults(func=cmd_sample_pairs)

    p = sub.add_parser("export-tasks", help="export blinded judgement tasks")
    p.add_argument("--run", required=True)
    p.add_argument("--budget", type=int, required=True, help="judgement budget")
    p.add_argument("--out", help="also copy the tasks file to this path")
    p.set_defaults(func=cmd_export_tasks)

    p = sub.add_parser("import-judgements", help="append verdicts from a JSONL file")
    p.add_argument("--run", required=True)
    p.add_argument("file", help="JSONL of {task_id, verdict}")
    p.set_defaults(func=cmd_import_judgements)

    p = sub.add_parser("quality", help="estimate quality metrics from judgements")
    p.add_argument("--run", required=True)
    p.add_argument("--out", help="also copy the report to this path")
    p.set_defaults(func=cmd_quality)

    p = sub.add_parser("serve", help="serve the exploration / judgement API")
    p.add_argument("--run", required=True)
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui", help="directory of built UI assets to serve at /")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AbcdeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
