"""Command-line entry points: prepare, build, run, evaluate, render-images."""

from __future__ import annotations

import argparse
import json
import subprocess
import sys
from pathlib import Path

from . import dataset as ds
from . import evaluate as ev
from .decouple import load_corpus
from .llm import load_provider
from .serialize import FORMAT_ALIASES
from .transform import transform_corpus, transformed_to_record


def _parse_formats(text: str):
    return [FORMAT_ALIASES[part.strip()] for part in text.split(",") if part.strip()]


def cmd_prepare(args) -> int:
    problems = load_corpus(args.corpus)
    provider = load_provider(args.provider)
    entries, failures = transform_corpus(problems, provider,
                                         max_rounds=args.max_rounds)
    ds.write_transformed_corpus(args.out, entries)
    if failures:
        print(f"{len(failures)} problems failed:", file=sys.stderr)
        for failure in failures:
            print(f"  {failure}", file=sys.stderr)
    kept = [e for e in entries if e.validation.ok]
    print(f"prepared {len(kept)}/{len(problems)} problems -> {args.out}")
    return 0 if kept else 1


def cmd_build(args) -> int:
    corpus = ds.load_transformed_corpus(args.corpus)
    if args.recipe:
        recipe = ds.load_recipe(args.recipe)
    else:
        recipe = ds.default_recipes(args.master_seed)[args.subset]
    if args.formats:
        recipe.formats = _parse_formats(args.formats)
    if args.slots is not None:
        recipe.slots = args.slots
    instances, manifest = ds.build_subset(corpus, recipe)
    dataset_path, manifest_path = ds.write_dataset(args.out, recipe,
                                                   instances, manifest)
    if args.probes:
        probes = ds.build_probes(instances)
        lines = [json.dumps(ds.probe_to_record(p), ensure_ascii=False)
                 for p in probes]
        probe_path = Path(args.out) / f"{recipe.name}.probes.jsonl"
        ds.atomic_write(probe_path, "\n".join(lines) + ("\n" if lines else ""))
        print(f"wrote {len(probes)} probes -> {probe_path}")
    print(f"wrote {len(instances)} instances -> {dataset_path}")
    print(f"manifest -> {manifest_path}")
    return 0


def cmd_run(args) -> int:
    instances = ds.load_instances(args.dataset)
    provider = load_provider(args.provider)
    result = ev.run_model(instances, provider, variant=args.variant)
    ev.write_transcripts(args.out, result.transcripts)
    if result.incomplete:
        print(f"run incomplete: {result.reason}", file=sys.stderr)
        return 1
    print(f"wrote {len(result.transcripts)} transcripts -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    instances = ds.load_instances(args.dataset)
    transcripts = ev.load_transcripts(args.transcripts)
    policy = ev.ScoringPolicy.from_file(args.policy) if args.policy \
        else ev.ScoringPolicy()
    records = ev.score(instances, transcripts, policy)
    probe_records = probes = None
    if args.probes and args.probe_transcripts:
        with open(args.probes, encoding="utf-8") as handle:
            probes = [ds.probe_from_record(json.loads(line))
                      for line in handle if line.strip()]
        probe_records = ev.score_probes(
            probes, ev.load_transcripts(args.probe_transcripts), policy
        )
    metrics = ev.aggregate(records, instances, probe_records, probes)
    report = {
        "metrics": ev.metrics_to_dict(metrics),
        "n_records": len(records),
    }
    ds.atomic_write(args.report, json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(ev.render_report(metrics))
    print(f"report -> {args.report}")
    return 0


def cmd_render_images(args) -> int:
    """Delegate to the image renderer, which ships as its own package."""
    command = [
        sys.executable, "-m", "table_render",
        "--dataset", str(args.dataset), "--out", str(args.out),
    ]
    if args.style:
        command += ["--style", str(args.style)]
    try:
        proc = subprocess.run(command)
    except FileNotFoundError:
        print("table_render is not installed", file=sys.stderr)
        return 2
    return proc.returncode


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mathtab",
        description="Build verified table-reasoning benchmarks from word "
                    "problems and score model transcripts on them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    prepare = sub.add_parser("prepare", help="decouple + transform a seed corpus")
    prepare.add_argument("--corpus", required=True,
                         help="JSONL of {id, text, gold_answer}")
    prepare.add_argument("--provider", required=True, help="provider config JSON")
    prepare.add_argument("--out", required=True, help="transformed corpus JSONL")
    prepare.add_argument("--max-rounds", type=int, default=3)
    prepare.set_defaults(func=cmd_prepare)

    build = sub.add_parser("build", help="build a benchmark subset")
    build.add_argument("--corpus", required=True, help="transformed corpus JSONL")
    build.add_argument("--recipe", help="recipe JSON file")
    build.add_argument("--subset", choices=["easy", "medium", "hard", "imperfect"],
                       default="easy", help="default recipe to use when no file given")
    build.add_argument("--out", required=True, help="output directory")
    build.add_argument("--formats", help="comma list: se,md,json")
    build.add_argument("--slots", type=int, help="instance slots (trap recipes)")
    build.add_argument("--master-seed", type=int, default=0)
    build.add_argument("--probes", action="store_true",
                       help="also emit retrieval probes")
    build.set_defaults(func=cmd_build)

    run = sub.add_parser("run", help="query a model over a dataset")
    run.add_argument("--dataset", required=True)
    run.add_argument("--provider", required=True, help="provider config JSON")
    run.add_argument("--variant", choices=["plain", "warned"], default="plain")
    run.add_argument("--out", required=True, help="transcripts JSONL")
    run.set_defaults(func=cmd_run)

    evaluate = sub.add_parser("evaluate", help="score transcripts into metrics")
    evaluate.add_argument("--dataset", required=True)
    evaluate.add_argument("--transcripts", required=True)
    evaluate.add_argument("--report", required=True)
    evaluate.add_argument("--policy", help="scoring policy JSON")
    evaluate.add_argument("--probes", help="probes JSONL")
    evaluate.add_argument("--probe-transcripts", help="probe transcripts JSONL")
    evaluate.set_defaults(func=cmd_evaluate)

    render = sub.add_parser("render-images",
                            help="render dataset tables to PNGs (subprocess)")
    render.add_argument("--dataset", required=True)
    render.add_argument("--out", required=True)
    render.add_argument("--style", help="style config JSON")
    render.set_defaults(func=cmd_render_images)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
