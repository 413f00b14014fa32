"""CLI: read dataset JSONL, write one PNG per instance plus a checksum manifest.

Exit code 0 only when every job succeeded.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import Style, load_jobs, run_batch


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="table-render")
    parser.add_argument("--dataset", required=True, help="instances JSONL")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--style", help="style config JSON")
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker processes (each job writes its own file)")
    args = parser.parse_args(argv)

    style = Style.from_file(args.style) if args.style else Style()
    out_dir = Path(args.out)
    jobs = load_jobs(args.dataset, out_dir, style)
    if not jobs:
        print("no instances found in dataset", file=sys.stderr)
        return 1
    results, failures = run_batch(jobs, out_dir / "checksums.json",
                                  processes=args.jobs)
    print(f"rendered {len(results)}/{len(jobs)} images -> {out_dir}")
    for failure in failures:
        print(f"  failed {failure['instance_id']}: {failure['error']}",
              file=sys.stderr)
    return 0 if not failures else 1


if __name__ == "__main__":
    sys.exit(main())
