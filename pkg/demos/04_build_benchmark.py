"""Build the four benchmark subsets and inspect the manifests.

Instances are reproducible: per-slot RNG seeds are hash-chained from the
recipe's master seed, so rebuilding with the same inputs yields the same
bytes. Trap instances are solver-verified before they are emitted; the
imperfect subset lands on its configured 50/50 trap mix exactly.
"""

import json
import tempfile
from pathlib import Path

from mathtab.dataset import (
    build_probes,
    build_subset,
    default_recipes,
    load_transformed_corpus,
    write_dataset,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
corpus = load_transformed_corpus(FIXTURES / "transformed.jsonl")
print(f"corpus: {len(corpus)} validated problems")

out_dir = Path(tempfile.mkdtemp(prefix="benchmark-"))
recipes = default_recipes(master_seed=2024)
recipes["imperfect"].slots = 100

for name, recipe in recipes.items():
    instances, manifest = build_subset(corpus, recipe)
    dataset_path, manifest_path = write_dataset(out_dir, recipe, instances, manifest)
    stats = manifest["stats"][name]
    print(f"\n{name}: {manifest['counts']['emitted']} instances "
          f"({manifest['counts']['excluded']} excluded)")
    print(f"  mean rows {stats['mean_rows']:.1f}, cols {stats['mean_cols']:.1f}, "
          f"cells {stats['mean_cells']:.1f}")
    if stats["trap_histogram"]:
        print(f"  trap mix: {stats['trap_histogram']}")
    print(f"  content hash: {manifest['content_hash'][:23]}...")

easy_instances, _ = build_subset(corpus, recipes["easy"])
probes = build_probes(easy_instances)
print(f"\nretrieval probes for the easy subset: {len(probes)}")
print("sample probe:", json.dumps(probes[0].question.splitlines()[2]))
print(f"gold: {probes[0].gold}")
print(f"\nfiles written under {out_dir}")
