"""Run the full extraction pipeline against recorded model responses.

The replay provider serves the committed transcripts under fixtures/, so
this demo is offline and deterministic: every problem decouples into a
verified formal state, transforms into a blurred question plus seed
table, and re-validates to its original answer.
"""

from pathlib import Path

from mathtab.decouple import load_corpus
from mathtab.llm import ReplayProvider
from mathtab.serialize import TableFormat, render
from mathtab.transform import transform_corpus
from mathtab.augment import from_seed

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

problems = load_corpus(FIXTURES / "corpus.jsonl")
provider = ReplayProvider.from_transcript(FIXTURES / "replay_transcript.jsonl")

entries, failures = transform_corpus(problems, provider)
print(f"{len(entries)} problems verified, {len(failures)} failures")

janet = next(e for e in entries if e.problem_id == "janet")
print("\noriginal:", janet.text[:60], "...")
print("blurred: ", janet.blurred.text[:60], "...")
print("placeholders:", janet.blurred.placeholder_map)
print("validation ok:", janet.validation.ok,
      "| recomputed:", janet.validation.recomputed)

print("\nseed table (serialized format):")
print(render(from_seed(janet.seed, janet.state), TableFormat.SERIALIZED))

print("\ncalculated quantities kept as metadata, not table columns:")
for key, cell in janet.seed.calculated.items():
    print(f"  {key} = {cell.value}")
