"""Score model transcripts offline and print the metric report.

A scripted "model" answers the easy subset (mostly correctly) and the
imperfect subset (mostly falling into the traps), under both the plain
and the trap-warned instruction preambles. Everything is rescorable:
transcripts are plain JSONL and the verdict logic is deterministic.
"""

from pathlib import Path

from mathtab.dataset import build_probes, build_subset, default_recipes, \
    load_transformed_corpus
from mathtab.evaluate import aggregate, render_report, score, score_probes

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
corpus = load_transformed_corpus(FIXTURES / "transformed.jsonl")

recipes = default_recipes(master_seed=99)
recipes["imperfect"].slots = 20
easy, _ = build_subset(corpus, recipes["easy"])
imperfect, _ = build_subset(corpus, recipes["imperfect"])
instances = easy + imperfect

transcripts = []
for index, instance in enumerate(easy):
    if index % 5 == 4:  # every fifth answer is off by one
        transcripts.append({"instance_id": instance.instance_id,
                            "raw_response": f"#### {instance.answer + 1}"})
    else:
        transcripts.append({"instance_id": instance.instance_id,
                            "raw_response": f"I checked the row. #### {instance.answer}"})
# under the warned preamble the model gets cautious, sometimes wrongly
for index, instance in enumerate(easy[:10]):
    if index % 3 == 2:
        transcripts.append({"instance_id": instance.instance_id,
                            "raw_response": "This cannot be determined.",
                            "variant": "warned"})
    else:
        transcripts.append({"instance_id": instance.instance_id,
                            "raw_response": f"#### {instance.answer}",
                            "variant": "warned"})
# traps: catch missing half the time, contra rarely
seen = {"missing": 0, "contra": 0}
for instance in imperfect:
    trap = instance.trap_type.value
    seen[trap] += 1
    catches = (seen[trap] % 2 == 0) if trap == "missing" else (seen[trap] % 4 == 0)
    if catches:
        transcripts.append({"instance_id": instance.instance_id,
                            "raw_response": "The table is missing or contradictory; "
                                            "this is unsolvable."})
    else:
        transcripts.append({"instance_id": instance.instance_id,
                            "raw_response": "#### 42"})

records = score(instances, transcripts)
probes = build_probes(easy)
probe_records = score_probes(probes, [
    {"instance_id": p.probe_id, "raw_response": f"#### {p.gold}"}
    for p in probes
])

metrics = aggregate(records, instances, probe_records, probes)
print(render_report(metrics))
