"""Regenerate the committed fixture corpus, replay transcripts, and goldens.

Every problem here carries a hand-computed gold answer; the tool refuses to
write fixtures unless the solver reproduces each gold exactly and the full
replay-driven pipeline (decouple, transform, validate) passes end to end.

Run from the repository root:  python3 tools/make_fixtures.py
"""

from __future__ import annotations

import json
import sys
from fractions import Fraction
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from mathtab.augment import AugOp, apply, from_seed  # noqa: E402
from mathtab.dataset import write_transformed_corpus  # noqa: E402
from mathtab.decouple import SeedProblem  # noqa: E402
from mathtab.formal import emit_smtlib, goal_value, parse_formal  # noqa: E402
from mathtab.llm import ReplayProvider, TEMPLATES, render_template, request_key  # noqa: E402
from mathtab.serialize import TableFormat, render  # noqa: E402
from mathtab.transform import transform_corpus  # noqa: E402

FIXTURES = ROOT / "fixtures"


def P(pid, text, gold, givens, derived, goal, generalization,
      name, real_vars=(), ranges=None, units=None):
    return {
        "id": pid, "text": text, "gold": gold, "givens": givens,
        "derived": derived, "goal": goal, "generalization": generalization,
        "name": name, "real_vars": set(real_vars), "ranges": ranges or {},
        "units": units or {},
    }


PROBLEMS = [
    P(
        "janet",
        "Janet's ducks lay 16 eggs per day. She eats three for breakfast every "
        "morning and bakes muffins for her friends every day with four. She "
        "sells the remainder at the farmers' market daily for $2 per fresh "
        "duck egg. How much in dollars does she make every day at the "
        "farmers' market?",
        "18",
        [("eggs_per_day", 16), ("eggs_eaten", 3), ("eggs_for_muffins", 4),
         ("price_per_egg", 2)],
        [("eggs_for_sale", "(- (- eggs_per_day eggs_eaten) eggs_for_muffins)"),
         ("earnings", "(* eggs_for_sale price_per_egg)")],
        "earnings",
        "Janet's ducks lay x eggs per day. She eats y for breakfast every "
        "morning and bakes muffins for her friends every day with z. She "
        "sells the remainder at the farmers' market daily for $w per fresh "
        "duck egg. How much in dollars does she make every day at the "
        "farmers' market?",
        "Janet",
        ranges={"eggs_per_day": (1, 100), "eggs_eaten": (0, 10),
                "eggs_for_muffins": (0, 20), "price_per_egg": (1, 10)},
        units={"eggs_per_day": "eggs", "eggs_eaten": "eggs",
               "eggs_for_muffins": "eggs", "price_per_egg": "dollars"},
    ),
    P(
        "weng",
        "Weng earns $12 an hour for babysitting. Yesterday, she just did 50 "
        "minutes of babysitting. How much did she earn?",
        "10",
        [("hourly_rate", 12), ("minutes_worked", 50), ("minutes_per_hour", 60)],
        [("hours_worked", "(/ minutes_worked minutes_per_hour)"),
         ("earnings", "(* hourly_rate hours_worked)")],
        "earnings",
        "Weng earns $x an hour for babysitting. Yesterday, she just did t "
        "minutes of babysitting. How much did she earn?",
        "Weng",
        real_vars=("hourly_rate", "hours_worked", "earnings"),
        ranges={"hourly_rate": (8, 100), "minutes_worked": (10, 1440),
                "minutes_per_hour": (60, 60)},
        units={"hourly_rate": "dollars", "minutes_worked": "minutes",
               "minutes_per_hour": "minutes"},
    ),
    P(
        "carlos",
        "Carlos delivers 8 crates of oranges per trip and makes 5 trips each "
        "day. He is paid $7 for every crate he delivers. How much does Carlos "
        "earn per day?",
        "280",
        [("crates_per_trip", 8), ("trips_per_day", 5), ("pay_per_crate", 7)],
        [("crates_per_day", "(* crates_per_trip trips_per_day)"),
         ("earnings", "(* crates_per_day pay_per_crate)")],
        "earnings",
        "Carlos delivers x crates of oranges per trip and makes y trips each "
        "day. He is paid $z for every crate he delivers. How much does Carlos "
        "earn per day?",
        "Carlos",
    ),
    P(
        "mara",
        "Mara bakes 24 loaves of bread each morning. 6 loaves go unsold and "
        "are donated. She sells each remaining loaf for $3. How much money "
        "does Mara take in per day?",
        "54",
        [("loaves_baked", 24), ("loaves_donated", 6), ("price_per_loaf", 3)],
        [("loaves_sold", "(- loaves_baked loaves_donated)"),
         ("revenue", "(* loaves_sold price_per_loaf)")],
        "revenue",
        "Mara bakes x loaves of bread each morning. y loaves go unsold and "
        "are donated. She sells each remaining loaf for $z. How much money "
        "does Mara take in per day?",
        "Mara",
    ),
    P(
        "theo",
        "Theo's cinema hall has 120 seats. For the evening show, 85 tickets "
        "were sold at $9 each. How much ticket revenue did the show collect?",
        "765",
        [("seats", 120), ("tickets_sold", 85), ("ticket_price", 9)],
        [("revenue", "(* tickets_sold ticket_price)")],
        "revenue",
        "Theo's cinema hall has x seats. For the evening show, y tickets "
        "were sold at $z each. How much ticket revenue did the show collect?",
        "Theo",
    ),
    P(
        "priya",
        "Priya plants 12 rows of tomatoes with 15 plants in each row. A storm "
        "destroys 40 plants. How many plants are left?",
        "140",
        [("rows", 12), ("plants_per_row", 15), ("plants_destroyed", 40)],
        [("plants_total", "(* rows plants_per_row)"),
         ("plants_left", "(- plants_total plants_destroyed)")],
        "plants_left",
        "Priya plants x rows of tomatoes with y plants in each row. A storm "
        "destroys z plants. How many plants are left?",
        "Priya",
    ),
    P(
        "sam",
        "Sam saves $35 each week for 6 weeks. He then spends $90 on a "
        "skateboard. How much money does Sam have left?",
        "120",
        [("weekly_saving", 35), ("weeks", 6), ("spent", 90)],
        [("saved", "(* weekly_saving weeks)"),
         ("money_left", "(- saved spent)")],
        "money_left",
        "Sam saves $x each week for y weeks. He then spends $z on a "
        "skateboard. How much money does Sam have left?",
        "Sam",
    ),
    P(
        "lena",
        "Lena's book has 480 pages. She reads 32 pages every day. After 9 "
        "days, how many pages does she still have to read?",
        "192",
        [("pages_total", 480), ("pages_per_day", 32), ("days", 9)],
        [("pages_read", "(* pages_per_day days)"),
         ("pages_left", "(- pages_total pages_read)")],
        "pages_left",
        "Lena's book has x pages. She reads y pages every day. After z "
        "days, how many pages does she still have to read?",
        "Lena",
    ),
    P(
        "omar",
        "Omar builds a rectangular pen 18 meters long and 7 meters wide. How "
        "many meters of fencing does he need to enclose it?",
        "50",
        [("length", 18), ("width", 7)],
        [("perimeter", "(* 2 (+ length width))")],
        "perimeter",
        "Omar builds a rectangular pen x meters long and y meters wide. How "
        "many meters of fencing does he need to enclose it?",
        "Omar",
    ),
    P(
        "rosa",
        "Rosa tiles a floor 9 tiles wide and 14 tiles long. How many tiles "
        "does she use in total?",
        "126",
        [("tiles_wide", 9), ("tiles_long", 14)],
        [("tiles_used", "(* tiles_wide tiles_long)")],
        "tiles_used",
        "Rosa tiles a floor x tiles wide and y tiles long. How many tiles "
        "does she use in total?",
        "Rosa",
    ),
    P(
        "kofi",
        "Kofi buys 7 bags of apples with 12 apples in each bag. He gives 20 "
        "apples to his neighbor. How many apples does he keep?",
        "64",
        [("bags", 7), ("apples_per_bag", 12), ("apples_given", 20)],
        [("apples_total", "(* bags apples_per_bag)"),
         ("apples_kept", "(- apples_total apples_given)")],
        "apples_kept",
        "Kofi buys x bags of apples with y apples in each bag. He gives z "
        "apples to his neighbor. How many apples does he keep?",
        "Kofi",
    ),
    P(
        "nina",
        "Nina makes necklaces with 45 beads each. She starts with 500 beads "
        "and makes 11 necklaces. How many beads does she have left?",
        "5",
        [("beads_per_necklace", 45), ("beads_start", 500), ("necklaces", 11)],
        [("beads_used", "(* beads_per_necklace necklaces)"),
         ("beads_left", "(- beads_start beads_used)")],
        "beads_left",
        "Nina makes necklaces with x beads each. She starts with y beads "
        "and makes z necklaces. How many beads does she have left?",
        "Nina",
    ),
    P(
        "diego",
        "Diego cycles 14 miles in the morning and 9 miles in the evening, 5 "
        "days a week. How many miles does he cycle in a week?",
        "115",
        [("morning_miles", 14), ("evening_miles", 9), ("days", 5)],
        [("daily_miles", "(+ morning_miles evening_miles)"),
         ("weekly_miles", "(* daily_miles days)")],
        "weekly_miles",
        "Diego cycles x miles in the morning and y miles in the evening, z "
        "days a week. How many miles does he cycle in a week?",
        "Diego",
    ),
    P(
        "aya",
        "Aya has 6 albums with 48 stickers each. She trades away 37 stickers "
        "and then buys 25 more. How many stickers does she have now?",
        "276",
        [("albums", 6), ("stickers_per_album", 48), ("stickers_traded", 37),
         ("stickers_bought", 25)],
        [("stickers_owned", "(* albums stickers_per_album)"),
         ("after_trade", "(- stickers_owned stickers_traded)"),
         ("stickers_now", "(+ after_trade stickers_bought)")],
        "stickers_now",
        "Aya has x albums with y stickers each. She trades away z stickers "
        "and then buys w more. How many stickers does she have now?",
        "Aya",
    ),
    P(
        "ben",
        "Ben buys 4 cans of paint at $13 each and 3 brushes at $6 each. He "
        "pays with a $100 bill. How much change does he get back?",
        "30",
        [("cans", 4), ("can_price", 13), ("brushes", 3), ("brush_price", 6),
         ("paid", 100)],
        [("paint_cost", "(* cans can_price)"),
         ("brush_cost", "(* brushes brush_price)"),
         ("total_cost", "(+ paint_cost brush_cost)"),
         ("change", "(- paid total_cost)")],
        "change",
        "Ben buys x cans of paint at $y each and z brushes at $w each. He "
        "pays with a $v bill. How much change does he get back?",
        "Ben",
    ),
    P(
        "carla",
        "Carla bakes 60 cupcakes. She keeps 12 for her family and splits the "
        "rest equally among 8 friends. How many cupcakes does each friend get?",
        "6",
        [("cupcakes_baked", 60), ("cupcakes_kept", 12), ("friends", 8)],
        [("cupcakes_shared", "(- cupcakes_baked cupcakes_kept)"),
         ("cupcakes_each", "(/ cupcakes_shared friends)")],
        "cupcakes_each",
        "Carla bakes x cupcakes. She keeps y for her family and splits the "
        "rest equally among z friends. How many cupcakes does each friend get?",
        "Carla",
    ),
    P(
        "felix",
        "Felix drives 180 kilometers and his van uses 1 liter of fuel every "
        "12 kilometers. Fuel costs $4 per liter. How much does the fuel for "
        "the trip cost?",
        "60",
        [("distance", 180), ("km_per_liter", 12), ("price_per_liter", 4)],
        [("liters_used", "(/ distance km_per_liter)"),
         ("fuel_cost", "(* liters_used price_per_liter)")],
        "fuel_cost",
        "Felix drives x kilometers and his van uses 1 liter of fuel every "
        "y kilometers. Fuel costs $z per liter. How much does the fuel for "
        "the trip cost?",
        "Felix",
    ),
    P(
        "greta",
        "Greta's farm has 35 goats and each goat gives 4 liters of milk "
        "daily. She pours the milk into cans that hold 10 liters each. How "
        "many cans does she fill every day?",
        "14",
        [("goats", 35), ("liters_per_goat", 4), ("can_size", 10)],
        [("milk_total", "(* goats liters_per_goat)"),
         ("cans_filled", "(/ milk_total can_size)")],
        "cans_filled",
        "Greta's farm has x goats and each goat gives y liters of milk "
        "daily. She pours the milk into cans that hold z liters each. How "
        "many cans does she fill every day?",
        "Greta",
    ),
    P(
        "hana",
        "Hana solves 96 practice problems over 4 evenings, doing the same "
        "number each evening. Her brother solves 13 problems each evening. "
        "How many more problems than her brother does Hana solve per evening?",
        "11",
        [("problems_total", 96), ("evenings", 4), ("brother_per_evening", 13)],
        [("hana_per_evening", "(/ problems_total evenings)"),
         ("difference", "(- hana_per_evening brother_per_evening)")],
        "difference",
        "Hana solves x practice problems over y evenings, doing the same "
        "number each evening. Her brother solves z problems each evening. "
        "How many more problems than her brother does Hana solve per evening?",
        "Hana",
    ),
    P(
        "ivan",
        "Ivan sells raffle tickets for $5 each. He sells 37 tickets on "
        "Saturday and 28 tickets on Sunday. The prizes cost him $150. How "
        "much profit does the raffle make?",
        "175",
        [("ticket_price", 5), ("saturday_tickets", 37), ("sunday_tickets", 28),
         ("prize_cost", 150)],
        [("tickets_total", "(+ saturday_tickets sunday_tickets)"),
         ("revenue", "(* tickets_total ticket_price)"),
         ("profit", "(- revenue prize_cost)")],
        "profit",
        "Ivan sells raffle tickets for $x each. He sells y tickets on "
        "Saturday and z tickets on Sunday. The prizes cost him $w. How "
        "much profit does the raffle make?",
        "Ivan",
    ),
    P(
        "jade",
        "Jade mixes 3 liters of syrup with 9 liters of water to make juice. "
        "She pours all the juice into bottles that hold 2 liters each. How "
        "many bottles does she fill?",
        "6",
        [("syrup", 3), ("water", 9), ("bottle_size", 2)],
        [("juice_total", "(+ syrup water)"),
         ("bottles_filled", "(/ juice_total bottle_size)")],
        "bottles_filled",
        "Jade mixes x liters of syrup with y liters of water to make juice. "
        "She pours all the juice into bottles that hold z liters each. How "
        "many bottles does she fill?",
        "Jade",
    ),
    P(
        "khalid",
        "Khalid orders 240 books for the school library. The books arrive in "
        "8 equal boxes, and 3 of the boxes get damaged in transit. How many "
        "of the books are still usable?",
        "150",
        [("books_ordered", 240), ("boxes", 8), ("boxes_damaged", 3)],
        [("books_per_box", "(/ books_ordered boxes)"),
         ("books_damaged", "(* boxes_damaged books_per_box)"),
         ("books_usable", "(- books_ordered books_damaged)")],
        "books_usable",
        "Khalid orders x books for the school library. The books arrive in "
        "y equal boxes, and z of the boxes get damaged in transit. How many "
        "of the books are still usable?",
        "Khalid",
    ),
    P(
        "tara",
        "Tara cuts a rope 72 meters long into 9 equal pieces. How many "
        "meters long is each piece?",
        "8",
        [("rope_length", 72), ("pieces", 9)],
        [("piece_length", "(/ rope_length pieces)")],
        "piece_length",
        "Tara cuts a rope x meters long into y equal pieces. How many "
        "meters long is each piece?",
        "Tara",
    ),
    P(
        "milo",
        "Milo has 58 marbles and wins 26 more in a tournament. How many "
        "marbles does Milo have now?",
        "84",
        [("marbles_start", 58), ("marbles_won", 26)],
        [("marbles_now", "(+ marbles_start marbles_won)")],
        "marbles_now",
        "Milo has x marbles and wins y more in a tournament. How many "
        "marbles does Milo have now?",
        "Milo",
    ),
    P(
        "suki",
        "Suki's shop sells 18 mugs a day at $11 each. The shop is open 6 "
        "days a week. How many dollars of mug sales does the shop make in "
        "a week?",
        "1188",
        [("mugs_per_day", 18), ("mug_price", 11), ("open_days", 6)],
        [("daily_sales", "(* mugs_per_day mug_price)"),
         ("weekly_sales", "(* daily_sales open_days)")],
        "weekly_sales",
        "Suki's shop sells x mugs a day at $y each. The shop is open z "
        "days a week. How many dollars of mug sales does the shop make in "
        "a week?",
        "Suki",
    ),
]


def build_program(problem) -> str:
    lines = []
    reals = problem["real_vars"]
    names = [g[0] for g in problem["givens"]] + [d[0] for d in problem["derived"]]
    for name in names:
        sort = "Real" if name in reals else "Int"
        lines.append(f"(declare-fun {name} () {sort})")
    for name, value in problem["givens"]:
        rendered = f"{value}.0" if name in reals else str(value)
        lines.append(f"(assert (= {name} {rendered}))")
    for name, expr in problem["derived"]:
        lines.append(f"(assert (= {name} {expr}))")
    lines.append("(check-sat)")
    lines.append(f"(get-value ({problem['goal']}))")
    return "\n".join(lines) + "\n"


def build_transform_response(problem, state) -> str:
    from mathtab.formal import solve

    assignment = solve(state).assignment
    table = {"name": problem["name"]}
    for name, value in problem["givens"]:
        table[name] = [value, "Given"]
    for name, _ in problem["derived"]:
        value = assignment[name]
        echoed = int(value) if value.denominator == 1 else round(float(value), 4)
        table[name] = [echoed, "Calculated"]
    ranges = {"name": None}
    for name, value in problem["givens"]:
        low, high = problem["ranges"].get(
            name, (max(0, value // 2), max(value * 10, 10))
        )
        ranges[name] = {
            "min": low, "max": high,
            "unit": problem["units"].get(name, "unknown"),
        }
    return json.dumps({
        "problem": problem["text"],
        "table": table,
        "generalization": problem["generalization"],
        "value_ranges": ranges,
    }, ensure_ascii=False)


def main():
    FIXTURES.mkdir(exist_ok=True)
    (FIXTURES / "golden").mkdir(exist_ok=True)

    corpus_lines = []
    transcript_lines = []
    for problem in PROBLEMS:
        program = build_program(problem)
        state = parse_formal(program)
        derived = goal_value(state)
        expected = Fraction(problem["gold"])
        if derived != expected:
            raise SystemExit(
                f"{problem['id']}: solver derives {derived}, gold says {expected}"
            )
        corpus_lines.append(json.dumps({
            "id": problem["id"], "text": problem["text"],
            "gold_answer": problem["gold"],
        }, ensure_ascii=False))

        decouple_messages = render_template(
            TEMPLATES["semantic_decoupling"], {"problem": problem["text"]}
        )
        transcript_lines.append(json.dumps({
            "key": request_key(decouple_messages),
            "messages": decouple_messages,
            "response": program,
            "usage": {"total_tokens": 0},
        }, ensure_ascii=False))

        transform_messages = render_template(
            TEMPLATES["table_transformation"],
            {"problem": problem["text"], "formal_problem": emit_smtlib(state)},
        )
        transcript_lines.append(json.dumps({
            "key": request_key(transform_messages),
            "messages": transform_messages,
            "response": build_transform_response(problem, state),
            "usage": {"total_tokens": 0},
        }, ensure_ascii=False))

    (FIXTURES / "corpus.jsonl").write_text("\n".join(corpus_lines) + "\n")
    (FIXTURES / "replay_transcript.jsonl").write_text(
        "\n".join(transcript_lines) + "\n"
    )

    # drive the real pipeline against the replay transcript
    problems = [
        SeedProblem(p["id"], p["text"], Fraction(p["gold"])) for p in PROBLEMS
    ]
    provider = ReplayProvider.from_transcript(FIXTURES / "replay_transcript.jsonl")
    entries, failures = transform_corpus(problems, provider)
    if failures:
        raise SystemExit(f"pipeline failures: {failures}")
    if len(entries) != len(PROBLEMS):
        raise SystemExit("not every problem produced a transformed entry")
    for entry in entries:
        if not entry.validation.ok:
            raise SystemExit(f"{entry.problem_id}: validation failed")
        placeholders = set(entry.blurred.placeholder_map.values())
        given = {c.key for c in entry.seed.columns if c.kind.value == "given"}
        if not placeholders <= given:
            raise SystemExit(f"{entry.problem_id}: placeholder outside given columns")
        if not entry.blurred.placeholder_map:
            raise SystemExit(f"{entry.problem_id}: no placeholders aligned")
    write_transformed_corpus(FIXTURES / "transformed.jsonl", entries)

    janet = next(e for e in entries if e.problem_id == "janet")
    seed_table = from_seed(janet.seed, janet.state)
    easy_table = apply(seed_table, AugOp("row_aug", rng_seed=742001, count=10),
                       janet.state)
    for label, table in (("janet_seed", seed_table), ("janet_easy", easy_table)):
        for fmt, suffix in ((TableFormat.SERIALIZED, "se.txt"),
                            (TableFormat.MARKDOWN, "md.txt"),
                            (TableFormat.JSON, "json.txt")):
            path = FIXTURES / "golden" / f"{label}.{suffix}"
            path.write_text(render(table, fmt), encoding="utf-8")

    print(f"wrote {len(PROBLEMS)} problems, "
          f"{len(transcript_lines)} transcript entries, goldens")


if __name__ == "__main__":
    main()
