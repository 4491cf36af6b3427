"""Regenerate the bundled 30-document mini corpus under src/caselens/data/mini/."""

import csv
import itertools
import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "caselens" / "data" / "mini"

POOLS = {
    "housing": "tenant landlord eviction evict house flat lease rent dwelling occupier possession "
    "municipality demolition housing property tenancy order premises home occupation council".split(),
    "family": "child custody parent mother father adoption contact care guardian family "
    "welfare placement visit access upbringing marriage divorce foster relationship".split(),
    "privacy": "surveillance interception telephone data correspondence police secret storage "
    "monitoring communication information record retention database privacy security".split(),
}
FRENCH = "requérant logement expulsion tribunal enfant famille droit cour gouvernement article".split()
COMMON = "applicant government article convention court violation complaint proceeding respect".split()

# (index, topic, language, doc_type)
LAYOUT = []
for i in range(1, 31):
    if i <= 10:
        topic = "housing"
    elif i <= 20:
        topic = "family"
    elif i <= 24:
        topic = "privacy"
    else:
        topic = ["housing", "family", "privacy"][i % 3]
    lang = "fr" if i in (4, 9, 14, 19, 23, 26) else "en"
    dtype = "judgment" if i % 3 == 0 else "decision"
    LAYOUT.append((i, topic, lang, dtype))


def cid(i):
    return f"001-{i:05d}"


def cliques(*groups):
    for g in groups:
        yield from itertools.combinations(g, 2)


# Pairs of 4-cliques (plus a pendant node each) joined by six edges: merged
# at resolution 1, split at resolution 3. A 4-cycle, a detached pair and
# four singletons complete the layout.
EDGES = list(cliques([1, 2, 3, 4], [5, 6, 7, 8], [11, 12, 13, 14], [15, 16, 17, 18]))
EDGES += [(4, 5), (3, 6), (2, 7), (1, 8), (3, 5), (4, 6), (9, 1), (9, 2), (10, 7), (10, 8)]
EDGES += [(14, 15), (13, 16), (12, 17), (11, 18), (13, 15), (14, 16), (19, 11), (19, 12), (20, 17), (20, 18)]
EDGES += [(8, 11), (18, 21), (21, 22), (22, 23), (23, 24), (24, 21), (23, 1), (25, 26)]

MONTHS = ["January", "March", "May", "July", "October", "December"]


def make_text(rng, topic, lang):
    if lang == "fr":
        words = [rng.choice(FRENCH) for _ in range(60)]
        return " ".join(words) + "."
    sents = []
    for s in range(8):
        words = [rng.choice(POOLS[topic]) for _ in range(7)] + [rng.choice(COMMON) for _ in range(2)]
        rng.shuffle(words)
        sent = "The " + " ".join(words)
        if s == 2:
            sent += f" on {rng.randint(1, 28)} {rng.choice(MONTHS)} {rng.randint(1980, 2020)}"
        if s == 4:
            sent += " in Turkey and the United Kingdom"
        sents.append(sent + ".")
    return " ".join(sents)


def main():
    rng = random.Random(8)
    cites = {i: [] for i, *_ in LAYOUT}
    for a, b in EDGES:
        cites[max(a, b)].append(cid(min(a, b)))
    OUT.mkdir(parents=True, exist_ok=True)
    with open(OUT / "corpus.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for i, topic, lang, dtype in LAYOUT:
            rec = {
                "case_id": cid(i),
                "title": f"Case {i} v. State",
                "application_no": f"{10000 + i}/{90 + i % 10}",
                "doc_type": dtype,
                "language": lang,
                "importance": 1 + i % 4,
                "date": f"{1990 + i}-0{1 + i % 9}-1{i % 10}",
                "cited_case_ids": cites[i],
                "text": make_text(rng, topic, lang),
            }
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
    with open(OUT / "annotations.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "label"])
        for i in list(range(1, 11)) + [25, 28]:
            w.writerow([cid(i), "eviction"])
        for i in (11, 12, 13):
            w.writerow([cid(i), "custody"])


if __name__ == "__main__":
    main()
