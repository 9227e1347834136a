#!/usr/bin/env python3
"""Writes discogem_50.csv and its expected adapted sums (discogem_50_sums.json).

The sums are computed here from the raw rows with an implementation of the
adaptation rules that shares no code with the Rust crate. Run from this
directory; output is deterministic.
"""

import csv
import json
import random
import re

LEVEL1 = ["Temporal", "Contingency", "Comparison", "Expansion"]

# level-2 sense -> (level-1 parent, level-3 children or None for a fallback leaf)
LEVEL2 = [
    ("Synchronous", "Temporal", None),
    ("Asynchronous", "Temporal", ["Precedence", "Succession"]),
    ("Cause", "Contingency", ["Reason", "Result", "NegResult"]),
    ("Condition", "Contingency", ["Arg1-as-Cond", "Arg2-as-Cond"]),
    ("Purpose", "Contingency", ["Arg1-as-Goal", "Arg2-as-Goal"]),
    ("Concession", "Comparison", ["Arg1-as-Denier", "Arg2-as-Denier"]),
    ("Contrast", "Comparison", None),
    ("Similarity", "Comparison", None),
    ("Conjunction", "Expansion", None),
    ("Equivalence", "Expansion", None),
    ("Instantiation", "Expansion", ["Arg1-as-Instance", "Arg2-as-Instance"]),
    ("Level-of-Detail", "Expansion", ["Arg1-as-Detail", "Arg2-as-Detail"]),
    ("Manner", "Expansion", ["Arg1-as-Manner", "Arg2-as-Manner"]),
    ("Substitution", "Expansion", ["Arg1-as-Substitution", "Arg2-as-Substitution"]),
]

ALIASES = {"arg1-as-subst": "Arg1-as-Substitution", "arg2-as-subst": "Arg2-as-Substitution"}

# Corpus columns as they appear in the file. Several fall outside the
# adapted inventory and must be dropped.
COLUMNS = [
    "synchronous", "precedence", "succession", "reason", "result",
    "arg1-as-cond", "arg2-as-cond", "arg1-as-negcond", "arg2-as-negcond",
    "arg1-as-goal", "arg2-as-goal", "arg1-as-denier", "arg2-as-denier",
    "contrast", "similarity", "conjunction", "disjunction", "equivalence",
    "arg1-as-excpt", "arg2-as-excpt", "arg1-as-instance", "arg2-as-instance",
    "arg1-as-detail", "arg2-as-detail", "arg1-as-manner", "arg2-as-manner",
    "arg2-as-subst", "cause", "norel", "differentcon",
]

# Skewed draw weights so that some senses dominate, like the real corpus.
WEIGHTS = {
    "conjunction": 8, "result": 7, "arg2-as-detail": 6, "precedence": 5,
    "reason": 4, "arg2-as-instance": 4, "arg2-as-denier": 3, "contrast": 3,
    "arg1-as-denier": 2, "arg1-as-detail": 2, "similarity": 2, "synchronous": 2,
    "norel": 2, "differentcon": 2, "cause": 1,
}

WORDS = ("the river rose after days of rain and the town council met to discuss "
         "what should happen next while several residents argued about costs").split()


def key(name):
    return re.sub(r"[^a-z0-9]", "", name.lower())


def resolve(column):
    """Returns ('l2', name), ('l3', name) or None."""
    k = key(column)
    for l2, _, children in LEVEL2:
        for child in children or []:
            if key(child) == k:
                return ("l3", child)
    for alias, target in ALIASES.items():
        if key(alias) == k:
            return ("l3", target)
    for l2, _, _ in LEVEL2:
        if key(l2) == k:
            return ("l2", l2)
    return None


def adapt(row):
    direct2 = {l2: 0.0 for l2, _, _ in LEVEL2}
    direct3 = {}
    for column in COLUMNS:
        p = float(row[column])
        target = resolve(column)
        if target is None:
            continue
        kind, name = target
        if kind == "l2":
            direct2[name] += p
        else:
            direct3[name] = direct3.get(name, 0.0) + p
    mass2 = {}
    for l2, _, children in LEVEL2:
        mass2[l2] = direct2[l2] + sum(direct3.get(c, 0.0) for c in children or [])
    total = sum(mass2.values())
    if total == 0:
        return None
    d2 = {l2: m / total for l2, m in mass2.items()}
    d1 = {l1: 0.0 for l1 in LEVEL1}
    for l2, parent, _ in LEVEL2:
        d1[parent] += d2[l2]
    mass3 = {}
    for l2, _, children in LEVEL2:
        if children is None:
            mass3[l2] = mass2[l2]
            continue
        own = sum(direct3.get(c, 0.0) for c in children)
        for c in children:
            share = direct3.get(c, 0.0) / own if own > 0 else 1.0 / len(children)
            mass3[c] = direct3.get(c, 0.0) + direct2[l2] * share
    t3 = sum(mass3.values())
    d3 = {name: m / t3 for name, m in mass3.items()}
    return d1, d2, d3


def generate(rng):
    rows = []
    names = list(WEIGHTS)
    weights = [WEIGHTS[n] for n in names]
    for i in range(50):
        counts = {c: 0 for c in COLUMNS}
        if i == 17:
            # every annotator chose a sense outside the adapted inventory
            counts["norel"] = 6
            counts["differentcon"] = 4
        else:
            for _ in range(10):
                if rng.random() < 0.15:
                    counts[rng.choice(COLUMNS)] += 1
                else:
                    counts[rng.choices(names, weights)[0]] += 1
        row = {
            "id": f"fx-{i:03d}",
            "arg1": " ".join(rng.sample(WORDS, 6)).capitalize() + ".",
            "arg2": " ".join(rng.sample(WORDS, 5)).capitalize() + ".",
            "genre": ["literary", "political", "wikipedia", "pdtb"][i % 4],
        }
        for c in COLUMNS:
            row[c] = f"{counts[c] / 10:.1f}"
        rows.append(row)
    return rows


def main():
    rows = generate(random.Random(20240521))
    with open("discogem_50.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["id", "arg1", "arg2", "genre"] + COLUMNS)
        writer.writeheader()
        writer.writerows(rows)

    sums = [dict.fromkeys(LEVEL1, 0.0), {l2: 0.0 for l2, _, _ in LEVEL2}, {}]
    for l2, _, children in LEVEL2:
        for name in children or [l2]:
            sums[2][name] = 0.0
    kept, excluded = 0, []
    for row in rows:
        adapted = adapt(row)
        if adapted is None:
            excluded.append(row["id"])
            continue
        kept += 1
        for level, dist in enumerate(adapted):
            for name, value in dist.items():
                sums[level][name] += value
    with open("discogem_50_sums.json", "w") as f:
        json.dump(
            {"instances": kept, "excluded": excluded, "level1": sums[0], "level2": sums[1], "level3": sums[2]},
            f,
            indent=2,
        )
        f.write("\n")


if __name__ == "__main__":
    main()
