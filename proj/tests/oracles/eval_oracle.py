#!/usr/bin/env python3
# Copyright 2026 The paostruct Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Counting oracle for the evaluation harness.

Written without reference to the C++ code: exact fractions, a plain
dynamic-programming edit distance, brute-force counting, and scipy for the
chi-square tail. Regenerate the frozen values with

    python3 tests/oracles/eval_oracle.py > tests/fixtures/eval/expected.json
"""

import json
import math
import sys
from fractions import Fraction
from math import comb
from pathlib import Path

from scipy.stats import chi2

ROOT = Path(__file__).resolve().parents[2]
KEYS = ["A", "B", "C", "D", "E", "F"]
OOV = "OUT_OF_VOCAB"


def norm(s):
    return " ".join(s.lower().split())


def lev(a, b):
    d = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) + 1):
        d[i][0] = i
    for j in range(len(b) + 1):
        d[0][j] = j
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] != b[j - 1]))
    return d[len(a)][len(b)]


def similarity(a, b):
    x, y = norm(a), norm(b)
    longest = max(len(x), len(y))
    if longest == 0:
        return 100.0
    raw = (1.0 - lev(x, y) / longest) * 100.0
    return math.floor(raw * 10000.0 + 0.5) / 10000.0


def align(pred, gold, threshold):
    cands = []
    for p, ps in enumerate(pred):
        for g, gs in enumerate(gold):
            s = similarity(ps, gs)
            if s >= threshold:
                cands.append((-s, gs, ps, g, p))
    cands.sort()
    used_p, used_g, matched = set(), set(), []
    for neg, _, _, g, p in cands:
        if p in used_p or g in used_g:
            continue
        used_p.add(p)
        used_g.add(g)
        matched.append((p, g))
    return matched, [p for p in range(len(pred)) if p not in used_p], [g for g in range(len(gold)) if g not in used_g]


def ratio(a, b):
    return Fraction(a, b) if b else Fraction(0)


def per_label_rates(c):
    p = ratio(c["tp"], c["tp"] + c["fp"])
    r = ratio(c["tp"], c["tp"] + c["fn"])
    f = 2 * p * r / (p + r) if p + r else Fraction(0)
    j = ratio(c["tp"], c["tp"] + c["fp"] + c["fn"])
    return p, r, f, j


def averages(rows):
    rows = [c for c in rows if c["tp"] + c["fn"] > 0]
    out = {}
    total = sum(c["tp"] + c["fn"] for c in rows)
    for i, name in enumerate(["precision", "recall", "f1", "jaccard"]):
        vals = [(per_label_rates(c)[i], c["tp"] + c["fn"]) for c in rows]
        macro = sum(v for v, _ in vals) / len(vals) if vals else Fraction(0)
        weighted = sum(v * w for v, w in vals) / total if total else Fraction(0)
        out[name] = {"macro": float(macro), "weighted": float(weighted)}
    return out


def extraction(corpus, threshold):
    space = sorted({norm(g) for gold, _ in corpus for g in gold})
    counts = {l: {"label": l, "tp": 0, "fp": 0, "fn": 0} for l in space}
    oov = 0
    exact = 0
    errors = 0
    for gold, pred in corpus:
        matched, up, ug = align(pred, gold, threshold)
        for _, g in matched:
            counts[norm(gold[g])]["tp"] += 1
        for g in ug:
            counts[norm(gold[g])]["fn"] += 1
        for p in up:
            best, best_s = None, 0.0
            for l in space:  # first label wins ties
                s = similarity(pred[p], l)
                if s > best_s:
                    best, best_s = l, s
            if best is None:
                oov += 1
            else:
                counts[best]["fp"] += 1
        errors += len(up) + len(ug)
        exact += not up and not ug
    rows = [counts[l] for l in space]
    labels = [dict(r) for r in rows]
    if oov:
        labels.append({"label": OOV, "tp": 0, "fp": oov, "fn": 0})
    avg = averages(rows)
    return {
        "per_label": labels,
        "precision": avg["precision"],
        "recall": avg["recall"],
        "f1": avg["f1"],
        "subset_accuracy": float(Fraction(exact, len(corpus))),
        "hamming_loss": float(Fraction(errors, max(len(space), 1) * len(corpus))),
    }


def categorization(pairs):
    confusion = [[sum(1 for p, g in pairs if g == gk and p == pk) for pk in KEYS] for gk in KEYS]
    rows = []
    for k in KEYS:
        rows.append({"label": k,
                     "tp": sum(1 for p, g in pairs if p == k and g == k),
                     "fp": sum(1 for p, g in pairs if p == k and g != k),
                     "fn": sum(1 for p, g in pairs if g == k and p != k)})
    avg = averages(rows)
    return {"confusion": confusion, "per_class": rows, **avg}


def mcnemar(b, c):
    n = b + c
    if n == 0:
        return 1.0
    if n < 25:
        return float(min(Fraction(1), 2 * Fraction(sum(comb(n, k) for k in range(min(b, c) + 1)), 2 ** n)))
    return float(chi2.sf((abs(b - c) - 1) ** 2 / n, 1))


def load_jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


def model_eval(gold, pred, threshold):
    by_id = {p["report_id"]: p for p in pred}
    corpus, pairs, found, right = [], [], [], []
    for g in gold:
        gt = [c["text"] for c in g["gold_concepts"]]
        pcs = [c if isinstance(c, dict) else {"text": c} for c in by_id[g["report_id"]]["concepts"]]
        pt = [c["text"] for c in pcs]
        corpus.append((gt, pt))
        matched, _, _ = align(pt, gt, threshold)
        f = [False] * len(gt)
        r = [False] * len(gt)
        for p, gi in matched:
            f[gi] = True
            cat = pcs[p].get("category")
            if cat is not None:
                gk = g["gold_concepts"][gi]["category"]
                pairs.append((cat, gk))
                r[gi] = cat == gk
        found += f
        right += r
    out = {"extraction": extraction(corpus, threshold), "found": found, "right": right}
    out["categorization"] = categorization(pairs) if pairs else None
    return out


def discordant(a, b):
    return sum(1 for x, y in zip(a, b) if x and not y), sum(1 for x, y in zip(a, b) if y and not x)


def fixture():
    gold = load_jsonl(ROOT / "data/eval/gold.jsonl")
    models = [("Our Model", load_jsonl(ROOT / "data/eval/pred_agent.jsonl")),
              ("Baseline", load_jsonl(ROOT / "data/eval/pred_baseline.jsonl"))]
    out = []
    for t in (80.0, 90.0):
        evals = [(name, model_eval(gold, pred, t)) for name, pred in models]
        ref = evals[0][1]
        row = {"threshold": t, "models": []}
        for name, e in evals:
            entry = {"name": name, "extraction": e["extraction"], "categorization": e["categorization"]}
            if e is not ref:
                entry["extraction_p"] = mcnemar(*discordant(ref["found"], e["found"]))
                entry["categorization_p"] = (mcnemar(*discordant(ref["right"], e["right"]))
                                             if e["categorization"] else None)
            row["models"].append(entry)
        out.append(row)
    return out


def rubric():
    rows = [line.split(",") for line in (ROOT / "data/eval/rubric.csv").read_text().splitlines()[1:] if line]
    groups = {}
    for _, _, group, acc, struct in rows:
        groups.setdefault(group, []).append((int(acc), int(struct)))
    pooled = [v for g in groups.values() for v in g]
    mean = lambda vals, i: float(Fraction(sum(v[i] for v in vals), len(vals)))
    return {"groups": {g: {"accuracy": mean(v, 0), "structure": mean(v, 1)} for g, v in groups.items()},
            "pooled": {"accuracy": mean(pooled, 0), "structure": mean(pooled, 1)}}


def main():
    derived = {
        "lev_opacity_opacities": lev("opacity", "opacities"),
        "sim_opacity_opacities": similarity("opacity", "opacities"),
        "sim_no_effusion": similarity("no effusion", "absence of effusion"),
        "two_report_example": extraction([(["a", "b"], ["a"]), (["c"], ["c", "b"])], 80.0),
        "categorization_example": categorization([("B", "B"), ("C", "B"), ("F", "F")]),
        "mcnemar_1_9": mcnemar(1, 9),
        "mcnemar_40_60": mcnemar(40, 60),
    }
    json.dump({"derived": derived, "fixture": fixture(), "rubric": rubric()}, sys.stdout, indent=1)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
