#!/usr/bin/env python3
# Copyright 2026 The skillassess Authors
# SPDX-License-Identifier: Apache-2.0
"""Regenerates reference_scores.json from pairs.json.

Reference implementations: nltk.translate.bleu_score.sentence_bleu (uniform
4-gram weights, no smoothing) and rouge_score.rouge_scorer (rougeL, no
stemming). Both sides use the same tokenization as the C++ metrics:
lowercased alphanumeric runs. Scores are scaled by 100.
"""

import json
import pathlib
import re

import nltk
import rouge_score
from nltk.translate.bleu_score import corpus_bleu, sentence_bleu
from rouge_score import rouge_scorer

HERE = pathlib.Path(__file__).resolve().parent


def tokens(text):
    return re.findall(r"[a-z0-9]+", text.lower())


def main():
    pairs = json.loads((HERE / "pairs.json").read_text())
    scorer = rouge_scorer.RougeScorer(["rougeL"], use_stemmer=False)
    out = []
    all_refs, all_cands = [], []
    for p in pairs:
        cand = tokens(p["candidate"])
        refs = [tokens(r) for r in p["references"]]
        all_refs.append(refs)
        all_cands.append(cand)
        bleu = sentence_bleu(refs, cand, weights=(0.25, 0.25, 0.25, 0.25))
        rl = scorer.score(" ".join(refs[0]), " ".join(cand))["rougeL"].fmeasure
        out.append({
            "candidate": p["candidate"],
            "references": p["references"],
            "bleu4": round(100.0 * bleu, 4),
            "rouge_l": round(100.0 * rl, 4),
        })
    doc = {
        "provenance": {
            "generator": "make_fixture.py",
            "nltk": nltk.__version__,
            "rouge_score": getattr(rouge_score, "__version__", "unknown"),
            "tokenization": "lowercase [a-z0-9]+ runs",
            "bleu": "sentence_bleu, weights 0.25 x4, no smoothing, closest reference length",
            "rouge_l": "rougeL F-measure against the first reference, no stemming",
            "corpus_bleu4": "corpus_bleu over every pair, same weights",
        },
        "corpus_bleu4": round(100.0 * corpus_bleu(all_refs, all_cands, weights=(0.25, 0.25, 0.25, 0.25)), 4),
        "pairs": out,
    }
    (HERE / "reference_scores.json").write_text(json.dumps(doc, indent=1) + "\n")


if __name__ == "__main__":
    main()
