"""Challenge-set gender metrics and a self-contained corpus BLEU."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .corpus import ChallengeItem, FEM, Lexicon, MASC
from .errors import InvalidArgument

UNKNOWN = "Unknown"


def classify_gender(
    hypothesis: Sequence[str], item: ChallengeItem, lexicon: Lexicon
) -> str:
    """Grammatical gender of the item's primary entity in `hypothesis`.

    Checks which gendered forms of the profession occur in the hypothesis:
    only the masculine form -> M, only the feminine -> F, neither or both ->
    Unknown.
    """
    entry = lexicon.entry(item.profession)
    toks = set(hypothesis)
    has_m = entry.masc in toks
    has_f = entry.fem in toks
    if has_m and not has_f:
        return MASC
    if has_f and not has_m:
        return FEM
    return UNKNOWN


@dataclass
class MetricsReport:
    accuracy: float
    delta_g: float
    delta_s: float
    m_f: float  # math.inf when no feminine predictions
    m_f_infinite: bool
    n: int
    unknown: int
    cells: dict[str, dict[str, int]]
    bleu: float | None = None

    def to_dict(self) -> dict:
        return {
            "bleu": self.bleu,
            "accuracy": self.accuracy,
            "delta_g": self.delta_g,
            "delta_s": self.delta_s,
            "m_f": "inf" if self.m_f_infinite else self.m_f,
            "n": self.n,
            "unknown": self.unknown,
            "cells": self.cells,
        }


def _f1(correct: int, predicted: int, gold: int) -> float:
    if predicted == 0 or gold == 0 or correct == 0:
        return 0.0
    precision = correct / predicted
    recall = correct / gold
    return 2 * precision * recall / (precision + recall)


def challenge_metrics(
    predictions: Sequence[str], items: Sequence[ChallengeItem]
) -> MetricsReport:
    """Accuracy, masculine/feminine F1 gap, pro/anti accuracy gap, and M:F
    prediction ratio over a challenge set.

    Unknown predictions are never correct, count toward no predicted gender
    class, and are excluded from the M:F ratio.
    """
    if len(predictions) != len(items):
        raise InvalidArgument("predictions and items must have equal length")
    n = len(items)
    cells = {
        f"{g}_{c}": {"correct": 0, "incorrect": 0, "unknown": 0}
        for g in (MASC, FEM) for c in ("pro", "anti")
    }
    correct_by_gold = Counter()
    gold_counts = Counter()
    pred_counts = Counter()
    by_class_total = Counter()
    by_class_correct = Counter()
    for pred, item in zip(predictions, items):
        cell = cells[f"{item.gold}_{item.stereotype_class}"]
        gold_counts[item.gold] += 1
        by_class_total[item.stereotype_class] += 1
        if pred == UNKNOWN:
            cell["unknown"] += 1
            continue
        pred_counts[pred] += 1
        if pred == item.gold:
            cell["correct"] += 1
            correct_by_gold[item.gold] += 1
            by_class_correct[item.stereotype_class] += 1
        else:
            cell["incorrect"] += 1
    n_correct = sum(correct_by_gold.values())
    accuracy = 100.0 * n_correct / n
    f1_m = _f1(correct_by_gold[MASC], pred_counts[MASC], gold_counts[MASC])
    f1_f = _f1(correct_by_gold[FEM], pred_counts[FEM], gold_counts[FEM])
    delta_g = 100.0 * (f1_m - f1_f)

    def class_acc(cls: str) -> float:
        total = by_class_total[cls]
        return 100.0 * by_class_correct[cls] / total if total else 0.0

    delta_s = class_acc("pro") - class_acc("anti")
    if pred_counts[FEM] == 0:
        m_f, m_f_infinite = math.inf, True
    else:
        m_f, m_f_infinite = pred_counts[MASC] / pred_counts[FEM], False
    unknown = sum(cell["unknown"] for cell in cells.values())
    return MetricsReport(
        accuracy=accuracy,
        delta_g=delta_g,
        delta_s=delta_s,
        m_f=m_f,
        m_f_infinite=m_f_infinite,
        n=n,
        unknown=unknown,
        cells=cells,
    )


def corpus_bleu(
    hypotheses: Sequence[Sequence[str]], references: Sequence[Sequence[str]]
) -> float:
    """Corpus-level BLEU in [0, 100]: geometric mean of pooled modified
    1..4-gram precisions times the brevity penalty. No smoothing; any zero
    pooled precision gives 0."""
    if len(hypotheses) != len(references) or not hypotheses:
        raise InvalidArgument("need equal, nonzero hypothesis/reference counts")
    matches = [0] * 4
    totals = [0] * 4
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp = list(hyp)
        ref = list(ref)
        hyp_len += len(hyp)
        ref_len += len(ref)
        for k in range(4):
            order = k + 1
            hyp_ngrams = Counter(
                tuple(hyp[i:i + order]) for i in range(len(hyp) - order + 1)
            )
            ref_ngrams = Counter(
                tuple(ref[i:i + order]) for i in range(len(ref) - order + 1)
            )
            totals[k] += sum(hyp_ngrams.values())
            matches[k] += sum(
                min(c, ref_ngrams[g]) for g, c in hyp_ngrams.items()
            )
    if any(t == 0 or m == 0 for m, t in zip(matches, totals)):
        return 0.0
    log_precision = sum(math.log(m / t) for m, t in zip(matches, totals)) / 4
    bp = min(1.0, math.exp(1.0 - ref_len / hyp_len)) if hyp_len > 0 else 0.0
    return 100.0 * bp * math.exp(log_precision)


def write_metrics(report: MetricsReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8"
    )


def read_metrics(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
