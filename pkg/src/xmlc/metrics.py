"""Evaluation measures and missing-label-aware optimization surrogates.

Macro Fscore averages per-label F1 over the labels occurring in the gold
set only; a label that is predicted but never gold contributes false
positives without joining the mean.  The surrogate variants repair this
blind spot by charging those false positives against the score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence


@dataclass(frozen=True)
class EvalPair:
    """Predicted and gold labelsets per document.

    Only documents present in gold are evaluated; extra predicted
    documents are ignored.
    """

    predictions: Mapping[int, frozenset[int]]
    gold: Mapping[int, frozenset[int]]


class SurrogateVariant(Enum):
    MAFS = "mafs"
    MAFS2 = "mafs2"
    MAFS3 = "mafs3"


_DEFAULT_RHO = {SurrogateVariant.MAFS: 0.0, SurrogateVariant.MAFS2: 0.5, SurrogateVariant.MAFS3: 1.0}


@dataclass(frozen=True)
class SurrogateConfig:
    variant: SurrogateVariant = SurrogateVariant.MAFS2
    missing_label_penalty: float | None = None

    @property
    def rho(self) -> float:
        if self.missing_label_penalty is not None:
            if self.missing_label_penalty < 0:
                raise ValueError("missing_label_penalty must be >= 0")
            return self.missing_label_penalty
        return _DEFAULT_RHO[self.variant]


def f1_from_counts(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def _gold_label_union(pair: EvalPair) -> set[int]:
    labels: set[int] = set()
    for gold in pair.gold.values():
        labels |= gold
    return labels


def macro_fscore(pair: EvalPair) -> float:
    """Mean per-label F1 over labels occurring in gold."""
    if not pair.gold:
        raise ValueError("gold set is empty")
    labels = _gold_label_union(pair)
    if not labels:
        raise ValueError("gold set has no labels")
    tp: dict[int, int] = {}
    fp: dict[int, int] = {}
    fn: dict[int, int] = {}
    for doc, gold in pair.gold.items():
        pred = pair.predictions.get(doc, frozenset())
        for l in pred & gold:
            tp[l] = tp.get(l, 0) + 1
        for l in pred - gold:
            if l in labels:
                fp[l] = fp.get(l, 0) + 1
        for l in gold - pred:
            fn[l] = fn.get(l, 0) + 1
    total = sum(
        f1_from_counts(tp.get(l, 0), fp.get(l, 0), fn.get(l, 0)) for l in labels
    )
    return total / len(labels)


def micro_fscore(pair: EvalPair) -> float:
    """F1 of (doc, label) counts pooled over all documents in gold."""
    if not pair.gold:
        raise ValueError("gold set is empty")
    tp = fp = fn = 0
    for doc, gold in pair.gold.items():
        pred = pair.predictions.get(doc, frozenset())
        tp += len(pred & gold)
        fp += len(pred - gold)
        fn += len(gold - pred)
    return f1_from_counts(tp, fp, fn)


def mean_jaccard(pair: EvalPair) -> float:
    """Mean over documents of |P∩G|/|P∪G|, with 1 for two empty sets."""
    if not pair.gold:
        raise ValueError("gold set is empty")
    total = 0.0
    for doc, gold in pair.gold.items():
        pred = pair.predictions.get(doc, frozenset())
        union = pred | gold
        total += len(pred & gold) / len(union) if union else 1.0
    return total / len(pair.gold)


def ndcg_at_5(
    ranked: Mapping[int, Sequence[int]], gold: Mapping[int, frozenset[int]]
) -> float:
    """Binary-relevance NDCG at cutoff 5; empty-gold documents skipped."""
    total = 0.0
    n = 0
    for doc, gold_labels in gold.items():
        if not gold_labels:
            continue
        n += 1
        dcg = 0.0
        for r, label in enumerate(ranked.get(doc, ())[:5], start=1):
            if label in gold_labels:
                dcg += 1.0 / math.log2(r + 1)
        ideal = sum(1.0 / math.log2(r + 1) for r in range(1, min(5, len(gold_labels)) + 1))
        total += dcg / ideal
    return total / n if n else 0.0


def surrogate_mafs(
    pair: EvalPair, full_label_universe: set[int], cfg: SurrogateConfig
) -> float:
    """Macro Fscore minus a penalty for predictions on labels that never
    occur in gold: ρ · (false positives on missing labels) / |universe|,
    clamped to [0, 1]."""
    base = macro_fscore(pair)
    if cfg.variant is SurrogateVariant.MAFS:
        return base
    gold_labels = _gold_label_union(pair)
    if not full_label_universe >= gold_labels:
        raise ValueError("label universe must contain all gold labels")
    missing_fp = 0
    for doc in pair.gold:
        pred = pair.predictions.get(doc, frozenset())
        missing_fp += sum(1 for l in pred if l not in gold_labels)
    penalty = cfg.rho * missing_fp / len(full_label_universe)
    return min(1.0, max(0.0, base - penalty))


def average_precision(ranked: Sequence[int], gold: frozenset[int]) -> float:
    """Mean of precision@k at each relevant rank, over |gold|."""
    if not gold:
        return 0.0
    hits = 0
    total = 0.0
    for k, item in enumerate(ranked, start=1):
        if item in gold:
            hits += 1
            total += hits / k
    return total / len(gold)
