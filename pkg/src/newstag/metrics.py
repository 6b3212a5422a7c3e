"""Evaluation of ranked hashtag predictions against gold hashtag sets.

All matching is exact token-sequence equality after lowercasing, except
ROUGE-1 which measures clipped unigram overlap of the top prediction.
Aggregates are macro-averaged over posts. Predicted lists are deduplicated
(first occurrence kept) before scoring, and the precision denominator is
min(k, number of predictions) so a model emitting fewer than k hypotheses
is not penalized for the gap.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

HashtagSeq = tuple[str, ...]


@dataclass(frozen=True)
class EvalReport:
    f1_at_1: float
    f1_at_5: float
    f1_at_10: float
    acc: float
    map: float
    rg1: float
    n_posts: int


def _normalize(seqs: Sequence[Sequence[str]]) -> list[HashtagSeq]:
    """Lowercase and deduplicate, preserving rank order."""
    seen: set[HashtagSeq] = set()
    out: list[HashtagSeq] = []
    for seq in seqs:
        tag = tuple(w.lower() for w in seq)
        if tag in seen:
            continue
        seen.add(tag)
        out.append(tag)
    return out


def _gold_set(golds: Sequence[Sequence[str]]) -> set[HashtagSeq]:
    if not golds:
        raise ValueError("gold hashtag set must be nonempty")
    return {tuple(w.lower() for w in g) for g in golds}


def f1_at_k(
    preds: Sequence[Sequence[str]], golds: Sequence[Sequence[str]], k: int
) -> float:
    """Harmonic mean of precision (over min(k, |preds|)) and recall at rank k."""
    gold = _gold_set(golds)
    ranked = _normalize(preds)[:k]
    if not ranked:
        return 0.0
    correct = sum(1 for p in ranked if p in gold)
    precision = correct / min(k, len(_normalize(preds)))
    recall = correct / len(gold)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def accuracy_at_1(
    preds: Sequence[Sequence[str]], golds: Sequence[Sequence[str]]
) -> int:
    gold = _gold_set(golds)
    ranked = _normalize(preds)
    return int(bool(ranked) and ranked[0] in gold)


def map_at_5(preds: Sequence[Sequence[str]], golds: Sequence[Sequence[str]]) -> float:
    """Average precision over the top 5 ranks, normalized by min(5, |golds|)."""
    gold = _gold_set(golds)
    ranked = _normalize(preds)[:5]
    hits = 0
    ap = 0.0
    for rank, pred in enumerate(ranked, 1):
        if pred in gold:
            hits += 1
            ap += hits / rank
    return ap / min(5, len(gold))


def rouge1(pred: Sequence[str], golds: Sequence[Sequence[str]]) -> float:
    """Best clipped-unigram F1 of the top prediction against any gold."""
    if not golds:
        raise ValueError("gold hashtag set must be nonempty")
    pred_counts = Counter(w.lower() for w in pred)
    n_pred = sum(pred_counts.values())
    if n_pred == 0:
        return 0.0
    best = 0.0
    for gold in golds:
        gold_counts = Counter(w.lower() for w in gold)
        overlap = sum(min(c, gold_counts[w]) for w, c in pred_counts.items())
        if overlap == 0:
            continue
        precision = overlap / n_pred
        recall = overlap / sum(gold_counts.values())
        best = max(best, 2 * precision * recall / (precision + recall))
    return best


def evaluate(
    predictions: Mapping[str, Sequence[Sequence[str]]],
    golds: Mapping[str, Sequence[Sequence[str]]],
) -> EvalReport:
    """Macro-averaged report over posts; prediction and gold ids must align."""
    if set(predictions) != set(golds):
        missing = set(golds) ^ set(predictions)
        raise ValueError(f"prediction/gold post ids differ: {sorted(missing)[:5]}")
    if not golds:
        raise ValueError("nothing to evaluate")
    sums = {"f1_1": 0.0, "f1_5": 0.0, "f1_10": 0.0, "acc": 0.0, "map": 0.0, "rg1": 0.0}
    for post_id in golds:
        pred = predictions[post_id]
        gold = golds[post_id]
        sums["f1_1"] += f1_at_k(pred, gold, 1)
        sums["f1_5"] += f1_at_k(pred, gold, 5)
        sums["f1_10"] += f1_at_k(pred, gold, 10)
        sums["acc"] += accuracy_at_1(pred, gold)
        sums["map"] += map_at_5(pred, gold)
        ranked = _normalize(pred)
        sums["rg1"] += rouge1(ranked[0], gold) if ranked else 0.0
    n = len(golds)
    return EvalReport(
        f1_at_1=sums["f1_1"] / n,
        f1_at_5=sums["f1_5"] / n,
        f1_at_10=sums["f1_10"] / n,
        acc=sums["acc"] / n,
        map=sums["map"] / n,
        rg1=sums["rg1"] / n,
        n_posts=n,
    )
