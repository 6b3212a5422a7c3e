"""JSONL record formats passed between pipeline stages.

Context records are the retriever's output and the generator's
training-time input; prediction records are the generator's output and the
evaluator's input. Serialization is canonical (fixed key order, compact
separators) so identical runs produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import ParseError
from .retriever import ContextBundle, RetrievedSet


@dataclass(frozen=True)
class ContextRecord:
    post_id: str
    retrieved: tuple[tuple[str, float, int], ...]  # (article_id, score, window)
    tokens: tuple[str, ...]
    weights: tuple[float, ...]
    norm_weights: tuple[float, ...]


@dataclass(frozen=True)
class PredictionRecord:
    post_id: str
    hashtags: tuple[tuple[tuple[str, ...], float], ...]  # (words, score)


def context_record_line(
    post_id: str, retrieved: RetrievedSet, bundle: ContextBundle
) -> str:
    rec = {
        "post_id": post_id,
        "retrieved": [
            {"article_id": it.article_id, "score": it.score, "window": it.window}
            for it in retrieved.items
        ],
        "context": [
            {"token": tok, "weight": w, "norm_weight": nw}
            for tok, w, nw in zip(bundle.tokens, bundle.raw_weights, bundle.norm_weights)
        ],
    }
    return json.dumps(rec, ensure_ascii=False, separators=(",", ":"))


def load_context_records(path: str) -> list[ContextRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            try:
                rec = json.loads(line)
                records.append(
                    ContextRecord(
                        post_id=rec["post_id"],
                        retrieved=tuple(
                            (r["article_id"], float(r["score"]), int(r["window"]))
                            for r in rec["retrieved"]
                        ),
                        tokens=tuple(c["token"] for c in rec["context"]),
                        weights=tuple(float(c["weight"]) for c in rec["context"]),
                        norm_weights=tuple(
                            float(c["norm_weight"]) for c in rec["context"]
                        ),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"line {lineno}: bad context record: {exc}") from None
    return records


def prediction_record_line(
    post_id: str, hashtags: Sequence[tuple[Sequence[str], float]]
) -> str:
    rec = {
        "post_id": post_id,
        "hashtags": [
            {"words": list(words), "score": score} for words, score in hashtags
        ],
    }
    return json.dumps(rec, ensure_ascii=False, separators=(",", ":"))


def load_prediction_records(path: str) -> list[PredictionRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            try:
                rec = json.loads(line)
                records.append(
                    PredictionRecord(
                        post_id=rec["post_id"],
                        hashtags=tuple(
                            (tuple(h["words"]), float(h["score"]))
                            for h in rec["hashtags"]
                        ),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"line {lineno}: bad prediction record: {exc}") from None
    return records


def write_lines(path: str, lines: Iterable[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")
