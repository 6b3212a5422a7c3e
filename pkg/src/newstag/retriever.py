"""Time-aware entity-focused news ranking and context-word construction.

For each post, nested day windows are scored with a BM25-style function
whose per-entity weight is the temporal popularity: the ratio of an
entity's background IDF to its IDF in the recent window. An entity that is
suddenly document-frequent in recent news gets a weight above one. The
plain-IDF variant of the same kernel backs the no-ranking ablation.

One article is taken per window, excluding everything already selected, and
context words are the highest-weighted non-stopword tokens across the
selected articles, weighted by score * in-article frequency.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

from .corpus import BackgroundCorpus, Entity, NewsArticle, Post, WindowSeries
from .entity_match import AlignmentParams, has_strict_match, soft_idf, soft_tf
from .stopwords import ENGLISH_STOPWORDS


@dataclass(frozen=True)
class RankingParams:
    """BM25-style knobs plus window count, context size, and the floor for
    normalized local weights."""

    a: float = 1.2
    b: float = 0.75
    k: int = 5
    context_size: int = 100
    weight_floor: float = 0.05

    def __post_init__(self) -> None:
        if self.a <= 0:
            raise ValueError("a must be positive")
        if not 0 <= self.b <= 1:
            raise ValueError("b must be in [0, 1]")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.context_size < 1:
            raise ValueError("context_size must be >= 1")
        if not 0 < self.weight_floor <= 1:
            raise ValueError("weight_floor must be in (0, 1]")


@dataclass(frozen=True)
class RetrievedItem:
    article_id: str
    score: float
    window: int


@dataclass(frozen=True)
class RetrievedSet:
    items: tuple[RetrievedItem, ...]


@dataclass(frozen=True)
class ContextBundle:
    """Context words ordered by raw weight descending (ties lexicographic),
    with weights normalized by the max and floored."""

    tokens: tuple[str, ...]
    raw_weights: tuple[float, ...]
    norm_weights: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.tokens)


def _bm25_term(tf: int, weight: float, doc_len: int, avg_len: float, params: RankingParams) -> float:
    if tf == 0:
        return 0.0
    return weight * (tf * (params.a + 1)) / (
        tf + params.a * (1 - params.b + params.b * doc_len / avg_len)
    )


def temporal_popularity(
    e: Entity,
    window: Sequence[NewsArticle],
    background: Sequence[NewsArticle],
    align_params: AlignmentParams,
) -> float:
    """Background IDF over recent-window IDF; above 1 means the entity is
    relatively more document-frequent in the recent window."""
    return soft_idf(e, background, align_params) / soft_idf(e, window, align_params)


def score(
    post: Post,
    article: NewsArticle,
    window: Sequence[NewsArticle],
    background: Sequence[NewsArticle],
    params: RankingParams,
    align_params: AlignmentParams,
    use_temporal: bool = True,
) -> float:
    """Ranking score of one article within one window.

    Sums, over post entities, the entity weight (temporal popularity, or the
    window IDF when use_temporal is off) times a BM25 saturation term over
    the soft term frequency.
    """
    if all(a.id != article.id for a in window):
        raise ValueError(f"article {article.id!r} is not in the window")
    if not post.entities:
        return 0.0
    avg_len = sum(len(a.tokens) for a in window) / len(window)
    total = 0.0
    for e in post.entities:
        tf = soft_tf(e, article, align_params)
        if use_temporal:
            weight = temporal_popularity(e, window, background, align_params)
        else:
            weight = soft_idf(e, window, align_params)
        total += _bm25_term(tf, weight, len(article.tokens), avg_len, params)
    return total


def retrieve(
    post: Post,
    windows: WindowSeries,
    background: Sequence[NewsArticle],
    articles: Mapping[str, NewsArticle],
    params: RankingParams,
    align_params: AlignmentParams,
    use_temporal: bool = True,
) -> RetrievedSet:
    """Pick the best-scoring article per window, never reusing an article.

    Windows whose remaining candidates all score zero contribute nothing.
    Ties break by article id. Per-article entity statistics are computed once
    across the union window and reused for every window.
    """
    entities = post.entities
    union_ids = sorted(windows.windows[-1]) if windows.windows else []
    stats: dict[str, tuple[list[int], list[bool]]] = {}
    for aid in union_ids:
        d = articles[aid]
        tfs = [soft_tf(e, d, align_params) for e in entities]
        present = [has_strict_match(e, d, align_params) for e in entities]
        stats[aid] = (tfs, present)
    bg_idfs = [soft_idf(e, background, align_params) for e in entities]

    chosen: list[RetrievedItem] = []
    taken: set[str] = set()
    for i, window_ids in enumerate(windows.windows, start=1):
        members = sorted(window_ids)
        if not members:
            continue
        n = len(members)
        avg_len = sum(len(articles[aid].tokens) for aid in members) / n
        weights = []
        for j, _e in enumerate(entities):
            df = sum(1 for aid in members if stats[aid][1][j])
            idf = math.log((n + 1) / (df + 1)) + 1.0
            weights.append(bg_idfs[j] / idf if use_temporal else idf)
        best_id = None
        best_score = 0.0
        for aid in members:  # ascending id order makes ties lexicographic
            if aid in taken:
                continue
            tfs = stats[aid][0]
            s = 0.0
            doc_len = len(articles[aid].tokens)
            for j in range(len(entities)):
                s += _bm25_term(tfs[j], weights[j], doc_len, avg_len, params)
            if s > best_score:
                best_id = aid
                best_score = s
        if best_id is not None and best_score > 0.0:
            chosen.append(RetrievedItem(article_id=best_id, score=best_score, window=i))
            taken.add(best_id)
    return RetrievedSet(items=tuple(chosen))


def build_context(
    post: Post,
    retrieved: RetrievedSet,
    articles: Mapping[str, NewsArticle],
    params: RankingParams,
    stopwords: frozenset[str] = ENGLISH_STOPWORDS,
) -> ContextBundle:
    """Context words with weight = sum over retrieved articles of
    score * raw token frequency, keeping the top context_size."""
    weights: dict[str, float] = {}
    for item in retrieved.items:
        article = articles[item.article_id]
        freqs = Counter(article.tokens)
        for token, freq in freqs.items():
            if token in stopwords:
                continue
            weights[token] = weights.get(token, 0.0) + item.score * freq
    ranked = [(tok, w) for tok, w in weights.items() if w > 0.0]
    if not ranked:
        return ContextBundle(tokens=(), raw_weights=(), norm_weights=())
    ranked.sort(key=lambda item: (-item[1], item[0]))
    ranked = ranked[: params.context_size]
    max_w = ranked[0][1]
    tokens = tuple(tok for tok, _ in ranked)
    raw = tuple(w for _, w in ranked)
    norm = tuple(max(w / max_w, params.weight_floor) for w in raw)
    return ContextBundle(tokens=tokens, raw_weights=raw, norm_weights=norm)
