"""Data model and ingestion: posts, news articles, day windows, vocabulary.

Posts and news arrive as JSONL with a strict schema (unknown or missing
fields are rejected so upstream pipeline drift fails loudly). Entities and
segmented hashtags are ingestion inputs produced by external tooling; this
module never computes them.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

PAD, UNK, BOS, EOS = 0, 1, 2, 3
RESERVED_TOKENS = ("<pad>", "<unk>", "<bos>", "<eos>")


class ParseError(ValueError):
    """A record line could not be parsed or violates the schema."""


class ValidationError(ValueError):
    """Structurally valid input that breaks a data invariant."""


@dataclass(frozen=True)
class Entity:
    """A pre-extracted named entity as a lowercased token sequence."""

    tokens: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.tokens:
            raise ValidationError("entity has no tokens")
        for t in self.tokens:
            if not t or any(c.isspace() for c in t):
                raise ValidationError(f"entity token {t!r} is empty or has whitespace")


@dataclass(frozen=True)
class Post:
    id: str
    day: int
    tokens: tuple[str, ...]
    entities: tuple[Entity, ...]
    hashtags: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        if not self.tokens:
            raise ValidationError(f"post {self.id!r} has no tokens")
        if self.day < 0:
            raise ValidationError(f"post {self.id!r} has negative day {self.day}")
        for tag in self.hashtags:
            if not tag:
                raise ValidationError(f"post {self.id!r} has an empty hashtag")


@dataclass(frozen=True)
class NewsArticle:
    id: str
    day: int
    tokens: tuple[str, ...]
    entities: tuple[Entity, ...]

    def __post_init__(self) -> None:
        if not self.tokens:
            raise ValidationError(f"article {self.id!r} has no tokens")
        if self.day < 0:
            raise ValidationError(f"article {self.id!r} has negative day {self.day}")


@dataclass(frozen=True)
class WindowSeries:
    """Nested day windows: windows[i-1] holds ids of articles from the i days
    up to and including the post day, so each window contains the previous one."""

    windows: tuple[frozenset[str], ...]
    post_day: int


@dataclass(frozen=True)
class BackgroundCorpus:
    """A fixed-size random sample of article ids, independent of post time."""

    article_ids: frozenset[str]
    seed: int


_POST_FIELDS = ("id", "day", "tokens", "entities", "hashtags")
_NEWS_FIELDS = ("id", "day", "tokens", "entities")


def _parse_token_list(raw: object, what: str) -> tuple[str, ...]:
    if not isinstance(raw, list) or not all(isinstance(t, str) for t in raw):
        raise ParseError(f"{what} must be a list of strings")
    return tuple(t.lower() for t in raw)


def _parse_record(line: str, lineno: int, fields: tuple[str, ...]) -> dict:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {lineno}: invalid JSON: {exc}") from None
    if not isinstance(rec, dict):
        raise ParseError(f"line {lineno}: record is not an object")
    unknown = set(rec) - set(fields)
    missing = set(fields) - set(rec)
    if unknown:
        raise ParseError(f"line {lineno}: unknown fields {sorted(unknown)}")
    if missing:
        raise ParseError(f"line {lineno}: missing fields {sorted(missing)}")
    if not isinstance(rec["id"], str):
        raise ParseError(f"line {lineno}: id must be a string")
    if not isinstance(rec["day"], int) or isinstance(rec["day"], bool):
        raise ParseError(f"line {lineno}: day must be an integer")
    return rec


def _parse_entities(raw: object, lineno: int) -> tuple[Entity, ...]:
    if not isinstance(raw, list):
        raise ParseError(f"line {lineno}: entities must be a list")
    out = []
    for ent in raw:
        try:
            out.append(Entity(_parse_token_list(ent, "entity")))
        except (ParseError, ValidationError) as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
    return tuple(out)


def load_posts(path: str) -> list[Post]:
    """Read a JSONL posts file, in file order. Duplicate ids are rejected."""
    posts: list[Post] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                raise ParseError(f"line {lineno}: blank line")
            rec = _parse_record(line, lineno, _POST_FIELDS)
            if not isinstance(rec["hashtags"], list):
                raise ParseError(f"line {lineno}: hashtags must be a list")
            try:
                hashtags = tuple(
                    _parse_token_list(tag, "hashtag") for tag in rec["hashtags"]
                )
                post = Post(
                    id=rec["id"],
                    day=rec["day"],
                    tokens=_parse_token_list(rec["tokens"], "tokens"),
                    entities=_parse_entities(rec["entities"], lineno),
                    hashtags=hashtags,
                )
            except (ParseError, ValidationError) as exc:
                raise ParseError(f"line {lineno}: {exc}") from None
            if post.id in seen:
                raise ValidationError(f"line {lineno}: duplicate post id {post.id!r}")
            seen.add(post.id)
            posts.append(post)
    return posts


def load_news(path: str) -> list[NewsArticle]:
    """Read a JSONL news file, in file order. Duplicate ids are rejected."""
    articles: list[NewsArticle] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                raise ParseError(f"line {lineno}: blank line")
            rec = _parse_record(line, lineno, _NEWS_FIELDS)
            try:
                article = NewsArticle(
                    id=rec["id"],
                    day=rec["day"],
                    tokens=_parse_token_list(rec["tokens"], "tokens"),
                    entities=_parse_entities(rec["entities"], lineno),
                )
            except (ParseError, ValidationError) as exc:
                raise ParseError(f"line {lineno}: {exc}") from None
            if article.id in seen:
                raise ValidationError(f"line {lineno}: duplicate article id {article.id!r}")
            seen.add(article.id)
            articles.append(article)
    return articles


def post_to_record(post: Post) -> str:
    """Canonical single-line JSON for a post; stable across load/serialize cycles."""
    rec = {
        "id": post.id,
        "day": post.day,
        "tokens": list(post.tokens),
        "entities": [list(e.tokens) for e in post.entities],
        "hashtags": [list(t) for t in post.hashtags],
    }
    return json.dumps(rec, ensure_ascii=False, separators=(",", ":"))


def news_to_record(article: NewsArticle) -> str:
    rec = {
        "id": article.id,
        "day": article.day,
        "tokens": list(article.tokens),
        "entities": [list(e.tokens) for e in article.entities],
    }
    return json.dumps(rec, ensure_ascii=False, separators=(",", ":"))


def build_windows(news: Sequence[NewsArticle], post_day: int, k: int) -> WindowSeries:
    """Nested windows for a post day: window i covers days [post_day-i, post_day]."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if post_day < 0:
        raise ValueError(f"post_day must be >= 0, got {post_day}")
    windows = []
    for i in range(1, k + 1):
        lo = post_day - i
        windows.append(
            frozenset(a.id for a in news if lo <= a.day <= post_day)
        )
    return WindowSeries(windows=tuple(windows), post_day=post_day)


def sample_background(
    news: Sequence[NewsArticle], size: int, seed: int
) -> BackgroundCorpus:
    """Uniform sample without replacement of min(size, len(news)) article ids.

    A pure function of the sorted id set, size, and seed.
    """
    if size < 1:
        raise ValueError(f"size must be >= 1, got {size}")
    ids = sorted(a.id for a in news)
    take = min(size, len(ids))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(ids), size=take, replace=False) if ids else []
    return BackgroundCorpus(
        article_ids=frozenset(ids[i] for i in chosen), seed=seed
    )


@dataclass
class Vocabulary:
    """Token/id maps with fixed reserved ids 0..3 for PAD, UNK, BOS, EOS."""

    token_to_id: dict[str, int] = field(default_factory=dict)
    id_to_token: dict[int, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.token_to_id:
            for i, tok in enumerate(RESERVED_TOKENS):
                self.token_to_id[tok] = i
                self.id_to_token[i] = tok

    def __len__(self) -> int:
        return len(self.token_to_id)

    def add(self, token: str) -> int:
        if token in self.token_to_id:
            return self.token_to_id[token]
        idx = len(self.token_to_id)
        self.token_to_id[token] = idx
        self.id_to_token[idx] = token
        return idx

    def lookup(self, token: str) -> int:
        return self.token_to_id.get(token, UNK)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.lookup(t) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.id_to_token[i] for i in ids]

    def word_tokens(self) -> list[str]:
        """Non-reserved tokens in id order, for serialization."""
        return [self.id_to_token[i] for i in range(len(RESERVED_TOKENS), len(self))]

    @classmethod
    def from_word_tokens(cls, tokens: Sequence[str]) -> "Vocabulary":
        vocab = cls()
        for tok in tokens:
            vocab.add(tok)
        return vocab


def build_vocab(
    posts: Sequence[Post],
    context_token_sources: Iterable[Sequence[str]],
    min_freq: int = 1,
) -> Vocabulary:
    """Count post tokens, hashtag words, and context tokens; keep tokens with
    frequency >= min_freq, ordered by (frequency desc, token asc)."""
    if min_freq < 1:
        raise ValueError(f"min_freq must be >= 1, got {min_freq}")
    counts: Counter[str] = Counter()
    for post in posts:
        counts.update(post.tokens)
        for tag in post.hashtags:
            counts.update(tag)
    for tokens in context_token_sources:
        counts.update(tokens)
    vocab = Vocabulary()
    kept = [(tok, n) for tok, n in counts.items() if n >= min_freq]
    kept.sort(key=lambda item: (-item[1], item[0]))
    for tok, _ in kept:
        vocab.add(tok)
    return vocab


def article_index(news: Sequence[NewsArticle]) -> Mapping[str, NewsArticle]:
    return {a.id: a for a in news}
