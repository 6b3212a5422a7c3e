"""Soft matching between post entities and news entities.

Post entities are often shortened surface forms of what a news article
spells out in full ("trump" vs "donald trump"), so exact string equality
undercounts. Matching here works in three levels: character-level local
alignment between tokens, a token-coverage test between entities (strict
match), and a one-hop expansion through strictly matched entities from the
same article (conditional match). Document frequency for the IDF uses
strict matches only; term frequency counts the expanded soft set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .corpus import Entity, NewsArticle


@dataclass(frozen=True)
class AlignmentParams:
    """Scoring scheme for token alignment and entity-level thresholds.

    match_reward/mismatch_penalty/gap_penalty drive the local-alignment DP;
    t is the per-token alignment threshold and q the fraction of post-entity
    tokens that must clear it for a strict match.
    """

    match_reward: float = 2.0
    mismatch_penalty: float = -1.0
    gap_penalty: float = -1.0
    t: float = 0.8
    q: float = 0.6

    def __post_init__(self) -> None:
        if self.match_reward <= 0:
            raise ValueError("match_reward must be positive")
        if not 0 < self.t <= 1:
            raise ValueError("t must be in (0, 1]")
        if not 0 < self.q <= 1:
            raise ValueError("q must be in (0, 1]")


@dataclass(frozen=True)
class MatchResult:
    """Indices into a news article's entity sequence: strict is a subset of soft."""

    strict: frozenset[int]
    soft: frozenset[int]


@lru_cache(maxsize=1 << 18)
def _align_cached(
    a: str, b: str, match: float, mismatch: float, gap: float
) -> float:
    # Local alignment best score via a two-row DP; cells floor at zero.
    if len(a) < len(b):
        a, b = b, a
    prev = [0.0] * (len(b) + 1)
    best = 0.0
    for ca in a:
        cur = [0.0] * (len(b) + 1)
        for j, cb in enumerate(b, 1):
            diag = prev[j - 1] + (match if ca == cb else mismatch)
            score = diag
            up = prev[j] + gap
            if up > score:
                score = up
            left = cur[j - 1] + gap
            if left > score:
                score = left
            if score < 0.0:
                score = 0.0
            cur[j] = score
            if score > best:
                best = score
        prev = cur
    return best / (match * min(len(a), len(b)))


def align(token_a: str, token_b: str, params: AlignmentParams) -> float:
    """Character-level local-alignment score in [0, 1].

    Normalized by match_reward * min(len_a, len_b), so identical tokens and
    contiguous-substring pairs score exactly 1 under the default scheme.
    """
    if not token_a or not token_b:
        raise ValueError("align requires nonempty tokens")
    return _align_cached(
        token_a,
        token_b,
        params.match_reward,
        params.mismatch_penalty,
        params.gap_penalty,
    )


@lru_cache(maxsize=1 << 16)
def _strict_match_cached(
    e_p: tuple[str, ...], e_d: tuple[str, ...], params: AlignmentParams
) -> bool:
    matched = 0
    for tp in e_p:
        if any(
            _align_cached(
                tp, td, params.match_reward, params.mismatch_penalty, params.gap_penalty
            )
            >= params.t
            for td in e_d
        ):
            matched += 1
    return matched / len(e_p) >= params.q


def strict_match(e_p: Entity, e_d: Entity, params: AlignmentParams) -> bool:
    """True when at least a q-fraction of e_p's tokens align (score >= t)
    to some token of e_d. Repeated tokens count per occurrence."""
    return _strict_match_cached(e_p.tokens, e_d.tokens, params)


def match_sets(e_p: Entity, d: NewsArticle, params: AlignmentParams) -> MatchResult:
    """Strict matches of e_p among d's entities, plus the one-hop conditional
    expansion: any article entity that strictly matches a strictly matched one."""
    strict = frozenset(
        i for i, e_d in enumerate(d.entities) if strict_match(e_p, e_d, params)
    )
    soft = set(strict)
    if strict:
        anchors = [d.entities[i] for i in strict]
        for i, e_d in enumerate(d.entities):
            if i in soft:
                continue
            if any(strict_match(e_d, anchor, params) for anchor in anchors):
                soft.add(i)
    return MatchResult(strict=strict, soft=frozenset(soft))


def soft_tf(e_p: Entity, d: NewsArticle, params: AlignmentParams) -> int:
    """Occurrence count of article entities softly matched to e_p."""
    return len(match_sets(e_p, d, params).soft)


def has_strict_match(e_p: Entity, d: NewsArticle, params: AlignmentParams) -> bool:
    return any(strict_match(e_p, e_d, params) for e_d in d.entities)


def soft_idf(
    e_p: Entity, corpus: Sequence[NewsArticle], params: AlignmentParams
) -> float:
    """Smoothed inverse document frequency over strict-match presence.

    log((N + 1) / (df + 1)) + 1, which stays finite for df = 0 and strictly
    positive for df = N.
    """
    df = sum(1 for d in corpus if has_strict_match(e_p, d, params))
    return math.log((len(corpus) + 1) / (df + 1)) + 1.0


def clear_caches() -> None:
    """Drop alignment/match memoization (mainly for benchmarks and tests)."""
    _align_cached.cache_clear()
    _strict_match_cached.cache_clear()
