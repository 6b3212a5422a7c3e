"""Alignment and soft-matching tests, anchored by an independent DP oracle."""

import math
import string

import numpy as np
import pytest
from hypothesis import given, strategies as st

from newstag.corpus import Entity, NewsArticle
from newstag.entity_match import (
    AlignmentParams,
    MatchResult,
    align,
    match_sets,
    soft_idf,
    soft_tf,
    strict_match,
)

DEFAULTS = AlignmentParams()


def sw_oracle(a: str, b: str, match=2.0, mismatch=-1.0, gap=-1.0) -> float:
    """Full-matrix Smith-Waterman, written independently of the production
    rolling-row implementation."""
    n, m = len(a), len(b)
    h = [[0.0] * (m + 1) for _ in range(n + 1)]
    best = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            sub = h[i - 1][j - 1] + (match if a[i - 1] == b[j - 1] else mismatch)
            cell = max(0.0, sub, h[i - 1][j] + gap, h[i][j - 1] + gap)
            h[i][j] = cell
            if cell > best:
                best = cell
    return best / (match * min(n, m))


def article(*entity_surfaces: tuple[str, ...], aid="n", day=1) -> NewsArticle:
    return NewsArticle(
        id=aid,
        day=day,
        tokens=("filler",),
        entities=tuple(Entity(s) for s in entity_surfaces),
    )


class TestAlign:
    def test_identity(self):
        assert align("trump", "trump", DEFAULTS) == 1.0

    def test_one_substitution(self):
        # Best local path: "tr" match, u/a mismatch, "mp" match
        # = 2+2-1+2+2 = 7, normalized by 2*5.
        assert align("trump", "tramp", DEFAULTS) == pytest.approx(0.7, abs=0)
        assert align("trump", "tramp", DEFAULTS) == sw_oracle("trump", "tramp")

    def test_disjoint_characters(self):
        assert align("a", "zzzz", DEFAULTS) == 0.0

    def test_substring_scores_one(self):
        assert align("trump", "donaldtrump", DEFAULTS) == 1.0
        assert align("kavanaugh", "kavanaughs", DEFAULTS) == 1.0

    def test_non_substring_below_one(self):
        assert align("trump", "tramp", DEFAULTS) < 1.0

    def test_empty_token_rejected(self):
        with pytest.raises(ValueError):
            align("", "abc", DEFAULTS)
        with pytest.raises(ValueError):
            align("abc", "", DEFAULTS)

    def test_oracle_equivalence_seeded(self):
        rng = np.random.default_rng(7)
        letters = string.ascii_lowercase
        for _ in range(1000):
            a = "".join(letters[i] for i in rng.integers(0, 26, size=rng.integers(1, 13)))
            b = "".join(letters[i] for i in rng.integers(0, 26, size=rng.integers(1, 13)))
            assert align(a, b, DEFAULTS) == sw_oracle(a, b)

    @given(
        st.text(alphabet="abcdefgh", min_size=1, max_size=12),
        st.text(alphabet="abcdefgh", min_size=1, max_size=12),
    )
    def test_symmetric_and_bounded(self, a, b):
        s = align(a, b, DEFAULTS)
        assert s == align(b, a, DEFAULTS)
        assert 0.0 <= s <= 1.0

    @given(st.text(alphabet="abcdefgh", min_size=1, max_size=12))
    def test_self_alignment_is_one(self, a):
        assert align(a, a, DEFAULTS) == 1.0


class TestStrictMatch:
    def test_identical_entities(self):
        assert strict_match(Entity(("donald", "trump")), Entity(("donald", "trump")), DEFAULTS)

    def test_short_form_matches_long(self):
        # All tokens of the single-token post entity align into the longer one.
        assert strict_match(Entity(("trump",)), Entity(("donald", "trump")), DEFAULTS)

    def test_long_form_does_not_match_short(self):
        # Only 1 of 2 tokens aligns: 0.5 < q = 0.6.
        assert not strict_match(Entity(("donald", "trump")), Entity(("trump",)), DEFAULTS)

    def test_unrelated_entities(self):
        # No token pair reaches t=0.8: best alignments are single-char
        # matches (score 2 / (2*5) = 0.2).
        e_p = Entity(("barack", "obama"))
        e_d = Entity(("trump",))
        for tp in e_p.tokens:
            assert align(tp, "trump", DEFAULTS) < 0.8
        assert not strict_match(e_p, e_d, DEFAULTS)

    def test_raising_q_never_adds_matches(self):
        pairs = [
            (Entity(("donald", "trump")), Entity(("trump",))),
            (Entity(("trump",)), Entity(("donald", "trump"))),
            (Entity(("george", "floyd")), Entity(("floyd", "protests"))),
            (Entity(("nasa",)), Entity(("nasa",))),
        ]
        qs = [0.1, 0.3, 0.5, 0.6, 0.8, 1.0]
        for e_p, e_d in pairs:
            results = [
                strict_match(e_p, e_d, AlignmentParams(q=q)) for q in qs
            ]
            # once False at some q, it stays False for larger q
            assert results == sorted(results, reverse=True)


class TestMatchSets:
    def test_worked_example(self):
        # Post entity "donald trump"; news lists "donald trump" and "trump".
        # The long form is a strict match and the short form joins through it.
        d = article(("donald", "trump"), ("trump",))
        result = match_sets(Entity(("donald", "trump")), d, DEFAULTS)
        assert result == MatchResult(strict=frozenset({0}), soft=frozenset({0, 1}))
        assert soft_tf(Entity(("donald", "trump")), d, DEFAULTS) == 2

    def test_no_entities(self):
        d = NewsArticle(id="n", day=1, tokens=("x",), entities=())
        result = match_sets(Entity(("trump",)), d, DEFAULTS)
        assert result.strict == frozenset() and result.soft == frozenset()

    def test_saturation(self):
        d = article(("nasa",), ("nasa",), ("nasa",))
        result = match_sets(Entity(("nasa",)), d, DEFAULTS)
        assert result.strict == result.soft == frozenset({0, 1, 2})

    def test_occurrences_counted_not_deduplicated(self):
        d = article(("trump",), ("trump",), ("trump",))
        assert soft_tf(Entity(("trump",)), d, DEFAULTS) == 3

    def test_one_hop_only_no_transitive_closure(self):
        # Chain: post "abcd" strictly matches anchor "abcdefgh"; "efgh" joins
        # as a one-hop conditional match (substring of the anchor); "efghijkl"
        # strictly matches "efgh" but not the anchor (8/16 = 0.5 < t), so a
        # transitive closure would add it and the one-hop rule must not.
        anchor, hop1, hop2 = ("abcdefgh",), ("efgh",), ("efghijkl",)
        assert strict_match(Entity(hop2), Entity(hop1), DEFAULTS)
        assert not strict_match(Entity(hop2), Entity(anchor), DEFAULTS)
        d = article(anchor, hop1, hop2)
        result = match_sets(Entity(("abcd",)), d, DEFAULTS)
        assert result.strict == frozenset({0})
        assert result.soft == frozenset({0, 1})

    @given(st.integers(0, 2**31 - 1))
    def test_strict_subset_of_soft(self, seed):
        rng = np.random.default_rng(seed)
        surfaces = [("donald", "trump"), ("trump",), ("trumps",), ("floyd",),
                    ("george", "floyd"), ("nasa",)]
        n = int(rng.integers(0, 5))
        d = article(*(surfaces[int(rng.integers(len(surfaces)))] for _ in range(n)))
        e_p = Entity(surfaces[int(rng.integers(len(surfaces)))])
        result = match_sets(e_p, d, DEFAULTS)
        assert result.strict <= result.soft


class TestSoftIdf:
    def test_empty_corpus_floor(self):
        assert soft_idf(Entity(("trump",)), [], DEFAULTS) == 1.0

    def test_nine_docs_four_matching(self):
        matching = article(("trump",), aid="m")
        plain = NewsArticle(id="x", day=1, tokens=("y",), entities=())
        corpus = [matching] * 4 + [plain] * 5
        expected = math.log(10 / 5) + 1.0
        assert soft_idf(Entity(("trump",)), corpus, DEFAULTS) == pytest.approx(expected, abs=1e-12)

    def test_everywhere_entity_scores_exactly_one(self):
        corpus = [article(("nasa",), aid=f"n{i}") for i in range(7)]
        assert soft_idf(Entity(("nasa",)), corpus, DEFAULTS) == 1.0

    def test_monotone_in_df(self):
        scores = []
        for df in range(0, 9):
            corpus = [article(("nasa",), aid=f"m{i}") for i in range(df)]
            corpus += [
                NewsArticle(id=f"p{i}", day=1, tokens=("y",), entities=())
                for i in range(8 - df)
            ]
            scores.append(soft_idf(Entity(("nasa",)), corpus, DEFAULTS))
        assert all(a >= b for a, b in zip(scores, scores[1:]))
        assert all(s >= 1.0 for s in scores)
