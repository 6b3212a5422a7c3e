"""Ranking, retrieval-vs-oracle, and context construction tests."""

import math

import numpy as np
import pytest

from newstag.corpus import (
    Entity,
    NewsArticle,
    Post,
    build_windows,
)
from newstag.entity_match import AlignmentParams
from newstag.retriever import (
    ContextBundle,
    RankingParams,
    RetrievedItem,
    RetrievedSet,
    build_context,
    retrieve,
    score,
    temporal_popularity,
)
from synthdata import make_retrieval_corpus

ALIGN = AlignmentParams()
RANKING = RankingParams()


def plain_article(aid, day=10, tokens=("x",), entities=()):
    return NewsArticle(
        id=aid, day=day, tokens=tokens, entities=tuple(Entity(e) for e in entities)
    )


def oracle_retrieve(post, windows, background, index, ranking, align, use_temporal=True):
    """Exhaustive scoring of every (article, window) pair via the public
    score function, replaying the greedy exclusion rule with id tie-breaks."""
    taken = set()
    items = []
    for i, window_ids in enumerate(windows.windows, start=1):
        members = sorted(window_ids)
        window_articles = [index[a] for a in members]
        best_id, best_score = None, 0.0
        for aid in members:
            if aid in taken:
                continue
            s = score(post, index[aid], window_articles, background, ranking, align,
                      use_temporal=use_temporal)
            if s > best_score:
                best_id, best_score = aid, s
        if best_id is not None:
            items.append((best_id, best_score, i))
            taken.add(best_id)
    return items


class TestTemporalPopularity:
    def test_equal_corpora_give_one(self):
        docs = [plain_article("a", entities=(("nasa",),))]
        assert temporal_popularity(Entity(("nasa",)), docs, docs, ALIGN) == 1.0

    def test_background_only_entity(self):
        # |R|=9 with df 4, |D_i|=3 with df 0: (log 2 + 1) / (log 4 + 1).
        e = Entity(("nasa",))
        background = [plain_article(f"r{i}", entities=(("nasa",),)) for i in range(4)]
        background += [plain_article(f"q{i}") for i in range(5)]
        window = [plain_article(f"w{i}") for i in range(3)]
        expected = (math.log(2) + 1) / (math.log(4) + 1)
        got = temporal_popularity(e, window, background, ALIGN)
        assert got == pytest.approx(expected, abs=1e-12)

    def test_saturated_window_floor(self):
        e = Entity(("nasa",))
        window = [plain_article(f"w{i}", entities=(("nasa",),)) for i in range(4)]
        background = [plain_article(f"r{i}") for i in range(9)]
        got = temporal_popularity(e, window, background, ALIGN)
        assert got == pytest.approx(math.log(10) + 1, abs=1e-12)
        assert got > 1


class TestScore:
    def test_no_entities_scores_zero(self):
        article = plain_article("a", tokens=("x", "y"))
        post = Post(id="p", day=10, tokens=("t",), entities=(), hashtags=(("h",),))
        assert score(post, article, [article], [article], RANKING, ALIGN) == 0.0

    def test_closed_form_unit_score(self):
        # Single entity, tf=1, |d| equal to the window average, TP=1:
        # 1 * 1 * 2.2 / (1 + 1.2) = 1.
        article = plain_article("a", tokens=("x", "y", "z"), entities=(("nasa",),))
        post = Post(id="p", day=10, tokens=("t",), entities=(Entity(("nasa",)),),
                    hashtags=(("h",),))
        got = score(post, article, [article], [article], RANKING, ALIGN)
        assert got == pytest.approx(1.0, abs=1e-12)

    def test_saturation_toward_a_plus_one(self):
        post = Post(id="p", day=10, tokens=("t",), entities=(Entity(("nasa",)),),
                    hashtags=(("h",),))
        background = [plain_article("r", entities=(("nasa",),))]
        scores = []
        for tf in (1, 5, 50, 500):
            article = plain_article("a", tokens=("x",), entities=(("nasa",),) * tf)
            scores.append(score(post, article, [article], background, RANKING, ALIGN))
        assert scores == sorted(scores)
        assert scores[-1] < RANKING.a + 1
        assert scores[-1] > 0.99 * (RANKING.a + 1)

    def test_monotone_in_soft_tf(self):
        post = Post(id="p", day=10, tokens=("t",), entities=(Entity(("nasa",)),),
                    hashtags=(("h",),))
        prev = -1.0
        for tf in range(0, 8):
            window = [
                plain_article("a", tokens=("x", "y"), entities=(("nasa",),) * tf),
                plain_article("b", tokens=("x", "y"), entities=(("nasa",),)),
            ]
            got = score(post, window[0], window, window, RANKING, ALIGN)
            assert got >= prev
            prev = got

    def test_article_outside_window_rejected(self):
        inside = plain_article("a")
        outside = plain_article("b")
        post = Post(id="p", day=10, tokens=("t",), entities=(), hashtags=(("h",),))
        with pytest.raises(ValueError, match="not in the window"):
            score(post, outside, [inside], [inside], RANKING, ALIGN)

    def test_norank_is_plain_bm25_over_soft_counts(self):
        # With use_temporal off the per-entity weight must equal the window
        # IDF, i.e. standard BM25 with the revised term statistics.
        e = Entity(("nasa",))
        post = Post(id="p", day=10, tokens=("t",), entities=(e,), hashtags=(("h",),))
        window = [
            plain_article("a", tokens=("x", "y", "z", "w"), entities=(("nasa",), ("nasa",))),
            plain_article("b", tokens=("x", "y"), entities=()),
        ]
        background = [plain_article("r")]
        got = score(post, window[0], window, background, RANKING, ALIGN,
                    use_temporal=False)
        idf = math.log(3 / 2) + 1  # 2 docs, df 1
        tf, dlen, avg = 2, 4, 3.0
        expected = idf * tf * 2.2 / (tf + 1.2 * (1 - 0.75 + 0.75 * dlen / avg))
        assert got == pytest.approx(expected, abs=1e-12)


class TestRetrieve:
    def test_single_article_exhausts_pool(self):
        article = plain_article("a", day=10, entities=(("nasa",),))
        post = Post(id="p", day=10, tokens=("t",), entities=(Entity(("nasa",)),),
                    hashtags=(("h",),))
        windows = build_windows([article], post_day=10, k=2)
        result = retrieve(post, windows, [article], {"a": article}, RANKING, ALIGN)
        assert len(result.items) == 1
        assert result.items[0].article_id == "a"
        assert result.items[0].window == 1

    def test_zero_scores_contribute_nothing(self):
        article = plain_article("a", day=10)
        post = Post(id="p", day=10, tokens=("t",), entities=(Entity(("nasa",)),),
                    hashtags=(("h",),))
        windows = build_windows([article], post_day=10, k=3)
        result = retrieve(post, windows, [article], {"a": article}, RANKING, ALIGN)
        assert result.items == ()

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_oracle_on_synthetic_corpora(self, seed):
        post, news = make_retrieval_corpus(seed, n_docs=120)
        index = {a.id: a for a in news}
        windows = build_windows(news, post.day, k=4)
        background = [index[a] for a in sorted(index)][:40]
        for use_temporal in (True, False):
            got = retrieve(post, windows, background, index, RANKING, ALIGN,
                           use_temporal=use_temporal)
            expected = oracle_retrieve(post, windows, background, index, RANKING,
                                       ALIGN, use_temporal=use_temporal)
            assert [(i.article_id, i.score, i.window) for i in got.items] == expected

    def test_invariants_on_synthetic_corpus(self):
        post, news = make_retrieval_corpus(99, n_docs=150)
        index = {a.id: a for a in news}
        windows = build_windows(news, post.day, k=5)
        background = [index[a] for a in sorted(index)][:30]
        result = retrieve(post, windows, background, index, RANKING, ALIGN)
        ids = [i.article_id for i in result.items]
        assert len(ids) == len(set(ids))
        assert [i.window for i in result.items] == sorted(i.window for i in result.items)
        assert all(i.score > 0 for i in result.items)
        assert len(result.items) <= 5


class TestBuildContext:
    def fixture_articles(self):
        return {
            "a": plain_article("a", tokens=("floyd", "floyd", "protest")),
            "b": plain_article("b", tokens=("floyd", "march")),
            "c": plain_article("c", tokens=("floyd", "floyd", "floyd", "rally")),
        }

    def post(self):
        return Post(id="p", day=10, tokens=("t",), entities=(), hashtags=(("h",),))

    def test_single_article_weight(self):
        retrieved = RetrievedSet(items=(RetrievedItem("a", 3.0, 1),))
        bundle = build_context(self.post(), retrieved, self.fixture_articles(), RANKING)
        weights = dict(zip(bundle.tokens, bundle.raw_weights))
        assert weights["floyd"] == 6.0

    def test_weight_sums_across_articles(self):
        retrieved = RetrievedSet(
            items=(RetrievedItem("b", 2.0, 1), RetrievedItem("c", 5.0, 2))
        )
        bundle = build_context(self.post(), retrieved, self.fixture_articles(), RANKING)
        weights = dict(zip(bundle.tokens, bundle.raw_weights))
        assert weights["floyd"] == 17.0  # 2*1 + 5*3

    def test_empty_retrieval_yields_empty_bundle(self):
        bundle = build_context(self.post(), RetrievedSet(items=()), {}, RANKING)
        assert bundle == ContextBundle(tokens=(), raw_weights=(), norm_weights=())

    def test_zero_scores_yield_empty_bundle(self):
        retrieved = RetrievedSet(items=(RetrievedItem("a", 0.0, 1),))
        bundle = build_context(self.post(), retrieved, self.fixture_articles(), RANKING)
        assert len(bundle) == 0

    def test_stopwords_removed(self):
        articles = {"a": plain_article("a", tokens=("the", "and", "floyd"))}
        retrieved = RetrievedSet(items=(RetrievedItem("a", 1.0, 1),))
        bundle = build_context(self.post(), retrieved, articles, RANKING)
        assert bundle.tokens == ("floyd",)

    def test_ordering_weight_desc_then_lexicographic(self):
        articles = {
            "a": plain_article("a", tokens=("beta", "alpha", "gamma", "gamma"))
        }
        retrieved = RetrievedSet(items=(RetrievedItem("a", 1.0, 1),))
        bundle = build_context(self.post(), retrieved, articles, RANKING)
        assert bundle.tokens == ("gamma", "alpha", "beta")

    def test_norm_weights_floored(self):
        tokens = ("big",) * 40 + ("small",)
        articles = {"a": plain_article("a", tokens=tokens)}
        retrieved = RetrievedSet(items=(RetrievedItem("a", 1.0, 1),))
        bundle = build_context(self.post(), retrieved, articles, RANKING)
        norm = dict(zip(bundle.tokens, bundle.norm_weights))
        assert norm["big"] == 1.0
        assert norm["small"] == RANKING.weight_floor  # 1/40 < 0.05 floor

    def test_context_size_cap(self):
        tokens = tuple(f"tok{i:03d}" for i in range(30))
        articles = {"a": plain_article("a", tokens=tokens)}
        retrieved = RetrievedSet(items=(RetrievedItem("a", 1.0, 1),))
        params = RankingParams(context_size=10)
        bundle = build_context(self.post(), retrieved, articles, params)
        assert len(bundle) == 10
