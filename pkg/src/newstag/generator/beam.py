"""Beam-search and greedy hashtag decoding.

Hypotheses finish when they emit EOS or reach the configured maximum
length; the final ranking uses length-normalized log-probability so short
hashtags are not unfairly favored. PAD and BOS are never proposed, and EOS
is blocked on the first step so every hypothesis carries at least one
word. Unknown-word tokens may be generated but are dropped when sequences
are rendered to words; duplicates that appear after dropping keep their
best-ranked occurrence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .. import diffmath as dm
from ..corpus import BOS, EOS, PAD, UNK
from .model import HashtagGenerator


@dataclass(frozen=True)
class RankedSequence:
    token_ids: tuple[int, ...]
    log_prob: float
    score: float  # log_prob / length


class DecodeSession:
    """Precomputed memory and initial decoder states for one post (eval mode)."""

    __slots__ = ("model", "memory", "init_states")

    def __init__(
        self,
        model: HashtagGenerator,
        post_ids: Sequence[int],
        ctx_ids: Sequence[int],
        ctx_weights: np.ndarray | None,
    ):
        self.model = model
        with dm.no_grad():
            self.memory, states = model.build_memory(
                post_ids, ctx_ids, ctx_weights, training=False
            )
        self.init_states = tuple(states)

    def advance(
        self, states: tuple[dm.Tensor, ...], token_id: int
    ) -> tuple[tuple[dm.Tensor, ...], np.ndarray]:
        """One decoder step: next states and the next-token log-probability row."""
        with dm.no_grad():
            emb = dm.row(
                dm.embedding_lookup(self.model.params["embed"], [token_id]), 0
            )
            new_states, logits = self.model._decoder_step(emb, list(states), self.memory)
            logp = dm.log_softmax(logits, axis=0)
        return tuple(new_states), logp.data


def _masked(logp: np.ndarray, first_step: bool) -> np.ndarray:
    out = logp.copy()
    out[PAD] = -np.inf
    out[BOS] = -np.inf
    if first_step:
        out[EOS] = -np.inf
    return out


def beam_search_ids(
    model: HashtagGenerator,
    post_ids: Sequence[int],
    ctx_ids: Sequence[int],
    ctx_weights: np.ndarray | None,
    beam_size: int | None = None,
    max_len: int | None = None,
) -> list[RankedSequence]:
    """Raw token-id beam search, ranked by normalized log-prob descending
    with lexicographic id tie-breaks. Returns up to beam_size sequences."""
    beam = beam_size if beam_size is not None else model.config.beam_size
    limit = max_len if max_len is not None else model.config.max_gen_len
    if beam < 1:
        raise ValueError("beam size must be >= 1")
    session = DecodeSession(model, post_ids, ctx_ids, ctx_weights)

    alive: list[tuple[tuple[int, ...], float, tuple[dm.Tensor, ...]]] = [
        ((), 0.0, session.init_states)
    ]
    finished: list[tuple[tuple[int, ...], float]] = []
    for step in range(limit):
        candidates: list[tuple[tuple[int, ...], float, tuple[dm.Tensor, ...]]] = []
        for ids, lp, states in alive:
            prev = ids[-1] if ids else BOS
            new_states, logp = session.advance(states, prev)
            logp = _masked(logp, first_step=step == 0)
            order = np.lexsort((np.arange(logp.size), -logp))
            for tok in order[:beam]:
                tok = int(tok)
                if not np.isfinite(logp[tok]):
                    break
                if tok == EOS:
                    finished.append((ids, lp + float(logp[tok])))
                else:
                    candidates.append((ids + (tok,), lp + float(logp[tok]), new_states))
        candidates.sort(key=lambda c: (-c[1], c[0]))
        alive = candidates[:beam]
        if not alive:
            break
    finished.extend((ids, lp) for ids, lp, _ in alive)

    ranked = [
        RankedSequence(token_ids=ids, log_prob=lp, score=lp / len(ids))
        for ids, lp in finished
        if ids
    ]
    ranked.sort(key=lambda r: (-r.score, r.token_ids))
    return ranked[:beam]


def greedy_ids(
    model: HashtagGenerator,
    post_ids: Sequence[int],
    ctx_ids: Sequence[int],
    ctx_weights: np.ndarray | None,
    max_len: int | None = None,
) -> tuple[tuple[int, ...], float]:
    """Argmax decoding; stops on EOS or at max length."""
    limit = max_len if max_len is not None else model.config.max_gen_len
    session = DecodeSession(model, post_ids, ctx_ids, ctx_weights)
    states = session.init_states
    ids: tuple[int, ...] = ()
    lp = 0.0
    for step in range(limit):
        prev = ids[-1] if ids else BOS
        states, logp = session.advance(states, prev)
        logp = _masked(logp, first_step=step == 0)
        tok = int(np.argmax(logp))
        lp += float(logp[tok])
        if tok == EOS:
            break
        ids = ids + (tok,)
    return ids, lp


def beam_search(
    model: HashtagGenerator,
    post_ids: Sequence[int],
    ctx_ids: Sequence[int],
    ctx_weights: np.ndarray | None,
    beam_size: int | None = None,
    max_len: int | None = None,
) -> list[tuple[tuple[str, ...], float]]:
    """Ranked hashtag word sequences. UNK tokens are dropped from the words;
    empty results are discarded and duplicates keep their best rank."""
    ranked = beam_search_ids(model, post_ids, ctx_ids, ctx_weights, beam_size, max_len)
    seen: set[tuple[str, ...]] = set()
    out: list[tuple[tuple[str, ...], float]] = []
    for seq in ranked:
        words = tuple(
            model.vocab.id_to_token[i] for i in seq.token_ids if i != UNK
        )
        if not words or words in seen:
            continue
        seen.add(words)
        out.append((words, seq.score))
    return out
