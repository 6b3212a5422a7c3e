"""Mini-batch training with Adam or SGD, lr decay on plateau, early stopping.

A post contributes one training pair per gold hashtag. Gradients are
averaged over the batch; the learning rate is multiplied by the decay
factor on every epoch whose monitored loss (validation when provided,
otherwise training) fails to improve, and training stops once the number
of consecutive non-improving epochs exceeds the patience.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .. import diffmath as dm
from ..corpus import Post, Vocabulary
from ..diffmath import Tensor
from .model import HashtagGenerator


@dataclass(frozen=True)
class TrainExample:
    post_id: str
    post_ids: tuple[int, ...]
    ctx_ids: tuple[int, ...]
    ctx_weights: tuple[float, ...]
    target_ids: tuple[int, ...]


@dataclass
class TrainResult:
    epoch_losses: list[float] = field(default_factory=list)
    lr_events: list[tuple[int, float, float]] = field(default_factory=list)
    stopped_epoch: int = 0
    early_stopped: bool = False


class SGD:
    def __init__(self, params: Mapping[str, Tensor], lr: float):
        self.params = params
        self.lr = lr

    def step(self) -> None:
        for p in self.params.values():
            if p.grad is not None:
                p.data -= self.lr * p.grad


class Adam:
    def __init__(
        self,
        params: Mapping[str, Tensor],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for key, p in self.params.items():
            if p.grad is None:
                continue
            m = self.m[key]
            v = self.v[key]
            m *= self.beta1
            m += (1.0 - self.beta1) * p.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * p.grad * p.grad
            p.data -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def make_optimizer(name: str, params: Mapping[str, Tensor], lr: float):
    if name == "adam":
        return Adam(params, lr)
    if name == "sgd":
        return SGD(params, lr)
    raise ValueError(f"unknown optimizer {name!r}")


def expand_examples(
    posts: Sequence[Post],
    contexts: Mapping[str, tuple[Sequence[str], Sequence[float]]],
    vocab: Vocabulary,
) -> list[TrainExample]:
    """One example per (post, gold hashtag); posts without hashtags are skipped.

    contexts maps post id to (context tokens, normalized weights); posts
    missing from it train with an empty context.
    """
    examples: list[TrainExample] = []
    for post in posts:
        ctx_tokens, ctx_weights = contexts.get(post.id, ((), ()))
        ctx_ids = tuple(vocab.encode(ctx_tokens))
        post_ids = tuple(vocab.encode(post.tokens))
        for tag in post.hashtags:
            examples.append(
                TrainExample(
                    post_id=post.id,
                    post_ids=post_ids,
                    ctx_ids=ctx_ids,
                    ctx_weights=tuple(float(w) for w in ctx_weights),
                    target_ids=tuple(vocab.encode(tag)),
                )
            )
    return examples


def _example_loss(model: HashtagGenerator, ex: TrainExample, training: bool) -> Tensor:
    weights = np.asarray(ex.ctx_weights) if ex.ctx_ids else None
    return model.decode_train(
        ex.post_ids, ex.ctx_ids, weights, ex.target_ids, training=training
    )


def dataset_loss(model: HashtagGenerator, examples: Sequence[TrainExample]) -> float:
    """Mean per-example loss with dropout off and no graph recording."""
    total = 0.0
    with dm.no_grad():
        for ex in examples:
            total += float(_example_loss(model, ex, training=False).data)
    return total / len(examples)


def train_model(
    model: HashtagGenerator,
    examples: Sequence[TrainExample],
    epochs: int,
    patience: int = 5,
    seed: int = 0,
    val_examples: Sequence[TrainExample] | None = None,
    log: Callable[[str], None] | None = None,
    stop_check: Callable[[int], bool] | None = None,
) -> TrainResult:
    """Optimize the model in place; returns the per-epoch loss trace.

    Deterministic for a fixed seed: batch shuffling and dropout both draw
    from generators seeded here. stop_check, when given, is consulted after
    each epoch and may end training early (used for overfitting runs that
    target a training-set accuracy).
    """
    if not examples:
        raise ValueError("empty training set")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    cfg = model.config
    shuffle_rng = np.random.default_rng(seed)
    model.dropout_rng = np.random.default_rng(seed + 1)
    opt = make_optimizer(cfg.optimizer, model.parameters(), cfg.learning_rate)
    result = TrainResult()
    best = np.inf
    bad_epochs = 0
    say = log or (lambda _msg: None)

    for epoch in range(1, epochs + 1):
        order = shuffle_rng.permutation(len(examples))
        epoch_total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            model.zero_grads()
            for idx in batch:
                loss = _example_loss(model, examples[idx], training=True)
                dm.backward(loss)
                epoch_total += float(loss.data)
            inv = 1.0 / len(batch)
            for p in model.params.values():
                if p.grad is not None:
                    p.grad *= inv
            opt.step()
        epoch_loss = epoch_total / len(examples)
        result.epoch_losses.append(epoch_loss)
        result.stopped_epoch = epoch

        monitored = (
            dataset_loss(model, val_examples) if val_examples else epoch_loss
        )
        if monitored < best - 1e-9:
            best = monitored
            bad_epochs = 0
        else:
            bad_epochs += 1
            old_lr = opt.lr
            opt.lr *= cfg.lr_decay
            result.lr_events.append((epoch, old_lr, opt.lr))
            say(f"epoch {epoch}: no improvement, lr {old_lr:g} -> {opt.lr:g}")
            if bad_epochs > patience:
                result.early_stopped = True
                say(f"early stop at epoch {epoch} (patience {patience} exhausted)")
                break
        if stop_check is not None and stop_check(epoch):
            say(f"stop condition met at epoch {epoch}")
            break
    return result
