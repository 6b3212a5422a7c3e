"""Dual-encoder hashtag generation model.

Two Bi-GRU encoders (post and context) feed a bi-attention whose
context-side logits are scaled by retrieval-derived local token weights.
Each side's attended representation is fused back into its hidden states
by a per-encoder merge layer, the fused sequences are concatenated into
the decoder memory, and an attention GRU decoder emits the hashtag word
by word.

Modes: "hashnews" and "norank" use the locally weighted attention,
"noranknolocal" drops the local weights (plain bi-attention), and
"postonly" disables the context encoder entirely (the memory is the post
encoding alone). A post with an empty context bundle falls back to the
post-only path for that instance regardless of mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .. import diffmath as dm
from ..corpus import BOS, EOS, Vocabulary
from ..diffmath import Tensor

MODES = ("hashnews", "norank", "noranknolocal", "postonly")
OPTIMIZERS = ("adam", "sgd")


@dataclass
class GeneratorConfig:
    embed_dim: int = 300
    hidden: int = 400
    encoder_layers: int = 2
    decoder_layers: int = 1
    learning_rate: float = 0.001
    lr_decay: float = 0.5
    batch_size: int = 64
    dropout: float = 0.1
    max_gen_len: int = 10
    beam_size: int = 20
    optimizer: str = "adam"
    mode: str = "hashnews"

    def __post_init__(self) -> None:
        for name in ("embed_dim", "hidden", "encoder_layers", "decoder_layers",
                     "max_gen_len", "beam_size", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")

    @property
    def encoder_width(self) -> int:
        """Width of each encoder position: forward and backward states concatenated."""
        return 2 * self.hidden


def hybrid_bi_attention(
    h_post: Tensor,
    h_ctx: Tensor,
    w_bilinear: Tensor,
    local_weights: np.ndarray | None = None,
) -> tuple[Tensor, Tensor, Tensor, Tensor]:
    """Bi-attention between post states (|p| x d) and context states (|c| x d).

    Returns (r_post, r_ctx, a_post, a_ctx): a_post columns are distributions
    over post positions, a_ctx rows are distributions over context positions
    with logits scaled by the per-context-token local weights when given.
    r_post (|c| x d) mixes post states per context token; r_ctx (|p| x d)
    mixes context states per post token.
    """
    sim = dm.matmul(dm.matmul(h_post, w_bilinear), dm.transpose(h_ctx))
    a_post = dm.softmax(sim, axis=0)
    if local_weights is None:
        a_ctx = dm.softmax(sim, axis=1)
    else:
        w = np.asarray(local_weights, dtype=np.float64)
        if w.ndim != 1 or w.shape[0] != h_ctx.shape[0]:
            raise dm.ShapeError(
                f"local weights length {w.shape} != context length {h_ctx.shape[0]}"
            )
        if np.any(w <= 0) or np.any(w > 1):
            raise ValueError("local weights must lie in (0, 1]")
        a_ctx = dm.softmax(dm.mul(sim, Tensor(w)), axis=1)
    r_post = dm.matmul(dm.transpose(a_post), h_post)
    r_ctx = dm.matmul(a_ctx, h_ctx)
    return r_post, r_ctx, a_post, a_ctx


def merge(h: Tensor, attended: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Fuse hidden states with their attended counterparts: per position,
    tanh(affine([h; r])) back to width d."""
    if h.shape != attended.shape:
        raise dm.ShapeError(f"merge shapes differ: {h.shape} vs {attended.shape}")
    return dm.tanh(dm.add(dm.matmul(dm.concat([h, attended], axis=1), weight), bias))


class HashtagGenerator:
    """Holds all learnable tensors and implements the training/inference math."""

    def __init__(self, config: GeneratorConfig, vocab: Vocabulary, seed: int = 0):
        self.config = config
        self.vocab = vocab
        self.dropout_rng = np.random.default_rng(seed)
        self.params: dict[str, Tensor] = {}
        self._init_params(np.random.default_rng(seed))

    def _init_params(self, rng: np.random.Generator) -> None:
        cfg = self.config
        v = len(self.vocab)
        e, h, d = cfg.embed_dim, cfg.hidden, cfg.encoder_width

        def mat(name: str, rows: int, cols: int) -> None:
            limit = np.sqrt(6.0 / (rows + cols))
            self.params[name] = Tensor(
                rng.uniform(-limit, limit, size=(rows, cols)), requires_grad=True
            )

        def vec(name: str, size: int) -> None:
            self.params[name] = Tensor(np.zeros(size), requires_grad=True)

        mat("embed", v, e)
        for which in ("post", "context"):
            for layer in range(cfg.encoder_layers):
                in_dim = e if layer == 0 else d
                for direction in ("fwd", "bwd"):
                    prefix = f"{which}.l{layer}.{direction}"
                    mat(f"{prefix}.W", in_dim, 3 * h)
                    mat(f"{prefix}.U", h, 3 * h)
                    vec(f"{prefix}.b_in", 3 * h)
                    vec(f"{prefix}.b_h", 3 * h)
        mat("attn.W_b", d, d)
        for which in ("post", "context"):
            mat(f"merge.{which}.W", 2 * d, d)
            vec(f"merge.{which}.b", d)
        mat("dec.init.W", 2 * d, h)
        vec("dec.init.b", h)
        for layer in range(cfg.decoder_layers):
            in_dim = e if layer == 0 else h
            prefix = f"dec.l{layer}"
            mat(f"{prefix}.W", in_dim, 3 * h)
            mat(f"{prefix}.U", h, 3 * h)
            vec(f"{prefix}.b_in", 3 * h)
            vec(f"{prefix}.b_h", 3 * h)
        mat("dec.attn.W", h, d)
        mat("dec.comb.W", h + d, h)
        vec("dec.comb.b", h)
        mat("out.W", h, v)
        vec("out.b", v)

    def parameters(self) -> dict[str, Tensor]:
        return self.params

    def zero_grads(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    # -- encoders -----------------------------------------------------------

    def _gru_cell(self, x: Tensor, h_prev: Tensor, prefix: str) -> Tensor:
        gi = dm.add(dm.matmul(x, self.params[f"{prefix}.W"]), self.params[f"{prefix}.b_in"])
        gh = dm.add(dm.matmul(h_prev, self.params[f"{prefix}.U"]), self.params[f"{prefix}.b_h"])
        return dm.gru_cell(gi, gh, h_prev)

    def _gru_direction(self, x: Tensor, prefix: str, reverse: bool) -> list[Tensor]:
        """States for one direction, returned in input position order.

        The whole-sequence input transform is hoisted out of the recurrence.
        """
        n = x.shape[0]
        gi_all = dm.add(dm.matmul(x, self.params[f"{prefix}.W"]), self.params[f"{prefix}.b_in"])
        u, b_h = self.params[f"{prefix}.U"], self.params[f"{prefix}.b_h"]
        h = Tensor(np.zeros(self.config.hidden))
        states: list[Tensor] = [h] * n
        order = range(n - 1, -1, -1) if reverse else range(n)
        for t in order:
            gh = dm.add(dm.matmul(h, u), b_h)
            h = dm.gru_cell(dm.row(gi_all, t), gh, h)
            states[t] = h
        return states

    def encode(
        self, token_ids: Sequence[int], which: str, training: bool = False
    ) -> tuple[Tensor, Tensor]:
        """Bi-GRU encoding: per-position [forward; backward] states of the top
        layer, plus the final state (forward at last position, backward at
        first) for decoder initialization."""
        if which not in ("post", "context"):
            raise ValueError(f"which must be 'post' or 'context', got {which!r}")
        if len(token_ids) == 0:
            raise ValueError("cannot encode an empty token sequence")
        if any(i < 0 or i >= len(self.vocab) for i in token_ids):
            raise ValueError("token id out of vocabulary range")
        x = dm.embedding_lookup(self.params["embed"], token_ids)
        fwd = bwd = None
        for layer in range(self.config.encoder_layers):
            fwd = self._gru_direction(x, f"{which}.l{layer}.fwd", reverse=False)
            bwd = self._gru_direction(x, f"{which}.l{layer}.bwd", reverse=True)
            x = dm.concat([dm.stack_rows(fwd), dm.stack_rows(bwd)], axis=1)
        if training and self.config.dropout > 0:
            x = dm.dropout(x, self.config.dropout, self.dropout_rng)
        final = dm.concat([fwd[-1], bwd[0]])
        return x, final

    # -- decoder ------------------------------------------------------------

    def _decoder_step(
        self, x: Tensor, states: list[Tensor], memory: Tensor
    ) -> tuple[list[Tensor], Tensor]:
        new_states = []
        inp = x
        for layer in range(self.config.decoder_layers):
            h = self._gru_cell(inp, states[layer], f"dec.l{layer}")
            new_states.append(h)
            inp = h
        top = new_states[-1]
        key = dm.matmul(top, self.params["dec.attn.W"])
        alpha = dm.softmax(dm.matmul(memory, key), axis=0)
        ctx = dm.matmul(alpha, memory)
        comb = dm.tanh(
            dm.add(dm.matmul(dm.concat([top, ctx]), self.params["dec.comb.W"]),
                   self.params["dec.comb.b"])
        )
        logits = dm.add(dm.matmul(comb, self.params["out.W"]), self.params["out.b"])
        return new_states, logits

    def build_memory(
        self,
        post_ids: Sequence[int],
        ctx_ids: Sequence[int],
        ctx_weights: np.ndarray | None,
        training: bool = False,
    ) -> tuple[Tensor, list[Tensor]]:
        """Decoder memory and initial states for one instance.

        Context is used unless the mode is postonly or the bundle is empty;
        the missing context final state is replaced by zeros so the decoder
        initialization stays well-defined.
        """
        cfg = self.config
        h_post, final_post = self.encode(post_ids, "post", training)
        use_ctx = cfg.mode != "postonly" and len(ctx_ids) > 0
        if use_ctx:
            h_ctx, final_ctx = self.encode(ctx_ids, "context", training)
            weights = ctx_weights if cfg.mode in ("hashnews", "norank") else None
            r_post, r_ctx, _, _ = hybrid_bi_attention(
                h_post, h_ctx, self.params["attn.W_b"], weights
            )
            fused_post = merge(h_post, r_ctx, self.params["merge.post.W"],
                               self.params["merge.post.b"])
            fused_ctx = merge(h_ctx, r_post, self.params["merge.context.W"],
                              self.params["merge.context.b"])
            memory = dm.concat([fused_post, fused_ctx], axis=0)
            finals = dm.concat([final_post, final_ctx])
        else:
            memory = h_post
            finals = dm.concat([final_post, Tensor(np.zeros(cfg.encoder_width))])
        init = dm.tanh(
            dm.add(dm.matmul(finals, self.params["dec.init.W"]), self.params["dec.init.b"])
        )
        states = [init] + [
            Tensor(np.zeros(cfg.hidden)) for _ in range(cfg.decoder_layers - 1)
        ]
        return memory, states

    def decode_train(
        self,
        post_ids: Sequence[int],
        ctx_ids: Sequence[int],
        ctx_weights: np.ndarray | None,
        target_ids: Sequence[int],
        training: bool = True,
    ) -> Tensor:
        """Teacher-forced NLL, averaged over target steps (BOS..target..EOS)."""
        if len(target_ids) == 0:
            raise ValueError("empty decode target")
        memory, states = self.build_memory(post_ids, ctx_ids, ctx_weights, training)
        inputs = [BOS, *target_ids]
        outputs = [*target_ids, EOS]
        emb = dm.embedding_lookup(self.params["embed"], inputs)
        if training and self.config.dropout > 0:
            emb = dm.dropout(emb, self.config.dropout, self.dropout_rng)
        total: Tensor | None = None
        for t in range(len(inputs)):
            states, logits = self._decoder_step(dm.row(emb, t), states, memory)
            logp = dm.log_softmax(logits, axis=0)
            nll = dm.scale_shift(dm.pick(logp, outputs[t]), -1.0)
            total = nll if total is None else dm.add(total, nll)
        return dm.scale_shift(total, 1.0 / len(inputs))
