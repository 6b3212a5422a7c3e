"""Command-line pipeline: retrieve, train, generate, evaluate.

Stages hand off through files so each is independently runnable and
resumable; the pipeline subcommand simply chains the four stages with the
same flags. Exit codes: 0 success, 1 internal error, 2 usage or validation
error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import records
from .corpus import (
    ParseError,
    ValidationError,
    article_index,
    build_vocab,
    build_windows,
    load_news,
    load_posts,
    sample_background,
)
from .entity_match import AlignmentParams
from .generator import (
    GeneratorConfig,
    HashtagGenerator,
    beam_search,
    expand_examples,
    load_checkpoint,
    save_checkpoint,
    train_model,
)
from .generator.checkpoint import CheckpointError
from .metrics import evaluate
from .retriever import RankingParams, build_context, retrieve

MODES = ("hashnews", "norank", "noranknolocal", "postonly")


def _log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=MODES, default="hashnews")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--threads", type=int, default=1)


def _add_retrieval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k-windows", type=int, default=5, help="number of nested day windows")
    p.add_argument("--background-size", type=int, default=1000)
    p.add_argument("--context-size", type=int, default=100)
    p.add_argument("--bm25-a", type=float, default=1.2)
    p.add_argument("--bm25-b", type=float, default=0.75)
    p.add_argument("--local-weight-floor", type=float, default=0.05)
    p.add_argument("--sw-match", type=float, default=2.0)
    p.add_argument("--sw-mismatch", type=float, default=-1.0)
    p.add_argument("--sw-gap", type=float, default=-1.0)
    p.add_argument("--match-t", type=float, default=0.8)
    p.add_argument("--match-q", type=float, default=0.6)


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--embed-dim", type=int, default=300)
    p.add_argument("--hidden", type=int, default=400)
    p.add_argument("--encoder-layers", type=int, default=2)
    p.add_argument("--decoder-layers", type=int, default=1)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--lr-decay", type=float, default=0.5)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--max-len", type=int, default=10)
    p.add_argument("--beam", type=int, default=20)
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")


def _ranking_params(args: argparse.Namespace) -> RankingParams:
    return RankingParams(
        a=args.bm25_a,
        b=args.bm25_b,
        k=args.k_windows,
        context_size=args.context_size,
        weight_floor=args.local_weight_floor,
    )


def _alignment_params(args: argparse.Namespace) -> AlignmentParams:
    return AlignmentParams(
        match_reward=args.sw_match,
        mismatch_penalty=args.sw_mismatch,
        gap_penalty=args.sw_gap,
        t=args.match_t,
        q=args.match_q,
    )


def _generator_config(args: argparse.Namespace) -> GeneratorConfig:
    return GeneratorConfig(
        embed_dim=args.embed_dim,
        hidden=args.hidden,
        encoder_layers=args.encoder_layers,
        decoder_layers=args.decoder_layers,
        learning_rate=args.lr,
        lr_decay=args.lr_decay,
        batch_size=args.batch_size,
        dropout=args.dropout,
        max_gen_len=args.max_len,
        beam_size=args.beam,
        optimizer=args.optimizer,
        mode=args.mode,
    )


def cmd_retrieve(args: argparse.Namespace) -> int:
    started = time.monotonic()
    posts = load_posts(args.posts)
    news = load_news(args.news)
    ranking = _ranking_params(args)
    align = _alignment_params(args)
    index = article_index(news)
    background_ids = sample_background(news, args.background_size, args.seed).article_ids
    background = [index[aid] for aid in sorted(background_ids)]
    use_temporal = args.mode not in ("norank", "noranknolocal")

    def process(post):
        windows = build_windows(news, post.day, ranking.k)
        retrieved = retrieve(
            post, windows, background, index, ranking, align, use_temporal=use_temporal
        )
        bundle = build_context(post, retrieved, index, ranking)
        return records.context_record_line(post.id, retrieved, bundle)

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            lines = list(pool.map(process, posts))
    else:
        lines = [process(p) for p in posts]
    records.write_lines(args.out, lines)
    _log(
        f"retrieve: {len(posts)} posts against {len(news)} articles "
        f"in {time.monotonic() - started:.2f}s -> {args.out}"
    )
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    started = time.monotonic()
    posts = load_posts(args.posts)
    train_posts = [p for p in posts if p.hashtags]
    contexts: dict[str, tuple[tuple[str, ...], tuple[float, ...]]] = {}
    context_sources: list[tuple[str, ...]] = []
    if args.mode != "postonly":
        if not args.contexts:
            raise ValidationError("--contexts is required unless --mode=postonly")
        for rec in records.load_context_records(args.contexts):
            contexts[rec.post_id] = (rec.tokens, rec.norm_weights)
            context_sources.append(rec.tokens)
    vocab = build_vocab(train_posts, context_sources, min_freq=args.min_freq)
    examples = expand_examples(train_posts, contexts, vocab)
    if not examples:
        raise ValidationError("no training pairs: no post has hashtags")
    config = _generator_config(args)
    model = HashtagGenerator(config, vocab, seed=args.seed)
    val = None
    if args.val_fraction > 0:
        rng = np.random.default_rng(args.seed)
        order = rng.permutation(len(examples))
        n_val = max(1, int(len(examples) * args.val_fraction))
        val = [examples[i] for i in order[:n_val]]
        examples = [examples[i] for i in order[n_val:]]
        if not examples:
            raise ValidationError("validation split consumed all training pairs")
    result = train_model(
        model,
        examples,
        epochs=args.epochs,
        patience=args.patience,
        seed=args.seed,
        val_examples=val,
        log=_log,
    )
    save_checkpoint(args.checkpoint, model)
    sidecar = {
        "epoch_losses": result.epoch_losses,
        "lr_events": [
            {"epoch": e, "old_lr": old, "new_lr": new}
            for e, old, new in result.lr_events
        ],
        "stopped_epoch": result.stopped_epoch,
        "early_stopped": result.early_stopped,
    }
    with open(args.checkpoint + ".losses.json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2)
    _log(
        f"train: {len(examples)} pairs, {result.stopped_epoch} epochs, "
        f"final loss {result.epoch_losses[-1]:.4f} "
        f"in {time.monotonic() - started:.2f}s -> {args.checkpoint}"
    )
    return 0


def cmd_generate(args: argparse.Namespace) -> int:
    started = time.monotonic()
    model = load_checkpoint(args.checkpoint)
    if args.mode is not None and args.mode != model.config.mode:
        raise ValidationError(
            f"checkpoint was trained in mode {model.config.mode!r}, "
            f"got --mode {args.mode!r}"
        )
    posts = load_posts(args.posts)
    contexts: dict[str, tuple[tuple[str, ...], tuple[float, ...]]] = {}
    if args.contexts and model.config.mode != "postonly":
        for rec in records.load_context_records(args.contexts):
            contexts[rec.post_id] = (rec.tokens, rec.norm_weights)
    beam = args.beam if args.beam is not None else model.config.beam_size
    max_len = args.max_len if args.max_len is not None else model.config.max_gen_len

    def process(post):
        ctx_tokens, ctx_weights = contexts.get(post.id, ((), ()))
        ctx_ids = model.vocab.encode(ctx_tokens)
        weights = np.asarray(ctx_weights) if ctx_ids else None
        ranked = beam_search(
            model,
            model.vocab.encode(post.tokens),
            ctx_ids,
            weights,
            beam_size=beam,
            max_len=max_len,
        )
        return records.prediction_record_line(post.id, ranked)

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            lines = list(pool.map(process, posts))
    else:
        lines = [process(p) for p in posts]
    records.write_lines(args.out, lines)
    _log(
        f"generate: {len(posts)} posts, beam {beam} "
        f"in {time.monotonic() - started:.2f}s -> {args.out}"
    )
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    preds = records.load_prediction_records(args.predictions)
    posts = load_posts(args.posts)
    golds = {p.id: [list(t) for t in p.hashtags] for p in posts}
    missing = [pid for pid, tags in golds.items() if not tags]
    if missing:
        raise ValidationError(f"posts without gold hashtags: {missing[:5]}")
    predictions = {r.post_id: [list(words) for words, _ in r.hashtags] for r in preds}
    report = evaluate(predictions, golds)
    table = [
        ("F1@1", report.f1_at_1),
        ("F1@5", report.f1_at_5),
        ("F1@10", report.f1_at_10),
        ("ACC", report.acc),
        ("MAP", report.map),
        ("RG-1", report.rg1),
    ]
    print(f"macro-averaged over {report.n_posts} posts")
    for name, value in table:
        print(f"{name:<6} {value:.4f}")
    payload = {
        "f1_at_1": report.f1_at_1,
        "f1_at_5": report.f1_at_5,
        "f1_at_10": report.f1_at_10,
        "acc": report.acc,
        "map": report.map,
        "rg1": report.rg1,
        "n_posts": report.n_posts,
        "averaging": "macro",
    }
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
    return 0


def cmd_pipeline(args: argparse.Namespace) -> int:
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    contexts = str(outdir / "contexts.jsonl")
    checkpoint = str(outdir / "model.ckpt")
    predictions = str(outdir / "predictions.jsonl")
    report = str(outdir / "report.json")

    passthrough = [
        "--mode", args.mode, "--seed", str(args.seed), "--threads", str(args.threads),
    ]
    retrieval = [
        "--k-windows", str(args.k_windows),
        "--background-size", str(args.background_size),
        "--context-size", str(args.context_size),
        "--bm25-a", str(args.bm25_a), "--bm25-b", str(args.bm25_b),
        "--local-weight-floor", str(args.local_weight_floor),
        "--sw-match", str(args.sw_match), "--sw-mismatch", str(args.sw_mismatch),
        "--sw-gap", str(args.sw_gap),
        "--match-t", str(args.match_t), "--match-q", str(args.match_q),
    ]
    model_flags = [
        "--embed-dim", str(args.embed_dim), "--hidden", str(args.hidden),
        "--encoder-layers", str(args.encoder_layers),
        "--decoder-layers", str(args.decoder_layers),
        "--lr", str(args.lr), "--lr-decay", str(args.lr_decay),
        "--batch-size", str(args.batch_size), "--dropout", str(args.dropout),
        "--max-len", str(args.max_len), "--beam", str(args.beam),
        "--optimizer", args.optimizer,
    ]

    if args.mode != "postonly":
        rc = run(
            ["retrieve", "--posts", args.posts, "--news", args.news,
             "--out", contexts, *retrieval, *passthrough]
        )
        if rc != 0:
            return rc
    train_cmd = ["train", "--posts", args.posts, "--checkpoint", checkpoint,
                 "--epochs", str(args.epochs), "--patience", str(args.patience),
                 "--min-freq", str(args.min_freq),
                 "--val-fraction", str(args.val_fraction),
                 *model_flags, *passthrough]
    if args.mode != "postonly":
        train_cmd += ["--contexts", contexts]
    rc = run(train_cmd)
    if rc != 0:
        return rc
    generate_cmd = ["generate", "--checkpoint", checkpoint, "--posts", args.posts,
                    "--out", predictions, "--beam", str(args.beam),
                    "--max-len", str(args.max_len), *passthrough]
    if args.mode != "postonly":
        generate_cmd += ["--contexts", contexts]
    rc = run(generate_cmd)
    if rc != 0:
        return rc
    return run(["evaluate", "--predictions", predictions, "--posts", args.posts,
                "--out", report])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="newstag",
        description="News-grounded hashtag generation pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("retrieve", help="rank news per post and build context words")
    p.add_argument("--posts", required=True)
    p.add_argument("--news", required=True)
    p.add_argument("--out", required=True)
    _add_retrieval_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("train", help="train the hashtag generator")
    p.add_argument("--posts", required=True)
    p.add_argument("--contexts")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--min-freq", type=int, default=1)
    p.add_argument("--val-fraction", type=float, default=0.0)
    _add_model_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="beam-search hashtags from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--posts", required=True)
    p.add_argument("--contexts")
    p.add_argument("--out", required=True)
    p.add_argument("--beam", type=int, default=None)
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--mode", choices=MODES, default=None)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="score predictions against gold hashtags")
    p.add_argument("--predictions", required=True)
    p.add_argument("--posts", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", help="retrieve, train, generate, evaluate")
    p.add_argument("--posts", required=True)
    p.add_argument("--news", required=True)
    p.add_argument("--outdir", required=True)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--min-freq", type=int, default=1)
    p.add_argument("--val-fraction", type=float, default=0.0)
    _add_retrieval_flags(p)
    _add_model_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_pipeline)

    return parser


def run(argv: list[str]) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        _log(f"error: missing file: {exc.filename or exc}")
        return 2
    except (ParseError, ValidationError, CheckpointError, ValueError) as exc:
        _log(f"error: {exc}")
        return 2
    except Exception:
        traceback.print_exc()
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
