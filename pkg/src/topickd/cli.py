"""Command-line front end: train, eval, align, topics, surrogate-teacher,
check-teacher.

Every subcommand writes a resolved_config.json (defaults, then config file,
then explicit flags) into its output directory. Machine-readable results go
to stdout as JSON; diagnostics go to stderr. Exit codes: 0 success, 2 config
error, 3 data error, 4 numerical abort.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .align import (bracket_sample, competitive_link, head_to_head,
                    topic_word_distributions)
from .corpus import CorpusError, load_corpus
from .distill import (KdConfig, TeacherLogitsError, align_teacher,
                      load_teacher_logits, save_teacher_logits,
                      surrogate_teacher)
from .metrics import (build_topic_report, counts_for_corpus,
                      external_counts_load, npmi_topic, top_words)
from .model import CheckpointError, load_checkpoint, prior_from_alpha
from .numerics import NumericalError, SeededRng
from .trainer import ConfigError, TrainConfig, run_restarts

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

_SPLIT_FILES = ("train", "dev", "test")


def _load_corpus_dir(corpus_dir, required_splits=None):
    corpus_dir = Path(corpus_dir)
    vocab = corpus_dir / "vocab.txt"
    if not vocab.exists():
        raise CorpusError(f"missing vocabulary file {vocab}")
    split_paths = {name: corpus_dir / f"{name}.jsonl" for name in _SPLIT_FILES
                   if (corpus_dir / f"{name}.jsonl").exists()}
    for name in required_splits or ():
        if name not in split_paths:
            raise CorpusError(f"missing split file {corpus_dir / (name + '.jsonl')}")
    if not split_paths:
        raise CorpusError(f"no split files found in {corpus_dir}")
    return load_corpus(vocab, split_paths)


def _write_resolved_config(out_dir, resolved: dict) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "resolved_config.json", "w", encoding="utf-8") as fh:
        json.dump(resolved, fh, indent=2, sort_keys=True)


def _emit(payload: dict, out_dir, filename: str, to_stdout: bool = True) -> None:
    text = json.dumps(payload, indent=2)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / filename).write_text(text + "\n", encoding="utf-8")
    if to_stdout:
        print(text)


# --- train ------------------------------------------------------------------

_TRAIN_DEFAULTS = {
    "n_topics": 50, "epochs": 500, "batch_size": 200, "learning_rate": 0.002,
    "alpha": 1.0, "hidden_dim": 300, "dropout_rate": 0.0, "kd_lambda": 0.75,
    "kd_temperature": 2.0, "kd_clip": 0.0, "anneal": 0.5, "seed": 1,
    "restarts": 5, "dev_split": "dev", "bg_smoothing": 0.0, "eval_top_n": 10,
    "teacher_logits": None, "parallel": False,
}


def _add_train_flags(sub):
    s = argparse.SUPPRESS
    sub.add_argument("--corpus-dir", required=True)
    sub.add_argument("--out", required=True, help="run directory root")
    sub.add_argument("--config", help="JSON config file; flags override it")
    sub.add_argument("--k", dest="n_topics", type=int, default=s)
    sub.add_argument("--hidden-dim", dest="hidden_dim", type=int, default=s)
    sub.add_argument("--epochs", type=int, default=s)
    sub.add_argument("--batch-size", dest="batch_size", type=int, default=s)
    sub.add_argument("--lr", dest="learning_rate", type=float, default=s)
    sub.add_argument("--alpha", type=float, default=s)
    sub.add_argument("--dropout", dest="dropout_rate", type=float, default=s)
    sub.add_argument("--lambda", dest="kd_lambda", type=float, default=s,
                     help="distillation interpolation weight")
    sub.add_argument("--temp", dest="kd_temperature", type=float, default=s,
                     help="distillation softmax temperature")
    sub.add_argument("--clip", dest="kd_clip", type=float, default=s,
                     help="teacher clipping ratio (0 disables)")
    sub.add_argument("--anneal", type=float, default=s,
                     help="fraction of steps over which the KL weight ramps to 1")
    sub.add_argument("--seed", type=int, default=s)
    sub.add_argument("--restarts", type=int, default=s)
    sub.add_argument("--teacher-logits", dest="teacher_logits", default=s)
    sub.add_argument("--dev-split", dest="dev_split", default=s)
    sub.add_argument("--bg-smoothing", dest="bg_smoothing", type=float, default=s)
    sub.add_argument("--top-n", dest="eval_top_n", type=int, default=s)
    sub.add_argument("--parallel", action="store_true", default=s,
                     help="run restarts in separate processes")


def cmd_train(args) -> int:
    resolved = dict(_TRAIN_DEFAULTS)
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(_TRAIN_DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config file keys: {sorted(unknown)}")
        resolved.update(file_cfg)
    explicit = {k: v for k, v in vars(args).items()
                if k in _TRAIN_DEFAULTS and v is not None}
    resolved.update(explicit)
    resolved["corpus_dir"] = str(args.corpus_dir)
    resolved["out"] = str(args.out)
    _write_resolved_config(args.out, resolved)

    if resolved["kd_lambda"] > 0 and not resolved["teacher_logits"]:
        raise ConfigError(
            "--lambda > 0 requires --teacher-logits (or set --lambda 0)")

    cfg = TrainConfig(
        n_topics=resolved["n_topics"], epochs=resolved["epochs"],
        batch_size=resolved["batch_size"],
        learning_rate=resolved["learning_rate"], alpha=resolved["alpha"],
        hidden_dim=resolved["hidden_dim"],
        dropout_rate=resolved["dropout_rate"],
        kd=KdConfig(weight=resolved["kd_lambda"],
                    temperature=resolved["kd_temperature"],
                    clip_ratio=resolved["kd_clip"]),
        anneal=resolved["anneal"], seed=resolved["seed"],
        restarts=resolved["restarts"], dev_split=resolved["dev_split"],
        bg_smoothing=resolved["bg_smoothing"],
        eval_top_n=resolved["eval_top_n"])

    corpus = _load_corpus_dir(args.corpus_dir,
                              required_splits=("train", cfg.dev_split))
    teacher = None
    if resolved["teacher_logits"]:
        teacher = load_teacher_logits(resolved["teacher_logits"])
        align_teacher(teacher, corpus, "train")

    summary = run_restarts(corpus, teacher, cfg, out_dir=args.out,
                           parallel=bool(resolved["parallel"]))
    print(json.dumps({
        "mean_dev_npmi": summary.mean_dev_npmi,
        "sd_dev_npmi": summary.sd_dev_npmi,
        "runs": [{"seed": r.seed, "final_dev_npmi": r.final_dev_npmi,
                  "checkpoint": r.checkpoint_path} for r in summary.records],
    }, indent=2))
    return EXIT_OK


# --- eval -------------------------------------------------------------------

def cmd_eval(args) -> int:
    resolved = {"model": str(args.model), "corpus_dir": str(args.corpus_dir),
                "split": args.split, "top_n": args.top_n,
                "external_counts": args.external_counts,
                "out_dir": str(args.out_dir)}
    _write_resolved_config(args.out_dir, resolved)
    params = load_checkpoint(args.model)
    corpus = _load_corpus_dir(args.corpus_dir, required_splits=(args.split,))
    if params.hyper.vocab_size != corpus.vocabulary.size:
        raise CheckpointError(
            f"checkpoint vocabulary size {params.hyper.vocab_size} does not "
            f"match corpus {corpus.vocabulary.size}")
    prior = prior_from_alpha(params.hyper.alpha, params.hyper.n_topics)
    external = None
    if args.external_counts:
        external = external_counts_load(args.external_counts, corpus.vocabulary)
    report = build_topic_report(params, prior, corpus, args.split,
                                n=args.top_n, external_counts=external)
    _emit(report, args.out_dir, "report.json")
    return EXIT_OK


# --- align ------------------------------------------------------------------

def _render_alignment_table(report: dict) -> str:
    lines = [f"{'pair':>4}  {'a':>3}  {'b':>3}  {'jsd':>8}  "
             f"{'npmi_a':>8}  {'npmi_b':>8}"]
    for idx, p in enumerate(report["pairs"], start=1):
        lines.append(f"{idx:>4}  {p['a']:>3}  {p['b']:>3}  {p['jsd']:>8.4f}  "
                     f"{p['npmi_a']:>8.4f}  {p['npmi_b']:>8.4f}")
    w = report["wins"]
    lines.append(f"wins: a={w['a']} b={w['b']} ties={w['ties']} "
                 f"(threshold {report['threshold']})")
    return "\n".join(lines)


def cmd_align(args) -> int:
    resolved = {"model_a": str(args.model_a), "model_b": str(args.model_b),
                "corpus_dir": str(args.corpus_dir), "split": args.split,
                "threshold": args.threshold, "brackets": args.brackets,
                "per_bracket": args.per_bracket, "seed": args.seed,
                "out_dir": str(args.out_dir), "table": bool(args.table)}
    _write_resolved_config(args.out_dir, resolved)
    params_a = load_checkpoint(args.model_a)
    params_b = load_checkpoint(args.model_b)
    if params_a.hyper.vocab_size != params_b.hyper.vocab_size:
        raise CheckpointError(
            f"models disagree on vocabulary size: "
            f"{params_a.hyper.vocab_size} vs {params_b.hyper.vocab_size}")
    corpus = _load_corpus_dir(args.corpus_dir, required_splits=(args.split,))
    if params_a.hyper.vocab_size != corpus.vocabulary.size:
        raise CheckpointError(
            f"checkpoint vocabulary size {params_a.hyper.vocab_size} does "
            f"not match corpus {corpus.vocabulary.size}")

    topics_a = top_words(params_a, n=10)
    topics_b = top_words(params_b, n=10)
    universe = ({w for t in topics_a for w in t.word_ids}
                | {w for t in topics_b for w in t.word_ids})
    counts = counts_for_corpus(corpus, args.split, universe)
    npmi_a = [npmi_topic(t, counts) for t in topics_a]
    npmi_b = [npmi_topic(t, counts) for t in topics_b]

    pairs = competitive_link(topic_word_distributions(params_a),
                             topic_word_distributions(params_b),
                             npmi_a=npmi_a, npmi_b=npmi_b)
    threshold = args.threshold if args.threshold is not None else len(pairs)
    wins_a, wins_b, ties = head_to_head(pairs, threshold)
    report = {
        "pairs": [{"a": p.topic_a, "b": p.topic_b, "jsd": p.jsd,
                   "npmi_a": p.npmi_a, "npmi_b": p.npmi_b} for p in pairs],
        "wins": {"a": wins_a, "b": wins_b, "ties": ties},
        "threshold": threshold,
    }
    if args.brackets is not None:
        sampled = bracket_sample(pairs, SeededRng(args.seed),
                                 brackets=args.brackets,
                                 per_bracket=args.per_bracket)
        report["bracket_sample"] = [
            {"a": p.topic_a, "b": p.topic_b, "jsd": p.jsd,
             "npmi_a": p.npmi_a, "npmi_b": p.npmi_b} for p in sampled]
    _emit(report, args.out_dir, "alignment.json", to_stdout=not args.table)
    if args.table:
        print(_render_alignment_table(report))
    return EXIT_OK


# --- topics -----------------------------------------------------------------

def cmd_topics(args) -> int:
    resolved = {"model": str(args.model), "corpus_dir": str(args.corpus_dir),
                "n": args.n, "out_dir": str(args.out_dir)}
    _write_resolved_config(args.out_dir, resolved)
    params = load_checkpoint(args.model)
    corpus = _load_corpus_dir(args.corpus_dir)
    if params.hyper.vocab_size != corpus.vocabulary.size:
        raise CheckpointError(
            f"checkpoint vocabulary size {params.hyper.vocab_size} does not "
            f"match corpus {corpus.vocabulary.size}")
    listing = top_words(params, n=args.n)
    _emit({"topics": [{"id": t.topic_id,
                       "words": [corpus.vocabulary.token(w) for w in t.word_ids]}
                      for t in listing]},
          args.out_dir, "topics.json")
    return EXIT_OK


# --- surrogate-teacher / check-teacher ---------------------------------------

def cmd_surrogate_teacher(args) -> int:
    out_dir = Path(args.out).parent
    resolved = {"corpus_dir": str(args.corpus_dir), "split": args.split,
                "smoothing": args.smoothing, "out": str(args.out)}
    _write_resolved_config(out_dir, resolved)
    corpus = _load_corpus_dir(args.corpus_dir, required_splits=(args.split,))
    teacher = surrogate_teacher(corpus, args.split, smoothing=args.smoothing)
    save_teacher_logits(args.out, teacher)
    print(json.dumps({"path": str(args.out), "docs": teacher.num_documents,
                      "vocab": teacher.vocab_size}))
    return EXIT_OK


def cmd_check_teacher(args) -> int:
    resolved = {"teacher_logits": str(args.teacher_logits),
                "corpus_dir": str(args.corpus_dir), "split": args.split,
                "out_dir": str(args.out_dir)}
    _write_resolved_config(args.out_dir, resolved)
    corpus = _load_corpus_dir(args.corpus_dir, required_splits=(args.split,))
    teacher = load_teacher_logits(args.teacher_logits)
    align_teacher(teacher, corpus, args.split)
    print(json.dumps({"docs": teacher.num_documents,
                      "vocab": teacher.vocab_size, "aligned": True}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topickd",
        description="Train, evaluate, and compare distillation-augmented "
                    "neural topic models.",
        epilog="Exit codes: 0 success, 2 config error, 3 data error, "
               "4 numerical abort. Corpus directories hold vocab.txt plus "
               "train/dev/test .jsonl split files.")
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("train", help="train one or more restarts")
    _add_train_flags(sub)
    sub.set_defaults(func=cmd_train)

    sub = subs.add_parser("eval", help="topic report: NPMI, redundancy, perplexity")
    sub.add_argument("--model", required=True, help="checkpoint path")
    sub.add_argument("--corpus-dir", required=True)
    sub.add_argument("--split", default="test")
    sub.add_argument("--top-n", dest="top_n", type=int, default=10)
    sub.add_argument("--external-counts", dest="external_counts")
    sub.add_argument("--out-dir", dest="out_dir", default=".")
    sub.set_defaults(func=cmd_eval)

    sub = subs.add_parser("align", help="compare two models topic-by-topic")
    sub.add_argument("--model-a", required=True)
    sub.add_argument("--model-b", required=True)
    sub.add_argument("--corpus-dir", required=True)
    sub.add_argument("--split", default="test")
    sub.add_argument("--threshold", type=int, default=None,
                     help="head-to-head over this many best-aligned pairs "
                          "(default: all)")
    sub.add_argument("--brackets", type=int, default=None,
                     help="emit a stratified sample over this many "
                          "alignment-quality brackets")
    sub.add_argument("--per-bracket", dest="per_bracket", type=int, default=3)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--table", action="store_true",
                     help="render a text table to stdout instead of JSON")
    sub.add_argument("--out-dir", dest="out_dir", default=".")
    sub.set_defaults(func=cmd_align)

    sub = subs.add_parser("topics", help="print top words per topic")
    sub.add_argument("--model", required=True)
    sub.add_argument("--corpus-dir", required=True)
    sub.add_argument("--n", type=int, default=10)
    sub.add_argument("--out-dir", dest="out_dir", default=".")
    sub.set_defaults(func=cmd_topics)

    sub = subs.add_parser("surrogate-teacher",
                          help="write smoothed log-count teacher logits")
    sub.add_argument("--corpus-dir", required=True)
    sub.add_argument("--split", default="train")
    sub.add_argument("--smoothing", type=float, default=0.01)
    sub.add_argument("--out", required=True, help="output logits file")
    sub.set_defaults(func=cmd_surrogate_teacher)

    sub = subs.add_parser("check-teacher",
                          help="validate a teacher logits file against a corpus")
    sub.add_argument("--teacher-logits", required=True)
    sub.add_argument("--corpus-dir", required=True)
    sub.add_argument("--split", default="train")
    sub.add_argument("--out-dir", dest="out_dir", default=".")
    sub.set_defaults(func=cmd_check_teacher)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CorpusError, CheckpointError, TeacherLogitsError,
            FileNotFoundError, IsADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
