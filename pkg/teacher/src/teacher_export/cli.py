"""teacher-export: fine-tune the document autoencoder and write logits."""

from __future__ import annotations

import argparse
import json
import sys

from .data import load_corpus_dir
from .export import export_logits
from .model import TeacherConfig, dev_perplexity, fine_tune


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="teacher-export",
        description="Fine-tune a transformer as a document autoencoder on a "
                    "bag-of-words corpus and export per-document vocabulary "
                    "logits in the BATL format.")
    parser.add_argument("--corpus-dir", required=True)
    parser.add_argument("--split", default="train",
                        help="split to train on and export")
    parser.add_argument("--model", default="tiny-random",
                        help="Hugging Face model id/path, or 'tiny-random' "
                             "for a small randomly initialized encoder")
    parser.add_argument("--steps", type=int, default=0,
                        help="training steps; 0 exports the untrained head")
    parser.add_argument("--out", required=True, help="output logits file")
    parser.add_argument("--max-chunk-len", type=int, default=512)
    parser.add_argument("--check-interval", type=int, default=50)
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--lr", type=float, default=5e-4)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--dev-split", default="dev")
    args = parser.parse_args(argv)

    cfg = TeacherConfig(corpus_dir=args.corpus_dir, split=args.split,
                        model=args.model, max_chunk_len=args.max_chunk_len,
                        steps=args.steps, check_interval=args.check_interval,
                        batch_size=args.batch_size, learning_rate=args.lr,
                        seed=args.seed, dev_split=args.dev_split,
                        out_path=args.out)
    try:
        corpus = load_corpus_dir(cfg.corpus_dir)
        if cfg.split not in corpus.splits:
            raise ValueError(f"split '{cfg.split}' not found in corpus")
        teacher, history = fine_tune(corpus, cfg)
        docs = corpus.splits[cfg.split]
        export_logits(teacher, docs, cfg)
        final_ppl = (history.dev_perplexity[-1] if history.dev_perplexity
                     else dev_perplexity(
                         teacher, corpus.splits.get(cfg.dev_split) or docs,
                         corpus.vocab_size, cfg.max_chunk_len))
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps({
        "out": str(cfg.out_path), "docs": len(docs),
        "vocab": corpus.vocab_size, "steps_run": len(history.train_loss),
        "stopped_early": history.stopped_early,
        "dev_perplexity": final_ppl,
    }))
    return 0


if __name__ == "__main__":
    sys.exit(main())
