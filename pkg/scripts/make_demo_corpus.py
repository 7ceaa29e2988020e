#!/usr/bin/env python3
"""Write a synthetic planted-topic corpus in the on-disk layout the CLI
expects (vocab.txt plus train/dev/test .jsonl files)."""

import argparse
from pathlib import Path

from topickd.corpus import save_corpus
from topickd.synth import make_synthetic_corpus


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--n-train", type=int, default=2000)
    parser.add_argument("--n-dev", type=int, default=500)
    parser.add_argument("--n-test", type=int, default=500)
    parser.add_argument("--vocab-size", type=int, default=2000)
    parser.add_argument("--n-topics", type=int, default=20)
    parser.add_argument("--avg-doc-len", type=int, default=90)
    parser.add_argument("--burstiness", type=float, default=60.0)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    corpus = make_synthetic_corpus(
        n_train=args.n_train, n_dev=args.n_dev, n_test=args.n_test,
        vocab_size=args.vocab_size, n_topics=args.n_topics,
        avg_doc_len=args.avg_doc_len, seed=args.seed,
        burstiness=args.burstiness)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_corpus(corpus, out / "vocab.txt",
                {name: out / f"{name}.jsonl" for name in corpus.splits})
    for name in corpus.splits:
        print(f"{name}: {len(corpus.split(name))} documents")
    print(f"vocabulary: {corpus.vocabulary.size} tokens -> {out}")


if __name__ == "__main__":
    main()
