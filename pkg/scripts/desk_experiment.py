#!/usr/bin/env python3
"""Desk-scale distillation comparison.

Trains a teacher-free baseline and a surrogate-teacher distilled model on
the same synthetic corpus (5 restarts each) and reports mean/sd of final
dev NPMI side by side. Mirrors the directional acceptance check, but writes
full run directories so the trajectories can be inspected.
"""

import argparse
import json
from pathlib import Path

from topickd.distill import KdConfig, surrogate_teacher
from topickd.synth import make_synthetic_corpus
from topickd.trainer import TrainConfig, run_restarts


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--epochs", type=int, default=100)
    parser.add_argument("--restarts", type=int, default=5)
    parser.add_argument("--k", type=int, default=20)
    parser.add_argument("--lambda", dest="kd_lambda", type=float, default=0.75)
    parser.add_argument("--temp", type=float, default=2.0)
    parser.add_argument("--smoothing", type=float, default=0.01)
    parser.add_argument("--corpus-seed", type=int, default=42)
    parser.add_argument("--parallel", action="store_true")
    args = parser.parse_args()

    corpus = make_synthetic_corpus(seed=args.corpus_seed, burstiness=60.0)
    teacher = surrogate_teacher(corpus, "train", smoothing=args.smoothing)
    out = Path(args.out_dir)

    def config(weight):
        return TrainConfig(n_topics=args.k, epochs=args.epochs,
                           batch_size=200, learning_rate=0.002, alpha=1.0,
                           hidden_dim=300,
                           kd=KdConfig(weight=weight, temperature=args.temp),
                           anneal=0.5, seed=1, restarts=args.restarts)

    results = {}
    for label, t, weight in [("baseline", None, 0.0),
                             ("distilled", teacher, args.kd_lambda)]:
        summary = run_restarts(corpus, t, config(weight),
                               out_dir=out / label, parallel=args.parallel)
        results[label] = {"mean": summary.mean_dev_npmi,
                          "sd": summary.sd_dev_npmi,
                          "per_seed": {r.seed: r.final_dev_npmi
                                       for r in summary.records}}
        print(f"{label:>10}: mean dev NPMI {summary.mean_dev_npmi:+.4f} "
              f"(sd {summary.sd_dev_npmi:.4f})")

    gain = results["distilled"]["mean"] - results["baseline"]["mean"]
    print(f"{'gain':>10}: {gain:+.4f}")
    out.mkdir(parents=True, exist_ok=True)
    (out / "comparison.json").write_text(json.dumps(results, indent=2))


if __name__ == "__main__":
    main()
