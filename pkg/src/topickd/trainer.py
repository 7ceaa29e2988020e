"""Training orchestration: minibatching, KL annealing, restarts, logging.

A run's randomness comes from one SeededRng consumed in a fixed order:
parameter init, then one shuffle per epoch, then per-batch encoder noise.
Given (config, seed), every logged number is reproducible bitwise.

Run directory layout:
    run-<seed>/checkpoint.batm
    run-<seed>/metrics.jsonl      one object per epoch:
                                  {epoch, loss, kl_weight, dev_npmi}
    aggregate.json                mean/sd of final dev NPMI across restarts
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .corpus import BowCorpus, background_log_freq, doc_term_presence, docs_to_dense
from .distill import KdConfig, TeacherLogits, align_teacher, soften_and_clip
from .metrics import count_cooccurrence, npmi_model, top_words
from .model import (ModelHyper, backward, encode, init_params,
                    prior_from_alpha, save_checkpoint)
from .numerics import Adam, NumericalError, SeededRng


class ConfigError(ValueError):
    """Invalid or inconsistent training configuration."""


@dataclass
class TrainConfig:
    n_topics: int
    epochs: int = 500
    batch_size: int = 200
    learning_rate: float = 0.002
    alpha: float = 1.0
    hidden_dim: int = 300
    dropout_rate: float = 0.0
    kd: KdConfig = field(default_factory=KdConfig)
    anneal: float = 0.5
    seed: int = 1
    restarts: int = 5
    dev_split: str = "dev"
    bg_smoothing: float = 0.0
    eval_top_n: int = 10

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not (0.0 < self.anneal <= 1.0):
            raise ConfigError("anneal must be in (0, 1]")
        if self.restarts < 1:
            raise ConfigError("restarts must be >= 1")


@dataclass
class RunRecord:
    seed: int
    train_loss: list[float]
    dev_npmi: list[float]
    checkpoint_path: str | None
    wall_clock: float
    params: object = field(default=None, repr=False, compare=False)

    @property
    def final_dev_npmi(self) -> float:
        return self.dev_npmi[-1]


def kl_weight(step: int, total_steps: int, anneal: float) -> float:
    """Linear ramp from 0 to 1 over the first `anneal` fraction of steps."""
    if anneal <= 0:
        raise ConfigError("kl_weight: anneal must be positive")
    if not (0 <= step <= total_steps):
        raise ValueError("kl_weight: step outside [0, total_steps]")
    return min(1.0, step / (anneal * total_steps))


def _dev_npmi(params, dev_presence, top_n) -> float:
    topics = top_words(params, n=top_n)
    universe = {w for t in topics for w in t.word_ids}
    counts = count_cooccurrence(dev_presence, universe)
    return npmi_model(topics, counts)


def train(corpus: BowCorpus, teacher: TeacherLogits | None,
          cfg: TrainConfig, run_dir=None) -> RunRecord:
    """Train one model; returns the per-epoch record and writes run files.

    With a teacher the per-document loss is the interpolated distillation
    loss; without one it is plain reconstruction. Either way the annealed KL
    term is added. A teacher is mandatory whenever the distillation weight is
    positive, and its rows must align with the train split.
    """
    if teacher is None and cfg.kd.weight > 0.0:
        raise ConfigError(
            f"distillation weight {cfg.kd.weight} > 0 requires teacher logits")
    if teacher is not None:
        align_teacher(teacher, corpus, "train")

    started = time.perf_counter()
    train_docs = corpus.split("train")
    if not train_docs:
        raise ConfigError("train split is empty")
    n_docs = len(train_docs)
    vocab_size = corpus.vocabulary.size
    doc_lengths = np.array([d.n_tokens for d in train_docs], dtype=np.int64)

    rng = SeededRng(cfg.seed)
    hyper = ModelHyper(n_topics=cfg.n_topics, vocab_size=vocab_size,
                       hidden_dim=cfg.hidden_dim, alpha=cfg.alpha,
                       dropout_rate=cfg.dropout_rate)
    background = background_log_freq(corpus, "train", eps_bg=cfg.bg_smoothing)
    params = init_params(hyper, background, rng)
    prior = prior_from_alpha(cfg.alpha, cfg.n_topics)
    optimizer = Adam(cfg.learning_rate)

    use_kd = teacher is not None and cfg.kd.weight > 0.0
    pseudo_all = None
    if use_kd:
        pseudo_all = np.stack([
            soften_and_clip(teacher.rows[i], int(doc_lengths[i]), cfg.kd).weights
            for i in range(n_docs)])

    dev_presence = doc_term_presence(corpus, cfg.dev_split)
    n_batches = (n_docs + cfg.batch_size - 1) // cfg.batch_size
    total_steps = cfg.epochs * n_batches

    if run_dir is not None:
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        metrics_fh = open(run_dir / "metrics.jsonl", "w", encoding="utf-8")
    else:
        metrics_fh = None

    losses, npmis = [], []
    step = 0
    try:
        for epoch in range(1, cfg.epochs + 1):
            perm = rng.permutation(n_docs)
            epoch_loss = 0.0
            weight = 0.0
            for batch_idx in range(n_batches):
                sel = perm[batch_idx * cfg.batch_size:(batch_idx + 1) * cfg.batch_size]
                batch_docs = [train_docs[i] for i in sel]
                counts = docs_to_dense(batch_docs, vocab_size)
                weight = kl_weight(step, total_steps, cfg.anneal)
                try:
                    trace = encode(counts, params, rng=rng, train_mode=True)
                    breakdown, grads = backward(
                        trace, params, prior, kl_weight=weight,
                        pseudo=pseudo_all[sel] if use_kd else None,
                        kd_lambda=cfg.kd.weight if use_kd else 0.0,
                        kd_temperature=cfg.kd.temperature)
                    optimizer.step(params.trainable(), grads)
                except NumericalError as exc:
                    raise NumericalError(
                        f"epoch {epoch} batch {batch_idx}: {exc}") from exc
                epoch_loss += breakdown.total * len(batch_docs)
                step += 1
            epoch_loss /= n_docs
            dev_npmi = _dev_npmi(params, dev_presence, cfg.eval_top_n)
            losses.append(epoch_loss)
            npmis.append(dev_npmi)
            if metrics_fh is not None:
                metrics_fh.write(json.dumps({
                    "epoch": epoch, "loss": epoch_loss,
                    "kl_weight": weight, "dev_npmi": dev_npmi}) + "\n")
    finally:
        if metrics_fh is not None:
            metrics_fh.close()

    ckpt_path = None
    if run_dir is not None:
        ckpt_path = str(run_dir / "checkpoint.batm")
        save_checkpoint(ckpt_path, params)

    return RunRecord(seed=cfg.seed, train_loss=losses, dev_npmi=npmis,
                     checkpoint_path=ckpt_path,
                     wall_clock=time.perf_counter() - started, params=params)


@dataclass
class RestartSummary:
    records: list[RunRecord]
    mean_dev_npmi: float
    sd_dev_npmi: float


def _restart_worker(args):
    corpus, teacher, cfg, run_dir = args
    return train(corpus, teacher, cfg, run_dir=run_dir)


def run_restarts(corpus: BowCorpus, teacher: TeacherLogits | None,
                 cfg: TrainConfig, out_dir=None,
                 parallel: bool = False) -> RestartSummary:
    """Run `restarts` independent seeds (base_seed + 0..r-1) and aggregate.

    Runs share no mutable state, so parallel execution gives identical
    numbers to sequential. sd is the population standard deviation: a single
    restart reports 0.
    """
    jobs = []
    for i in range(cfg.restarts):
        run_cfg = replace(cfg, seed=cfg.seed + i)
        run_dir = None if out_dir is None else Path(out_dir) / f"run-{run_cfg.seed}"
        jobs.append((corpus, teacher, run_cfg, run_dir))

    if parallel and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(len(jobs), 8)) as pool:
            records = list(pool.map(_restart_worker, jobs))
    else:
        records = [_restart_worker(job) for job in jobs]

    finals = np.array([r.final_dev_npmi for r in records])
    summary = RestartSummary(records=records,
                             mean_dev_npmi=float(finals.mean()),
                             sd_dev_npmi=float(finals.std(ddof=0)))
    if out_dir is not None:
        with open(Path(out_dir) / "aggregate.json", "w", encoding="utf-8") as fh:
            json.dump({
                "mean": summary.mean_dev_npmi,
                "sd": summary.sd_dev_npmi,
                "per_seed": {str(r.seed): r.final_dev_npmi for r in records},
            }, fh, indent=2)
    return summary
