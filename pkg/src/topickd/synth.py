"""Seeded synthetic corpora with planted topic structure.

Stands in for preprocessed newsgroup-style data when no real corpus is at
hand: documents are drawn from a mixture of planted topics over a Zipf-ish
base vocabulary, and the final vocabulary is rebuilt from the generated text
(most frequent words kept), mirroring how real preprocessing recipes
guarantee that every vocabulary word occurs in the train split.
"""

from __future__ import annotations

import numpy as np

from .corpus import BowCorpus, BowDocument, Vocabulary


def make_synthetic_corpus(n_train: int = 2000, n_dev: int = 500,
                          n_test: int = 500, vocab_size: int = 2000,
                          n_topics: int = 20, avg_doc_len: int = 90,
                          seed: int = 0, doc_topic_alpha: float = 0.08,
                          signature_share: float = 0.6,
                          zipf_exponent: float = 1.05,
                          burstiness: float = 30.0) -> BowCorpus:
    """Generate train/dev/test splits sharing planted topics.

    Each planted topic concentrates `signature_share` of its mass on a
    disjoint signature block of words and spreads the rest over the global
    base distribution; documents mix a few topics (sparse Dirichlet) and
    draw their tokens from a Dirichlet-multinomial so word counts show the
    within-document burstiness of real text. Lower `burstiness` means
    burstier counts; pass float("inf") for plain multinomial draws.
    """
    gen = np.random.Generator(np.random.PCG64(seed))
    cand = int(vocab_size * 1.1)

    ranks = np.arange(1, cand + 1, dtype=np.float64)
    base = ranks ** -zipf_exponent
    base /= base.sum()
    base = gen.permutation(base)

    block = cand // n_topics
    word_order = gen.permutation(cand)
    topic_dists = np.empty((n_topics, cand))
    for t in range(n_topics):
        sig = word_order[t * block:(t + 1) * block]
        within = np.arange(1, sig.size + 1, dtype=np.float64) ** -0.7
        sig_dist = np.zeros(cand)
        sig_dist[sig] = within / within.sum()
        topic_dists[t] = signature_share * sig_dist + (1 - signature_share) * base

    def draw_docs(count):
        docs = []
        for _ in range(count):
            mixture = gen.dirichlet(np.full(n_topics, doc_topic_alpha))
            length = max(15, int(gen.poisson(avg_doc_len)))
            word_probs = mixture @ topic_dists
            if np.isfinite(burstiness):
                # Polya-urn style overdispersion: gamma-perturb the document
                # distribution so observed words tend to repeat.
                weights = gen.gamma(burstiness * word_probs + 1e-12)
                word_probs = weights / weights.sum()
            docs.append(gen.multinomial(length, word_probs))
        return docs

    raw = {"train": draw_docs(n_train), "dev": draw_docs(n_dev),
           "test": draw_docs(n_test)}

    train_counts = np.sum(raw["train"], axis=0)
    order = np.lexsort((np.arange(cand), -train_counts))
    kept = np.sort(order[:vocab_size])
    if train_counts[kept[-1]] < 1:
        raise ValueError(
            "synthetic corpus too small: not every selected word occurs in "
            "train; increase n_train or avg_doc_len")
    remap = -np.ones(cand, dtype=np.int64)
    remap[kept] = np.arange(vocab_size)

    vocab = Vocabulary([f"w{i:05d}" for i in range(vocab_size)])
    splits: dict[str, list[BowDocument]] = {}
    for name, rows in raw.items():
        docs = []
        for i, row in enumerate(rows):
            nz = np.nonzero(row)[0]
            nz = nz[remap[nz] >= 0]
            entries = [(int(remap[w]), int(row[w])) for w in nz]
            if not entries:
                continue
            docs.append(BowDocument(id=f"{name}-{i:05d}", entries=entries))
        splits[name] = docs
    return BowCorpus(vocabulary=vocab, splits=splits)
