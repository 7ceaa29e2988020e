"""Topic extraction and quality metrics: NPMI coherence, redundancy,
ELBO-based perplexity.

Co-occurrence is counted at whole-document granularity (binary presence, no
sliding window), with counts taken from a held-out split: dev during tuning,
test for final reporting. External reference counts are ingested from a
precomputed JSON file and matched to the vocabulary by token string.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from .corpus import BowCorpus, BowDocument, Vocabulary, doc_term_presence
from .model import ModelParams, PriorLN, encode, kl_term

log = logging.getLogger(__name__)


@dataclass
class TopicWordList:
    """One topic's strongest words, weights non-increasing."""

    topic_id: int
    words: list[tuple[int, float]]  # (word_id, weight)

    @property
    def word_ids(self) -> list[int]:
        return [w for w, _ in self.words]


def top_words(params: ModelParams, n: int = 10) -> list[TopicWordList]:
    """n largest entries per row of the topic matrix, ties to lower word_id.

    Ranking deliberately excludes the background vector: it is shared across
    topics and would push corpus-frequent words into every list.
    """
    k, v = params.topics.shape
    if n > v:
        raise ValueError(f"top_words: n={n} exceeds vocabulary size {v}")
    out = []
    ids = np.arange(v)
    for topic_id in range(k):
        row = params.topics[topic_id]
        order = np.lexsort((ids, -row))[:n]
        out.append(TopicWordList(
            topic_id=topic_id,
            words=[(int(w), float(row[w])) for w in order]))
    return out


class CooccurrenceCounts:
    """Document frequencies and pairwise joint document frequencies over a
    fixed word universe; words outside the universe count as never seen."""

    def __init__(self, doc_count: int, universe: np.ndarray,
                 doc_freq: np.ndarray, joint: np.ndarray):
        self.doc_count = int(doc_count)
        self._pos = {int(w): i for i, w in enumerate(universe)}
        self._df = doc_freq
        self._joint = joint

    def df(self, word_id: int) -> int:
        i = self._pos.get(int(word_id))
        return 0 if i is None else int(self._df[i])

    def joint(self, v: int, w: int) -> int:
        i = self._pos.get(int(v))
        j = self._pos.get(int(w))
        if i is None or j is None:
            return 0
        return int(self._joint[i, j])


def count_cooccurrence(presence: list[np.ndarray],
                       universe) -> CooccurrenceCounts:
    """Binary document-level counts for all words and pairs in `universe`."""
    uni = np.array(sorted({int(w) for w in universe}), dtype=np.int64)
    size = uni.shape[0]
    joint = np.zeros((size, size), dtype=np.int64)
    for present in presence:
        present = np.asarray(present, dtype=np.int64)
        hits = np.searchsorted(uni, present)
        valid = hits < size
        hits = hits[valid]
        members = hits[uni[hits] == present[valid]]
        if members.size:
            joint[np.ix_(members, members)] += 1
    return CooccurrenceCounts(doc_count=len(presence), universe=uni,
                              doc_freq=np.diagonal(joint).copy(), joint=joint)


def counts_for_corpus(corpus: BowCorpus, split: str,
                      universe) -> CooccurrenceCounts:
    return count_cooccurrence(doc_term_presence(corpus, split), universe)


def npmi_pair(counts: CooccurrenceCounts, v: int, w: int) -> float:
    """Normalized PMI in [-1, 1]; never-seen words and zero joints give -1."""
    n = counts.doc_count
    df_v, df_w = counts.df(v), counts.df(w)
    if df_v == 0 or df_w == 0:
        return -1.0
    joint = counts.joint(v, w)
    if joint == 0:
        return -1.0
    if joint == n:
        # p(v, w) = 1 forces p(v) = p(w) = 1: the 0/0 ratio's limit is +1.
        return 1.0
    pmi = math.log(joint * n / (df_v * df_w))
    return pmi / -math.log(joint / n)


def npmi_topic(topic: TopicWordList, counts: CooccurrenceCounts) -> float:
    """Mean NPMI over all unordered pairs of the topic's top words."""
    if counts.doc_count < 1:
        raise ValueError("npmi_topic: counts cover no documents")
    ids = topic.word_ids
    if len(ids) < 2:
        raise ValueError("npmi_topic: need at least 2 words per topic")
    scores = [npmi_pair(counts, ids[i], ids[j])
              for i in range(len(ids)) for j in range(i + 1, len(ids))]
    return float(np.mean(scores))


def npmi_model(topics: list[TopicWordList], counts: CooccurrenceCounts) -> float:
    """Unweighted mean of per-topic NPMI."""
    if not topics:
        raise ValueError("npmi_model: no topics")
    return float(np.mean([npmi_topic(t, counts) for t in topics]))


def external_counts_load(path, vocab: Vocabulary) -> CooccurrenceCounts:
    """Load precomputed reference counts keyed by token strings.

    Format: {"doc_count": N, "df": {"token": n, ...},
             "joint": [["tok_a", "tok_b", n], ...]}.
    Tokens missing from the vocabulary are dropped with a warning; missing
    pair entries mean joint = 0.
    """
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or "doc_count" not in data:
        raise ValueError(f"{path}: expected an object with 'doc_count'")
    df_map: dict[int, int] = {}
    dropped = 0
    for token, n in data.get("df", {}).items():
        if token in vocab:
            df_map[vocab.id_of(token)] = int(n)
        else:
            dropped += 1
    pairs = []
    for entry in data.get("joint", []):
        tok_a, tok_b, n = entry
        if tok_a in vocab and tok_b in vocab:
            pairs.append((vocab.id_of(tok_a), vocab.id_of(tok_b), int(n)))
        else:
            dropped += 1
    if dropped:
        log.warning("external counts: dropped %d out-of-vocabulary entries "
                    "from %s", dropped, path)

    uni = np.array(sorted(set(df_map) | {v for v, _, _ in pairs}
                          | {w for _, w, _ in pairs}), dtype=np.int64)
    pos = {int(w): i for i, w in enumerate(uni)}
    df = np.zeros(uni.shape[0], dtype=np.int64)
    for wid, n in df_map.items():
        df[pos[wid]] = n
    joint = np.zeros((uni.shape[0], uni.shape[0]), dtype=np.int64)
    for v, w, n in pairs:
        joint[pos[v], pos[w]] = n
        joint[pos[w], pos[v]] = n
    np.fill_diagonal(joint, df)
    return CooccurrenceCounts(doc_count=int(data["doc_count"]), universe=uni,
                              doc_freq=df, joint=joint)


def redundancy_pairs(topics: list[TopicWordList]) -> int:
    """Unordered topic pairs sharing an identical top-10 word set.

    The degeneracy filter fails a model when this exceeds 1.
    """
    sets = []
    for t in topics:
        if len(t.words) != 10:
            raise ValueError(
                f"redundancy_pairs: topic {t.topic_id} has {len(t.words)} "
                f"words, need exactly 10")
        sets.append(frozenset(t.word_ids))
    total = 0
    from collections import Counter
    for count in Counter(sets).values():
        total += count * (count - 1) // 2
    return total


def fails_redundancy_filter(topics: list[TopicWordList]) -> bool:
    return redundancy_pairs(topics) > 1


def perplexity(docs: list[BowDocument], params: ModelParams,
               prior: PriorLN, batch_size: int = 256) -> float:
    """exp(total ELBO loss / total tokens) with deterministic eval encoding."""
    if not docs:
        raise ValueError("perplexity: empty split")
    from .model import batch_objective  # local import to keep module light
    total_loss = 0.0
    total_tokens = 0
    for start in range(0, len(docs), batch_size):
        chunk = docs[start:start + batch_size]
        trace = encode(chunk, params, train_mode=False)
        breakdown = batch_objective(trace, params, prior, kl_weight=1.0)
        total_loss += (breakdown.recon + breakdown.kl) * len(chunk)
        total_tokens += sum(d.n_tokens for d in chunk)
    return float(np.exp(total_loss / total_tokens))


def build_topic_report(params: ModelParams, prior: PriorLN,
                       corpus: BowCorpus, split: str, n: int = 10,
                       external_counts: CooccurrenceCounts | None = None) -> dict:
    """Full evaluation report: per-topic words + NPMI, aggregates, perplexity."""
    topics = top_words(params, n=n)
    universe = {w for t in topics for w in t.word_ids}
    counts = counts_for_corpus(corpus, split, universe)
    per_topic = [npmi_topic(t, counts) for t in topics]
    report = {
        "topics": [
            {"id": t.topic_id,
             "words": [corpus.vocabulary.token(w) for w in t.word_ids],
             "npmi": score}
            for t, score in zip(topics, per_topic)
        ],
        "mean_npmi": float(np.mean(per_topic)),
        "redundant_pairs": redundancy_pairs(top_words(params, n=10)),
        "perplexity": perplexity(corpus.split(split), params, prior),
    }
    if external_counts is not None:
        report["external_npmi"] = float(np.mean(
            [npmi_topic(t, external_counts) for t in topics]))
    return report
