"""Preprocessed bag-of-words corpora: vocabulary, sparse documents, splits.

File formats (the on-disk contract for everything downstream, including the
teacher component):

* vocabulary: UTF-8 text, one token per line, LF-terminated; a token's id is
  its 0-based line number.
* split files: JSON Lines, one document per line,
  ``{"id": "<string>", "bow": [[word_id, count], ...]}``. An optional
  ``"label"`` field is tolerated and ignored.

Document order within a split file is preserved on load; teacher logit rows
are aligned to it by position.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class CorpusError(ValueError):
    """Malformed or inconsistent corpus data."""


class Vocabulary:
    """Ordered, duplicate-free token list; index = position in the file."""

    def __init__(self, tokens: list[str]):
        index: dict[str, int] = {}
        for i, tok in enumerate(tokens):
            if not tok:
                raise CorpusError(f"vocabulary: empty token at index {i}")
            if tok in index:
                raise CorpusError(
                    f"vocabulary: duplicate token '{tok}' at index {i} "
                    f"(first seen at {index[tok]})")
            index[tok] = i
        self.tokens = list(tokens)
        self._index = index

    @property
    def size(self) -> int:
        return len(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def id_of(self, token: str) -> int:
        return self._index[token]

    def token(self, word_id: int) -> str:
        return self.tokens[word_id]


@dataclass
class BowDocument:
    """One document as canonically ordered sparse (word_id, count) pairs."""

    id: str
    entries: list[tuple[int, int]]

    @property
    def n_tokens(self) -> int:
        """Total token count N_d."""
        return sum(c for _, c in self.entries)

    @classmethod
    def from_pairs(cls, doc_id: str, pairs, vocab_size: int,
                   where: str = "") -> "BowDocument":
        """Validate and canonicalize raw pairs: merge duplicate ids, sort ascending."""
        merged: dict[int, int] = {}
        for pair in pairs:
            if (not isinstance(pair, (list, tuple))) or len(pair) != 2:
                raise CorpusError(f"{where}: bow entry {pair!r} is not a [word_id, count] pair")
            wid, count = pair
            if not isinstance(wid, int) or isinstance(wid, bool):
                raise CorpusError(f"{where}: word_id {wid!r} is not an integer")
            if not isinstance(count, int) or isinstance(count, bool):
                raise CorpusError(f"{where}: count {count!r} is not an integer")
            if wid < 0 or wid >= vocab_size:
                raise CorpusError(
                    f"{where}: word_id out of range ({wid} with V={vocab_size})")
            if count < 1:
                raise CorpusError(f"{where}: count must be >= 1, got {count}")
            merged[wid] = merged.get(wid, 0) + count
        if not merged:
            raise CorpusError(f"{where}: zero-length document '{doc_id}'")
        return cls(id=str(doc_id), entries=sorted(merged.items()))


@dataclass
class BowCorpus:
    """Vocabulary plus named document splits (train/dev/test)."""

    vocabulary: Vocabulary
    splits: dict[str, list[BowDocument]] = field(default_factory=dict)

    @property
    def num_documents(self) -> int:
        return sum(len(docs) for docs in self.splits.values())

    def split(self, name: str) -> list[BowDocument]:
        if name not in self.splits:
            raise CorpusError(f"unknown split '{name}' (have: {sorted(self.splits)})")
        return self.splits[name]


def load_vocabulary(path) -> Vocabulary:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return Vocabulary(lines)


def _load_split(path, vocab_size: int) -> list[BowDocument]:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{where}: malformed JSON ({exc.msg})") from exc
            if not isinstance(record, dict) or "id" not in record or "bow" not in record:
                raise CorpusError(f"{where}: document must be an object with 'id' and 'bow'")
            docs.append(BowDocument.from_pairs(record["id"], record["bow"],
                                               vocab_size, where=where))
    return docs


def load_corpus(vocab_path, split_paths: dict[str, object]) -> BowCorpus:
    """Load and validate a corpus; document order follows file order."""
    vocab = load_vocabulary(vocab_path)
    splits = {name: _load_split(path, vocab.size)
              for name, path in split_paths.items()}
    seen: dict[str, str] = {}
    for name, docs in splits.items():
        for doc in docs:
            if doc.id in seen and seen[doc.id] != name:
                raise CorpusError(
                    f"document id '{doc.id}' appears in splits "
                    f"'{seen[doc.id]}' and '{name}'")
            seen.setdefault(doc.id, name)
    return BowCorpus(vocabulary=vocab, splits=splits)


def save_corpus(corpus: BowCorpus, vocab_path, split_paths: dict[str, object]) -> None:
    """Inverse of load_corpus; writes canonical entry order."""
    with open(vocab_path, "w", encoding="utf-8") as fh:
        for tok in corpus.vocabulary.tokens:
            fh.write(tok + "\n")
    for name, path in split_paths.items():
        with open(path, "w", encoding="utf-8") as fh:
            for doc in corpus.split(name):
                record = {"id": doc.id, "bow": [[w, c] for w, c in doc.entries]}
                fh.write(json.dumps(record) + "\n")


def background_log_freq(corpus: BowCorpus, split: str,
                        eps_bg: float = 0.0) -> np.ndarray:
    """Empirical background word log-frequencies over a split.

    m_v = log((count_v + eps_bg) / (total + V * eps_bg)); exp(m) sums to 1.
    eps_bg defaults to 0: a properly preprocessed train split has every
    vocabulary word at least once. Pass eps_bg > 0 for degenerate corpora.
    """
    docs = corpus.split(split)
    if not docs:
        raise CorpusError(f"background_log_freq: split '{split}' is empty")
    v_size = corpus.vocabulary.size
    counts = np.zeros(v_size, dtype=np.float64)
    for doc in docs:
        for wid, count in doc.entries:
            counts[wid] += count
    smoothed = counts + eps_bg
    if np.any(smoothed <= 0):
        missing = int(np.argmin(smoothed))
        raise CorpusError(
            f"background_log_freq: word {missing} "
            f"('{corpus.vocabulary.token(missing)}') never occurs in split "
            f"'{split}'; set eps_bg > 0")
    return np.log(smoothed) - np.log(smoothed.sum())


def doc_term_presence(corpus: BowCorpus, split: str) -> list[np.ndarray]:
    """Per-document sorted arrays of distinct word ids (binary presence)."""
    return [np.array([w for w, _ in doc.entries], dtype=np.int64)
            for doc in corpus.split(split)]


def docs_to_dense(docs: list[BowDocument], vocab_size: int) -> np.ndarray:
    """Stack documents into a dense (n_docs, V) float64 count matrix."""
    out = np.zeros((len(docs), vocab_size), dtype=np.float64)
    for i, doc in enumerate(docs):
        for wid, count in doc.entries:
            out[i, wid] = count
    return out
