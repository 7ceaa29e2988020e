"""Corpus ingestion and token-sequence construction for the teacher.

Reads the same on-disk corpus layout the topic-model side documents
(vocab.txt + JSONL splits). Documents arrive as bags of words, so the
token sequence fed to the transformer is reconstructed as each vocabulary
token repeated `count` times, in vocabulary order. With access to raw text,
substitute the original token order here; everything downstream only sees
token-id sequences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class Document:
    id: str
    entries: list[tuple[int, int]]  # sorted (word_id, count)

    @property
    def n_tokens(self) -> int:
        return sum(c for _, c in self.entries)


@dataclass
class Corpus:
    tokens: list[str]
    splits: dict[str, list[Document]]

    @property
    def vocab_size(self) -> int:
        return len(self.tokens)


def load_corpus_dir(corpus_dir) -> Corpus:
    corpus_dir = Path(corpus_dir)
    tokens = (corpus_dir / "vocab.txt").read_text(encoding="utf-8").splitlines()
    if len(set(tokens)) != len(tokens) or any(not t for t in tokens):
        raise ValueError(f"{corpus_dir}/vocab.txt: tokens must be unique and non-empty")
    splits: dict[str, list[Document]] = {}
    for name in ("train", "dev", "test"):
        path = corpus_dir / f"{name}.jsonl"
        if not path.exists():
            continue
        docs = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                merged: dict[int, int] = {}
                for wid, count in record["bow"]:
                    if not (0 <= wid < len(tokens)):
                        raise ValueError(f"{path}:{lineno}: word_id {wid} out of range")
                    if count < 1:
                        raise ValueError(f"{path}:{lineno}: count must be >= 1")
                    merged[wid] = merged.get(wid, 0) + count
                if not merged:
                    raise ValueError(f"{path}:{lineno}: empty document")
                docs.append(Document(id=str(record["id"]),
                                     entries=sorted(merged.items())))
        splits[name] = docs
    if not splits:
        raise ValueError(f"no split files found in {corpus_dir}")
    return Corpus(tokens=tokens, splits=splits)


def token_sequence(doc: Document) -> list[int]:
    """Word-id sequence: each vocabulary token repeated count times."""
    seq: list[int] = []
    for wid, count in doc.entries:
        seq.extend([wid] * count)
    return seq


def chunk_sequence(seq: list[int], max_len: int) -> list[list[int]]:
    """Non-overlapping blocks of at most max_len tokens, in order."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    return [seq[i:i + max_len] for i in range(0, len(seq), max_len)]


def count_vector(doc: Document, vocab_size: int) -> np.ndarray:
    out = np.zeros(vocab_size, dtype=np.float64)
    for wid, count in doc.entries:
        out[wid] = count
    return out
