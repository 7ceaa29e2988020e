import json

import numpy as np
import pytest

from teacher_export.data import Corpus, Document


def _toy_docs(gen, n, prefix):
    docs = []
    for i in range(n):
        block = (i % 3) * 10
        ids = gen.choice(10, size=6, replace=False) + block
        entries = sorted((int(w), int(gen.integers(1, 5))) for w in ids)
        docs.append(Document(id=f"{prefix}{i}", entries=entries))
    return docs


@pytest.fixture(scope="session")
def toy_corpus():
    """50 train / 10 dev documents over 30 words in three soft blocks."""
    gen = np.random.Generator(np.random.PCG64(1))
    return Corpus(tokens=[f"w{i:03d}" for i in range(30)],
                  splits={"train": _toy_docs(gen, 50, "t"),
                          "dev": _toy_docs(gen, 10, "d")})


@pytest.fixture()
def toy_corpus_dir(tmp_path, toy_corpus):
    d = tmp_path / "corpus"
    d.mkdir()
    (d / "vocab.txt").write_text("\n".join(toy_corpus.tokens) + "\n",
                                 encoding="utf-8")
    for name, docs in toy_corpus.splits.items():
        with open(d / f"{name}.jsonl", "w", encoding="utf-8") as fh:
            for doc in docs:
                fh.write(json.dumps({
                    "id": doc.id,
                    "bow": [[w, c] for w, c in doc.entries]}) + "\n")
    return d
