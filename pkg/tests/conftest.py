import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from topickd.corpus import save_corpus
from topickd.synth import make_synthetic_corpus


@pytest.fixture(scope="session")
def tiny_corpus():
    """Small planted-topic corpus with full train-split word coverage."""
    return make_synthetic_corpus(n_train=24, n_dev=10, n_test=10,
                                 vocab_size=30, n_topics=4, avg_doc_len=30,
                                 seed=9, burstiness=float("inf"))


@pytest.fixture()
def corpus_dir(tmp_path, tiny_corpus):
    """The tiny corpus written out in the on-disk layout the CLI expects."""
    d = tmp_path / "corpus"
    d.mkdir()
    save_corpus(tiny_corpus, d / "vocab.txt",
                {name: d / f"{name}.jsonl" for name in ("train", "dev", "test")})
    return d
