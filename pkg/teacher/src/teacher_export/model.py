"""Transformer document autoencoder: fine-tuning against bag-of-words
reconstruction and per-document vocabulary logits.

The encoder maps a (chunked) token sequence to a hidden vector (masked mean
pooling over the final layer); a linear head sized to the topic-model
vocabulary turns that into logits. Training minimizes the count-weighted
negative log-likelihood of each document under softmax(logits) — the same
reconstruction loss the topic model uses — and tracks dev perplexity until
it stops improving.

`model="tiny-random"` builds a small randomly initialized DistilBERT-style
encoder whose input vocabulary is the corpus vocabulary itself (word-level
ids, no subword tokenizer), which keeps the whole pipeline self-contained
and offline. Any Hugging Face model id or local path works too when its
weights are available locally; its own tokenizer then supplies subword ids.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .data import Corpus, Document, chunk_sequence, count_vector, token_sequence


@dataclass
class TeacherConfig:
    corpus_dir: str
    split: str = "train"
    model: str = "tiny-random"
    max_chunk_len: int = 512
    steps: int = 0
    check_interval: int = 50
    batch_size: int = 8
    learning_rate: float = 5e-4
    seed: int = 0
    dev_split: str = "dev"
    out_path: str | None = None

    def __post_init__(self):
        if self.max_chunk_len < 1:
            raise ValueError("max_chunk_len must be >= 1")
        if self.steps < 0:
            raise ValueError("steps must be >= 0 (0 exports the untrained head)")
        if self.check_interval < 1:
            raise ValueError("check_interval must be >= 1")


class DocumentTeacher(nn.Module):
    """Encoder + vocabulary head with chunk-mean document logits."""

    def __init__(self, encoder: nn.Module, head: nn.Linear,
                 word_to_input_ids, pad_id: int):
        super().__init__()
        self.encoder = encoder
        self.head = head
        self.word_to_input_ids = word_to_input_ids  # word id -> list of input ids
        self.pad_id = pad_id

    @property
    def vocab_size(self) -> int:
        return self.head.out_features

    def input_sequence(self, doc: Document) -> list[int]:
        seq = []
        for wid in token_sequence(doc):
            seq.extend(self.word_to_input_ids(wid))
        return seq

    def chunk_logits(self, chunks: list[list[int]]) -> torch.Tensor:
        """(n_chunks, V) logits; chunks are padded and mask-mean-pooled."""
        width = max(len(c) for c in chunks)
        ids = torch.full((len(chunks), width), self.pad_id, dtype=torch.long)
        mask = torch.zeros((len(chunks), width), dtype=torch.long)
        for i, chunk in enumerate(chunks):
            ids[i, :len(chunk)] = torch.tensor(chunk, dtype=torch.long)
            mask[i, :len(chunk)] = 1
        hidden = self.encoder(input_ids=ids,
                              attention_mask=mask).last_hidden_state
        maskf = mask.unsqueeze(-1).to(hidden.dtype)
        pooled = (hidden * maskf).sum(dim=1) / maskf.sum(dim=1)
        return self.head(pooled)

    def document_logits_batch(self, docs: list[Document],
                              max_chunk_len: int) -> torch.Tensor:
        """(n_docs, V) logits: pointwise mean over each document's chunks."""
        all_chunks: list[list[int]] = []
        owners: list[int] = []
        for i, doc in enumerate(docs):
            chunks = chunk_sequence(self.input_sequence(doc), max_chunk_len)
            all_chunks.extend(chunks)
            owners.extend([i] * len(chunks))
        per_chunk = self.chunk_logits(all_chunks)
        owners_t = torch.tensor(owners, dtype=torch.long)
        sums = torch.zeros((len(docs), self.vocab_size),
                           dtype=per_chunk.dtype)
        sums.index_add_(0, owners_t, per_chunk)
        counts = torch.bincount(owners_t, minlength=len(docs)).unsqueeze(1)
        return sums / counts.to(per_chunk.dtype)


def _build_tiny_random(vocab_size: int, max_chunk_len: int) -> DocumentTeacher:
    from transformers import DistilBertConfig, DistilBertModel
    pad_id = 0
    config = DistilBertConfig(
        vocab_size=vocab_size + 1,  # input id = word id + 1; 0 is padding
        dim=64, n_layers=2, n_heads=2, hidden_dim=128,
        max_position_embeddings=max(max_chunk_len, 8), pad_token_id=pad_id)
    encoder = DistilBertModel(config)
    head = nn.Linear(config.dim, vocab_size)
    return DocumentTeacher(encoder, head,
                           word_to_input_ids=lambda wid: [wid + 1],
                           pad_id=pad_id)


def _build_pretrained(model_id: str, tokens: list[str]) -> DocumentTeacher:
    from transformers import AutoModel, AutoTokenizer
    tokenizer = AutoTokenizer.from_pretrained(model_id)
    encoder = AutoModel.from_pretrained(model_id)
    subwords = [tokenizer(tok, add_special_tokens=False)["input_ids"]
                or [tokenizer.unk_token_id]
                for tok in tokens]
    head = nn.Linear(encoder.config.hidden_size
                     if hasattr(encoder.config, "hidden_size")
                     else encoder.config.dim, len(tokens))
    return DocumentTeacher(encoder, head,
                           word_to_input_ids=lambda wid: subwords[wid],
                           pad_id=tokenizer.pad_token_id or 0)


def build_teacher(corpus: Corpus, cfg: TeacherConfig) -> DocumentTeacher:
    torch.manual_seed(cfg.seed)
    if cfg.model == "tiny-random":
        return _build_tiny_random(corpus.vocab_size, cfg.max_chunk_len)
    return _build_pretrained(cfg.model, corpus.tokens)


def _reconstruction_loss(teacher: DocumentTeacher, docs: list[Document],
                         vocab_size: int, max_chunk_len: int) -> torch.Tensor:
    """Mean per-document count-weighted NLL."""
    logits = teacher.document_logits_batch(docs, max_chunk_len)
    counts = torch.tensor(
        np.stack([count_vector(d, vocab_size) for d in docs]),
        dtype=logits.dtype)
    log_probs = torch.log_softmax(logits, dim=1)
    return -(counts * log_probs).sum(dim=1).mean()


def dev_perplexity(teacher: DocumentTeacher, docs: list[Document],
                   vocab_size: int, max_chunk_len: int,
                   batch_size: int = 16) -> float:
    """exp(total reconstruction loss / total tokens), eval mode."""
    teacher.eval()
    total_loss, total_tokens = 0.0, 0
    with torch.no_grad():
        for start in range(0, len(docs), batch_size):
            batch = docs[start:start + batch_size]
            loss = _reconstruction_loss(teacher, batch, vocab_size,
                                        max_chunk_len)
            total_loss += float(loss) * len(batch)
            total_tokens += sum(d.n_tokens for d in batch)
    return float(np.exp(total_loss / total_tokens))


@dataclass
class FineTuneHistory:
    train_loss: list[float] = field(default_factory=list)
    dev_perplexity: list[float] = field(default_factory=list)
    stopped_early: bool = False


def fine_tune(corpus: Corpus, cfg: TeacherConfig,
              teacher: DocumentTeacher | None = None
              ) -> tuple[DocumentTeacher, FineTuneHistory]:
    """Train the autoencoder on the target split for cfg.steps steps.

    Dev perplexity is logged every check_interval steps; training stops
    early once it fails to improve over 3 consecutive checks. steps=0 skips
    training entirely (untrained-head export for format testing).
    """
    if teacher is None:
        teacher = build_teacher(corpus, cfg)
    history = FineTuneHistory()
    if cfg.steps == 0:
        return teacher, history

    docs = corpus.splits[cfg.split]
    dev_docs = corpus.splits.get(cfg.dev_split) or docs
    optimizer = torch.optim.Adam(teacher.parameters(), lr=cfg.learning_rate)
    sampler = np.random.Generator(np.random.PCG64(cfg.seed))
    best, stale = float("inf"), 0

    teacher.train()
    for step in range(cfg.steps):
        idx = sampler.choice(len(docs), size=min(cfg.batch_size, len(docs)),
                             replace=False)
        batch = [docs[i] for i in idx]
        loss = _reconstruction_loss(teacher, batch, corpus.vocab_size,
                                    cfg.max_chunk_len)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        history.train_loss.append(float(loss.detach()))

        if (step + 1) % cfg.check_interval == 0:
            ppl = dev_perplexity(teacher, dev_docs, corpus.vocab_size,
                                 cfg.max_chunk_len)
            history.dev_perplexity.append(ppl)
            teacher.train()
            if ppl < best - 1e-9:
                best, stale = ppl, 0
            else:
                stale += 1
                if stale >= 3:
                    history.stopped_early = True
                    break
    teacher.eval()
    return teacher, history
