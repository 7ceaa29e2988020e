"""Teacher logits, temperature softening, length-ratio clipping, and the
interpolated distillation loss.

The teacher side of the pipeline is exchanged through a binary logits file
(magic "BATL"): version u32=1, document count u64, vocab size u64, dtype
u8=1 (float32), then D*V little-endian float32 values row-major, with row
order equal to the corpus split file order. Any process that can write this
file can act as the teacher.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .corpus import BowCorpus, BowDocument, docs_to_dense
from .model import ModelParams, decode, recon_loss
from .numerics import softmax

TEACHER_MAGIC = b"BATL"
TEACHER_VERSION = 1
TEACHER_DTYPE_F32 = 1


class TeacherLogitsError(ValueError):
    """Unreadable or mismatched teacher logits file."""


@dataclass
class KdConfig:
    """Distillation knobs: interpolation weight, temperature, clipping ratio.

    clip_ratio is the kept-logit budget relative to document length; 0
    disables clipping entirely.
    """

    weight: float = 0.75
    temperature: float = 2.0
    clip_ratio: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.weight <= 1.0):
            raise ValueError("KdConfig: weight must be in [0, 1]")
        if self.temperature < 1.0 or not np.isfinite(self.temperature):
            raise ValueError("KdConfig: temperature must be finite and >= 1")
        if self.clip_ratio < 0.0 or not np.isfinite(self.clip_ratio):
            raise ValueError("KdConfig: clip_ratio must be finite and >= 0")


@dataclass
class TeacherLogits:
    """Per-document unnormalized vocabulary scores, one row per document."""

    rows: np.ndarray  # (D, V) float64

    @property
    def num_documents(self) -> int:
        return self.rows.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.rows.shape[1]


@dataclass
class PseudoDocument:
    """Softened teacher word weights scaled to the document length."""

    weights: np.ndarray  # (V,) non-negative, sums to N_d

    @property
    def support(self) -> int:
        return int(np.count_nonzero(self.weights))


def clip_keep_count(clip_ratio: float, n_tokens: int) -> int:
    """Number of retained entries: max(1, round(c * N_d)), half rounded up."""
    return max(1, int(np.floor(clip_ratio * n_tokens + 0.5)))


def soften_and_clip(logits: np.ndarray, n_tokens: int,
                    cfg: KdConfig) -> PseudoDocument:
    """Temperature-soften teacher logits into a pseudo-document.

    Probabilities are softmax(logits / T); with clipping on, only the
    top max(1, round(c * N_d)) probabilities survive (ties broken toward
    lower word ids), the kept mass is renormalized to 1, and everything is
    scaled by N_d so the pseudo-document has the original length.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if n_tokens < 1:
        raise ValueError("soften_and_clip: n_tokens must be >= 1")
    probs = softmax(logits / cfg.temperature)
    if cfg.clip_ratio > 0.0:
        n_keep = clip_keep_count(cfg.clip_ratio, n_tokens)
        if n_keep < probs.size:
            order = np.lexsort((np.arange(probs.size), -probs))
            kept = order[:n_keep]
            clipped = np.zeros_like(probs)
            clipped[kept] = probs[kept] / probs[kept].sum()
            probs = clipped
    return PseudoDocument(weights=probs * n_tokens)


def kd_loss(doc: BowDocument, pseudo: PseudoDocument, theta: np.ndarray,
            params: ModelParams, cfg: KdConfig) -> float:
    """Interpolated loss: weight * T^2 * teacher cross-entropy at temperature
    T plus (1 - weight) * reconstruction at temperature 1.

    Endpoint terms with a zero coefficient are skipped outright, so
    weight=0 reproduces the plain reconstruction loss bitwise.
    """
    if pseudo.weights.shape[0] != params.hyper.vocab_size:
        raise ValueError(
            f"kd_loss: pseudo-document size {pseudo.weights.shape[0]} != "
            f"model vocabulary {params.hyper.vocab_size}")
    loss = 0.0
    if cfg.weight > 0.0:
        log_probs_t = decode(theta, params, temperature=cfg.temperature)
        loss += cfg.weight * cfg.temperature ** 2 * float(
            -(pseudo.weights * log_probs_t).sum())
    if cfg.weight < 1.0:
        recon = recon_loss(doc, decode(theta, params, temperature=1.0))
        recon = recon if cfg.weight == 0.0 else (1.0 - cfg.weight) * recon
        loss += recon
    return loss


def surrogate_teacher(corpus: BowCorpus, split: str, smoothing: float = 0.0,
                      eps_floor: float = 1e-12) -> TeacherLogits:
    """Desk-scale teacher stand-in built from smoothed log counts.

    Row d is log(count_{d,v} + smoothing * p_bg_v * N_d + eps_floor), where
    p_bg comes from the train split when present (the target split
    otherwise). With smoothing > 0 every word gets some probability; with
    smoothing ~ 0 the softened teacher recovers each document's own
    empirical word distribution.
    """
    if smoothing < 0:
        raise ValueError("surrogate_teacher: smoothing must be >= 0")
    docs = corpus.split(split)
    if not docs:
        raise ValueError(f"surrogate_teacher: split '{split}' is empty")
    bg_split = "train" if "train" in corpus.splits else split
    bg_counts = np.zeros(corpus.vocabulary.size, dtype=np.float64)
    for doc in corpus.split(bg_split):
        for wid, count in doc.entries:
            bg_counts[wid] += count
    bg_probs = bg_counts / bg_counts.sum()

    counts = docs_to_dense(docs, corpus.vocabulary.size)
    lengths = counts.sum(axis=1, keepdims=True)
    rows = np.log(counts + smoothing * bg_probs * lengths + eps_floor)
    return TeacherLogits(rows=rows)


def save_teacher_logits(path, logits: TeacherLogits) -> None:
    rows = np.ascontiguousarray(logits.rows, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(TEACHER_MAGIC)
        fh.write(struct.pack("<I", TEACHER_VERSION))
        fh.write(struct.pack("<QQ", rows.shape[0], rows.shape[1]))
        fh.write(struct.pack("<B", TEACHER_DTYPE_F32))
        fh.write(rows.tobytes())


def load_teacher_logits(path, expected_docs: int | None = None,
                        expected_vocab: int | None = None) -> TeacherLogits:
    """Read and validate a teacher logits file; values widen to float64."""
    with open(path, "rb") as fh:
        header = fh.read(25)
        if len(header) < 25:
            raise TeacherLogitsError(
                f"truncated header: got {len(header)} bytes, need 25")
        magic = header[:4]
        if magic != TEACHER_MAGIC:
            raise TeacherLogitsError(
                f"bad magic {magic!r}, expected {TEACHER_MAGIC!r}")
        (version,) = struct.unpack("<I", header[4:8])
        if version != TEACHER_VERSION:
            raise TeacherLogitsError(f"unsupported version {version}")
        n_docs, n_vocab = struct.unpack("<QQ", header[8:24])
        dtype = header[24]
        if dtype != TEACHER_DTYPE_F32:
            raise TeacherLogitsError(f"unsupported dtype code {dtype}")
        if expected_docs is not None and n_docs != expected_docs:
            raise TeacherLogitsError(
                f"document count mismatch: file has {n_docs}, corpus split "
                f"has {expected_docs}")
        if expected_vocab is not None and n_vocab != expected_vocab:
            raise TeacherLogitsError(
                f"vocabulary size mismatch: file has {n_vocab}, corpus has "
                f"{expected_vocab}")
        expected_bytes = n_docs * n_vocab * 4
        payload = fh.read()
    if len(payload) != expected_bytes:
        raise TeacherLogitsError(
            f"truncated payload: expected {expected_bytes} bytes of data, "
            f"got {len(payload)}")
    rows = np.frombuffer(payload, dtype="<f4").reshape(n_docs, n_vocab)
    rows = rows.astype(np.float64)
    if not np.all(np.isfinite(rows)):
        raise TeacherLogitsError("teacher logits contain non-finite entries")
    return TeacherLogits(rows=rows)


def align_teacher(teacher: TeacherLogits, corpus: BowCorpus, split: str) -> None:
    """Raise unless the teacher matrix matches the split row-for-row."""
    docs = corpus.split(split)
    if teacher.num_documents != len(docs):
        raise TeacherLogitsError(
            f"teacher has {teacher.num_documents} rows but split '{split}' "
            f"has {len(docs)} documents")
    if teacher.vocab_size != corpus.vocabulary.size:
        raise TeacherLogitsError(
            f"vocabulary size mismatch: teacher {teacher.vocab_size}, "
            f"corpus {corpus.vocabulary.size}")
