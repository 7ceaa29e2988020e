"""Write per-document teacher logits in the binary interchange format.

Layout (little-endian): magic "BATL", version u32=1, document count u64,
vocab size u64, dtype u8=1 (float32), then D*V float32 values row-major.
Row order equals the corpus split file order — that is the whole contract
with the consumer, which matches rows to documents by position.
"""

from __future__ import annotations

import struct

import numpy as np
import torch

from .data import Document
from .model import DocumentTeacher, TeacherConfig

MAGIC = b"BATL"
VERSION = 1
DTYPE_F32 = 1


def write_logits_file(path, rows: np.ndarray) -> None:
    rows = np.ascontiguousarray(rows, dtype="<f4")
    if rows.ndim != 2:
        raise ValueError("logits must be a (documents, vocab) matrix")
    if not np.all(np.isfinite(rows)):
        raise ValueError("refusing to write non-finite logits")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<QQ", rows.shape[0], rows.shape[1]))
        fh.write(struct.pack("<B", DTYPE_F32))
        fh.write(rows.tobytes())


def export_logits(teacher: DocumentTeacher, docs: list[Document],
                  cfg: TeacherConfig, out_path=None,
                  batch_size: int = 16) -> np.ndarray:
    """Compute chunk-mean logits for every document, in order, and write
    them to cfg.out_path (or out_path). Returns the float32 matrix."""
    out_path = out_path or cfg.out_path
    if out_path is None:
        raise ValueError("export_logits: no output path configured")
    if not docs:
        raise ValueError("export_logits: empty split")
    teacher.eval()
    rows = []
    with torch.no_grad():
        for start in range(0, len(docs), batch_size):
            batch = docs[start:start + batch_size]
            logits = teacher.document_logits_batch(batch, cfg.max_chunk_len)
            rows.append(logits.numpy())
    matrix = np.vstack(rows).astype(np.float32)
    if matrix.shape != (len(docs), teacher.vocab_size):
        raise RuntimeError(
            f"export produced {matrix.shape}, expected "
            f"({len(docs)}, {teacher.vocab_size})")
    write_logits_file(out_path, matrix)
    return matrix
