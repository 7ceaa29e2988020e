"""Transformer document-autoencoder teacher: fine-tuning and logit export."""

from .data import Corpus, Document, chunk_sequence, load_corpus_dir, token_sequence
from .export import export_logits, write_logits_file
from .model import (DocumentTeacher, FineTuneHistory, TeacherConfig,
                    build_teacher, dev_perplexity, fine_tune)

__version__ = "0.1.0"
