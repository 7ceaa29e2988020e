"""Neural topic modeling with knowledge distillation from a document
autoencoder teacher, plus coherence evaluation and topic alignment."""

from .corpus import (BowCorpus, BowDocument, CorpusError, Vocabulary,
                     background_log_freq, doc_term_presence, load_corpus,
                     save_corpus)
from .distill import (KdConfig, PseudoDocument, TeacherLogits,
                      TeacherLogitsError, kd_loss, load_teacher_logits,
                      save_teacher_logits, soften_and_clip, surrogate_teacher)
from .model import (CheckpointError, ForwardTrace, ModelHyper, ModelParams,
                    PriorLN, backward, batch_objective, decode, encode,
                    init_params, kl_term, load_checkpoint, prior_from_alpha,
                    recon_loss, save_checkpoint)
from .numerics import Adam, NumericalError, SeededRng, log_softmax, softmax
from .trainer import (ConfigError, RunRecord, TrainConfig, kl_weight,
                      run_restarts, train)

__version__ = "0.1.0"
