"""Logistic-normal variational topic model with hand-derived gradients.

Generative story per document: draw a topic mixture from a logistic normal
prior, then draw words from softmax(background + mixture @ topics). The
encoder is one softplus hidden layer with linear mean/log-variance heads; the
reparameterized sample is pushed through a softmax to land on the simplex.

All gradients are derived by hand (no autodiff) and validated against central
finite differences in the test suite. The background log-frequency vector is
fixed: it never receives updates.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .corpus import BowDocument, docs_to_dense
from .numerics import NumericalError, SeededRng, log_softmax, sigmoid, softmax, softplus

LOGVAR_CLAMP = 8.0
CHECKPOINT_MAGIC = b"BATM"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Unreadable or inconsistent checkpoint file."""


@dataclass
class ModelHyper:
    n_topics: int
    vocab_size: int
    hidden_dim: int = 300
    alpha: float = 1.0
    dropout_rate: float = 0.0

    def __post_init__(self):
        if self.n_topics < 2:
            raise ValueError("ModelHyper: n_topics must be >= 2")
        if self.hidden_dim < 1:
            raise ValueError("ModelHyper: hidden_dim must be >= 1")
        if self.alpha <= 0:
            raise ValueError("ModelHyper: alpha must be positive")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ValueError("ModelHyper: dropout_rate must be in [0, 1)")


@dataclass
class PriorLN:
    """Diagonal Gaussian prior on the pre-softmax topic mixture."""

    mean: np.ndarray
    var: np.ndarray


def prior_from_alpha(alpha: float, n_topics: int) -> PriorLN:
    """Gaussian matching a symmetric Dirichlet(alpha) in the softmax basis.

    Laplace-approximation construction: zero mean and per-component variance
    (1/alpha) * (1 - 2/K) + 1/(K*alpha).
    """
    if alpha <= 0:
        raise ValueError("prior_from_alpha: alpha must be positive")
    if n_topics < 2:
        raise ValueError("prior_from_alpha: n_topics must be >= 2")
    var = (1.0 / alpha) * (1.0 - 2.0 / n_topics) + 1.0 / (n_topics * alpha)
    return PriorLN(mean=np.zeros(n_topics), var=np.full(n_topics, var))


@dataclass
class ModelParams:
    """All model tensors. `background` is frozen; the rest train."""

    hyper: ModelHyper
    w_hidden: np.ndarray   # (H, V)
    b_hidden: np.ndarray   # (H,)
    w_mean: np.ndarray     # (K, H)
    b_mean: np.ndarray     # (K,)
    w_logvar: np.ndarray   # (K, H)
    b_logvar: np.ndarray   # (K,)
    topics: np.ndarray     # (K, V) per-topic word-logit deviations
    background: np.ndarray  # (V,) fixed log-frequencies

    TRAINABLE = ("w_hidden", "b_hidden", "w_mean", "b_mean",
                 "w_logvar", "b_logvar", "topics")

    def trainable(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.TRAINABLE}

    def all_tensors(self) -> dict[str, np.ndarray]:
        return {**self.trainable(), "background": self.background}


def _glorot(rng: SeededRng, fan_out: int, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, (fan_out, fan_in))


def init_params(hyper: ModelHyper, background: np.ndarray,
                rng: SeededRng) -> ModelParams:
    """Glorot-uniform weights, zero biases.

    Consumes the run RNG in a fixed order (w_hidden, w_mean, w_logvar,
    topics) so per-seed trajectories are reproducible.
    """
    background = np.asarray(background, dtype=np.float64)
    if background.shape != (hyper.vocab_size,):
        raise ValueError(
            f"init_params: background shape {background.shape} != "
            f"({hyper.vocab_size},)")
    k, v, h = hyper.n_topics, hyper.vocab_size, hyper.hidden_dim
    return ModelParams(
        hyper=hyper,
        w_hidden=_glorot(rng, h, v),
        b_hidden=np.zeros(h),
        w_mean=_glorot(rng, k, h),
        b_mean=np.zeros(k),
        w_logvar=_glorot(rng, k, h),
        b_logvar=np.zeros(k),
        topics=_glorot(rng, k, v),
        background=background.copy(),
    )


@dataclass
class ForwardTrace:
    """Everything the backward pass needs, cached from one forward pass."""

    counts: np.ndarray       # (n, V)
    pre_hidden: np.ndarray   # (n, H) before softplus
    hidden: np.ndarray       # (n, H) after softplus and dropout
    drop_mask: np.ndarray | None
    mean: np.ndarray         # (n, K)
    logvar_raw: np.ndarray   # (n, K) before clamping
    logvar: np.ndarray       # (n, K) clamped to [-LOGVAR_CLAMP, LOGVAR_CLAMP]
    noise: np.ndarray        # (n, K) standard-normal draws (zeros in eval)
    theta: np.ndarray        # (n, K) simplex rows


def _as_count_matrix(docs, vocab_size: int) -> np.ndarray:
    if isinstance(docs, BowDocument):
        docs = [docs]
    if isinstance(docs, np.ndarray):
        x = np.asarray(docs, dtype=np.float64)
        return x.reshape(1, -1) if x.ndim == 1 else x
    return docs_to_dense(list(docs), vocab_size)


def forward_from_inputs(counts: np.ndarray, params: ModelParams,
                        noise: np.ndarray,
                        drop_mask: np.ndarray | None) -> ForwardTrace:
    """Deterministic forward pass given explicit noise and dropout mask."""
    pre_hidden = counts @ params.w_hidden.T + params.b_hidden
    hidden = softplus(pre_hidden)
    if drop_mask is not None:
        hidden = hidden * drop_mask
    mean = hidden @ params.w_mean.T + params.b_mean
    logvar_raw = hidden @ params.w_logvar.T + params.b_logvar
    logvar = np.clip(logvar_raw, -LOGVAR_CLAMP, LOGVAR_CLAMP)
    z = mean + np.exp(0.5 * logvar) * noise
    if not np.all(np.isfinite(z)):
        raise NumericalError("encode: non-finite activation")
    theta = softmax(z, axis=1)
    return ForwardTrace(counts=counts, pre_hidden=pre_hidden, hidden=hidden,
                        drop_mask=drop_mask, mean=mean, logvar_raw=logvar_raw,
                        logvar=logvar, noise=noise, theta=theta)


def encode(docs, params: ModelParams, rng: SeededRng | None = None,
           train_mode: bool = False) -> ForwardTrace:
    """Run the encoder on one document, a list, or a dense count matrix.

    In train mode the dropout mask (inverted scaling) is drawn first, then
    the reparameterization noise; eval mode uses no dropout and zero noise,
    so the mixture is softmax of the variational mean.
    """
    counts = _as_count_matrix(docs, params.hyper.vocab_size)
    n = counts.shape[0]
    k = params.hyper.n_topics
    drop_mask = None
    if train_mode:
        if rng is None:
            raise ValueError("encode: train_mode requires an rng")
        rate = params.hyper.dropout_rate
        if rate > 0.0:
            keep = rng.uniform(0.0, 1.0, (n, params.hyper.hidden_dim)) >= rate
            drop_mask = keep.astype(np.float64) / (1.0 - rate)
        noise = rng.standard_normal((n, k))
    else:
        noise = np.zeros((n, k))
    return forward_from_inputs(counts, params, noise, drop_mask)


def decode(theta, params: ModelParams, temperature: float = 1.0) -> np.ndarray:
    """Log word probabilities log softmax((background + theta @ topics) / T).

    temperature=1 is the model's own word distribution; larger values flatten
    it for the distillation target.
    """
    if temperature < 1.0:
        raise ValueError("decode: temperature must be >= 1")
    theta = np.asarray(theta, dtype=np.float64)
    single = theta.ndim == 1
    logits = np.atleast_2d(theta) @ params.topics + params.background
    if temperature != 1.0:
        logits = logits / temperature
    out = log_softmax(logits, axis=1)
    return out[0] if single else out


def recon_loss(doc, log_probs: np.ndarray) -> float:
    """Negative count-weighted log-likelihood of one document."""
    log_probs = np.asarray(log_probs, dtype=np.float64)
    if isinstance(doc, BowDocument):
        counts = docs_to_dense([doc], log_probs.shape[-1])[0]
    else:
        counts = np.asarray(doc, dtype=np.float64)
    return float(-(counts * log_probs).sum())


def kl_term(mean, logvar, prior: PriorLN):
    """Analytic KL(q || prior) for diagonal Gaussians.

    1-D inputs give a scalar; (n, K) inputs give a per-document vector.
    """
    if np.any(prior.var <= 0):
        raise ValueError("kl_term: prior variance must be positive")
    mean = np.asarray(mean, dtype=np.float64)
    logvar = np.asarray(logvar, dtype=np.float64)
    single = mean.ndim == 1
    mean = np.atleast_2d(mean)
    logvar = np.atleast_2d(logvar)
    per_dim = (np.exp(logvar) / prior.var
               + (prior.mean - mean) ** 2 / prior.var
               - 1.0 + np.log(prior.var) - logvar)
    kl = 0.5 * per_dim.sum(axis=1)
    return float(kl[0]) if single else kl


@dataclass
class LossBreakdown:
    total: float        # objective actually minimized (incl. weighted KL)
    recon: float        # mean unweighted reconstruction term
    kd: float           # mean unweighted teacher cross-entropy term (0 if off)
    kl: float           # mean unweighted KL term


def _loss_terms(trace: ForwardTrace, params: ModelParams, prior: PriorLN,
                pseudo: np.ndarray | None, kd_lambda: float,
                kd_temperature: float):
    """Per-document loss pieces plus the softmaxes the backward pass reuses."""
    n = trace.counts.shape[0]
    raw_logits = trace.theta @ params.topics + params.background
    recon_active = pseudo is None or kd_lambda < 1.0
    kd_active = pseudo is not None and kd_lambda > 0.0

    probs_t1 = probs_tt = None
    recon_each = np.zeros(n)
    kd_each = np.zeros(n)
    if recon_active:
        log_t1 = log_softmax(raw_logits, axis=1)
        probs_t1 = np.exp(log_t1)
        recon_each = -(trace.counts * log_t1).sum(axis=1)
    if kd_active:
        if pseudo.shape != trace.counts.shape:
            raise ValueError(
                f"kd pseudo-document shape {pseudo.shape} does not match "
                f"batch counts {trace.counts.shape}")
        log_tt = log_softmax(raw_logits / kd_temperature, axis=1)
        probs_tt = np.exp(log_tt)
        kd_each = -(pseudo * log_tt).sum(axis=1)

    if pseudo is None:
        data_each = recon_each
    else:
        data_each = np.zeros(n)
        if kd_active:
            data_each = data_each + kd_lambda * kd_temperature ** 2 * kd_each
        if recon_active:
            data_each = data_each + (1.0 - kd_lambda) * recon_each
    kl_each = kl_term(trace.mean, trace.logvar, prior)
    return data_each, recon_each, kd_each, kl_each, probs_t1, probs_tt


def batch_objective(trace: ForwardTrace, params: ModelParams, prior: PriorLN,
                    kl_weight: float = 1.0, pseudo: np.ndarray | None = None,
                    kd_lambda: float = 0.0,
                    kd_temperature: float = 1.0) -> LossBreakdown:
    """Mean per-document loss: distillation-or-reconstruction + weighted KL."""
    data_each, recon_each, kd_each, kl_each, _, _ = _loss_terms(
        trace, params, prior, pseudo, kd_lambda, kd_temperature)
    total = float(data_each.mean() + kl_weight * kl_each.mean())
    if not np.isfinite(total):
        raise NumericalError("batch_objective: non-finite loss")
    return LossBreakdown(total=total, recon=float(recon_each.mean()),
                         kd=float(kd_each.mean()), kl=float(kl_each.mean()))


def backward(trace: ForwardTrace, params: ModelParams, prior: PriorLN,
             kl_weight: float = 1.0, pseudo: np.ndarray | None = None,
             kd_lambda: float = 0.0, kd_temperature: float = 1.0
             ) -> tuple[LossBreakdown, dict[str, np.ndarray]]:
    """Analytic gradients of the mean per-document loss.

    Returns the loss breakdown and a gradient per trainable tensor. The
    background vector is excluded by construction. Matches central finite
    differences; see the acceptance suite.
    """
    data_each, recon_each, kd_each, kl_each, probs_t1, probs_tt = _loss_terms(
        trace, params, prior, pseudo, kd_lambda, kd_temperature)
    n = trace.counts.shape[0]
    total = float(data_each.mean() + kl_weight * kl_each.mean())
    breakdown = LossBreakdown(total=total, recon=float(recon_each.mean()),
                              kd=float(kd_each.mean()), kl=float(kl_each.mean()))

    # d(objective)/d(raw decoder logits), shape (n, V).
    grad_logits = np.zeros_like(trace.counts)
    if probs_t1 is not None:
        coeff = 1.0 if pseudo is None else 1.0 - kd_lambda
        n_tokens = trace.counts.sum(axis=1, keepdims=True)
        grad_logits += coeff * (n_tokens * probs_t1 - trace.counts)
    if probs_tt is not None:
        # lambda * T^2 on the loss and the 1/T chain factor leave lambda * T.
        pseudo_mass = pseudo.sum(axis=1, keepdims=True)
        grad_logits += (kd_lambda * kd_temperature) * (pseudo_mass * probs_tt - pseudo)
    grad_logits /= n

    grad_topics = trace.theta.T @ grad_logits
    d_theta = grad_logits @ params.topics.T
    # Softmax Jacobian: dz = theta * (dtheta - <dtheta, theta>).
    inner = (d_theta * trace.theta).sum(axis=1, keepdims=True)
    d_z = trace.theta * (d_theta - inner)

    kl_scale = kl_weight / n
    d_mean = d_z + kl_scale * (trace.mean - prior.mean) / prior.var
    d_logvar = (d_z * trace.noise * 0.5 * np.exp(0.5 * trace.logvar)
                + kl_scale * 0.5 * (np.exp(trace.logvar) / prior.var - 1.0))
    # The clamp is flat outside its bounds: no gradient flows back there.
    d_logvar_raw = d_logvar * (np.abs(trace.logvar_raw) < LOGVAR_CLAMP)

    grad_w_mean = d_mean.T @ trace.hidden
    grad_b_mean = d_mean.sum(axis=0)
    grad_w_logvar = d_logvar_raw.T @ trace.hidden
    grad_b_logvar = d_logvar_raw.sum(axis=0)

    d_hidden = d_mean @ params.w_mean + d_logvar_raw @ params.w_logvar
    if trace.drop_mask is not None:
        d_hidden = d_hidden * trace.drop_mask
    d_pre = d_hidden * sigmoid(trace.pre_hidden)
    grad_w_hidden = d_pre.T @ trace.counts
    grad_b_hidden = d_pre.sum(axis=0)

    grads = {
        "w_hidden": grad_w_hidden, "b_hidden": grad_b_hidden,
        "w_mean": grad_w_mean, "b_mean": grad_b_mean,
        "w_logvar": grad_w_logvar, "b_logvar": grad_b_logvar,
        "topics": grad_topics,
    }
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"backward: non-finite gradient for '{name}'")
    return breakdown, grads


# --- checkpoint i/o ---------------------------------------------------------
#
# Binary layout (little-endian): magic "BATM", version u32, record count u32,
# then per record: name length u32, UTF-8 name, rank u32, dims u64 each,
# float64 row-major data; finally a JSON trailer (u64 byte length + UTF-8)
# carrying the hyperparameters. Round trips are bit-exact.

def save_checkpoint(path, params: ModelParams) -> None:
    tensors = params.all_tensors()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(tensors)))
        for name in sorted(tensors):
            arr = np.ascontiguousarray(tensors[name], dtype="<f8")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())
        hyper = params.hyper
        trailer = json.dumps({
            "n_topics": hyper.n_topics, "vocab_size": hyper.vocab_size,
            "hidden_dim": hyper.hidden_dim, "alpha": hyper.alpha,
            "dropout_rate": hyper.dropout_rate,
        }).encode("utf-8")
        fh.write(struct.pack("<Q", len(trailer)))
        fh.write(trailer)


def _read_exact(fh, size: int, what: str) -> bytes:
    data = fh.read(size)
    if len(data) != size:
        raise CheckpointError(
            f"truncated checkpoint: wanted {size} bytes for {what} at byte "
            f"offset {fh.tell() - len(data)}, got {len(data)}")
    return data


def load_checkpoint(path) -> ModelParams:
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(
                f"bad magic at byte offset 0: {magic!r} != {CHECKPOINT_MAGIC!r}")
        version, n_records = struct.unpack("<II", _read_exact(fh, 8, "header"))
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        tensors: dict[str, np.ndarray] = {}
        for _ in range(n_records):
            (name_len,) = struct.unpack("<I", _read_exact(fh, 4, "name length"))
            name = _read_exact(fh, name_len, "name").decode("utf-8")
            (rank,) = struct.unpack("<I", _read_exact(fh, 4, "rank"))
            dims = struct.unpack(f"<{rank}Q", _read_exact(fh, 8 * rank, "dims"))
            count = int(np.prod(dims)) if rank else 1
            raw = _read_exact(fh, 8 * count, f"data of '{name}'")
            tensors[name] = np.frombuffer(raw, dtype="<f8").reshape(dims).copy()
        (trailer_len,) = struct.unpack("<Q", _read_exact(fh, 8, "trailer length"))
        meta = json.loads(_read_exact(fh, trailer_len, "trailer").decode("utf-8"))

    hyper = ModelHyper(**meta)
    expected = {"w_hidden", "b_hidden", "w_mean", "b_mean", "w_logvar",
                "b_logvar", "topics", "background"}
    if set(tensors) != expected:
        raise CheckpointError(
            f"checkpoint tensors {sorted(tensors)} != expected {sorted(expected)}")
    params = ModelParams(hyper=hyper, **tensors)
    k, v, h = hyper.n_topics, hyper.vocab_size, hyper.hidden_dim
    shapes = {"w_hidden": (h, v), "b_hidden": (h,), "w_mean": (k, h),
              "b_mean": (k,), "w_logvar": (k, h), "b_logvar": (k,),
              "topics": (k, v), "background": (v,)}
    for name, shape in shapes.items():
        if tensors[name].shape != shape:
            raise CheckpointError(
                f"tensor '{name}' has shape {tensors[name].shape}, "
                f"expected {shape}")
    return params
