"""Head-to-head comparison of two trained models: Jensen-Shannon divergence
between topic word distributions, greedy competitive linking, win counts over
the most-aligned pairs, and stratified pair sampling for qualitative review.

JS divergence uses natural log throughout, so values live in [0, ln 2].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams
from .numerics import SeededRng, softmax

LN2 = math.log(2.0)


@dataclass
class AlignedPair:
    topic_a: int
    topic_b: int
    jsd: float
    npmi_a: float = float("nan")
    npmi_b: float = float("nan")


def topic_word_distributions(params: ModelParams) -> np.ndarray:
    """(K, V) matrix of full topic word distributions.

    Row k is the model's word distribution for a document placed entirely on
    topic k, background included: softmax(background + topics[k]).
    """
    return softmax(params.background + params.topics, axis=1)


def _check_simplex(p: np.ndarray, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-8:
        raise ValueError(f"js_divergence: {name} is not on the simplex")
    return np.clip(p, 0.0, None)


def js_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """0.5*KL(p||mid) + 0.5*KL(q||mid) with mid = (p+q)/2, natural log."""
    p = _check_simplex(p, "p")
    q = _check_simplex(q, "q")
    mid = 0.5 * (p + q)
    mask_p = p > 0
    mask_q = q > 0
    kl_p = np.sum(p[mask_p] * np.log(p[mask_p] / mid[mask_p]))
    kl_q = np.sum(q[mask_q] * np.log(q[mask_q] / mid[mask_q]))
    return float(0.5 * kl_p + 0.5 * kl_q)


def jsd_matrix(dists_a: np.ndarray, dists_b: np.ndarray) -> np.ndarray:
    """All-pairs JS divergences between two stacks of distributions."""
    out = np.empty((dists_a.shape[0], dists_b.shape[0]))
    for i in range(dists_a.shape[0]):
        for j in range(dists_b.shape[0]):
            out[i, j] = js_divergence(dists_a[i], dists_b[j])
    return out


def greedy_link(cost: np.ndarray) -> list[tuple[int, int, float]]:
    """Greedy minimum-cost matching on a cost matrix.

    Repeatedly takes the smallest remaining entry (ties resolved to the
    lexicographically smallest index pair) and removes its row and column.
    This is the greedy approximation, not optimal assignment.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.size == 0:
        raise ValueError("greedy_link: empty cost matrix")
    work = cost.copy()
    links = []
    for _ in range(min(cost.shape)):
        flat = int(np.argmin(work))  # first minimum in row-major order
        i, j = divmod(flat, work.shape[1])
        links.append((i, j, float(cost[i, j])))
        work[i, :] = np.inf
        work[:, j] = np.inf
    return links


def competitive_link(dists_a: np.ndarray, dists_b: np.ndarray,
                     npmi_a=None, npmi_b=None) -> list[AlignedPair]:
    """Greedily match topics across two models by lowest JS divergence.

    Returns min(K_a, K_b) pairs sorted by jsd ascending; each topic appears
    at most once. Optional per-topic NPMI sequences annotate the pairs.
    """
    if dists_a.shape[0] == 0 or dists_b.shape[0] == 0:
        raise ValueError("competitive_link: a model has no topics")
    pairs = []
    for i, j, jsd in greedy_link(jsd_matrix(dists_a, dists_b)):
        pairs.append(AlignedPair(
            topic_a=i, topic_b=j, jsd=jsd,
            npmi_a=float(npmi_a[i]) if npmi_a is not None else float("nan"),
            npmi_b=float(npmi_b[j]) if npmi_b is not None else float("nan")))
    pairs.sort(key=lambda p: (p.jsd, p.topic_a, p.topic_b))
    return pairs


def head_to_head(pairs: list[AlignedPair],
                 threshold_count: int) -> tuple[int, int, int]:
    """(wins_a, wins_b, ties) by NPMI over the threshold_count best-aligned pairs."""
    if threshold_count > len(pairs):
        raise ValueError(
            f"head_to_head: threshold {threshold_count} exceeds "
            f"{len(pairs)} pairs")
    ranked = sorted(pairs, key=lambda p: p.jsd)[:threshold_count]
    wins_a = sum(1 for p in ranked if p.npmi_a > p.npmi_b)
    wins_b = sum(1 for p in ranked if p.npmi_b > p.npmi_a)
    ties = threshold_count - wins_a - wins_b
    return wins_a, wins_b, ties


def bracket_sample(pairs: list[AlignedPair], rng: SeededRng,
                   brackets: int = 5, per_bracket: int = 3) -> list[AlignedPair]:
    """Stratified sample across alignment quality.

    The JSD-sorted pair list is cut into `brackets` contiguous blocks of
    equal size (remainder rows going to the last block); `per_bracket` pairs
    are drawn without replacement from each block. Result is jsd-sorted.
    """
    if brackets < 1 or per_bracket < 1:
        raise ValueError("bracket_sample: brackets and per_bracket must be >= 1")
    if len(pairs) < brackets * per_bracket:
        raise ValueError(
            f"bracket_sample: need at least {brackets * per_bracket} pairs, "
            f"have {len(pairs)}")
    ranked = sorted(pairs, key=lambda p: p.jsd)
    base = len(ranked) // brackets
    sampled = []
    for b in range(brackets):
        start = b * base
        stop = start + base if b < brackets - 1 else len(ranked)
        block = ranked[start:stop]
        picks = rng.sample_without_replacement(len(block), per_bracket)
        sampled.extend(block[i] for i in sorted(picks))
    sampled.sort(key=lambda p: p.jsd)
    return sampled
