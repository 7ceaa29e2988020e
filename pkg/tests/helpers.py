"""Shared builders and independent oracles used across the test suite.

The oracles here are deliberately naive re-implementations (explicit loops,
no shared code paths with the package) so they can arbitrate correctness.
"""

import numpy as np

from topickd.model import ModelHyper, init_params, prior_from_alpha
from topickd.numerics import SeededRng


def make_grad_setup(doc_seed=6, param_seed=124, vocab_size=30, n_topics=5,
                    hidden_dim=7, batch=4, n_words=4, max_count=2):
    """Tiny model + batch + fixed noise + pseudo-docs for gradient checks."""
    hyper = ModelHyper(n_topics=n_topics, vocab_size=vocab_size,
                       hidden_dim=hidden_dim, alpha=1.0)
    background = np.log(np.full(vocab_size, 1.0 / vocab_size))
    params = init_params(hyper, background, SeededRng(param_seed))
    prior = prior_from_alpha(1.0, n_topics)
    gen = np.random.Generator(np.random.PCG64(doc_seed))
    docs = np.zeros((batch, vocab_size))
    for i in range(batch):
        ids = gen.choice(vocab_size, size=n_words, replace=False)
        docs[i, ids] = gen.integers(1, max_count + 1, size=n_words)
    noise = gen.standard_normal((batch, n_topics))
    pseudo = gen.random((batch, vocab_size))
    pseudo = pseudo / pseudo.sum(axis=1, keepdims=True) * docs.sum(axis=1, keepdims=True)
    return params, prior, docs, noise, pseudo


def central_differences(loss_fn, arr, h=1e-5):
    """Perturb every element of `arr` in place; loss_fn takes no arguments."""
    flat = arr.reshape(-1)
    fd = np.zeros_like(flat)
    for j in range(flat.size):
        orig = flat[j]
        flat[j] = orig + h
        up = loss_fn()
        flat[j] = orig - h
        down = loss_fn()
        flat[j] = orig
        fd[j] = (up - down) / (2.0 * h)
    return fd.reshape(arr.shape)


def brute_force_counts(doc_word_sets):
    """Document frequencies and joint frequencies by explicit double loop."""
    df = {}
    joint = {}
    for words in doc_word_sets:
        words = sorted(set(words))
        for w in words:
            df[w] = df.get(w, 0) + 1
        for i in range(len(words)):
            for j in range(i + 1, len(words)):
                key = (words[i], words[j])
                joint[key] = joint.get(key, 0) + 1
    return len(doc_word_sets), df, joint


def brute_force_npmi(word_ids, n_docs, df, joint):
    """Mean pairwise NPMI straight from the definition."""
    import math
    scores = []
    for i in range(len(word_ids)):
        for j in range(i + 1, len(word_ids)):
            v, w = word_ids[i], word_ids[j]
            key = (min(v, w), max(v, w))
            dv, dw, jc = df.get(v, 0), df.get(w, 0), joint.get(key, 0)
            if dv == 0 or dw == 0 or jc == 0:
                scores.append(-1.0)
            elif jc == n_docs:
                scores.append(1.0)
            else:
                pmi = math.log((jc / n_docs) / ((dv / n_docs) * (dw / n_docs)))
                scores.append(pmi / -math.log(jc / n_docs))
    return sum(scores) / len(scores)


def greedy_matching_oracle(cost):
    """Greedy min-cost matching by one ascending sweep over all cells.

    Structurally different from the package's repeated-argmin loop but
    provably produces the same matching (including the (cost, i, j) tie
    order), which is what makes it a usable cross-check.
    """
    rows, cols = cost.shape
    cells = sorted((float(cost[i, j]), i, j)
                   for i in range(rows) for j in range(cols))
    used_r, used_c, out = set(), set(), []
    for c, i, j in cells:
        if i in used_r or j in used_c:
            continue
        out.append((i, j, c))
        used_r.add(i)
        used_c.add(j)
        if len(out) == min(rows, cols):
            break
    return out


def all_matchings_2x2(cost):
    """Total weights of both perfect matchings of a 2x2 matrix."""
    return (float(cost[0, 0] + cost[1, 1]), float(cost[0, 1] + cost[1, 0]))
