import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import brute_force_counts, brute_force_npmi, make_grad_setup
from topickd.corpus import BowCorpus, BowDocument, Vocabulary
from topickd.metrics import (CooccurrenceCounts, TopicWordList,
                             build_topic_report, count_cooccurrence,
                             counts_for_corpus, external_counts_load,
                             fails_redundancy_filter, npmi_model, npmi_pair,
                             npmi_topic, perplexity, redundancy_pairs,
                             top_words)
from topickd.model import ModelHyper, ModelParams, PriorLN, prior_from_alpha


def params_with_topics(topics, background=None):
    topics = np.asarray(topics, dtype=np.float64)
    k, v = topics.shape
    hyper = ModelHyper(n_topics=max(k, 2), vocab_size=v, hidden_dim=2)
    if background is None:
        background = np.log(np.full(v, 1.0 / v))
    return ModelParams(
        hyper=hyper, w_hidden=np.zeros((2, v)), b_hidden=np.zeros(2),
        w_mean=np.zeros((max(k, 2), 2)), b_mean=np.zeros(max(k, 2)),
        w_logvar=np.zeros((max(k, 2), 2)), b_logvar=np.zeros(max(k, 2)),
        topics=topics, background=np.asarray(background, dtype=np.float64))


class TestTopWords:
    def test_argsort(self):
        params = params_with_topics([[0.1, 0.9, 0.5], [0.0, 0.0, 0.0]])
        (first, _) = top_words(params, n=2)
        assert first.word_ids == [1, 2]

    def test_tie_breaks_to_lower_id(self):
        params = params_with_topics([[0.5, 0.9, 0.5], [0.0, 0.0, 0.0]])
        (first, _) = top_words(params, n=3)
        assert first.word_ids == [1, 0, 2]

    def test_background_excluded_from_ranking(self):
        topics = [[0.1, 0.9, 0.5], [0.3, 0.2, 0.1]]
        a = top_words(params_with_topics(topics), n=3)
        skew = np.array([10.0, -5.0, 2.0])
        b = top_words(params_with_topics(topics, background=skew), n=3)
        assert [t.word_ids for t in a] == [t.word_ids for t in b]

    def test_n_exceeding_vocab(self):
        with pytest.raises(ValueError):
            top_words(params_with_topics([[0.0, 1.0], [1.0, 0.0]]), n=3)

    def test_weights_non_increasing(self):
        params, _, _, _, _ = make_grad_setup()
        for topic in top_words(params, n=10):
            weights = [w for _, w in topic.words]
            assert all(a >= b for a, b in zip(weights, weights[1:]))


def presence(*word_lists):
    return [np.array(sorted(ws), dtype=np.int64) for ws in word_lists]


class TestCooccurrence:
    def test_worked_example(self):
        # docs {a,b},{a,b},{a,c},{d} with a,b,c,d = 0,1,2,3
        counts = count_cooccurrence(
            presence([0, 1], [0, 1], [0, 2], [3]), universe=[0, 1, 2, 3])
        assert counts.doc_count == 4
        assert counts.df(0) == 3 and counts.df(1) == 2
        assert counts.joint(0, 1) == 2 and counts.joint(1, 0) == 2
        assert counts.joint(1, 2) == 0

    def test_absent_word(self):
        counts = count_cooccurrence(presence([0]), universe=[0, 5])
        assert counts.df(5) == 0

    def test_word_outside_universe(self):
        counts = count_cooccurrence(presence([0, 9]), universe=[0])
        assert counts.df(9) == 0
        assert counts.df(0) == 1

    @given(st.lists(st.lists(st.integers(0, 39), min_size=1, max_size=15),
                    min_size=1, max_size=50))
    @settings(max_examples=100, deadline=None)
    def test_matches_brute_force(self, docs):
        doc_sets = [sorted(set(d)) for d in docs]
        universe = sorted({w for d in doc_sets for w in d})
        counts = count_cooccurrence(presence(*doc_sets), universe)
        n, df, joint = brute_force_counts(doc_sets)
        assert counts.doc_count == n
        for w in universe:
            assert counts.df(w) == df.get(w, 0)
        for i, v in enumerate(universe):
            for w in universe[i + 1:]:
                assert counts.joint(v, w) == joint.get((v, w), 0)


class TestNpmi:
    def test_perfect_association(self):
        counts = count_cooccurrence(presence([0, 1], [0, 1], [2]), [0, 1, 2])
        assert npmi_pair(counts, 0, 1) == pytest.approx(1.0)

    def test_worked_example(self):
        counts = count_cooccurrence(
            presence([0, 1], [0, 1], [0, 2], [3]), universe=[0, 1, 2, 3])
        expected = math.log(4 / 3) / math.log(2)
        assert npmi_pair(counts, 0, 1) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.4150, abs=1e-4)

    def test_zero_joint(self):
        counts = count_cooccurrence(presence([0], [1]), [0, 1])
        assert npmi_pair(counts, 0, 1) == -1.0

    def test_zero_df(self):
        counts = count_cooccurrence(presence([0]), [0, 1])
        assert npmi_pair(counts, 0, 1) == -1.0

    def test_topic_mean_and_order_invariance(self):
        counts = count_cooccurrence(
            presence([0, 1, 2], [0, 1], [2, 3], [0, 3]), [0, 1, 2, 3])
        t1 = TopicWordList(0, [(0, 3.0), (1, 2.0), (2, 1.0)])
        t2 = TopicWordList(0, [(2, 3.0), (0, 2.0), (1, 1.0)])
        assert npmi_topic(t1, counts) == pytest.approx(npmi_topic(t2, counts))

    def test_short_topic_rejected(self):
        counts = count_cooccurrence(presence([0]), [0])
        with pytest.raises(ValueError):
            npmi_topic(TopicWordList(0, [(0, 1.0)]), counts)

    @given(st.lists(st.lists(st.integers(0, 20), min_size=1, max_size=8),
                    min_size=1, max_size=30),
           st.lists(st.integers(0, 20), min_size=2, max_size=6, unique=True))
    @settings(max_examples=100, deadline=None)
    def test_in_unit_interval_and_matches_brute_force(self, docs, topic_ids):
        doc_sets = [sorted(set(d)) for d in docs]
        universe = sorted(set(topic_ids) | {w for d in doc_sets for w in d})
        counts = count_cooccurrence(presence(*doc_sets), universe)
        topic = TopicWordList(0, [(w, 1.0) for w in topic_ids])
        ours = npmi_topic(topic, counts)
        assert -1.0 - 1e-12 <= ours <= 1.0 + 1e-12
        n, df, joint = brute_force_counts(doc_sets)
        assert ours == pytest.approx(
            brute_force_npmi(topic_ids, n, df, joint), abs=1e-12)

    def test_model_mean(self):
        counts = count_cooccurrence(
            presence([0, 1], [0, 1], [2, 3]), [0, 1, 2, 3])
        t1 = TopicWordList(0, [(0, 1.0), (1, 0.5)])
        t2 = TopicWordList(1, [(2, 1.0), (3, 0.5)])
        x, y = npmi_topic(t1, counts), npmi_topic(t2, counts)
        assert npmi_model([t1, t2], counts) == pytest.approx((x + y) / 2)
        assert npmi_model([t2, t1], counts) == pytest.approx((x + y) / 2)
        assert npmi_model([t1], counts) == pytest.approx(x)


class TestExternalCounts:
    def test_load_and_query(self, tmp_path):
        path = tmp_path / "ext.json"
        path.write_text(json.dumps({
            "doc_count": 100,
            "df": {"apple": 50, "pear": 20, "unknown-token": 7},
            "joint": [["apple", "pear", 10], ["apple", "mystery", 3]],
        }))
        vocab = Vocabulary(["apple", "pear", "plum"])
        counts = external_counts_load(path, vocab)
        assert counts.doc_count == 100
        assert counts.df(0) == 50
        assert counts.joint(0, 1) == 10
        assert counts.joint(1, 0) == 10
        assert counts.joint(0, 2) == 0  # missing pair means zero

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("[1, 2, 3]")
        with pytest.raises(ValueError):
            external_counts_load(path, Vocabulary(["a"]))


def topic_of(ids):
    return TopicWordList(0, [(w, 1.0) for w in ids])


class TestRedundancy:
    def test_counts_zero_one_three(self):
        distinct = [topic_of(range(i, i + 10)) for i in range(0, 40, 10)]
        assert redundancy_pairs(distinct) == 0
        same = topic_of(range(10))
        reordered = TopicWordList(1, [(w, 1.0) for w in reversed(range(10))])
        assert redundancy_pairs([same, reordered, topic_of(range(20, 30))]) == 1
        triple = [topic_of(range(10)) for _ in range(3)]
        assert redundancy_pairs(triple) == 3

    def test_filter_threshold(self):
        distinct = [topic_of(range(i, i + 10)) for i in range(0, 40, 10)]
        assert not fails_redundancy_filter(distinct)
        one_pair = distinct[:2] + [topic_of(range(0, 10))]
        assert not fails_redundancy_filter(one_pair)
        three = [topic_of(range(10)) for _ in range(3)]
        assert fails_redundancy_filter(three)

    def test_wrong_length_rejected(self):
        with pytest.raises(ValueError, match="exactly 10"):
            redundancy_pairs([topic_of(range(9))])


class TestPerplexity:
    def prior_matched_params(self, vocab_size=16, n_topics=3):
        hyper = ModelHyper(n_topics=n_topics, vocab_size=vocab_size,
                           hidden_dim=2, alpha=1.0)
        prior = prior_from_alpha(1.0, n_topics)
        params = ModelParams(
            hyper=hyper, w_hidden=np.zeros((2, vocab_size)),
            b_hidden=np.zeros(2), w_mean=np.zeros((n_topics, 2)),
            b_mean=np.zeros(n_topics), w_logvar=np.zeros((n_topics, 2)),
            b_logvar=np.log(prior.var),
            topics=np.zeros((n_topics, vocab_size)),
            background=np.log(np.full(vocab_size, 1.0 / vocab_size)))
        return params, prior

    def test_uniform_untrained_model_gives_vocab_size(self):
        params, prior = self.prior_matched_params()
        docs = [BowDocument("a", [(0, 3), (5, 1)]), BowDocument("b", [(2, 2)])]
        assert perplexity(docs, params, prior) == pytest.approx(16.0, rel=1e-9)

    def test_duplication_invariance(self):
        params, prior = self.prior_matched_params()
        docs = [BowDocument("a", [(0, 3), (5, 1)]), BowDocument("b", [(2, 2)])]
        doubled = docs + [BowDocument(d.id + "x", d.entries) for d in docs]
        assert perplexity(doubled, params, prior) == \
            pytest.approx(perplexity(docs, params, prior), rel=1e-12)

    def test_memorized_corpus_approaches_one_plus_kl(self):
        params, prior = self.prior_matched_params()
        params.background = np.full(16, -50.0)
        params.background[3] = 0.0  # near-delta on word 3
        docs = [BowDocument("a", [(3, 9)])]
        assert perplexity(docs, params, prior) < 1.01

    def test_empty_split(self):
        params, prior = self.prior_matched_params()
        with pytest.raises(ValueError):
            perplexity([], params, prior)


class TestReport:
    def test_report_shape(self, tiny_corpus):
        params, prior, _, _, _ = make_grad_setup()
        report = build_topic_report(params, prior, tiny_corpus, "dev")
        assert set(report) == {"topics", "mean_npmi", "redundant_pairs",
                               "perplexity"}
        assert len(report["topics"]) == 5
        assert all(len(t["words"]) == 10 for t in report["topics"])
        assert all(isinstance(w, str) for w in report["topics"][0]["words"])

    def test_report_with_external(self, tiny_corpus, tmp_path):
        params, prior, _, _, _ = make_grad_setup()
        path = tmp_path / "ext.json"
        tok = tiny_corpus.vocabulary.token
        path.write_text(json.dumps({
            "doc_count": 10, "df": {tok(0): 5, tok(1): 5},
            "joint": [[tok(0), tok(1), 3]]}))
        ext = external_counts_load(path, tiny_corpus.vocabulary)
        report = build_topic_report(params, prior, tiny_corpus, "dev",
                                    external_counts=ext)
        assert "external_npmi" in report
