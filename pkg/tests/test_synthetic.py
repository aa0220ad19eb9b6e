"""Generator checks: Zipf-shaped label frequencies, feature locality,
and determinism of the synthetic corpora used by the integration tests."""

from collections import Counter

import pytest

from xmlc.corpus import parse_dataset, serialize_dataset
from xmlc.synthetic import SyntheticConfig, label_targets, make_zipf_corpus

SMALL = SyntheticConfig(n_docs=120, n_labels=20)


def test_label_targets_formula():
    cfg = SyntheticConfig(n_docs=100, n_labels=4, zipf_exponent=1.0, label_density=1.0)
    raw = [1.0, 0.5, 1 / 3, 0.25]
    scale = 100 / sum(raw)
    expected = [max(1, min(25, round(scale * r))) for r in raw]
    assert label_targets(cfg) == expected
    # Head is capped at a quarter of the corpus, tail never drops below one.
    assert expected[0] == 25
    assert all(t >= 1 for t in label_targets(SyntheticConfig(n_docs=50, n_labels=40)))


def test_corpus_shape_and_label_limits():
    corpus = make_zipf_corpus(SMALL, seed=1)
    assert len(corpus) == 120
    for i, doc in enumerate(corpus):
        assert doc.doc_id == i
        assert 1 <= len(doc.labels) <= SMALL.max_labels_per_doc
        assert doc.features
        assert all(0 <= f < SMALL.vocab_size for f, _ in doc.features)
        assert all(c > 0 for _, c in doc.features)
        assert list(doc.features) == sorted(doc.features)


def test_features_stay_in_owned_windows():
    corpus = make_zipf_corpus(SMALL, seed=2)
    for doc in corpus:
        allowed = set(range(SMALL.shared_words))
        for label in doc.labels:
            lo, hi = SMALL.topic_window(label)
            allowed.update(range(lo, hi))
        assert {f for f, _ in doc.features} <= allowed


def test_zipf_skew_head_and_tail():
    corpus = make_zipf_corpus(seed=0)  # default 2000 docs, 300 labels
    freq = Counter(l for doc in corpus for l in doc.labels)
    assert len(freq) == 300  # every label occurs
    assert max(freq.values()) >= 100
    tail = sum(1 for c in freq.values() if 1 <= c <= 3)
    assert tail >= 100


def test_determinism_and_seed_sensitivity():
    a = make_zipf_corpus(SMALL, seed=7)
    b = make_zipf_corpus(SMALL, seed=7)
    c = make_zipf_corpus(SMALL, seed=8)
    assert a.documents == b.documents
    assert a.documents != c.documents


def test_round_trip_through_dataset_file(tmp_path):
    corpus = make_zipf_corpus(SMALL, seed=3)
    path = tmp_path / "synthetic.txt"
    serialize_dataset(corpus, path)
    back = parse_dataset(path)
    assert len(back) == len(corpus)
    for orig, re_read in zip(corpus, back):
        assert orig.doc_id == re_read.doc_id
        assert orig.labels == re_read.labels
        assert orig.features == re_read.features


def test_config_validation():
    with pytest.raises(ValueError):
        SyntheticConfig(label_density=0.5)
    with pytest.raises(ValueError):
        SyntheticConfig(n_docs=0)
    with pytest.raises(ValueError):
        SyntheticConfig(topic_tokens_lo=0)
    with pytest.raises(ValueError):
        SyntheticConfig(noise_tokens_lo=5, noise_tokens_hi=2)
