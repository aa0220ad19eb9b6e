"""Inverted-index scoring against dense full-vocabulary oracles, plus
transposed-prediction semantics: capacities, tie-breaks, thresholds,
and order/worker invariance."""

import math

import numpy as np
import pytest

from xmlc.corpus import Corpus, Hierarchy, SparseDocument, labelset_stats
from xmlc.inference import (
    InstantiateConfig,
    PredictionList,
    PredictionPolicy,
    _log_mean_top,
    _top_order,
    build_inverted_index,
    predict_per_document,
    predict_transposed,
    score_document,
)
from xmlc.sgm import (
    ModelFlags,
    SgmModel,
    SmoothingConfig,
    PruningConfig,
    kernel_doc_prob,
    label_word_prob,
    train_model,
    weight_document,
)
from xmlc.weighting import WeightingConfig, WeightingScheme

W_TIX = WeightingConfig(scheme=WeightingScheme.TIX)
P_NONE = PruningConfig()


def _random_corpus(rng, n_docs=30, vocab=60, n_labels=12, single_label=False):
    docs = []
    for d in range(n_docs):
        k = int(rng.integers(3, 9))
        feats = rng.choice(vocab, size=k, replace=False)
        features = tuple(sorted((int(f), float(rng.integers(1, 5))) for f in feats))
        n_l = 1 if single_label else int(rng.integers(1, 3))
        labels = frozenset(int(l) for l in rng.choice(n_labels, size=n_l, replace=False))
        docs.append(SparseDocument(d, features, labels))
    return Corpus(tuple(docs), source_name="random")


def _dense_scores(model: SgmModel, features) -> np.ndarray:
    """Score every target by walking the model's probability functions
    directly, with none of the posting-list machinery."""
    out = []
    for label in model.labels:
        s = model.prior_scale * math.log(model.label_prior[label])
        if not model.flags.kd:
            for f, x in features:
                s += x * math.log(label_word_prob(model, label, f))
            out.append(s)
            continue
        kernel_scores = []
        for kernel in model.kernel_store.get(label, ()):
            if model.flags.bm25_kernel:
                w = dict(kernel.features)
                kernel_scores.append(sum(x * w.get(f, 0.0) for f, x in features))
            else:
                ks = 0.0
                for f, x in features:
                    ks += x * math.log(kernel_doc_prob(model, kernel, f, label=label))
                kernel_scores.append(ks)
        if not kernel_scores:
            out.append(-math.inf)
        elif model.flags.bm25_kernel:
            out.append(s + max(kernel_scores))
        else:
            k = min(model.kernel_top_k, len(kernel_scores))
            top = sorted(kernel_scores)[-k:]
            m = max(top)
            out.append(s + m + math.log(sum(math.exp(v - m) for v in top) / k))
    return np.array(out)


def _dense_ranking(model, features):
    scores = _dense_scores(model, features)
    labels = model.labels
    return sorted(range(len(labels)), key=lambda i: (-scores[i], labels[i])), scores


def _families():
    uni = SmoothingConfig(jm_lambda=0.9)
    mix = SmoothingConfig(jm_lambda=0.9, dirichlet_mu=25.0)
    hier = Hierarchy(
        frozenset((100 + l % 3, l) for l in range(12)),
        {l: (100 + l % 3,) for l in range(12)},
    )
    return [
        ("plain", ModelFlags(), uni, None),
        ("powerset", ModelFlags(lp=True), uni, None),
        ("hierarchy", ModelFlags(), SmoothingConfig(jm_lambda=0.9, hierarchy_mix=0.4), hier),
        ("kernel_backoff", ModelFlags(kd=True), mix, None),
        ("kernel_direct", ModelFlags(kd=True, nobo=True), mix, None),
        ("kernel_bm25", ModelFlags(kd=True, nobo=True, bm25_kernel=True), mix, None),
    ]


@pytest.mark.parametrize("name,flags,smoothing,hierarchy", _families())
def test_sparse_matches_dense_per_family(name, flags, smoothing, hierarchy):
    for seed in range(6):
        rng = np.random.default_rng(1000 + seed)
        corpus = _random_corpus(rng)
        model = train_model(
            corpus, W_TIX, smoothing, P_NONE, flags,
            prior_scale=float(rng.uniform(0.2, 2.0)), hierarchy=hierarchy, seed=seed,
        )
        index = build_inverted_index(model)
        labels = np.asarray(model.labels)
        for doc in list(corpus)[:5]:
            weighted = SparseDocument(doc.doc_id, weight_document(model, doc), doc.labels)
            pred = score_document(index, weighted, top_k=len(labels))
            order, dense = _dense_ranking(model, weighted.features)
            assert pred.labels.tolist() == [int(labels[i]) for i in order]
            by_label = dict(pred.pairs())
            for i, l in enumerate(labels.tolist()):
                assert by_label[l] == pytest.approx(dense[i], abs=1e-9)


def test_kernel_aggregation_over_thirty_kernels():
    rng = np.random.default_rng(77)
    docs = list(_random_corpus(rng, n_docs=30, n_labels=1, single_label=True))
    docs += list(
        SparseDocument(30 + i, d.features, frozenset({1 + i % 3}))
        for i, d in enumerate(_random_corpus(rng, n_docs=9, single_label=True))
    )
    corpus = Corpus(tuple(SparseDocument(i, d.features, d.labels) for i, d in enumerate(docs)), "kd")
    model = train_model(
        corpus, W_TIX, SmoothingConfig(jm_lambda=0.9, dirichlet_mu=40.0),
        P_NONE, ModelFlags(kd=True),
    )
    assert len(model.kernel_store[0]) == 30
    index = build_inverted_index(model)
    for doc in list(corpus)[:4]:
        weighted = SparseDocument(doc.doc_id, weight_document(model, doc), doc.labels)
        pred = score_document(index, weighted, top_k=len(model.labels))
        dense = _dense_scores(model, weighted.features)
        got = dict(pred.pairs())
        for i, l in enumerate(model.labels):
            assert got[l] == pytest.approx(dense[i], abs=1e-9)


def _tiny_model(**kw):
    corpus = Corpus(
        (
            SparseDocument(0, ((5, 2.0),), frozenset({0})),
            SparseDocument(1, ((7, 1.0),), frozenset({1})),
        ),
        "tiny",
    )
    return train_model(corpus, W_TIX, SmoothingConfig(jm_lambda=0.9), P_NONE, **kw)


def test_single_feature_posting_lists():
    model = _tiny_model()
    index = build_inverted_index(model)
    assert len(index.posting(5)) == 1
    assert len(index.posting(7)) == 1
    assert index.posting(12345) == []
    slot, lift = index.posting(5)[0]
    assert model.labels[slot] == 0
    lam = model.smoothing.jm_lambda
    bg = model.background.prob(5)
    assert lift == pytest.approx(
        math.log(label_word_prob(model, 0, 5)) - math.log(lam) - math.log(bg)
    )


def test_unseen_features_score_prior_plus_floor():
    model = _tiny_model()
    index = build_inverted_index(model)
    doc = SparseDocument(9, ((999, 3.0),), frozenset())
    pred = score_document(index, doc, top_k=2)
    lam = model.smoothing.jm_lambda
    floor = 3.0 * (math.log(lam) + math.log(model.background.prob(999)))
    for label, score in pred.pairs():
        want = model.prior_scale * math.log(model.label_prior[label]) + floor
        assert score == pytest.approx(want, abs=1e-12)


def test_empty_document_ranks_by_prior():
    model = _tiny_model()
    index = build_inverted_index(model)
    pred = score_document(index, SparseDocument(3, (), frozenset()), top_k=2)
    assert len(pred) == 2
    assert pred.scores[0] >= pred.scores[1]


def test_lambda_zero_rejected_when_floor_needs_it():
    zero = SmoothingConfig(jm_lambda=0.0)
    corpus = Corpus((SparseDocument(0, ((1, 1.0),), frozenset({0})),), "z")
    plain = train_model(corpus, W_TIX, zero, P_NONE)
    with pytest.raises(ValueError, match="jm_lambda"):
        build_inverted_index(plain)
    backoff = train_model(corpus, W_TIX, zero, P_NONE, ModelFlags(kd=True))
    with pytest.raises(ValueError, match="jm_lambda"):
        build_inverted_index(backoff)
    # Without back-off the floor only involves mu, so lambda may be 0.
    direct = train_model(corpus, W_TIX, zero, P_NONE, ModelFlags(kd=True, nobo=True))
    assert build_inverted_index(direct).n_targets == 1


def test_tied_labels_rank_ascending():
    # Labels 1 and 2 have identical training data, label 0 differs.
    corpus = Corpus(
        (
            SparseDocument(0, ((3, 1.0),), frozenset({1})),
            SparseDocument(1, ((3, 1.0),), frozenset({2})),
            SparseDocument(2, ((8, 1.0),), frozenset({0})),
        ),
        "ties",
    )
    model = train_model(corpus, W_TIX, SmoothingConfig(jm_lambda=0.9), P_NONE)
    index = build_inverted_index(model)
    doc = SparseDocument(5, weight_document(model, SparseDocument(5, ((3, 2.0),), frozenset())), frozenset())
    pred = score_document(index, doc, top_k=3)
    assert pred.labels.tolist() == [1, 2, 0]
    assert score_document(index, doc, top_k=1).labels.tolist() == [1]


def test_top_order_matches_naive_sort():
    rng = np.random.default_rng(4)
    for _ in range(50):
        n = int(rng.integers(1, 30))
        scores = rng.integers(0, 6, size=n).astype(float)  # many ties
        labels = np.arange(n, dtype=np.int64)
        k = int(rng.integers(1, n + 1))
        got = _top_order(scores, labels, k).tolist()
        want = sorted(range(n), key=lambda i: (-scores[i], labels[i]))[:k]
        assert got == want


def test_log_mean_top_oracle():
    rng = np.random.default_rng(5)
    for _ in range(30):
        vals = rng.normal(-150.0, 30.0, size=int(rng.integers(1, 12)))
        k = int(rng.integers(1, 8))
        kk = min(k, vals.size)
        top = np.sort(vals)[-kk:]
        m = top.max()
        want = m + math.log(np.exp(top - m).sum() / kk)
        assert _log_mean_top(vals.copy(), k) == pytest.approx(want, rel=1e-12)
    assert _log_mean_top(np.array([]), 3) == -math.inf
    assert _log_mean_top(np.array([-5.0, -1.0]), 1) == pytest.approx(-1.0)


def test_predict_per_document_thresholds():
    model = _tiny_model()
    pred = PredictionList(
        0,
        np.array([3, 5, 9], dtype=np.int64),
        np.log(np.array([1.0, 0.6, 0.4])),
    )
    assert predict_per_document(pred, model, PredictionPolicy(1.0)) == {3}
    assert predict_per_document(pred, model, PredictionPolicy(0.5)) == {3, 5}
    assert predict_per_document(pred, model, PredictionPolicy(0.0)) == {3, 5, 9}
    with pytest.raises(ValueError):
        predict_per_document(
            PredictionList(0, np.array([], dtype=np.int64), np.array([])), model,
            PredictionPolicy(),
        )
    with pytest.raises(ValueError):
        PredictionPolicy(1.5)


def test_predict_per_document_decodes_powerset():
    corpus = Corpus(
        (
            SparseDocument(0, ((1, 1.0),), frozenset({4, 9})),
            SparseDocument(1, ((2, 1.0),), frozenset({7})),
        ),
        "lp",
    )
    model = train_model(corpus, W_TIX, SmoothingConfig(jm_lambda=0.9), P_NONE, ModelFlags(lp=True))
    pred = PredictionList(0, np.array([0, 1], dtype=np.int64), np.array([-1.0, -2.0]))
    assert predict_per_document(pred, model, PredictionPolicy()) == {4, 9}


def test_instantiate_capacity_formula():
    assert InstantiateConfig(instantiate_weight=1.0).capacity(7) == 7
    assert InstantiateConfig(instantiate_weight=2.0).capacity(3) == 6
    assert InstantiateConfig(instantiate_weight=0.5).capacity(3) == 2
    assert InstantiateConfig(instantiate_weight=1.0).capacity(0) == 1
    with pytest.raises(ValueError):
        InstantiateConfig(instantiate_weight=0.0)
    with pytest.raises(ValueError):
        InstantiateConfig(instantiate_threshold=-0.1)
    with pytest.raises(ValueError):
        InstantiateConfig(top_k_labels_per_doc=0)


def _transposed_world(seed=11, n_docs=60, n_labels=10):
    rng = np.random.default_rng(seed)
    corpus = _random_corpus(rng, n_docs=n_docs, vocab=40, n_labels=n_labels)
    model = train_model(corpus, W_TIX, SmoothingConfig(jm_lambda=0.9), P_NONE)
    index = build_inverted_index(model)
    docs = [
        SparseDocument(d.doc_id, weight_document(model, d), d.labels) for d in corpus
    ]
    return model, index, docs, labelset_stats(corpus)


def _oracle_transpose(model, docs, icfg, stats):
    candidates = {}
    for doc in docs:
        order, scores = _dense_ranking(model, doc.features)
        ranked = [(model.labels[i], scores[i]) for i in order[: icfg.top_k_labels_per_doc]]
        for r, (label, logscore) in enumerate(ranked, start=1):
            s = 1.0 / r
            if s < icfg.instantiate_threshold:
                break
            candidates.setdefault(label, []).append((s, logscore, doc.doc_id))
    out = {}
    for label, entries in candidates.items():
        entries.sort(key=lambda e: (-e[0], -e[1], e[2]))
        cap = icfg.capacity(stats.label_freq.get(label, 0))
        out[label] = [(d, s) for s, _, d in entries[:cap]]
    return out


def test_transposed_matches_dense_oracle():
    model, index, docs, stats = _transposed_world()
    icfg = InstantiateConfig(instantiate_weight=1.5, top_k_labels_per_doc=4)
    tp = predict_transposed(index, docs, icfg, stats)
    want = _oracle_transpose(model, docs, icfg, stats)
    assert sorted(tp.labels()) == sorted(want)
    for label in want:
        assert [(e.doc_id, e.score) for e in tp[label]] == want[label]
        assert len(tp[label]) <= icfg.capacity(stats.label_freq.get(label, 0))


def test_transposed_document_order_invariance():
    model, index, docs, stats = _transposed_world(seed=12)
    icfg = InstantiateConfig(instantiate_weight=1.0, top_k_labels_per_doc=5)
    a = predict_transposed(index, docs, icfg, stats)
    rng = np.random.default_rng(0)
    shuffled = [docs[i] for i in rng.permutation(len(docs))]
    b = predict_transposed(index, shuffled, icfg, stats)
    assert a.lists == b.lists


def test_transposed_worker_invariance():
    model, index, docs, stats = _transposed_world(seed=13)
    icfg = InstantiateConfig(instantiate_weight=1.5, top_k_labels_per_doc=5)
    base = predict_transposed(index, docs, icfg, stats, workers=1)
    for workers in (2, 4, 8):
        assert predict_transposed(index, docs, icfg, stats, workers=workers).lists == base.lists


def test_transposed_threshold_keeps_only_rank_one():
    model, index, docs, stats = _transposed_world(seed=14)
    icfg = InstantiateConfig(instantiate_threshold=1.0, top_k_labels_per_doc=5)
    tp = predict_transposed(index, docs, icfg, stats)
    assert tp.labels()
    for label in tp.labels():
        assert all(e.score == 1.0 for e in tp[label])


def test_transposed_capacity_one_keeps_best_underlying():
    # Both topical docs rank label 0 first, so the 1/rank candidate
    # scores tie and the higher log-score must decide the single slot.
    corpus = Corpus(
        (
            SparseDocument(0, ((1, 1.0), (2, 1.0)), frozenset({0})),
            SparseDocument(1, ((1, 3.0), (3, 1.0)), frozenset({0})),
            SparseDocument(2, ((4, 2.0), (5, 1.0)), frozenset({1})),
        ),
        "cap1",
    )
    model = train_model(corpus, W_TIX, SmoothingConfig(jm_lambda=0.9), P_NONE)
    index = build_inverted_index(model)
    docs = [SparseDocument(d.doc_id, weight_document(model, d), d.labels) for d in corpus]
    stats = labelset_stats(corpus)
    icfg = InstantiateConfig(instantiate_weight=0.25, top_k_labels_per_doc=1)
    assert icfg.capacity(stats.label_freq[0]) == 1

    logscore = {}
    for doc in docs[:2]:
        ranking = score_document(index, doc, top_k=2)
        assert int(ranking.labels[0]) == 0  # rank 1 for both, candidates tie at 1.0
        logscore[doc.doc_id] = float(ranking.scores[0])
    assert logscore[0] != logscore[1]
    winner = max(sorted(logscore), key=lambda d: logscore[d])

    tp = predict_transposed(index, docs, icfg, stats)
    assert [e.doc_id for e in tp[0]] == [winner]


def test_transposed_growing_weight_never_drops_pairs():
    model, index, docs, stats = _transposed_world(seed=15)
    small = predict_transposed(
        index, docs, InstantiateConfig(instantiate_weight=1.0, top_k_labels_per_doc=5),
        stats,
    )
    large = predict_transposed(
        index, docs, InstantiateConfig(instantiate_weight=2.0, top_k_labels_per_doc=5),
        stats,
    )
    for label in small.labels():
        kept_small = {e.doc_id for e in small[label]}
        kept_large = {e.doc_id for e in large[label]}
        assert kept_small <= kept_large
