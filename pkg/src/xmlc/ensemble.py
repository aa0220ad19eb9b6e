"""Feature-weighted linear stacking over transposed classifier outputs.

Per label, each base-classifier contributes a ranked instance list.  A
metafeature vector describing how the classifiers' lists agree is mapped
by per-classifier ridge regressors to vote weights; weighted votes are
summed per instance and a frequency-proportional count (plus a relative
score threshold) selects the final instances.  Regressors are trained
against approximate oracle weights that put mass 1 uniformly on the
best-performing classifiers of each training label.

Training streams one label at a time and accumulates normal equations,
so peak metafeature storage stays linear in the number of classifiers;
the full labels-by-features matrix is never materialized.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .corpus import LabelStats, make_rng
from .inference import TransposedPrediction
from .metrics import average_precision, f1_from_counts
from .resultfiles import read_transposed

_STREAM_CV = 7
_AP_EPSILON = 1e-3
_ARGMAX_TOL = 1e-12


@dataclass(frozen=True)
class ClassifierOutput:
    """One classifier's transposed result: ranked instances per label."""

    classifier_id: int
    lists: dict[int, tuple[tuple[int, float], ...]]

    def instances(self, label: int) -> tuple[tuple[int, float], ...]:
        return self.lists.get(label, ())

    def instance_set(self, label: int) -> frozenset[int]:
        return frozenset(d for d, _ in self.lists.get(label, ()))

    def labels(self) -> set[int]:
        return set(self.lists)


def output_from_transposed(classifier_id: int, tp: TransposedPrediction) -> ClassifierOutput:
    lists = {
        label: tuple((e.doc_id, e.score) for e in tp[label]) for label in tp.labels()
    }
    return ClassifierOutput(classifier_id, lists)


def load_output(classifier_id: int, path) -> ClassifierOutput:
    lists = {
        label: tuple(entries) for label, entries in read_transposed(path).items()
    }
    return ClassifierOutput(classifier_id, lists)


@dataclass(frozen=True)
class SelectionConfig:
    prior_multiplier: float = 0.95
    vote_threshold_frac: float = 0.5

    def __post_init__(self):
        if self.prior_multiplier <= 0 or self.vote_threshold_frac <= 0:
            raise ValueError("selection parameters must be > 0")


@dataclass(frozen=True)
class VoteModel:
    """Per-classifier linear regressors over metafeatures, intercept last."""

    coefficients: np.ndarray
    ridge_lambda: float

    @property
    def n_classifiers(self) -> int:
        return self.coefficients.shape[0]

    def predict_weights(self, features: np.ndarray) -> np.ndarray:
        """Vote weights from the (M, dim) metafeature block, clamped >= 0."""
        aug = np.hstack([features, np.ones((features.shape[0], 1))])
        return np.maximum((aug * self.coefficients).sum(axis=1), 0.0)


def metafeature_dim(n_classifiers: int) -> int:
    return 13 + (n_classifiers - 1)


def metafeature_names(n_classifiers: int) -> list[str]:
    names = [
        "labelProb",
        "labelProb2",
        "uniqInstancesets",
        "maxVotes",
        "minInstFreq_i",
        "maxInstFreq_i",
        "minInstCount_i",
        "instCount_i",
        "emptySet_i",
        "setCount_i",
        "modePrec_i",
        "modeRec_i",
        "modeJaccard_i",
    ]
    names += [f"maxPrec_i_{j}" for j in range(n_classifiers - 1)]
    return names


def compute_metafeatures(
    label: int, outputs: Sequence[ClassifierOutput], stats: LabelStats
) -> np.ndarray:
    """The (M, 13 + M - 1) metafeature block for one label.

    Count-like features are squashed by log1p and divided by log1p of
    their natural ceiling (M for vote counts, the longest list for
    instance counts); indicators and ratios pass through unchanged.
    """
    m = len(outputs)
    sets = [out.instance_set(label) for out in outputs]
    canon = [tuple(sorted(s)) for s in sets]
    set_votes = Counter(canon)
    # Modal output set; ties resolved to the lexicographically smallest.
    max_votes = max(set_votes.values())
    mode = set(min(c for c, v in set_votes.items() if v == max_votes))
    uniq = len(set_votes)

    inst_votes: Counter[int] = Counter()
    for s in sets:
        inst_votes.update(s)

    freq = stats.label_freq.get(label, 0)
    label_prob = 1.0 if freq < 10 else 0.0
    label_prob2 = 1.0 if freq > 50 else 0.0

    log_m = math.log1p(m)
    max_len = max(1, max(len(s) for s in sets))
    log_cap = math.log1p(max_len)

    def squash_votes(x: float) -> float:
        return math.log1p(x) / log_m

    features = np.empty((m, metafeature_dim(m)))
    for i in range(m):
        s = sets[i]
        votes = [inst_votes[d] for d in s]
        row = [
            label_prob,
            label_prob2,
            squash_votes(uniq),
            squash_votes(max_votes),
            squash_votes(min(votes)) if votes else 0.0,
            squash_votes(max(votes)) if votes else 0.0,
            squash_votes(min(votes)) if votes else 0.0,
            math.log1p(len(s)) / log_cap,
            0.0 if s else 1.0,
            squash_votes(sum(1 for c in canon if c == canon[i])),
            len(s & mode) / len(s) if s else 0.0,
            len(s & mode) / len(mode) if mode else 0.0,
            len(s & mode) / len(s | mode) if s | mode else 1.0,
        ]
        for j in range(m):
            if j == i:
                continue
            denom = max(len(s), len(sets[j]))
            row.append(len(s & sets[j]) / denom if denom else 0.0)
        features[i] = row
    return features


def approximate_oracle_weights(
    label: int, outputs: Sequence[ClassifierOutput], gold_docs: frozenset[int]
) -> np.ndarray:
    """Distribute weight 1 uniformly over the best-scoring classifiers.

    Fitness is F1 of the instance set plus a small average-precision
    term so rank quality breaks F1 ties.
    """
    m = len(outputs)
    fitness = np.empty(m)
    for i, out in enumerate(outputs):
        ranked = [d for d, _ in out.instances(label)]
        pred = out.instance_set(label)
        f1 = f1_from_counts(
            len(pred & gold_docs), len(pred - gold_docs), len(gold_docs - pred)
        )
        fitness[i] = f1 + _AP_EPSILON * average_precision(ranked, gold_docs)
    top = fitness.max()
    if top <= 0.0:
        return np.full(m, 1.0 / m)
    winners = fitness >= top - _ARGMAX_TOL
    weights = np.zeros(m)
    weights[winners] = 1.0 / winners.sum()
    return weights


def ridge_regression(X: np.ndarray, y: np.ndarray, ridge_lambda: float) -> np.ndarray:
    """Normal-equations ridge with an appended, unpenalized intercept."""
    if ridge_lambda <= 0:
        raise ValueError("ridge_lambda must be > 0")
    n, d = X.shape
    aug = np.hstack([X, np.ones((n, 1))])
    gram = aug.T @ aug
    gram[np.arange(d), np.arange(d)] += ridge_lambda
    beta = np.linalg.solve(gram, aug.T @ y)
    if not np.all(np.isfinite(beta)):
        raise ValueError("ridge system is degenerate")
    return beta


def fit_vote_regressors(
    labels: Iterable[int],
    outputs: Sequence[ClassifierOutput],
    gold: Mapping[int, frozenset[int]],
    stats: LabelStats,
    ridge_lambda: float = 1000.0,
) -> VoteModel:
    """Per-classifier ridge regressors from streamed per-label rows."""
    if ridge_lambda <= 0:
        raise ValueError("ridge_lambda must be > 0")
    m = len(outputs)
    dim = metafeature_dim(m)
    label_list = sorted(labels)
    if len(label_list) < dim + 1:
        raise ValueError(
            f"need at least {dim + 1} training labels for {m} classifiers, "
            f"got {len(label_list)}"
        )
    gram = np.zeros((m, dim + 1, dim + 1))
    moment = np.zeros((m, dim + 1))
    for label in label_list:
        feats = compute_metafeatures(label, outputs, stats)
        targets = approximate_oracle_weights(
            label, outputs, gold.get(label, frozenset())
        )
        aug = np.hstack([feats, np.ones((m, 1))])
        for i in range(m):
            gram[i] += np.outer(aug[i], aug[i])
            moment[i] += aug[i] * targets[i]

    coef = np.empty((m, dim + 1))
    idx = np.arange(dim)
    for i in range(m):
        g = gram[i].copy()
        g[idx, idx] += ridge_lambda
        try:
            beta = np.linalg.solve(g, moment[i])
        except np.linalg.LinAlgError as err:
            raise ValueError(f"degenerate regression system for classifier {i}") from err
        if not np.all(np.isfinite(beta)):
            raise ValueError(f"degenerate regression system for classifier {i}")
        coef[i] = beta
    return VoteModel(coef, ridge_lambda)


def vote_scores(
    label: int, outputs: Sequence[ClassifierOutput], weights: np.ndarray
) -> dict[int, float]:
    """Weighted vote score per instance over all classifier lists."""
    scores: dict[int, float] = {}
    for w, out in zip(weights.tolist(), outputs):
        for d, s in out.instances(label):
            scores[d] = scores.get(d, 0.0) + w * s
    return scores


def select_instances(
    scores: Mapping[int, float],
    label_freq: int,
    scfg: SelectionConfig,
    test_size: int,
    train_size: int,
) -> tuple[int, ...]:
    """Top-n0 by vote score, extended by scores above a fraction of the
    top-n0 mean; n0 = max(1, round(mult * freq * test/train))."""
    if not scores:
        return ()
    n0 = max(
        1,
        int(math.floor(scfg.prior_multiplier * label_freq * test_size / train_size + 0.5)),
    )
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    top = ranked[:n0]
    mean0 = sum(s for _, s in top) / len(top)
    cut = scfg.vote_threshold_frac * mean0
    selected = [d for d, _ in top]
    selected.extend(d for d, s in ranked[n0:] if s > cut)
    return tuple(sorted(selected))


def vote_and_select(
    label: int,
    outputs: Sequence[ClassifierOutput],
    vote_model: VoteModel,
    stats: LabelStats,
    scfg: SelectionConfig,
    test_size: int,
    train_size: int,
) -> tuple[int, ...]:
    feats = compute_metafeatures(label, outputs, stats)
    weights = vote_model.predict_weights(feats)
    scores = vote_scores(label, outputs, weights)
    return select_instances(
        scores, stats.label_freq.get(label, 0), scfg, test_size, train_size
    )


def combine(
    train_outputs: Sequence[ClassifierOutput],
    gold: Mapping[int, frozenset[int]],
    test_outputs: Sequence[ClassifierOutput],
    stats: LabelStats,
    scfg: SelectionConfig,
    test_size: int,
    train_size: int,
    ridge_lambda: float = 1000.0,
) -> dict[int, tuple[int, ...]]:
    """Fit vote regressors on the ensemble-training split, then vote and
    select instances for every label any classifier proposed on test."""
    model = fit_vote_regressors(gold.keys(), train_outputs, gold, stats, ridge_lambda)
    selection: dict[int, tuple[int, ...]] = {}
    all_labels: set[int] = set()
    for out in test_outputs:
        all_labels |= out.labels()
    for label in sorted(all_labels):
        chosen = vote_and_select(
            label, test_outputs, model, stats, scfg, test_size, train_size
        )
        if chosen:
            selection[label] = chosen
    return selection


def cross_validated_selection(
    outputs: Sequence[ClassifierOutput],
    gold: Mapping[int, frozenset[int]],
    stats: LabelStats,
    scfg: SelectionConfig,
    dev_size: int,
    train_size: int,
    ridge_lambda: float = 1000.0,
    n_folds: int = 3,
    seed: int = 0,
) -> dict[int, tuple[int, ...]]:
    """Development mode: n-fold CV over labels; each fold's labels are
    selected with regressors trained on the remaining labels."""
    label_list = sorted(gold)
    if n_folds < 2:
        raise ValueError("need at least 2 folds")
    if len(outputs) == 1:
        # Degenerate ensemble: a single classifier votes with weight 1.
        selection = {}
        for label in label_list:
            scores = vote_scores(label, outputs, np.ones(1))
            chosen = select_instances(
                scores, stats.label_freq.get(label, 0), scfg, dev_size, train_size
            )
            if chosen:
                selection[label] = chosen
        return selection

    perm = make_rng(seed, _STREAM_CV).permutation(len(label_list))
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    for pos, label_idx in enumerate(perm.tolist()):
        folds[pos % n_folds].append(label_list[label_idx])

    selection = {}
    for fold in folds:
        held = set(fold)
        train_labels = [l for l in label_list if l not in held]
        model = fit_vote_regressors(train_labels, outputs, gold, stats, ridge_lambda)
        for label in sorted(fold):
            chosen = vote_and_select(
                label, outputs, model, stats, scfg, dev_size, train_size
            )
            if chosen:
                selection[label] = chosen
    return selection


def selection_to_predictions(
    selection: Mapping[int, Iterable[int]]
) -> dict[int, frozenset[int]]:
    """Invert label -> docs into doc -> labels."""
    by_doc: dict[int, set[int]] = defaultdict(set)
    for label, docs in selection.items():
        for d in docs:
            by_doc[d].add(label)
    return {d: frozenset(ls) for d, ls in by_doc.items()}


def gold_by_label(doc_labels: Mapping[int, frozenset[int]]) -> dict[int, frozenset[int]]:
    """Invert doc -> labels into label -> docs."""
    by_label: dict[int, set[int]] = defaultdict(set)
    for d, labels in doc_labels.items():
        for l in labels:
            by_label[l].add(d)
    return {l: frozenset(ds) for l, ds in by_label.items()}


def select_classifiers(
    evaluate: Callable[[frozenset[int]], float], classifier_ids: Iterable[int]
) -> tuple[frozenset[int], float]:
    """Hill-climb over classifier subsets by single removals/re-additions.

    ``evaluate`` scores a subset (typically cross-validated macro F1 of
    the combined selection).  Returns the local optimum and its score.
    """
    universe = frozenset(classifier_ids)
    if len(universe) < 2:
        return universe, evaluate(universe)
    cache: dict[frozenset[int], float] = {}

    def scored(subset: frozenset[int]) -> float:
        if subset not in cache:
            cache[subset] = evaluate(subset)
        return cache[subset]

    current = universe
    score = scored(current)
    while True:
        best_move: frozenset[int] | None = None
        best_score = score
        if len(current) > 1:
            for i in sorted(current):
                s = scored(current - {i})
                if s > best_score:
                    best_score, best_move = s, current - {i}
        for i in sorted(universe - current):
            s = scored(current | {i})
            if s > best_score:
                best_score, best_move = s, current | {i}
        if best_move is None:
            return current, score
        current, score = best_move, best_score
