"""Inverted-index inference and transposed per-label prediction.

Scores decompose into parts that depend only on the target, only on the
document, or on their overlap::

    score(t|d) = base[t] + dlen * lencoef[t] + floor(d) + sum_{w in d∩t} x_w * lift(w,t)

so scoring touches exactly the postings of the document's features.
Targets are labels (meta-classes under the powerset transform) or, for
kernel-density models, individual kernels whose partial scores are then
aggregated per label.

``predict_transposed`` inverts the per-document rankings into bounded
per-label instance lists.  The retained set per label is the global top
of all candidates under a total order, so the result is independent of
document order and of the number of workers.
"""

from __future__ import annotations

import heapq
import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from . import _kernels
from .corpus import LabelStats, SparseDocument
from .sgm import SgmModel, decode_label_powerset, label_word_prob

_NEG_INF = float("-inf")


class TargetKind(Enum):
    LABEL = "label"
    KERNEL = "kernel"


@dataclass(frozen=True)
class InstantiateConfig:
    instantiate_weight: float = 1.0
    instantiate_threshold: float = 0.0
    top_k_labels_per_doc: int = 20

    def __post_init__(self):
        if self.instantiate_weight <= 0:
            raise ValueError("instantiate_weight must be > 0")
        if self.instantiate_threshold < 0:
            raise ValueError("instantiate_threshold must be >= 0")
        if self.top_k_labels_per_doc < 1:
            raise ValueError("top_k_labels_per_doc must be >= 1")

    def capacity(self, label_freq: int) -> int:
        return max(1, math.ceil(self.instantiate_weight * label_freq))


@dataclass(frozen=True)
class PredictionPolicy:
    """Labelset extraction from a ranking: keep labels whose probability
    is above ``relative_threshold`` times the top one (0 keeps all ranked
    labels, 1 keeps the single best)."""

    relative_threshold: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.relative_threshold <= 1.0:
            raise ValueError("relative_threshold must be in [0, 1]")


@dataclass(frozen=True)
class PredictionList:
    doc_id: int
    labels: np.ndarray
    scores: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)

    def pairs(self) -> Iterator[tuple[int, float]]:
        return zip(self.labels.tolist(), self.scores.tolist())


class TransposedEntry(NamedTuple):
    doc_id: int
    score: float
    tiebreak: float


@dataclass(frozen=True)
class TransposedPrediction:
    lists: dict[int, tuple[TransposedEntry, ...]]

    def labels(self) -> list[int]:
        return sorted(self.lists)

    def __getitem__(self, label: int) -> tuple[TransposedEntry, ...]:
        return self.lists.get(label, ())


class InvertedIndex:
    """Posting lists over model features plus per-target constants."""

    def __init__(
        self,
        model: SgmModel,
        kind: TargetKind,
        labels: np.ndarray,
        base: np.ndarray,
        feat_slot: dict[int, int],
        offsets: np.ndarray,
        post_targets: np.ndarray,
        post_lifts: np.ndarray,
        lencoef: np.ndarray | None,
        kernel_offsets: np.ndarray | None,
        floor_shift: float | None,
        use_max_aggregation: bool,
    ):
        self.model = model
        self.kind = kind
        self.labels = labels
        self.base = base
        self.feat_slot = feat_slot
        self.offsets = offsets
        self.post_targets = post_targets
        self.post_lifts = post_lifts
        self.lencoef = lencoef
        self.kernel_offsets = kernel_offsets
        self.floor_shift = floor_shift
        self.use_max_aggregation = use_max_aggregation

    @property
    def n_targets(self) -> int:
        return self.lencoef.shape[0] if self.lencoef is not None else self.base.shape[0]

    def posting(self, feature: int) -> list[tuple[int, float]]:
        slot = self.feat_slot.get(feature)
        if slot is None:
            return []
        lo, hi = self.offsets[slot], self.offsets[slot + 1]
        return list(
            zip(self.post_targets[lo:hi].tolist(), self.post_lifts[lo:hi].tolist())
        )


def _label_support(model: SgmModel, label: int) -> set[int]:
    support = set(model.cond_weight.get(label, ()))
    if model.smoothing.hierarchy_mix > 0:
        node = model.chosen_parent.get(label)
        if node is not None and model.parent_norm.get(node, 0.0) > 0:
            support |= set(model.parent_weight[node])
    return support


def _pack_postings(postings: dict[int, list[tuple[int, float]]]):
    feats = sorted(postings)
    feat_slot = {f: i for i, f in enumerate(feats)}
    offsets = np.zeros(len(feats) + 1, dtype=np.int64)
    targets: list[int] = []
    lifts: list[float] = []
    for i, f in enumerate(feats):
        for t, v in postings[f]:
            targets.append(t)
            lifts.append(v)
        offsets[i + 1] = len(targets)
    return (
        feat_slot,
        offsets,
        np.asarray(targets, dtype=np.int32),
        np.asarray(lifts, dtype=np.float64),
    )


def build_inverted_index(model: SgmModel) -> InvertedIndex:
    """Decompose the model into postings, floor and per-target constants.

    The shared background sum requires taking logs of the smoothing
    coefficients, so configurations whose floor involves λ reject λ=0.
    """
    lam = model.smoothing.jm_lambda
    mu = model.smoothing.dirichlet_mu
    bg = model.background
    label_list = model.labels
    labels = np.asarray(label_list, dtype=np.int64)
    base = np.asarray(
        [model.prior_scale * math.log(model.label_prior[l]) for l in label_list]
    )
    postings: dict[int, list[tuple[int, float]]] = defaultdict(list)

    if not model.flags.kd:
        if lam <= 0:
            raise ValueError("sparse decomposition requires jm_lambda > 0")
        floor_shift = math.log(lam)
        for slot, l in enumerate(label_list):
            for w in sorted(_label_support(model, l)):
                p = label_word_prob(model, l, w)
                postings[w].append(
                    (slot, math.log(p) - floor_shift - math.log(bg.prob(w)))
                )
        feat_slot, offsets, targets, lifts = _pack_postings(postings)
        return InvertedIndex(
            model, TargetKind.LABEL, labels, base, feat_slot, offsets, targets,
            lifts, None, None, floor_shift, False,
        )

    if model.flags.bm25_kernel:
        floor_shift = None
    elif model.flags.nobo:
        floor_shift = math.log(mu)
    else:
        if lam <= 0:
            raise ValueError("sparse decomposition requires jm_lambda > 0")
        floor_shift = math.log(mu) + math.log(lam)

    lencoefs: list[float] = []
    kernel_offsets = np.zeros(len(label_list) + 1, dtype=np.int64)
    k_idx = 0
    for slot, l in enumerate(label_list):
        for kernel in model.kernel_store.get(l, ()):
            weights = dict(kernel.features)
            if model.flags.bm25_kernel:
                lencoefs.append(0.0)
                for w, v in kernel.features:
                    postings[w].append((k_idx, v))
            elif model.flags.nobo:
                lencoefs.append(-math.log(kernel.length + mu))
                for w, v in kernel.features:
                    b = mu * bg.prob(w)
                    postings[w].append((k_idx, math.log(v + b) - math.log(b)))
            else:
                lencoefs.append(-math.log(kernel.length + mu))
                support = set(weights) | _label_support(model, l)
                for w in sorted(support):
                    pl = label_word_prob(model, l, w)
                    lift = (
                        math.log(weights.get(w, 0.0) + mu * pl)
                        - floor_shift
                        - math.log(bg.prob(w))
                    )
                    postings[w].append((k_idx, lift))
            k_idx += 1
        kernel_offsets[slot + 1] = k_idx

    feat_slot, offsets, targets, lifts = _pack_postings(postings)
    return InvertedIndex(
        model, TargetKind.KERNEL, labels, base, feat_slot, offsets, targets,
        lifts, np.asarray(lencoefs), kernel_offsets, floor_shift,
        model.flags.bm25_kernel,
    )


def _log_mean_top(values: np.ndarray, k: int) -> float:
    if values.size == 0:
        return _NEG_INF
    k = min(k, values.size)
    if values.size > k:
        values = np.partition(values, values.size - k)[values.size - k :]
    m = float(values.max())
    if not math.isfinite(m):
        return m
    return m + math.log(float(np.exp(values - m).sum()) / k)


def _label_scores(index: InvertedIndex, features) -> np.ndarray:
    floor = 0.0
    dlen = 0.0
    slots: list[int] = []
    xs: list[float] = []
    shift = index.floor_shift
    bg = index.model.background
    for f, x in features:
        dlen += x
        if shift is not None:
            floor += x * (shift + math.log(bg.prob(f)))
        slot = index.feat_slot.get(f)
        if slot is not None:
            slots.append(slot)
            xs.append(x)

    out = np.zeros(index.n_targets)
    if slots:
        slot_arr = np.asarray(slots, dtype=np.int64)
        _kernels.accumulate_doc(
            index.post_targets,
            index.post_lifts,
            index.offsets[slot_arr],
            index.offsets[slot_arr + 1],
            np.asarray(xs),
            out,
        )
    if index.kind is TargetKind.LABEL:
        return index.base + floor + out

    out += dlen * index.lencoef
    ko = index.kernel_offsets
    agg = np.empty(index.base.shape[0])
    top_k = index.model.kernel_top_k
    for i in range(agg.shape[0]):
        part = out[ko[i] : ko[i + 1]]
        if part.size == 0:
            agg[i] = _NEG_INF
        elif index.use_max_aggregation:
            agg[i] = part.max()
        else:
            agg[i] = _log_mean_top(part, top_k)
    return index.base + floor + agg


def _top_order(scores: np.ndarray, labels: np.ndarray, top_k: int) -> np.ndarray:
    """Indices of the top_k scores ordered by (score desc, label asc)."""
    n = scores.shape[0]
    if top_k >= n:
        return np.lexsort((labels, -scores))
    kth = np.partition(scores, n - top_k)[n - top_k]
    above = np.nonzero(scores > kth)[0]
    ties = np.nonzero(scores == kth)[0][: top_k - above.size]
    cand = np.concatenate([above, ties])
    return cand[np.lexsort((labels[cand], -scores[cand]))]


def score_document(index: InvertedIndex, doc: SparseDocument, top_k: int) -> PredictionList:
    """Rank labels for one already-weighted document."""
    scores = _label_scores(index, doc.features)
    order = _top_order(scores, index.labels, top_k)
    return PredictionList(doc.doc_id, index.labels[order], scores[order])


def predict_per_document(
    pred: PredictionList, model: SgmModel, policy: PredictionPolicy
) -> frozenset[int]:
    """Extract a labelset: powerset models decode the top meta-class,
    otherwise the relative threshold cuts the ranking."""
    if len(pred) == 0:
        raise ValueError("empty prediction list")
    if model.flags.lp:
        return decode_label_powerset(model.powerset_map, int(pred.labels[0]))
    thr = policy.relative_threshold
    cut = pred.scores[0] + math.log(thr) if thr > 0 else _NEG_INF
    out = [int(pred.labels[0])]
    for i in range(1, len(pred)):
        if not pred.scores[i] > cut:
            break
        out.append(int(pred.labels[i]))
    return frozenset(out)


def _ranked_labels(pred: PredictionList, model: SgmModel) -> Iterator[tuple[int, float]]:
    # Under lp a label's rank is the first rank among decoded meta-classes.
    if not model.flags.lp:
        yield from pred.pairs()
        return
    seen: set[int] = set()
    for meta, score in pred.pairs():
        for label in sorted(decode_label_powerset(model.powerset_map, int(meta))):
            if label not in seen:
                seen.add(label)
                yield label, score


def _collect_candidates(
    index: InvertedIndex,
    docs: Sequence[SparseDocument],
    icfg: InstantiateConfig,
    capacities: dict[int, int],
    default_cap: int,
) -> dict[int, list[tuple[float, float, int]]]:
    # Worker-private bounded min-heaps of (score, tiebreak, -doc_id).
    heaps: dict[int, list[tuple[float, float, int]]] = defaultdict(list)
    model = index.model
    for doc in docs:
        pred = score_document(index, doc, icfg.top_k_labels_per_doc)
        rank = 0
        for label, logscore in _ranked_labels(pred, model):
            rank += 1
            s = 1.0 / rank
            if s < icfg.instantiate_threshold:
                break
            entry = (s, logscore, -doc.doc_id)
            heap = heaps[label]
            if len(heap) < capacities.get(label, default_cap):
                heapq.heappush(heap, entry)
            elif entry > heap[0]:
                heapq.heapreplace(heap, entry)
    return heaps


def _finalize(
    pools: dict[int, list[tuple[float, float, int]]],
    capacities: dict[int, int],
    default_cap: int,
) -> TransposedPrediction:
    lists = {}
    for label, entries in pools.items():
        if not entries:
            continue
        entries.sort(key=lambda e: (-e[0], -e[1], -e[2]))
        lists[label] = tuple(
            TransposedEntry(-neg_doc, s, tb)
            for s, tb, neg_doc in entries[: capacities.get(label, default_cap)]
        )
    return TransposedPrediction(lists)


def predict_transposed(
    index: InvertedIndex,
    docs: Iterable[SparseDocument],
    icfg: InstantiateConfig,
    stats: LabelStats,
    workers: int = 1,
) -> TransposedPrediction:
    """Invert rankings into per-label lists of the best-ranked documents.

    Candidate score is 1/rank; ties keep the higher underlying log-score,
    then the lower doc id.  Capacity grows with training label frequency:
    max(1, ceil(iw * freq)).
    """
    doc_list = list(docs)
    default_cap = icfg.capacity(0)
    capacities = {
        label: icfg.capacity(freq) for label, freq in stats.label_freq.items()
    }

    if workers <= 1 or len(doc_list) < 2:
        pools = _collect_candidates(index, doc_list, icfg, capacities, default_cap)
        return _finalize(pools, capacities, default_cap)

    bounds = np.linspace(0, len(doc_list), workers + 1).astype(int)
    chunks = [doc_list[bounds[i] : bounds[i + 1]] for i in range(workers)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        partials = list(
            pool.map(
                lambda c: _collect_candidates(index, c, icfg, capacities, default_cap),
                chunks,
            )
        )
    merged: dict[int, list[tuple[float, float, int]]] = defaultdict(list)
    for part in partials:
        for label, entries in part.items():
            merged[label].extend(entries)
    return _finalize(merged, capacities, default_cap)
