"""Sparse generative models over weighted term counts.

The core estimator is a Multinomial Naive Bayes with Jelinek-Mercer
smoothing against a uniform or collection-mixed background.  Extensions,
all orthogonal and selected by flags or config fields:

* hierarchy smoothing: each label interpolates with one randomly chosen
  parent node whose model accumulates the documents of its children,
* kernel-density document models: one Dirichlet-smoothed component per
  training document, with or without back-off through the label model,
  optionally replaced by BM25 similarity kernels,
* label powerset: distinct labelsets become meta-classes,
* pruning: feature-frequency floor (mc), label-frequency floor (mlc),
  post-hoc weight floor (pct) and the same floor applied online during
  accumulation (pci).

A finalized model is immutable and safe for concurrent readers.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Mapping

from .corpus import Corpus, Hierarchy, canonical_labelset, make_rng
from .weighting import (
    CollectionStats,
    WeightingConfig,
    WeightingScheme,
    apply_weighting,
    collect_stats,
)

_STREAM_PARENT = 5


class BackgroundKind(Enum):
    UNIFORM = "uniform"
    UNIFORM_COLLECTION = "uniform_collection"


@dataclass(frozen=True)
class SmoothingConfig:
    jm_lambda: float = 0.999
    dirichlet_mu: float = 100.0
    background_kind: BackgroundKind = BackgroundKind.UNIFORM
    collection_mix: float = 0.5
    hierarchy_mix: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.jm_lambda < 1.0:
            raise ValueError("jm_lambda must be in [0, 1)")
        if self.dirichlet_mu <= 0:
            raise ValueError("dirichlet_mu must be > 0")
        if not 0.0 <= self.collection_mix <= 1.0:
            raise ValueError("collection_mix must be in [0, 1]")
        if not 0.0 <= self.hierarchy_mix <= 1.0:
            raise ValueError("hierarchy_mix must be in [0, 1]")


@dataclass(frozen=True)
class PruningConfig:
    min_count: float = 0.0
    min_label_count: int = 0
    precomputed_prune: float = 0.0
    online_prune: float = 0.0

    def __post_init__(self):
        if self.min_count < 0 or self.precomputed_prune < 0 or self.online_prune < 0:
            raise ValueError("pruning floors must be >= 0")
        if self.min_label_count < 0:
            raise ValueError("min_label_count must be >= 0")


@dataclass(frozen=True)
class ModelFlags:
    kd: bool = False
    nobo: bool = False
    bm25_kernel: bool = False
    lp: bool = False

    def __post_init__(self):
        if self.nobo and not self.kd:
            raise ValueError("nobo requires kd")
        if self.bm25_kernel and not (self.kd and self.nobo):
            raise ValueError("bm25_kernel requires kd and nobo")


@dataclass(frozen=True)
class Background:
    """Feature distribution the label models smooth against.

    Uniform over the model vocabulary, optionally mixed with the
    collection model cc(w)/Σcc.  Sums to 1 over the known vocabulary;
    unseen features receive the uniform component only.
    """

    kind: BackgroundKind
    beta: float
    vocab_size: int
    collection_count: dict[int, float]
    total_count: float

    def prob(self, feature: int) -> float:
        if self.vocab_size < 1:
            raise ValueError("background over an empty vocabulary")
        uniform = 1.0 / self.vocab_size
        if self.kind is BackgroundKind.UNIFORM:
            return uniform
        coll = self.collection_count.get(feature, 0.0) / self.total_count if self.total_count else 0.0
        return (1.0 - self.beta) * uniform + self.beta * coll


@dataclass(frozen=True)
class KernelDoc:
    """One kernel-density component: a weighted training document."""

    features: tuple[tuple[int, float], ...]
    length: float


@dataclass(frozen=True)
class PowersetMap:
    """Bijection between canonical labelsets and meta-class ids."""

    id_to_labels: tuple[frozenset[int], ...]
    key_to_id: dict[str, int]

    def __len__(self) -> int:
        return len(self.id_to_labels)


@dataclass(frozen=True)
class SgmModel:
    label_prior: dict[int, float]
    prior_scale: float
    cond_weight: dict[int, dict[int, float]]
    label_norm: dict[int, float]
    label_doc_freq: dict[int, int]
    kernel_store: dict[int, tuple[KernelDoc, ...]]
    background: Background
    stats: CollectionStats
    hierarchy: Hierarchy | None
    chosen_parent: dict[int, int]
    parent_weight: dict[int, dict[int, float]]
    parent_norm: dict[int, float]
    powerset_map: PowersetMap | None
    weighting: WeightingConfig
    smoothing: SmoothingConfig
    pruning: PruningConfig
    flags: ModelFlags
    kernel_top_k: int
    num_train_docs: int

    @property
    def labels(self) -> list[int]:
        return sorted(self.label_prior)


def encode_label_powerset(corpus: Corpus) -> tuple[Corpus, PowersetMap]:
    """Replace each labelset by a meta-class id, first-appearance order."""
    key_to_id: dict[str, int] = {}
    sets: list[frozenset[int]] = []
    docs = []
    for doc in corpus:
        if not doc.labels:
            raise ValueError(f"document {doc.doc_id} is unlabeled; powerset needs labels")
        key = canonical_labelset(doc.labels)
        meta = key_to_id.get(key)
        if meta is None:
            meta = len(sets)
            key_to_id[key] = meta
            sets.append(frozenset(doc.labels))
        docs.append(replace(doc, labels=frozenset({meta})))
    return Corpus(tuple(docs), corpus.source_name), PowersetMap(tuple(sets), key_to_id)


def decode_label_powerset(pmap: PowersetMap, meta_class: int) -> frozenset[int]:
    if not 0 <= meta_class < len(pmap.id_to_labels):
        raise KeyError(f"unknown meta-class {meta_class}")
    return pmap.id_to_labels[meta_class]


def _kept(row: Iterable[tuple[int, float]], floor: float):
    return tuple((f, w) for f, w in row if w > 0 and w >= floor)


def _norms(table: Mapping[int, Mapping[int, float]]) -> dict[int, float]:
    # Summation in sorted feature order keeps norms reproducible across
    # train/save/load.
    return {l: sum(row[f] for f in sorted(row)) for l, row in table.items()}


def train_model(
    train: Corpus,
    weighting_cfg: WeightingConfig,
    smoothing_cfg: SmoothingConfig,
    pruning_cfg: PruningConfig,
    flags: ModelFlags = ModelFlags(),
    *,
    prior_scale: float = 1.0,
    hierarchy: Hierarchy | None = None,
    seed: int = 0,
    kernel_top_k: int = 5,
) -> SgmModel:
    """Estimate a model in one accumulation pass over the corpus.

    Priors are label document frequencies over the corpus size.  The
    online floor (pci) is applied to the touched entries after every
    document, so its effect depends on document order; corpora reach
    this function already shuffled.
    """
    if len(train) == 0:
        raise ValueError("training corpus is empty")
    if kernel_top_k < 1:
        raise ValueError("kernel_top_k must be >= 1")

    powerset = None
    corpus = train
    if flags.lp:
        corpus, powerset = encode_label_powerset(train)
        if hierarchy is not None and smoothing_cfg.hierarchy_mix > 0:
            raise ValueError("hierarchy smoothing cannot combine with label powerset")

    mc = pruning_cfg.min_count
    if mc > 0:
        raw = collect_stats(corpus)
        kept_feats = {f for f, c in raw.collection_count.items() if c >= mc}
        corpus = Corpus(
            tuple(
                replace(d, features=tuple((f, c) for f, c in d.features if f in kept_feats))
                for d in corpus
            ),
            corpus.source_name,
        )
    stats = collect_stats(corpus)

    doc_freq_l: dict[int, int] = defaultdict(int)
    for doc in corpus:
        for l in doc.labels:
            doc_freq_l[l] += 1
    mlc = pruning_cfg.min_label_count
    kept_labels = {l for l, c in doc_freq_l.items() if c >= mlc}
    if not kept_labels:
        raise ValueError("all labels pruned by min_label_count")

    chosen_parent: dict[int, int] = {}
    if hierarchy is not None and not flags.lp:
        rng = make_rng(seed, _STREAM_PARENT)
        for l in sorted(kept_labels):
            parents = hierarchy.parents_of(l)
            if len(parents) == 1:
                chosen_parent[l] = parents[0]
            elif parents:
                chosen_parent[l] = parents[int(rng.integers(len(parents)))]

    gamma = smoothing_cfg.hierarchy_mix
    use_cond = not (flags.kd and flags.nobo)
    use_parents = gamma > 0 and bool(chosen_parent)
    pci = pruning_cfg.online_prune

    cond: dict[int, dict[int, float]] = defaultdict(dict)
    kernels: dict[int, list[KernelDoc]] = defaultdict(list)
    pweight: dict[int, dict[int, float]] = defaultdict(dict)

    def accumulate(row: dict[int, float], weighted) -> None:
        for f, w in weighted:
            row[f] = row.get(f, 0.0) + w
        if pci > 0:
            for f, _ in weighted:
                if f in row and (row[f] <= 0 or row[f] < pci):
                    del row[f]

    for doc in corpus:
        labels = sorted(l for l in doc.labels if l in kept_labels)
        if not labels:
            continue
        if doc.features:
            weighted = apply_weighting(doc, weighting_cfg, stats)
        else:
            weighted = ()
        kernel_feats = _kept(weighted, pci)
        for l in labels:
            if use_cond:
                accumulate(cond[l], weighted)
            if flags.kd:
                kernels[l].append(
                    KernelDoc(kernel_feats, sum(w for _, w in kernel_feats))
                )
            if use_parents and l in chosen_parent:
                accumulate(pweight[chosen_parent[l]], weighted)

    pct = pruning_cfg.precomputed_prune

    def prune(table: dict[int, dict[int, float]]) -> dict[int, dict[int, float]]:
        return {l: dict(_kept(row.items(), pct)) for l, row in table.items()}

    cond_final = prune(cond)
    pweight_final = prune(pweight)
    for l in kept_labels:
        cond_final.setdefault(l, {})

    background = Background(
        smoothing_cfg.background_kind,
        smoothing_cfg.collection_mix,
        stats.vocab_size,
        stats.collection_count,
        stats.total_count,
    )
    n = len(corpus)
    return SgmModel(
        label_prior={l: doc_freq_l[l] / n for l in kept_labels},
        prior_scale=prior_scale,
        cond_weight=cond_final,
        label_norm=_norms(cond_final),
        label_doc_freq={l: doc_freq_l[l] for l in kept_labels},
        kernel_store={l: tuple(ks) for l, ks in kernels.items()},
        background=background,
        stats=stats,
        hierarchy=hierarchy,
        chosen_parent=chosen_parent,
        parent_weight=pweight_final,
        parent_norm=_norms(pweight_final),
        powerset_map=powerset,
        weighting=weighting_cfg,
        smoothing=smoothing_cfg,
        pruning=pruning_cfg,
        flags=flags,
        kernel_top_k=kernel_top_k,
        num_train_docs=n,
    )


def _ml(row: Mapping[int, float], norm: float, feature: int) -> float:
    # Labels whose entire mass was pruned away estimate nothing; the
    # smoothing term carries all remaining probability.
    if norm <= 0:
        return 0.0
    return row.get(feature, 0.0) / norm


def _node_prob(model: SgmModel, label: int, feature: int) -> float:
    ml = _ml(model.cond_weight.get(label, {}), model.label_norm.get(label, 0.0), feature)
    gamma = model.smoothing.hierarchy_mix
    if gamma <= 0:
        return ml
    node = model.chosen_parent.get(label)
    if node is None:
        return ml
    pnorm = model.parent_norm.get(node, 0.0)
    if pnorm <= 0:
        return ml
    pml = model.parent_weight[node].get(feature, 0.0) / pnorm
    return (1.0 - gamma) * ml + gamma * pml


def label_word_prob(model: SgmModel, label: int, feature: int) -> float:
    """p(w|l) = (1-λ)·p_node(w|l) + λ·p_bg(w).

    p_node interpolates the label's maximum-likelihood estimate with its
    chosen parent's when hierarchy smoothing is active.  Features the
    model never saw get background mass only.
    """
    if label not in model.label_prior:
        raise KeyError(f"unknown label {label}")
    lam = model.smoothing.jm_lambda
    return (1.0 - lam) * _node_prob(model, label, feature) + lam * model.background.prob(feature)


def _as_vector(doc_vector) -> tuple[Mapping[int, float], float]:
    if isinstance(doc_vector, KernelDoc):
        return dict(doc_vector.features), doc_vector.length
    if isinstance(doc_vector, Mapping):
        return doc_vector, sum(doc_vector.values())
    pairs = tuple(doc_vector)
    return dict(pairs), sum(w for _, w in pairs)


def kernel_doc_prob(
    model: SgmModel, doc_vector, feature: int, label: int | None = None
) -> float:
    """Dirichlet-smoothed document model, p = (c + μ·prior) / (len + μ).

    The prior is the background distribution; passing ``label`` on a
    model without the nobo flag backs off through that label's smoothed
    model instead.
    """
    if not model.flags.kd:
        raise ValueError("kernel probabilities require the kd flag")
    mu = model.smoothing.dirichlet_mu
    weights, length = _as_vector(doc_vector)
    if label is None or model.flags.nobo:
        prior = model.background.prob(feature)
    else:
        prior = label_word_prob(model, label, feature)
    return (weights.get(feature, 0.0) + mu * prior) / (length + mu)


def weight_document(model: SgmModel, doc) -> tuple[tuple[int, float], ...]:
    """Apply the model's own weighting config, as done at training time."""
    if not doc.features:
        return ()
    return apply_weighting(doc, model.weighting, model.stats)


# ---------------------------------------------------------------------------
# Serialization: versioned line-oriented text with exact float round-trip.

_MAGIC = "xmlc-sgm 1"


def _fmt(x: float) -> str:
    return repr(float(x))


def save_model(model: SgmModel, path) -> None:
    with open(path, "w") as fh:
        w = fh.write
        w(_MAGIC + "\n")
        fl = model.flags
        w(f"flags {int(fl.kd)} {int(fl.nobo)} {int(fl.bm25_kernel)} {int(fl.lp)}\n")
        w(f"prior_scale {_fmt(model.prior_scale)}\n")
        w(f"kernel_top_k {model.kernel_top_k}\n")
        w(f"num_train_docs {model.num_train_docs}\n")
        wc = model.weighting
        w(
            f"weighting {wc.scheme.value} {_fmt(wc.k1)} {_fmt(wc.b)} "
            f"{_fmt(wc.idf_exponent)} {_fmt(wc.length_exponent)} {_fmt(wc.tf_exponent)}\n"
        )
        sc = model.smoothing
        w(
            f"smoothing {_fmt(sc.jm_lambda)} {_fmt(sc.dirichlet_mu)} "
            f"{sc.background_kind.value} {_fmt(sc.collection_mix)} {_fmt(sc.hierarchy_mix)}\n"
        )
        pc = model.pruning
        w(
            f"pruning {_fmt(pc.min_count)} {pc.min_label_count} "
            f"{_fmt(pc.precomputed_prune)} {_fmt(pc.online_prune)}\n"
        )
        st = model.stats
        w(f"stats {st.num_docs} {_fmt(st.avg_doc_len)} {st.vocab_size}\n")
        for f in sorted(st.doc_freq):
            w(f"feat {f} {st.doc_freq[f]} {_fmt(st.collection_count[f])}\n")
        for l in sorted(model.label_doc_freq):
            w(f"label {l} {model.label_doc_freq[l]}\n")
        for l in sorted(model.cond_weight):
            row = model.cond_weight[l]
            for f in sorted(row):
                w(f"cond {l} {f} {_fmt(row[f])}\n")
        for l in sorted(model.kernel_store):
            for kd in model.kernel_store[l]:
                feats = " ".join(f"{f}:{_fmt(v)}" for f, v in kd.features)
                w(f"kernel {l} {feats}".rstrip() + "\n")
        for l in sorted(model.chosen_parent):
            w(f"parent {l} {model.chosen_parent[l]}\n")
        for node in sorted(model.parent_weight):
            row = model.parent_weight[node]
            for f in sorted(row):
                w(f"pweight {node} {f} {_fmt(row[f])}\n")
        if model.hierarchy is not None:
            for parent, child in sorted(model.hierarchy.edges):
                w(f"edge {parent} {child}\n")
        if model.powerset_map is not None:
            for meta, labels in enumerate(model.powerset_map.id_to_labels):
                w(f"powerset {meta} {canonical_labelset(labels)}\n")
        w("end\n")


def load_model(path) -> SgmModel:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _MAGIC:
        raise ValueError(f"not a model file: {path}")
    if lines[-1] != "end":
        raise ValueError(f"truncated model file: {path}")

    header: dict[str, list[str]] = {}
    doc_freq: dict[int, int] = {}
    cc: dict[int, float] = {}
    label_doc_freq: dict[int, int] = {}
    cond: dict[int, dict[int, float]] = defaultdict(dict)
    kernels: dict[int, list[KernelDoc]] = defaultdict(list)
    chosen_parent: dict[int, int] = {}
    pweight: dict[int, dict[int, float]] = defaultdict(dict)
    edges: list[tuple[int, int]] = []
    psets: dict[int, frozenset[int]] = {}

    for line in lines[1:-1]:
        kind, *rest = line.split(" ")
        if kind == "feat":
            doc_freq[int(rest[0])] = int(rest[1])
            cc[int(rest[0])] = float(rest[2])
        elif kind == "label":
            label_doc_freq[int(rest[0])] = int(rest[1])
        elif kind == "cond":
            cond[int(rest[0])][int(rest[1])] = float(rest[2])
        elif kind == "kernel":
            feats = tuple(
                (int(tok.split(":")[0]), float(tok.split(":")[1])) for tok in rest[1:]
            )
            kernels[int(rest[0])].append(KernelDoc(feats, sum(v for _, v in feats)))
        elif kind == "parent":
            chosen_parent[int(rest[0])] = int(rest[1])
        elif kind == "pweight":
            pweight[int(rest[0])][int(rest[1])] = float(rest[2])
        elif kind == "edge":
            edges.append((int(rest[0]), int(rest[1])))
        elif kind == "powerset":
            ids = rest[1] if len(rest) > 1 else ""
            psets[int(rest[0])] = frozenset(int(x) for x in ids.split(",") if x)
        else:
            header[kind] = rest

    fl = header["flags"]
    flags = ModelFlags(bool(int(fl[0])), bool(int(fl[1])), bool(int(fl[2])), bool(int(fl[3])))
    wc = header["weighting"]
    weighting = WeightingConfig(
        WeightingScheme(wc[0]), float(wc[1]), float(wc[2]), float(wc[3]),
        float(wc[4]), float(wc[5]),
    )
    sc = header["smoothing"]
    smoothing = SmoothingConfig(
        float(sc[0]), float(sc[1]), BackgroundKind(sc[2]), float(sc[3]), float(sc[4])
    )
    pc = header["pruning"]
    pruning = PruningConfig(float(pc[0]), int(pc[1]), float(pc[2]), float(pc[3]))
    st = header["stats"]
    stats = CollectionStats(int(st[0]), doc_freq, cc, float(st[1]), int(st[2]))
    n = int(header["num_train_docs"][0])

    hierarchy = None
    if edges:
        parents: dict[int, set[int]] = defaultdict(set)
        for p, c in edges:
            parents[c].add(p)
        hierarchy = Hierarchy(
            frozenset(edges), {c: tuple(sorted(ps)) for c, ps in parents.items()}
        )
    powerset = None
    if psets:
        ordered = tuple(psets[i] for i in range(len(psets)))
        powerset = PowersetMap(
            ordered, {canonical_labelset(s): i for i, s in enumerate(ordered)}
        )

    cond_final = {l: dict(row) for l, row in cond.items()}
    for l in label_doc_freq:
        cond_final.setdefault(l, {})
    pweight_final = {node: dict(row) for node, row in pweight.items()}
    background = Background(
        smoothing.background_kind, smoothing.collection_mix,
        stats.vocab_size, stats.collection_count, stats.total_count,
    )
    return SgmModel(
        label_prior={l: f / n for l, f in label_doc_freq.items()},
        prior_scale=float(header["prior_scale"][0]),
        cond_weight=cond_final,
        label_norm=_norms(cond_final),
        label_doc_freq=label_doc_freq,
        kernel_store={l: tuple(ks) for l, ks in kernels.items()},
        background=background,
        stats=stats,
        hierarchy=hierarchy,
        chosen_parent=chosen_parent,
        parent_weight=pweight_final,
        parent_norm=_norms(pweight_final),
        powerset_map=powerset,
        weighting=weighting,
        smoothing=smoothing,
        pruning=pruning,
        flags=flags,
        kernel_top_k=int(header["kernel_top_k"][0]),
        num_train_docs=n,
    )
