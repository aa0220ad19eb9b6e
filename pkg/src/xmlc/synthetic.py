"""Synthetic corpora with Zipf-skewed label frequencies.

Real collections in this problem class are too large to ship with the
test suite, and the property that matters is skew: a few head labels
with hundreds of examples and a long tail with one to three.  Each
label owns a small window of topic words; documents mix topic tokens
from their labels with tokens from a shared noise region, so labels
are separable but not trivially disjoint at the feature level.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, SparseDocument, make_rng

_STREAM_SYNTH = 8


@dataclass(frozen=True)
class SyntheticConfig:
    n_docs: int = 2000
    n_labels: int = 300
    zipf_exponent: float = 1.2
    label_density: float = 1.5
    max_labels_per_doc: int = 3
    words_per_label: int = 8
    shared_words: int = 40
    topic_tokens_lo: int = 6
    topic_tokens_hi: int = 14
    noise_tokens_lo: int = 2
    noise_tokens_hi: int = 6

    def __post_init__(self):
        if self.n_docs < 1 or self.n_labels < 1:
            raise ValueError("need at least one document and one label")
        if self.zipf_exponent <= 0:
            raise ValueError("zipf_exponent must be > 0")
        if self.label_density < 1.0:
            raise ValueError("label_density must be >= 1 so every doc gets a label")
        if self.max_labels_per_doc < 1:
            raise ValueError("max_labels_per_doc must be >= 1")
        if self.words_per_label < 1 or self.shared_words < 0:
            raise ValueError("vocabulary regions must be non-negative")
        if not 0 < self.topic_tokens_lo <= self.topic_tokens_hi:
            raise ValueError("bad topic token range")
        if not 0 <= self.noise_tokens_lo <= self.noise_tokens_hi:
            raise ValueError("bad noise token range")

    @property
    def vocab_size(self) -> int:
        return self.shared_words + self.n_labels * self.words_per_label

    def topic_window(self, label: int) -> tuple[int, int]:
        """Half-open feature id range owned by ``label``."""
        start = self.shared_words + label * self.words_per_label
        return start, start + self.words_per_label


def label_targets(cfg: SyntheticConfig) -> list[int]:
    """Per-label document counts: Zipf-shaped, every label at least once,
    head capped at a quarter of the corpus."""
    raw = [(l + 1) ** -cfg.zipf_exponent for l in range(cfg.n_labels)]
    scale = cfg.label_density * cfg.n_docs / sum(raw)
    cap = max(1, cfg.n_docs // 4)
    return [max(1, min(cap, round(scale * r))) for r in raw]


def make_zipf_corpus(cfg: SyntheticConfig = SyntheticConfig(), seed: int = 0) -> Corpus:
    rng = make_rng(seed, _STREAM_SYNTH)
    targets = label_targets(cfg)
    if sum(targets) < cfg.n_docs:
        raise ValueError("label targets leave some documents unlabeled; "
                         "raise label_density or n_labels")

    slots = np.repeat(np.arange(cfg.n_labels), targets)
    rng.shuffle(slots)
    visit = rng.permutation(cfg.n_docs)

    doc_labels: list[set[int]] = [set() for _ in range(cfg.n_docs)]
    pointer = 0
    for label in slots.tolist():
        # Walk the doc cycle until one can take this label.
        for _ in range(cfg.n_docs):
            doc = int(visit[pointer])
            pointer = (pointer + 1) % cfg.n_docs
            holder = doc_labels[doc]
            if label not in holder and len(holder) < cfg.max_labels_per_doc:
                holder.add(label)
                break

    documents = []
    for doc_id in range(cfg.n_docs):
        counts: Counter[int] = Counter()
        for label in sorted(doc_labels[doc_id]):
            lo, hi = cfg.topic_window(label)
            k = int(rng.integers(cfg.topic_tokens_lo, cfg.topic_tokens_hi + 1))
            counts.update(rng.integers(lo, hi, size=k).tolist())
        k = int(rng.integers(cfg.noise_tokens_lo, cfg.noise_tokens_hi + 1))
        if k and cfg.shared_words:
            counts.update(rng.integers(0, cfg.shared_words, size=k).tolist())
        features = tuple((f, float(c)) for f, c in sorted(counts.items()))
        documents.append(
            SparseDocument(doc_id, features, frozenset(doc_labels[doc_id]))
        )
    return Corpus(tuple(documents), source_name=f"synthetic-{seed}")
