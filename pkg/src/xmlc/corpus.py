"""Sparse multi-label corpora: parsing, segmentation, folds and statistics.

Dataset format, one document per line: an optional comma-separated label
list, then space-separated ``feature:count`` tokens::

    12,34 5:2 8:1

A line that starts directly with a ``feature:count`` token is an unlabeled
(test) document.  Label hierarchies are plain ``parent child`` integer
pairs, one edge per line.

All random sampling in this module runs on seeded PCG64 generators, so
segmentation, folding and shuffling are pure functions of their inputs.
"""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Iterator, Sequence

import numpy as np

_FEATURE_TOKEN = re.compile(r"^(\d+):(\d+)$")
_INT = re.compile(r"^\d+$")


class ParseError(ValueError):
    """Malformed dataset or hierarchy input."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Seeded PCG64 generator; extra ints select independent substreams."""
    entropy = [int(seed) & (2**64 - 1), *(int(s) & (2**64 - 1) for s in stream)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


@dataclass(frozen=True)
class SparseDocument:
    """One instance: sparse feature counts plus a (possibly empty) label set."""

    doc_id: int
    features: tuple[tuple[int, float], ...]
    labels: frozenset[int]

    @property
    def length(self) -> float:
        """Total token mass of the document."""
        return sum(c for _, c in self.features)

    def feature_ids(self) -> tuple[int, ...]:
        return tuple(f for f, _ in self.features)


@dataclass(frozen=True)
class Corpus:
    documents: tuple[SparseDocument, ...]
    source_name: str = ""

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[SparseDocument]:
        return iter(self.documents)

    def __getitem__(self, i: int) -> SparseDocument:
        return self.documents[i]


@dataclass(frozen=True)
class Hierarchy:
    """Label DAG as parent->child edges with parent lookup."""

    edges: frozenset[tuple[int, int]]
    _parents: dict[int, tuple[int, ...]]

    def parents_of(self, label: int) -> list[int]:
        """Parents of ``label``, ascending; empty for unknown labels."""
        return list(self._parents.get(label, ()))

    def __len__(self) -> int:
        return len(self.edges)


class FoldScheme(Enum):
    EXCLUSIVE_DEV = "exclusive_dev"
    RANDOM_THIRDS = "random_thirds"
    ORDERED_QUARTERS = "ordered_quarters"

    @staticmethod
    def for_index(fold_index: int) -> "FoldScheme":
        if 0 <= fold_index <= 2:
            return FoldScheme.EXCLUSIVE_DEV
        if 3 <= fold_index <= 5:
            return FoldScheme.RANDOM_THIRDS
        if 6 <= fold_index <= 9:
            return FoldScheme.ORDERED_QUARTERS
        raise ValueError(f"fold index must be 0-9, got {fold_index}")


# Substream tags keeping the different sampling purposes independent.
_STREAM_SEGMENT = 1
_STREAM_DEV = 2
_STREAM_SPLIT = 3
_STREAM_SHUFFLE = 4
_SCHEME_TAG = {
    FoldScheme.EXCLUSIVE_DEV: 100,
    FoldScheme.RANDOM_THIRDS: 101,
    FoldScheme.ORDERED_QUARTERS: 102,
}


@dataclass(frozen=True)
class FoldSpec:
    scheme: FoldScheme
    fold_index: int
    dev_size: int = 1000
    seed: int = 0

    def __post_init__(self):
        if FoldScheme.for_index(self.fold_index) is not self.scheme:
            raise ValueError(
                f"fold index {self.fold_index} does not belong to scheme {self.scheme.name}"
            )
        if self.dev_size < 0:
            raise ValueError("dev_size must be >= 0")

    @staticmethod
    def for_fold(fold_index: int, dev_size: int = 1000, seed: int = 0) -> "FoldSpec":
        return FoldSpec(FoldScheme.for_index(fold_index), fold_index, dev_size, seed)


@dataclass(frozen=True)
class LabelStats:
    label_freq: dict[int, int]
    labelset_freq: dict[str, int]
    total_docs: int


def canonical_labelset(labels: Iterable[int]) -> str:
    """Canonical key for a labelset: ascending ids joined by commas."""
    return ",".join(str(l) for l in sorted(labels))


def _parse_document_line(line: str, line_no: int) -> tuple[frozenset[int], tuple[tuple[int, float], ...]]:
    tokens = line.split()
    split = 0
    while split < len(tokens) and ":" not in tokens[split]:
        split += 1
    label_tokens, feature_tokens = tokens[:split], tokens[split:]
    if not feature_tokens:
        raise ParseError("no feature tokens on line", line_no)

    labels: frozenset[int] = frozenset()
    if label_tokens:
        pieces = [p.strip() for p in " ".join(label_tokens).split(",")]
        if any(not _INT.match(p) for p in pieces):
            raise ParseError(f"bad label list {' '.join(label_tokens)!r}", line_no)
        labels = frozenset(int(p) for p in pieces)

    counts: dict[int, int] = {}
    for tok in feature_tokens:
        m = _FEATURE_TOKEN.match(tok)
        if not m:
            raise ParseError(f"bad feature token {tok!r}", line_no)
        fid, count = int(m.group(1)), int(m.group(2))
        if count <= 0:
            raise ParseError(f"count must be positive in {tok!r}", line_no)
        counts[fid] = counts.get(fid, 0) + count
    features = tuple(sorted(counts.items()))
    return labels, features


def parse_dataset(path) -> Corpus:
    """Parse a dataset file; doc ids are zero-based non-blank line indices."""
    docs: list[SparseDocument] = []
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            labels, features = _parse_document_line(line, line_no)
            docs.append(SparseDocument(len(docs), features, labels))
    return Corpus(tuple(docs), source_name=str(path))


def _format_count(c: float) -> str:
    return str(int(c)) if float(c).is_integer() else repr(float(c))


def format_document_line(doc: SparseDocument) -> str:
    feats = " ".join(f"{fid}:{_format_count(c)}" for fid, c in doc.features)
    if doc.labels:
        return ",".join(str(l) for l in sorted(doc.labels)) + " " + feats
    return feats


def serialize_dataset(corpus: Corpus, path) -> None:
    with open(path, "w") as fh:
        for doc in corpus:
            fh.write(format_document_line(doc))
            fh.write("\n")


def _subcorpus(corpus: Corpus, indices: Sequence[int], name: str) -> Corpus:
    # Sub-corpora are renumbered 0..n-1 so ids always equal line positions.
    docs = tuple(
        replace(corpus.documents[idx], doc_id=new_id)
        for new_id, idx in enumerate(indices)
    )
    return Corpus(docs, source_name=name)


def shuffle_corpus(corpus: Corpus, seed: int) -> Corpus:
    rng = make_rng(seed, _STREAM_SHUFFLE)
    perm = rng.permutation(len(corpus))
    return _subcorpus(corpus, perm.tolist(), corpus.source_name + "[shuffled]")


def segment(corpus: Corpus, base_size: int, ensemble_size: int, seed: int) -> tuple[Corpus, Corpus]:
    """Randomly carve disjoint base-training and ensemble-training portions."""
    if base_size < 0 or ensemble_size < 0:
        raise ValueError("portion sizes must be non-negative")
    if base_size + ensemble_size > len(corpus):
        raise ValueError(
            f"requested {base_size}+{ensemble_size} documents from a corpus of {len(corpus)}"
        )
    rng = make_rng(seed, _STREAM_SEGMENT)
    perm = rng.permutation(len(corpus))
    base_idx = sorted(perm[:base_size].tolist())
    ens_idx = sorted(perm[base_size : base_size + ensemble_size].tolist())
    name = corpus.source_name
    return (
        _subcorpus(corpus, base_idx, name + "[base]"),
        _subcorpus(corpus, ens_idx, name + "[ensemble]"),
    )


def _chunk_bounds(n: int, parts: int) -> list[tuple[int, int]]:
    """Near-equal contiguous chunks; earlier chunks absorb the remainder."""
    size, rem = divmod(n, parts)
    bounds = []
    start = 0
    for i in range(parts):
        end = start + size + (1 if i < rem else 0)
        bounds.append((start, end))
        start = end
    return bounds


def make_fold(base_train: Corpus, spec: FoldSpec) -> tuple[Corpus, Corpus]:
    """Build one (training, development) fold.

    EXCLUSIVE_DEV folds draw pairwise-disjoint dev samples for indices
    0..2.  RANDOM_THIRDS and ORDERED_QUARTERS share a single dev sample
    (seeded only by scheme and dev size) and partition the rest into
    three random, respectively four in-order, training subsets.  The
    returned training corpus is always reshuffled.
    """
    n = len(base_train)
    if spec.dev_size >= n:
        raise ValueError("dev_size must be smaller than the corpus")
    name = base_train.source_name
    tag = _SCHEME_TAG[spec.scheme]

    if spec.scheme is FoldScheme.EXCLUSIVE_DEV:
        k = spec.fold_index
        if (k + 1) * spec.dev_size > n:
            raise ValueError("not enough documents for disjoint dev samples")
        perm = make_rng(spec.seed, _STREAM_DEV, tag).permutation(n)
        dev_idx = sorted(perm[k * spec.dev_size : (k + 1) * spec.dev_size].tolist())
        dev_set = set(dev_idx)
        train_idx = [i for i in range(n) if i not in dev_set]
    else:
        # Shared dev sample: seeded by (scheme, dev_size) only, so every
        # fold of the scheme sees the identical held-out portion.
        dev_perm = make_rng(tag, _STREAM_DEV, spec.dev_size).permutation(n)
        dev_idx = sorted(dev_perm[: spec.dev_size].tolist())
        dev_set = set(dev_idx)
        rest = [i for i in range(n) if i not in dev_set]
        if spec.scheme is FoldScheme.RANDOM_THIRDS:
            part = spec.fold_index - 3
            rperm = make_rng(spec.seed, _STREAM_SPLIT, tag).permutation(len(rest))
            lo, hi = _chunk_bounds(len(rest), 3)[part]
            train_idx = sorted(rest[j] for j in rperm[lo:hi].tolist())
        else:
            part = spec.fold_index - 6
            lo, hi = _chunk_bounds(len(rest), 4)[part]
            train_idx = rest[lo:hi]

    dry_train = _subcorpus(base_train, train_idx, f"{name}[fold{spec.fold_index}]")
    dry_train = shuffle_corpus(dry_train, spec.seed + 7919 * (spec.fold_index + 1))
    dry_dev = _subcorpus(base_train, dev_idx, f"{name}[fold{spec.fold_index}-dev]")
    return dry_train, dry_dev


def labelset_stats(corpus: Corpus) -> LabelStats:
    """Exact per-label and per-labelset frequencies."""
    label_freq: dict[int, int] = defaultdict(int)
    labelset_freq: dict[str, int] = defaultdict(int)
    for doc in corpus:
        for label in doc.labels:
            label_freq[label] += 1
        labelset_freq[canonical_labelset(doc.labels)] += 1
    return LabelStats(dict(label_freq), dict(labelset_freq), len(corpus))


def parse_hierarchy(path) -> Hierarchy:
    edges: set[tuple[int, int]] = set()
    parents: dict[int, set[int]] = defaultdict(set)
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2 or not all(_INT.match(p) for p in parts):
                raise ParseError(f"expected 'parent child', got {line!r}", line_no)
            parent, child = int(parts[0]), int(parts[1])
            if parent == child:
                raise ParseError(f"self-edge on label {parent}", line_no)
            edges.add((parent, child))
            parents[child].add(parent)
    return Hierarchy(
        frozenset(edges),
        {child: tuple(sorted(ps)) for child, ps in parents.items()},
    )
