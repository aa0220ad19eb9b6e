"""Parameterized TF-IDF and BM25 feature weighting.

Three scheme families share one inverse document frequency,
``idf(w) = ln((N+1)/(df(w)+0.5))``:

* ``TIX``     ``(c / len^b)^p * idf^a``
* ``BM25C``   ``(k1+1)c / (k1((1-b) + b len/avg) + c) * idf``
* ``BM18TI``  BM25 term saturation with an exponentiated length ratio
              and an idf exponent: ``(k1+1)c / (k1((1-b) + b (len/avg)^e) + c) * idf^a``

Weights are pure functions of (document, config, collection statistics)
and get applied symmetrically at training and classification time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .corpus import Corpus, SparseDocument


class WeightingScheme(Enum):
    TIX = "tix"
    BM25C = "bm25c"
    BM18TI = "bm18ti"


@dataclass(frozen=True)
class CollectionStats:
    num_docs: int
    doc_freq: dict[int, int]
    collection_count: dict[int, float]
    avg_doc_len: float
    vocab_size: int

    @property
    def total_count(self) -> float:
        """Token mass of the whole collection."""
        return sum(self.collection_count.values())

    def idf(self, feature: int) -> float:
        # df=0 features fall through to the +0.5 floor; idf stays positive.
        df = self.doc_freq.get(feature, 0)
        return math.log((self.num_docs + 1) / (df + 0.5))


@dataclass(frozen=True)
class WeightingConfig:
    scheme: WeightingScheme = WeightingScheme.TIX
    k1: float = 1.2
    b: float = 0.0
    idf_exponent: float = 0.0
    length_exponent: float = 1.0
    tf_exponent: float = 1.0

    def __post_init__(self):
        if self.k1 <= 0:
            raise ValueError("k1 must be > 0")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must be in [0, 1]")
        if self.idf_exponent < 0:
            raise ValueError("idf exponent must be >= 0")
        if self.length_exponent < 0:
            raise ValueError("length exponent must be >= 0")
        if self.tf_exponent <= 0:
            raise ValueError("tf exponent must be > 0")


#: Raw-count identity: TIX with p=1, a=0, b=0.
IDENTITY_WEIGHTING = WeightingConfig(
    WeightingScheme.TIX, idf_exponent=0.0, b=0.0, tf_exponent=1.0
)


def collect_stats(corpus: Corpus) -> CollectionStats:
    df: dict[int, int] = {}
    cc: dict[int, float] = {}
    total_len = 0.0
    for doc in corpus:
        for fid, count in doc.features:
            df[fid] = df.get(fid, 0) + 1
            cc[fid] = cc.get(fid, 0.0) + count
            total_len += count
    n = len(corpus)
    avg = total_len / n if n else 0.0
    return CollectionStats(n, df, cc, avg, len(df))


def _weight_one(
    count: float, doc_len: float, feature: int, cfg: WeightingConfig, stats: CollectionStats
) -> float:
    idf = stats.idf(feature)
    if cfg.scheme is WeightingScheme.TIX:
        return (count / doc_len**cfg.b) ** cfg.tf_exponent * idf**cfg.idf_exponent
    avg = stats.avg_doc_len if stats.avg_doc_len > 0 else 1.0
    if cfg.scheme is WeightingScheme.BM25C:
        norm = cfg.k1 * ((1.0 - cfg.b) + cfg.b * doc_len / avg)
        return (cfg.k1 + 1.0) * count / (norm + count) * idf
    norm = cfg.k1 * ((1.0 - cfg.b) + cfg.b * (doc_len / avg) ** cfg.length_exponent)
    return (cfg.k1 + 1.0) * count / (norm + count) * idf**cfg.idf_exponent


def apply_weighting(
    doc: SparseDocument, cfg: WeightingConfig, stats: CollectionStats
) -> tuple[tuple[int, float], ...]:
    """Reweight a document's counts; output order mirrors the input."""
    if stats.num_docs < 1:
        raise ValueError("collection statistics are empty")
    if not doc.features:
        raise ValueError("document has no features")
    doc_len = doc.length
    return tuple(
        (fid, _weight_one(count, doc_len, fid, cfg, stats))
        for fid, count in doc.features
    )
