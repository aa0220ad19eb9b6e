#!/usr/bin/env python
"""Benchmark the document-scoring hot loop: compiled kernel vs the
pure NumPy fallback.

Builds a synthetic corpus, trains a plain model, then times repeated
full-corpus scoring passes under each available backend.

    python benchmarks/bench_scoring.py --docs 2000 --labels 300 --repeats 3
"""

import argparse
import statistics
import time

from xmlc import _kernels
from xmlc.corpus import SparseDocument
from xmlc.inference import build_inverted_index, score_document
from xmlc.sgm import PruningConfig, SmoothingConfig, train_model, weight_document
from xmlc.synthetic import SyntheticConfig, make_zipf_corpus
from xmlc.weighting import WeightingConfig, WeightingScheme


def build_world(n_docs: int, n_labels: int, seed: int):
    corpus = make_zipf_corpus(
        SyntheticConfig(n_docs=n_docs, n_labels=n_labels), seed=seed
    )
    model = train_model(
        corpus,
        WeightingConfig(scheme=WeightingScheme.TIX),
        SmoothingConfig(jm_lambda=0.95),
        PruningConfig(),
    )
    index = build_inverted_index(model)
    docs = [
        SparseDocument(d.doc_id, weight_document(model, d), d.labels) for d in corpus
    ]
    return index, docs


def time_backend(backend: str, index, docs, top_k: int, repeats: int) -> list[float]:
    _kernels.set_backend(backend)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        for doc in docs:
            score_document(index, doc, top_k)
        times.append(time.perf_counter() - t0)
    return times


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--docs", type=int, default=2000)
    ap.add_argument("--labels", type=int, default=300)
    ap.add_argument("--top-k", type=int, default=20)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    index, docs = build_world(args.docs, args.labels, args.seed)
    n_postings = index.post_lifts.shape[0]
    print(f"corpus: {len(docs)} docs, {index.n_targets} targets, "
          f"{n_postings} postings")

    default = _kernels.get_backend()
    results = {}
    try:
        for backend in _kernels.available_backends():
            times = time_backend(backend, index, docs, args.top_k, args.repeats)
            best = min(times)
            results[backend] = best
            print(f"{backend:>9}: best {best:.3f}s over {args.repeats} runs "
                  f"(median {statistics.median(times):.3f}s, "
                  f"{len(docs) / best:,.0f} docs/s)")
    finally:
        _kernels.set_backend(default)

    if "compiled" in results and "pure" in results:
        print(f"speedup: {results['pure'] / results['compiled']:.2f}x "
              f"(compiled over pure)")
    elif "compiled" not in results:
        print("compiled backend not available in this build; "
              "timed the pure fallback only")


if __name__ == "__main__":
    main()
