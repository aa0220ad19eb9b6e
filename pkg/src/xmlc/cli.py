"""Command-line pipeline driver.

Subcommands cover the full run lifecycle: ``segment`` and ``fold``
carve up a dataset, ``train`` fits a model named by a configuration
string, ``classify`` scores documents (per document or transposed),
``optimize`` random-searches free parameters against a development
fold, ``transpose`` flips result files, ``combine`` and
``select-classifiers`` run the stacking ensemble, and ``evaluate``
prints a metric.  Logs are line oriented and each command's final
stdout line is its summary, so callers can read the result from the
last line.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from collections import defaultdict
from dataclasses import replace

import numpy as np

from .corpus import (
    Corpus,
    FoldSpec,
    LabelStats,
    SparseDocument,
    labelset_stats,
    make_fold,
    parse_dataset,
    parse_hierarchy,
    segment,
    serialize_dataset,
)
from .ensemble import (
    ClassifierOutput,
    SelectionConfig,
    combine,
    cross_validated_selection,
    gold_by_label,
    load_output,
    select_classifiers,
    selection_to_predictions,
)
from .inference import (
    InstantiateConfig,
    PredictionList,
    PredictionPolicy,
    TransposedEntry,
    TransposedPrediction,
    build_inverted_index,
    predict_per_document,
    predict_transposed,
    score_document,
)
from .metaopt import initial_state, parse_param_file, run_search, write_param_file
from .metrics import (
    EvalPair,
    SurrogateConfig,
    SurrogateVariant,
    macro_fscore,
    mean_jaccard,
    micro_fscore,
    ndcg_at_5,
    surrogate_mafs,
)
from .resultfiles import (
    read_predictions,
    read_submission,
    transpose_file,
    write_predictions,
    write_submission,
    write_transposed,
)
from .sgm import (
    decode_label_powerset,
    load_model,
    save_model,
    train_model,
    weight_document,
)
from .templates import TemplateConfig, parse_template_name

_WEIGHTING_KEYS = {"k1", "b", "idf_exponent", "length_exponent", "tf_exponent"}
_SMOOTHING_KEYS = {"jm_lambda", "dirichlet_mu", "collection_mix", "hierarchy_mix"}
_PRUNING_KEYS = {"min_count", "min_label_count", "precomputed_prune", "online_prune"}
_INSTANTIATE_KEYS = {"instantiate_weight", "instantiate_threshold"}
_FREE_KEYS = {"prior_scale", "relative_threshold"}


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage problems; this project reserves 2 for
    # runtime failures and uses 1 for usage.
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _template_from(args) -> TemplateConfig:
    name = getattr(args, "template", None)
    if name is None and getattr(args, "config", None):
        with open(args.config) as fh:
            name = fh.readline().strip()
    if not name:
        raise ValueError("no template name given (use --template or --config)")
    cfg = parse_template_name(name)
    if cfg.unknown:
        print(f"template: ignoring unknown tokens {' '.join(cfg.unknown)}")
    return cfg


def _weighted_corpus(model, corpus: Corpus) -> list[SparseDocument]:
    return [
        SparseDocument(doc.doc_id, weight_document(model, doc), doc.labels)
        for doc in corpus
    ]


def _model_label_stats(model) -> LabelStats:
    """Training label frequencies; powerset meta-classes are expanded
    back to their member labels."""
    if model.flags.lp:
        freq: dict[int, int] = defaultdict(int)
        for meta, count in model.label_doc_freq.items():
            for label in decode_label_powerset(model.powerset_map, meta):
                freq[label] += count
        return LabelStats(dict(freq), {}, model.num_train_docs)
    return LabelStats(dict(model.label_doc_freq), {}, model.num_train_docs)


def _ranked_pairs(pred: PredictionList, model) -> list[tuple[int, float]]:
    if not model.flags.lp:
        return list(pred.pairs())
    out: list[tuple[int, float]] = []
    seen: set[int] = set()
    for meta, score in pred.pairs():
        for label in sorted(decode_label_powerset(model.powerset_map, int(meta))):
            if label not in seen:
                seen.add(label)
                out.append((label, score))
    return out


def _selected_pairs(pred: PredictionList, model, policy) -> list[tuple[int, float]]:
    if len(pred) == 0:
        return []
    chosen = predict_per_document(pred, model, policy)
    return [(l, s) for l, s in _ranked_pairs(pred, model) if l in chosen]


def _measure_value(measure, pair: EvalPair, ranks, universe) -> float:
    if measure == "mafs":
        return macro_fscore(pair)
    if measure in ("mafs2", "mafs3"):
        cfg = SurrogateConfig(SurrogateVariant(measure))
        return surrogate_mafs(pair, universe, cfg)
    if measure == "mifs":
        return micro_fscore(pair)
    if measure == "mjac":
        return mean_jaccard(pair)
    if measure == "ndcg5":
        return ndcg_at_5(ranks, pair.gold)
    raise ValueError(f"unknown measure {measure!r}")


# ---------------------------------------------------------------------------
# Subcommand handlers.


def _cmd_segment(args) -> None:
    corpus = parse_dataset(args.input)
    base, ensemble = segment(corpus, args.base_size, args.ensemble_size, args.seed)
    serialize_dataset(base, args.base_out)
    serialize_dataset(ensemble, args.ensemble_out)
    print(f"segment: read {len(corpus)} docs from {args.input}")
    print(f"segment: base {len(base)} -> {args.base_out}, "
          f"ensemble {len(ensemble)} -> {args.ensemble_out}")


def _cmd_fold(args) -> None:
    corpus = parse_dataset(args.input)
    spec = FoldSpec.for_fold(args.fold, dev_size=args.dev_size, seed=args.seed)
    dry_train, dry_dev = make_fold(corpus, spec)
    serialize_dataset(dry_train, args.train_out)
    serialize_dataset(dry_dev, args.dev_out)
    print(f"fold: scheme {spec.scheme.value} index {args.fold}")
    print(f"fold: train {len(dry_train)} -> {args.train_out}, "
          f"dev {len(dry_dev)} -> {args.dev_out}")


def _train_from_template(template: TemplateConfig, corpus, hierarchy, seed, params=None):
    weighting = template.weighting_config()
    smoothing = template.smoothing_config()
    pruning = template.pruning_config()
    icfg = template.instantiate_config()
    policy = PredictionPolicy()
    prior_scale = template.prior_scale
    for name, value in (params or {}).items():
        if name in _WEIGHTING_KEYS:
            weighting = replace(weighting, **{name: value})
        elif name in _SMOOTHING_KEYS:
            smoothing = replace(smoothing, **{name: value})
        elif name in _PRUNING_KEYS:
            cast = int(round(value)) if name == "min_label_count" else value
            pruning = replace(pruning, **{name: cast})
        elif name in _INSTANTIATE_KEYS:
            icfg = replace(icfg, **{name: value})
        elif name == "prior_scale":
            prior_scale = value
        elif name == "relative_threshold":
            policy = PredictionPolicy(relative_threshold=value)
        else:
            raise ValueError(f"unknown parameter {name!r}")
    model = train_model(
        corpus,
        weighting,
        smoothing,
        pruning,
        template.model_flags(),
        prior_scale=prior_scale,
        hierarchy=hierarchy,
        seed=seed,
    )
    return model, icfg, policy


def _cmd_train(args) -> None:
    template = _template_from(args)
    corpus = parse_dataset(args.input)
    hierarchy = parse_hierarchy(args.hierarchy) if args.hierarchy else None
    model, _, _ = _train_from_template(template, corpus, hierarchy, args.seed)
    save_model(model, args.output)
    print(f"train: {template.canonical_name()} on {len(corpus)} docs")
    print(f"train: {len(model.label_prior)} targets -> {args.output}")


def _cmd_classify(args) -> None:
    model = load_model(args.model)
    corpus = parse_dataset(args.input)
    index = build_inverted_index(model)
    docs = _weighted_corpus(model, corpus)
    template = None
    if getattr(args, "template", None) or getattr(args, "config", None):
        template = _template_from(args)
    workers = args.workers
    if workers is None:
        workers = template.workers if template else 1

    if args.transposed:
        icfg = template.instantiate_config() if template else InstantiateConfig()
        tp = predict_transposed(index, docs, icfg, _model_label_stats(model), workers)
        write_transposed(args.output, tp)
        print(f"classify: {len(docs)} docs, {len(tp.labels())} labels predicted")
        print(f"classify: transposed -> {args.output}")
        return

    policy = PredictionPolicy(relative_threshold=args.threshold)
    preds = []
    for doc in docs:
        ranked = score_document(index, doc, args.top_k)
        pairs = _selected_pairs(ranked, model, policy)
        preds.append(
            PredictionList(
                doc.doc_id,
                np.array([l for l, _ in pairs], dtype=np.int64),
                np.array([s for _, s in pairs]),
            )
        )
    write_predictions(args.output, preds)
    print(f"classify: {len(docs)} docs scored")
    print(f"classify: per-document -> {args.output}")


def _cmd_optimize(args) -> None:
    template = _template_from(args)
    corpus = parse_dataset(args.input)
    hierarchy = parse_hierarchy(args.hierarchy) if args.hierarchy else None
    fold_index = args.fold if args.fold is not None else template.fold
    if fold_index is None:
        raise ValueError("no fold given (template sN token or --fold)")
    spec = parse_param_file(args.params)
    fold_spec = FoldSpec.for_fold(fold_index, dev_size=args.dev_size, seed=args.seed)
    dry_train, dry_dev = make_fold(corpus, fold_spec)
    if not len(dry_dev):
        raise ValueError("empty development set; raise --dev-size")
    gold = {doc.doc_id: doc.labels for doc in dry_dev}
    universe = {l for doc in corpus for l in doc.labels}

    def objective(params):
        model, icfg, policy = _train_from_template(
            template, dry_train, hierarchy, args.seed, params
        )
        index = build_inverted_index(model)
        preds, ranks = {}, {}
        for doc in _weighted_corpus(model, dry_dev):
            ranked = score_document(index, doc, args.top_k)
            if len(ranked):
                preds[doc.doc_id] = predict_per_document(ranked, model, policy)
                ranks[doc.doc_id] = [l for l, _ in _ranked_pairs(ranked, model)]
            else:
                preds[doc.doc_id] = frozenset()
                ranks[doc.doc_id] = []
        return _measure_value(template.measure, EvalPair(preds, gold), ranks, universe)

    state = initial_state(spec, seed=args.seed, outer_iterations=args.outer,
                          batch_size=args.batch)
    result = run_search(objective, spec, state)
    final_path = f"{args.params}_{args.outer - 1}_0"
    write_param_file(final_path, spec, values=result.best_params)
    print(f"optimize: {len(result.history)} evaluations, best params -> {final_path}")
    print(f"{template.measure} {result.best_score!r}")


def _cmd_transpose(args) -> None:
    fmt = transpose_file(args.input, args.output)
    print(f"transpose: {fmt} input {args.input}")
    print(f"transpose: -> {args.output}")


def _ensemble_inputs(args):
    outputs = [load_output(i, path) for i, path in enumerate(args.outputs)]
    gold_docs = dict(read_submission(args.gold))
    gold_labels = gold_by_label(gold_docs)
    stats = labelset_stats(parse_dataset(args.train_corpus))
    train_size = args.train_size if args.train_size is not None else stats.total_docs
    return outputs, gold_docs, gold_labels, stats, train_size


def _cmd_combine(args) -> None:
    outputs, gold_docs, gold_labels, stats, train_size = _ensemble_inputs(args)
    scfg = SelectionConfig()
    if args.cv:
        test_size = args.test_size if args.test_size is not None else len(gold_docs)
        selection = cross_validated_selection(
            outputs, gold_labels, stats, scfg, test_size, train_size,
            ridge_lambda=args.ridge_lambda, n_folds=args.cv, seed=args.seed,
        )
    else:
        if args.test_size is None:
            raise ValueError("--test-size is required without --cv")
        test_paths = args.test_outputs or args.outputs
        test_outputs = [load_output(i, p) for i, p in enumerate(test_paths)]
        selection = combine(
            outputs, gold_labels, test_outputs, stats, scfg,
            args.test_size, train_size, ridge_lambda=args.ridge_lambda,
        )
    tp = TransposedPrediction(
        {
            label: tuple(TransposedEntry(d, 1.0, 0.0) for d in docs)
            for label, docs in selection.items()
        }
    )
    write_transposed(args.output, tp)
    print(f"combine: {len(outputs)} classifiers, {len(selection)} labels selected")
    if args.submission:
        by_doc = selection_to_predictions(selection)
        write_submission(args.submission, sorted(by_doc.items()))
        print(f"combine: submission -> {args.submission}")
    print(f"combine: -> {args.output}")


def _cmd_select_classifiers(args) -> None:
    outputs, gold_docs, gold_labels, stats, train_size = _ensemble_inputs(args)
    test_size = args.test_size if args.test_size is not None else len(gold_docs)
    scfg = SelectionConfig()
    by_id = {out.classifier_id: out for out in outputs}

    def evaluate(subset):
        chosen = [by_id[i] for i in sorted(subset)]
        reindexed = [ClassifierOutput(k, o.lists) for k, o in enumerate(chosen)]
        sel = cross_validated_selection(
            reindexed, gold_labels, stats, scfg, test_size, train_size,
            ridge_lambda=args.ridge_lambda, n_folds=args.folds, seed=args.seed,
        )
        return macro_fscore(EvalPair(selection_to_predictions(sel), gold_docs))

    kept, score = select_classifiers(evaluate, sorted(by_id))
    print(f"select-classifiers: kept {' '.join(str(i) for i in sorted(kept))}")
    print(f"cv_mafs {score!r}")


def _sniff_predictions(path):
    """(labelsets, rankings) from a scored per-document or submission file."""
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            _, _, rest = line.partition(",")
            scored = any(":" in tok for tok in rest.split())
            break
        else:
            return {}, {}
    if scored:
        rows = read_predictions(path)
        sets = {doc: frozenset(l for l, _ in entries) for doc, entries in rows}
        ranks = {doc: [l for l, _ in entries] for doc, entries in rows}
    else:
        rows = read_submission(path)
        sets = {doc: labels for doc, labels in rows}
        ranks = {doc: sorted(labels) for doc, labels in rows}
    return sets, ranks


def _read_gold(path, fmt):
    if fmt == "dataset":
        return {doc.doc_id: doc.labels for doc in parse_dataset(path)}
    return dict(read_submission(path))


def _cmd_evaluate(args) -> None:
    preds, ranks = _sniff_predictions(args.pred)
    gold = _read_gold(args.gold, args.gold_format)
    if args.universe:
        try:
            universe = {l for doc in parse_dataset(args.universe) for l in doc.labels}
        except Exception:
            universe = {l for _, ls in read_submission(args.universe) for l in ls}
    else:
        universe = {l for ls in gold.values() for l in ls}
        universe |= {l for ls in preds.values() for l in ls}
    value = _measure_value(args.metric, EvalPair(preds, gold), ranks, universe)
    print(f"{args.metric} {value!r}")


# ---------------------------------------------------------------------------
# Argument wiring.


def _build_parser() -> _Parser:
    parser = _Parser(prog="xmlc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="split a dataset into base/ensemble parts")
    p.add_argument("--input", required=True)
    p.add_argument("--base-out", required=True)
    p.add_argument("--ensemble-out", required=True)
    p.add_argument("--base-size", type=int, default=2341782)
    p.add_argument("--ensemble-size", type=int, default=23654)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("fold", help="carve a training/development fold")
    p.add_argument("--input", required=True)
    p.add_argument("--fold", type=int, required=True, choices=range(10))
    p.add_argument("--dev-size", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-out", required=True)
    p.add_argument("--dev-out", required=True)
    p.set_defaults(func=_cmd_fold)

    p = sub.add_parser("train", help="fit a model from a configuration name")
    p.add_argument("--input", required=True)
    p.add_argument("--template")
    p.add_argument("--config", help="file whose first line is the template name")
    p.add_argument("--hierarchy")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("classify", help="score documents with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--transposed", action="store_true",
                   help="emit per-label instance lists instead of per-document")
    p.add_argument("--template")
    p.add_argument("--config")
    p.add_argument("--workers", type=int)
    p.add_argument("--top-k", type=int, default=20)
    p.add_argument("--threshold", type=float, default=1.0,
                   help="relative probability threshold for labelset extraction")
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("optimize", help="random-search free parameters on a fold")
    p.add_argument("--input", required=True)
    p.add_argument("--template")
    p.add_argument("--config")
    p.add_argument("--params", required=True,
                   help="parameter file: name lo hi transform init sigma frozen")
    p.add_argument("--hierarchy")
    p.add_argument("--fold", type=int, choices=range(10))
    p.add_argument("--dev-size", type=int, default=1000)
    p.add_argument("--outer", type=int, default=40)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--top-k", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("transpose", help="flip a result file's orientation")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_transpose)

    p = sub.add_parser("combine", help="stack classifier outputs into a selection")
    p.add_argument("--outputs", nargs="+", required=True,
                   help="transposed result files for the ensemble-training docs")
    p.add_argument("--test-outputs", nargs="*",
                   help="transposed result files for the test docs")
    p.add_argument("--gold", required=True, help="submission-format gold labels")
    p.add_argument("--train-corpus", required=True,
                   help="base-training dataset for label statistics")
    p.add_argument("--output", required=True)
    p.add_argument("--submission")
    p.add_argument("--cv", type=int, default=0,
                   help="label-CV development mode with this many folds")
    p.add_argument("--test-size", type=int)
    p.add_argument("--train-size", type=int)
    p.add_argument("--ridge-lambda", type=float, default=1000.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_combine)

    p = sub.add_parser("select-classifiers",
                       help="hill-climb the classifier subset by CV macro F1")
    p.add_argument("--outputs", nargs="+", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--train-corpus", required=True)
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("--test-size", type=int)
    p.add_argument("--train-size", type=int)
    p.add_argument("--ridge-lambda", type=float, default=1000.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_select_classifiers)

    p = sub.add_parser("evaluate", help="print a metric for predictions vs gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--metric", required=True,
                   choices=["mafs", "mafs2", "mafs3", "mifs", "mjac", "ndcg5"])
    p.add_argument("--gold-format", choices=["dataset", "submission"],
                   default="dataset")
    p.add_argument("--universe")
    p.set_defaults(func=_cmd_evaluate)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:
        return int(exit_.code or 0)
    try:
        args.func(args)
    except Exception as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    return 0
