"""Sparse generative models with inverted-index inference and stacked
ensembles for extreme multi-label text classification.

The pipeline: segment a corpus, carve training/development folds, fit
smoothed multinomial or kernel-density models over weighted features,
score documents through an inverted index, transpose the rankings into
per-label instance lists, then stack several classifiers with
metafeature-weighted voting.  ``xmlc.cli`` drives it from the command
line.
"""

from ._kernels import available_backends, get_backend, set_backend
from .corpus import Corpus, FoldScheme, FoldSpec, Hierarchy, SparseDocument, make_rng
from .inference import build_inverted_index, predict_transposed, score_document
from .sgm import ModelFlags, PruningConfig, SmoothingConfig, load_model, save_model, train_model
from .templates import TemplateConfig, parse_template_name
from .weighting import CollectionStats, WeightingConfig, WeightingScheme

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "CollectionStats",
    "FoldScheme",
    "FoldSpec",
    "Hierarchy",
    "ModelFlags",
    "PruningConfig",
    "SmoothingConfig",
    "SparseDocument",
    "TemplateConfig",
    "WeightingConfig",
    "WeightingScheme",
    "available_backends",
    "build_inverted_index",
    "get_backend",
    "load_model",
    "make_rng",
    "parse_template_name",
    "predict_transposed",
    "save_model",
    "score_document",
    "set_backend",
    "train_model",
    "__version__",
]
