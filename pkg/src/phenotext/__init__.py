"""phenotext: clinical-note phenotyping from gazetteer features.

Free-text notes become binary medical-term presence vectors, PCA reduces
them, and three classifiers (kNN, SMO-trained SVM, a deep-narrow perceptron
stack) predict smoking status; an LSTM baseline over precomputed note
embeddings provides the comparison branch.  Everything numeric is
implemented from scratch on numpy, with optional compiled kernels for the
hot loops.
"""

from ._native import BACKEND as kernel_backend
from .config import PipelineConfig, config_hash, load_config
from .corpus import (
    LabeledCorpus,
    LabelSpace,
    Note,
    PhenotypeLabel,
    consolidate_labels,
    ingest_corpus,
    normalize_text,
)
from .embeddings import EmbeddingSet, average_chunks, read_pheb, write_pheb
from .errors import ConfigError, ConvergenceError, DataError, PhenotextError
from .lexicon import (
    FeatureMatrix,
    Lexicon,
    TermVocabulary,
    build_vocabulary,
    featurize,
    load_builtin_lexicon,
    load_lexicon,
    scan_terms,
)
from .metrics import EvalReport, confusion_matrix, micro_f1
from .neuralnet import NetSpec, NeuralNet, TrainerConfig, compute_class_weights, train
from .pca import PcaModel, fit_pca, transform_pca
from .pipeline import RunResult, run_end_to_end

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "DataError",
    "EmbeddingSet",
    "EvalReport",
    "FeatureMatrix",
    "LabelSpace",
    "LabeledCorpus",
    "Lexicon",
    "NetSpec",
    "NeuralNet",
    "Note",
    "PcaModel",
    "PhenotextError",
    "PhenotypeLabel",
    "PipelineConfig",
    "RunResult",
    "TermVocabulary",
    "TrainerConfig",
    "average_chunks",
    "build_vocabulary",
    "compute_class_weights",
    "config_hash",
    "confusion_matrix",
    "consolidate_labels",
    "featurize",
    "fit_pca",
    "ingest_corpus",
    "kernel_backend",
    "load_builtin_lexicon",
    "load_config",
    "load_lexicon",
    "micro_f1",
    "normalize_text",
    "read_pheb",
    "run_end_to_end",
    "scan_terms",
    "train",
    "transform_pca",
    "write_pheb",
]
