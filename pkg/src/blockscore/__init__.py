"""Corpus filtering by Unicode block distributions.

Sentences are featurized as normalized block-count vectors, a clean
reference corpus fixes which blocks are in-support and fits a Bayesian
Gaussian mixture over them, and every candidate sentence is scored by
its weighted log probability under that mixture (out-of-support
sentences get a fixed unseen score).  Low scorers are filtered out,
with parallel corpora kept line-aligned.
"""

from .errors import (
    AlignmentError,
    BlockscoreError,
    BlocksParseError,
    DataError,
    EmptySentenceError,
    ModelFormatError,
    NumericError,
)
from .featurizer import (
    FeatureDistribution,
    FeatureProjection,
    ProjectedFeature,
    RawCounts,
    count_blocks,
    fit_projection,
    normalize,
    project,
)
from .filterer import (
    KeepMask,
    Reduction,
    ThresholdSpec,
    apply_mask_files,
    apply_mask_lines,
    filter_mono,
    filter_parallel,
)
from .model import BlockScoreModel, TrainSummary, load, save, score_corpus, score_sentence, train
from .unicode_blocks import (
    BlockRange,
    BlockTable,
    load_blocks_file,
    load_default_table,
    parse_blocks_file,
)
from .vbgmm import FitConfig, MixtureModel, Priors, fit, weighted_log_prob, weighted_log_prob_many

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "BlockRange",
    "BlockScoreModel",
    "BlockTable",
    "BlockscoreError",
    "BlocksParseError",
    "DataError",
    "EmptySentenceError",
    "FeatureDistribution",
    "FeatureProjection",
    "FitConfig",
    "KeepMask",
    "MixtureModel",
    "ModelFormatError",
    "NumericError",
    "Priors",
    "ProjectedFeature",
    "RawCounts",
    "Reduction",
    "ThresholdSpec",
    "TrainSummary",
    "apply_mask_files",
    "apply_mask_lines",
    "count_blocks",
    "filter_mono",
    "filter_parallel",
    "fit",
    "fit_projection",
    "load",
    "load_blocks_file",
    "load_default_table",
    "normalize",
    "parse_blocks_file",
    "project",
    "save",
    "score_corpus",
    "score_sentence",
    "train",
    "weighted_log_prob",
    "weighted_log_prob_many",
]
