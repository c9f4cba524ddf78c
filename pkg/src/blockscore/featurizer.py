"""Sentence -> block-count features, normalization, and dimension dropping.

Characters are counted as Unicode codepoints (whitespace included), the
count vector is normalized into a distribution over blocks, and training
fixes a projection onto the blocks actually seen in the clean corpus.  Any
probability mass outside the projection marks a sentence as out-of-support,
which scoring later maps to the fixed unseen score.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError, EmptySentenceError
from .unicode_blocks import BlockTable

_SUM_TOL = 1e-12


@dataclass(frozen=True)
class RawCounts:
    """Per-block character counts for one sentence."""

    counts: np.ndarray  # int64, length table.vector_length
    total: int

    def __post_init__(self):
        object.__setattr__(self, "counts", np.asarray(self.counts, dtype=np.int64))
        self.counts.setflags(write=False)


@dataclass(frozen=True)
class FeatureDistribution:
    """Counts normalized by sentence length; entries sum to 1."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", np.asarray(self.probs, dtype=np.float64))
        self.probs.setflags(write=False)


@dataclass(frozen=True)
class FeatureProjection:
    """The block dimensions retained at training time.

    ``retained`` holds strictly ascending block indices into the full count
    vector; ``retained_names`` the corresponding block names (these are what
    model files persist, so a projection survives re-ingesting the block
    table).  ``space`` is the full vector length the indices refer to.
    """

    retained: tuple[int, ...]
    retained_names: tuple[str, ...]
    space: int

    def __post_init__(self):
        if not self.retained:
            raise DataError("projection retains zero dimensions")
        if len(self.retained) != len(self.retained_names):
            raise DataError("projection indices and names differ in length")
        if any(b <= a for a, b in zip(self.retained, self.retained[1:])):
            raise DataError("projection indices must be strictly ascending")
        if self.retained[0] < 0 or self.retained[-1] >= self.space:
            raise DataError("projection index outside the block vector")

    @property
    def dim(self) -> int:
        return len(self.retained)

    def index_array(self) -> np.ndarray:
        cached = getattr(self, "_index_cache", None)
        if cached is None:
            cached = np.asarray(self.retained, dtype=np.intp)
            object.__setattr__(self, "_index_cache", cached)
        return cached


@dataclass(frozen=True)
class ProjectedFeature:
    """A distribution restricted to the retained dimensions."""

    values: np.ndarray
    out_of_support: bool

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        self.values.setflags(write=False)


def count_blocks(sentence: str, table: BlockTable) -> RawCounts:
    """Count how many characters of ``sentence`` fall in each block.

    Total function: empty sentences yield an all-zero vector.
    """
    if sentence:
        # utf-32-le turns the string into one uint32 codepoint per character;
        # surrogatepass keeps this total even for lone surrogates, which land
        # in the surrogate blocks like any other codepoint.
        cps = np.frombuffer(
            sentence.encode("utf-32-le", errors="surrogatepass"), dtype=np.uint32
        )
        counts = np.bincount(
            table.dense_index()[cps], minlength=table.vector_length
        ).astype(np.int64)
    else:
        counts = np.zeros(table.vector_length, dtype=np.int64)
    return RawCounts(counts=counts, total=int(counts.sum()))


def normalize(counts: RawCounts) -> FeatureDistribution:
    """Counts -> probability distribution over blocks.

    Raises :class:`EmptySentenceError` when the sentence had no characters;
    callers route empty sentences to the unseen-score path instead.
    """
    if counts.total <= 0:
        raise EmptySentenceError("cannot normalize an empty sentence")
    return FeatureDistribution(probs=counts.counts / counts.total)


def fit_projection(training_counts, table: BlockTable) -> FeatureProjection:
    """Retain exactly the block indices with non-zero total corpus count."""
    summed = np.zeros(table.vector_length, dtype=np.int64)
    n_nonempty = 0
    for rc in training_counts:
        summed += rc.counts
        n_nonempty += rc.total > 0
    if n_nonempty == 0:
        raise DataError("projection requires at least one non-empty sentence")
    retained = np.flatnonzero(summed)
    return FeatureProjection(
        retained=tuple(int(i) for i in retained),
        retained_names=tuple(table.name_of(int(i)) for i in retained),
        space=table.vector_length,
    )


def project(dist: FeatureDistribution, proj: FeatureProjection) -> ProjectedFeature:
    """Restrict a distribution to the retained dimensions.

    ``out_of_support`` is set as soon as *any* non-retained dimension carries
    probability mass; there is no tolerance threshold.
    """
    if dist.probs.shape[0] != proj.space:
        raise DataError(
            f"distribution has {dist.probs.shape[0]} dims, projection expects {proj.space}"
        )
    idx = proj.index_array()
    values = dist.probs[idx]
    # probs are exact ratios count/total: an entry is > 0 exactly when its
    # count was non-zero, so this check needs no tolerance
    mask = np.ones(proj.space, dtype=bool)
    mask[idx] = False
    out = bool(np.any(dist.probs[mask] > 0.0))
    return ProjectedFeature(values=values, out_of_support=out)
