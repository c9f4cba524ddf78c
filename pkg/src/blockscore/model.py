"""Train, persist, and apply sentence scoring models.

A :class:`BlockScoreModel` bundles everything scoring needs: the block
table it was built against, the projection onto blocks seen in training,
the fitted mixture, the score handed to out-of-support sentences, and the
minimum score observed on the training corpus (the natural absolute
threshold for filtering).

Scoring policy, uniform for every sentence:

* empty sentence -> ``unseen_score``,
* any character outside the retained blocks -> ``unseen_score``,
* otherwise the mixture's weighted log probability of the projected
  block distribution.

Models serialize to a single versioned JSON document; loading revalidates
every invariant so a tampered or stale file fails loudly instead of
scoring garbage.
"""

import json
import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from . import vbgmm
from .errors import DataError, ModelFormatError, NumericError
from .featurizer import FeatureProjection, count_blocks, fit_projection, normalize, project
from .unicode_blocks import BlockTable, load_default_table
from .vbgmm import FitConfig, MixtureModel, Priors

MODEL_FORMAT_VERSION = 1

_MODEL_KEYS = {
    "format_version", "unicode_version", "unseen_score", "min_train_score",
    "projection", "mixture", "priors", "fit_config",
}


@dataclass(frozen=True)
class TrainSummary:
    """Transient facts about a training run; not part of the model file."""

    n_sentences: int
    n_skipped_empty: int


@dataclass(frozen=True)
class BlockScoreModel:
    table: BlockTable
    projection: FeatureProjection
    mixture: MixtureModel
    priors: Priors
    fit_config: FitConfig
    min_train_score: float
    unseen_score: float = 0.0
    train_summary: TrainSummary | None = None

    def __post_init__(self):
        if self.projection.dim != self.mixture.dim:
            raise ValueError(
                f"projection has {self.projection.dim} dims, "
                f"mixture has {self.mixture.dim}"
            )
        if not math.isfinite(self.min_train_score):
            raise ValueError(f"min_train_score must be finite, got {self.min_train_score!r}")

    @property
    def unicode_version(self) -> str:
        return self.table.version


def train(
    corpus,
    table: BlockTable | None = None,
    priors: Priors | None = None,
    cfg: FitConfig | None = None,
    unseen_score: float = 0.0,
) -> BlockScoreModel:
    """Fit a scoring model on an iterable of clean sentences.

    Empty sentences are skipped (and counted in the returned model's
    ``train_summary``); at least one non-empty sentence is required.
    """
    table = table if table is not None else load_default_table()
    cfg = cfg or FitConfig()

    all_counts = []
    n_skipped = 0
    for sentence in corpus:
        if sentence:
            all_counts.append(count_blocks(sentence, table))
        else:
            n_skipped += 1
    if not all_counts:
        raise DataError("training corpus contains no non-empty sentences")

    projection = fit_projection(all_counts, table)
    idx = projection.index_array()
    # training rows are in-support by construction: the projection retains
    # exactly the blocks this corpus touches
    X = np.stack([rc.counts[idx] / rc.total for rc in all_counts])

    materialized = (priors or Priors()).materialize(X, cfg.max_components, cfg.reg_covar)
    mixture = vbgmm.fit(X, materialized, cfg)

    train_scores = vbgmm.weighted_log_prob_many(mixture, X)
    min_train_score = float(train_scores.min())

    return BlockScoreModel(
        table=table,
        projection=projection,
        mixture=mixture,
        priors=materialized,
        fit_config=cfg,
        min_train_score=min_train_score,
        unseen_score=float(unseen_score),
        train_summary=TrainSummary(n_sentences=len(all_counts), n_skipped_empty=n_skipped),
    )


def score_sentence(model: BlockScoreModel, sentence: str) -> float:
    """Score one sentence; total over all text, never raises on content."""
    if not sentence:
        return model.unseen_score
    feature = project(normalize(count_blocks(sentence, model.table)), model.projection)
    if feature.out_of_support:
        return model.unseen_score
    return vbgmm.weighted_log_prob(model.mixture, feature.values)


def _score_chunk(model: BlockScoreModel, chunk: list) -> np.ndarray:
    """Vectorized scoring of a list of sentences.

    Builds one counts matrix for the whole chunk with a single bincount,
    then batches the density evaluation over the in-support rows.  The
    arithmetic (int64 counts divided by int totals) is operand-for-operand
    the same as the single-sentence path, so scores match it bit for bit.
    """
    n = len(chunk)
    dense = model.table.dense_index()
    width = model.table.vector_length

    arrays = []
    lengths = np.zeros(n, dtype=np.int64)
    for i, sentence in enumerate(chunk):
        if not sentence:
            continue
        cps = np.frombuffer(
            sentence.encode("utf-32-le", errors="surrogatepass"), dtype=np.uint32
        )
        arrays.append(dense[cps].astype(np.int64) + i * width)
        lengths[i] = cps.shape[0]

    out = np.full(n, model.unseen_score, dtype=np.float64)
    if not arrays:
        return out
    flat = np.concatenate(arrays)
    counts = np.bincount(flat, minlength=n * width).reshape(n, width)

    idx = model.projection.index_array()
    outside = np.ones(width, dtype=bool)
    outside[idx] = False
    # exact integer check: any character in a non-retained block
    in_support = (lengths > 0) & (counts[:, outside].sum(axis=1) == 0)
    if not in_support.any():
        return out

    rows = np.flatnonzero(in_support)
    X = counts[np.ix_(rows, idx)] / lengths[rows, None]
    out[rows] = vbgmm.weighted_log_prob_many(model.mixture, X)
    return out


def score_corpus(model: BlockScoreModel, lines, chunk_size: int = 4096):
    """Yield one score per input line, in order, in constant memory.

    ``lines`` is any iterable of sentences (newlines already stripped).
    Scores are independent of ``chunk_size``.
    """
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    chunk = []
    for line in lines:
        chunk.append(line)
        if len(chunk) == chunk_size:
            yield from map(float, _score_chunk(model, chunk))
            chunk = []
    if chunk:
        yield from map(float, _score_chunk(model, chunk))


def save(model: BlockScoreModel, path) -> None:
    """Write the model as versioned JSON, atomically.

    Floats go through ``repr`` (the json default), which round-trips
    float64 exactly, so load(save(m)) scores bit-identically to m.
    """
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "unicode_version": model.table.version,
        "unseen_score": model.unseen_score,
        "min_train_score": model.min_train_score,
        "projection": list(model.projection.retained_names),
        "mixture": {
            "weights": model.mixture.weights.tolist(),
            "means": model.mixture.means.tolist(),
            "covariances": model.mixture.covariances.tolist(),
        },
        "priors": {
            "alpha": model.priors.alpha,
            "mean_prior": np.asarray(model.priors.mean_prior).tolist(),
            "mean_precision": model.priors.mean_precision,
            "wishart_scale": np.asarray(model.priors.wishart_scale).tolist(),
            "wishart_dof": model.priors.wishart_dof,
        },
        "fit_config": {
            "max_components": model.fit_config.max_components,
            "tol": model.fit_config.tol,
            "max_iter": model.fit_config.max_iter,
            "seed": model.fit_config.seed,
            "reg_covar": model.fit_config.reg_covar,
            "init": model.fit_config.init,
        },
    }
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".model-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            json.dump(doc, f, indent=1)
            f.write("\n")
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def load(path, table: BlockTable | None = None) -> BlockScoreModel:
    """Read a model file and revalidate it against ``table``.

    Fails with :class:`ModelFormatError` on version drift, unknown block
    names, tampered mixture parameters, or missing/unknown fields.
    """
    table = table if table is not None else load_default_table()
    with open(path, encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"model file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelFormatError("model file must hold a JSON object")
    missing = _MODEL_KEYS - doc.keys()
    if missing:
        raise ModelFormatError(f"model file is missing fields: {sorted(missing)}")
    unknown = doc.keys() - _MODEL_KEYS
    if unknown:
        raise ModelFormatError(f"model file has unknown fields: {sorted(unknown)}")
    if doc["format_version"] != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported model format version {doc['format_version']!r} "
            f"(this build reads version {MODEL_FORMAT_VERSION})"
        )
    if doc["unicode_version"] != table.version:
        raise ModelFormatError(
            f"model was built against Unicode {doc['unicode_version']}, "
            f"the block table is Unicode {table.version}"
        )

    names = doc["projection"]
    indices = []
    for name in names:
        try:
            indices.append(table.index_of(name))
        except KeyError:
            raise ModelFormatError(
                f"model references unknown block name {name!r}"
            ) from None
    try:
        projection = FeatureProjection(
            retained=tuple(indices),
            retained_names=tuple(names),
            space=table.vector_length,
        )
        mixture = MixtureModel.from_arrays(
            doc["mixture"]["weights"],
            doc["mixture"]["means"],
            doc["mixture"]["covariances"],
        )
        priors = Priors(
            alpha=float(doc["priors"]["alpha"]),
            mean_prior=np.asarray(doc["priors"]["mean_prior"], dtype=np.float64),
            mean_precision=float(doc["priors"]["mean_precision"]),
            wishart_scale=np.asarray(doc["priors"]["wishart_scale"], dtype=np.float64),
            wishart_dof=float(doc["priors"]["wishart_dof"]),
        )
        cfg = FitConfig(**doc["fit_config"])
        return BlockScoreModel(
            table=table,
            projection=projection,
            mixture=mixture,
            priors=priors,
            fit_config=cfg,
            min_train_score=float(doc["min_train_score"]),
            unseen_score=float(doc["unseen_score"]),
        )
    except (ValueError, TypeError, KeyError, NumericError, DataError) as exc:
        raise ModelFormatError(f"model file failed validation: {exc}") from None
