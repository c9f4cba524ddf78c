"""Turn score vectors into keep/remove decisions and apply them to files.

Three threshold modes:

* ``absolute(t)``: remove a line iff its score is strictly below ``t``.
  A line scoring exactly ``t`` survives, so using a model's minimum
  training score as the threshold keeps training-equivalent sentences.
* ``relative(p)``: remove exactly ``floor(p/100 * N)`` lines, the
  lowest-scored ones; ties go to the smaller line index.
* ``train_min``: absolute thresholding at the per-side training minimum.
  For parallel corpora this means one bad side removes the whole row,
  and the reduction is ignored.

For absolute/relative modes on parallel corpora, per-side scores are
first reduced row-wise (min/max/avg) and the reduced vector is filtered
like a monolingual one.
"""

import enum
import os
import tempfile
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import AlignmentError


class Reduction(enum.Enum):
    MIN = "min"
    MAX = "max"
    AVG = "avg"

    def apply(self, rows: np.ndarray) -> np.ndarray:
        """Collapse an (N, sides) score matrix to one score per row."""
        if self is Reduction.MIN:
            return rows.min(axis=1)
        if self is Reduction.MAX:
            return rows.max(axis=1)
        return rows.mean(axis=1)


@dataclass(frozen=True)
class ThresholdSpec:
    mode: str  # "absolute" | "relative" | "train_min"
    threshold: float | None = None
    percent: float | None = None

    def __post_init__(self):
        if self.mode == "absolute":
            if self.threshold is None or (isinstance(self.threshold, float)
                                          and self.threshold != self.threshold):
                raise ValueError("absolute mode needs a (non-NaN) threshold")
        elif self.mode == "relative":
            if self.percent is None or not 0 <= self.percent <= 100:
                raise ValueError(
                    f"relative mode needs a percent in [0, 100], got {self.percent!r}"
                )
        elif self.mode != "train_min":
            raise ValueError(f"unknown threshold mode {self.mode!r}")

    @classmethod
    def absolute(cls, threshold: float) -> "ThresholdSpec":
        return cls(mode="absolute", threshold=float(threshold))

    @classmethod
    def relative(cls, percent: float) -> "ThresholdSpec":
        return cls(mode="relative", percent=float(percent))

    @classmethod
    def train_min(cls) -> "ThresholdSpec":
        return cls(mode="train_min")


@dataclass(frozen=True)
class KeepMask:
    kept: np.ndarray  # bool, one entry per line

    @property
    def size(self) -> int:
        return self.kept.shape[0]

    @property
    def removed_count(self) -> int:
        return int(self.size - np.count_nonzero(self.kept))


def _check_scores(scores) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1:
        raise ValueError(f"scores must be a 1-d vector, got shape {scores.shape}")
    if np.isnan(scores).any():
        raise ValueError("scores contain NaN")
    return scores


def _relative_removal_count(percent: float, n: int) -> int:
    # exact decimal arithmetic: floor(30/100 * 10) must be 3, which naive
    # binary floats (0.3 * 10 = 2.999...) would get wrong
    return int(Fraction(str(percent)) * n / 100)


def filter_mono(scores, spec: ThresholdSpec, train_min: float | None = None) -> KeepMask:
    """Keep/remove decisions for one score per line."""
    scores = _check_scores(scores)
    n = scores.shape[0]
    if spec.mode == "absolute":
        kept = scores >= spec.threshold
    elif spec.mode == "train_min":
        if train_min is None:
            raise ValueError("train_min mode needs the model's minimum training score")
        kept = scores >= train_min
    else:
        k = _relative_removal_count(spec.percent, n)
        kept = np.ones(n, dtype=bool)
        # stable ascending sort: among equal scores the smaller line index
        # comes first and is removed first
        order = np.argsort(scores, kind="stable")
        kept[order[:k]] = False
    return KeepMask(kept=kept)


def filter_parallel(
    score_columns,
    reduction: Reduction,
    spec: ThresholdSpec,
    train_mins=None,
) -> KeepMask:
    """Keep/remove decisions for line-aligned per-side score vectors."""
    columns = [_check_scores(c) for c in score_columns]
    if not columns:
        raise ValueError("need at least one score column")
    n = columns[0].shape[0]
    for i, col in enumerate(columns[1:], start=2):
        if col.shape[0] != n:
            raise AlignmentError(
                f"side 1 has {n} scores but side {i} has {col.shape[0]}"
            )
    if spec.mode == "train_min":
        if train_mins is None:
            raise ValueError("train_min mode needs one training minimum per side")
        mins = [float(m) for m in train_mins]
        if len(mins) != len(columns):
            raise ValueError(
                f"{len(columns)} sides but {len(mins)} training minimums"
            )
        kept = np.ones(n, dtype=bool)
        for col, m in zip(columns, mins):
            kept &= col >= m
        return KeepMask(kept=kept)
    reduced = reduction.apply(np.stack(columns, axis=1))
    return filter_mono(reduced, spec)


def apply_mask_lines(lines, mask: KeepMask) -> list:
    """In-memory mask application; errors if the counts disagree."""
    lines = list(lines)
    if len(lines) != mask.size:
        raise AlignmentError(f"mask covers {mask.size} lines, got {len(lines)}")
    return [line for line, keep in zip(lines, mask.kept) if keep]


def apply_mask_files(input_paths, output_paths, mask: KeepMask, encoding_errors="replace"):
    """Stream kept lines of each side to its output path.

    All sides are validated against the mask before any output appears at
    its final path: each side is written to a temp file first, a line-count
    mismatch discards all temp files, and only a fully consistent run gets
    renamed into place.  Line terminators are normalized to ``\\n``.
    """
    if len(input_paths) != len(output_paths):
        raise ValueError("need one output path per input path")
    tmp_paths = []
    try:
        for in_path, out_path in zip(input_paths, output_paths):
            directory = os.path.dirname(os.fspath(out_path)) or "."
            fd, tmp = tempfile.mkstemp(dir=directory, prefix=".filter-", suffix=".tmp")
            tmp_paths.append(tmp)
            n_seen = 0
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as out, \
                    open(in_path, encoding="utf-8", errors=encoding_errors) as src:
                for line in src:
                    if n_seen >= mask.size:
                        raise AlignmentError(
                            f"{in_path} has more than the expected {mask.size} lines"
                        )
                    if mask.kept[n_seen]:
                        out.write(line.rstrip("\n") + "\n")
                    n_seen += 1
            if n_seen != mask.size:
                raise AlignmentError(
                    f"{in_path} has {n_seen} lines, expected {mask.size}"
                )
        for tmp, out_path in zip(tmp_paths, output_paths):
            os.replace(tmp, out_path)
        tmp_paths = []
    finally:
        for tmp in tmp_paths:
            try:
                os.unlink(tmp)
            except OSError:
                pass
