import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blockscore import (
    AlignmentError,
    KeepMask,
    Reduction,
    ThresholdSpec,
    apply_mask_files,
    apply_mask_lines,
    filter_mono,
    filter_parallel,
)

scores_vectors = st.lists(
    st.floats(min_value=-1e6, max_value=1e6, allow_nan=False), min_size=0, max_size=60
)


def kept(mask):
    return mask.kept.tolist()


def test_absolute_strict_inequality():
    mask = filter_mono([5.0, 1.0, 3.0], ThresholdSpec.absolute(2.0))
    assert kept(mask) == [True, False, True]
    assert mask.removed_count == 1


def test_score_equal_to_threshold_survives():
    mask = filter_mono([2.0, 1.9999], ThresholdSpec.absolute(2.0))
    assert kept(mask) == [True, False]


def test_relative_ten_percent_of_ten():
    scores = [9.0, 1.0, 8.0, 7.0, 6.0, 5.0, 4.0, 3.0, 2.0, 9.5]
    mask = filter_mono(scores, ThresholdSpec.relative(10))
    assert mask.removed_count == 1
    assert kept(mask)[1] is False  # the minimum goes


def test_relative_tie_break_removes_smallest_index():
    mask = filter_mono([2.0, 2.0, 2.0], ThresholdSpec.relative(50))
    # floor(1.5) = 1 removed, and it is index 0
    assert kept(mask) == [False, True, True]


def test_relative_floor_is_decimal_exact():
    # binary 0.3 * 10 rounds below 3; the decimal reading must still drop 3
    mask = filter_mono(list(range(10)), ThresholdSpec.relative(30))
    assert mask.removed_count == 3


def test_train_min_mode_requires_value():
    with pytest.raises(ValueError):
        filter_mono([1.0], ThresholdSpec.train_min())
    mask = filter_mono([1.0, 2.0, 3.0], ThresholdSpec.train_min(), train_min=2.0)
    assert kept(mask) == [False, True, True]


def test_threshold_spec_validation():
    with pytest.raises(ValueError):
        ThresholdSpec.relative(101)
    with pytest.raises(ValueError):
        ThresholdSpec.relative(-0.5)
    with pytest.raises(ValueError):
        ThresholdSpec(mode="absolute")
    with pytest.raises(ValueError):
        ThresholdSpec(mode="absolute", threshold=float("nan"))
    with pytest.raises(ValueError):
        ThresholdSpec(mode="quantile")


def test_nan_scores_rejected():
    with pytest.raises(ValueError):
        filter_mono([1.0, float("nan")], ThresholdSpec.absolute(0.0))


def test_parallel_min_reduction_absolute():
    mask = filter_parallel(
        [[5.0, 1.0], [2.0, 4.0]], Reduction.MIN, ThresholdSpec.absolute(2.0)
    )
    assert kept(mask) == [True, False]


def test_parallel_one_bad_removes_all():
    mask = filter_parallel(
        [[5.0, 1.0], [2.0, 4.0]],
        Reduction.MIN,
        ThresholdSpec.train_min(),
        train_mins=(2.0, 3.0),
    )
    # row 0: side two scores 2 < 3; row 1: side one scores 1 < 2
    assert kept(mask) == [False, False]


def test_parallel_train_min_ignores_reduction():
    cols = [[5.0, 1.0, 3.0], [4.0, 5.0, 1.0]]
    masks = [
        filter_parallel(cols, red, ThresholdSpec.train_min(), train_mins=(2.0, 2.0))
        for red in Reduction
    ]
    assert all(kept(m) == kept(masks[0]) for m in masks)


def test_parallel_reductions_coincide_on_identical_columns():
    col = [3.0, 1.0, 4.0, 1.0]
    spec = ThresholdSpec.absolute(2.0)
    results = {
        red: kept(filter_parallel([col, col], red, spec)) for red in Reduction
    }
    assert results[Reduction.MIN] == results[Reduction.MAX] == results[Reduction.AVG]


def test_parallel_length_mismatch():
    with pytest.raises(AlignmentError):
        filter_parallel([[1.0, 2.0], [1.0]], Reduction.MIN, ThresholdSpec.absolute(0))


def test_parallel_train_min_count_mismatch():
    with pytest.raises(ValueError):
        filter_parallel(
            [[1.0], [1.0]], Reduction.MIN, ThresholdSpec.train_min(), train_mins=(0.0,)
        )


@given(scores_vectors, st.integers(min_value=0, max_value=100))
@settings(max_examples=80, deadline=None)
def test_relative_partition_and_exact_count(scores, p):
    mask = filter_mono(scores, ThresholdSpec.relative(p))
    n = len(scores)
    assert mask.size == n
    assert mask.removed_count + int(np.count_nonzero(mask.kept)) == n
    assert mask.removed_count == (p * n) // 100


@given(scores_vectors)
@settings(max_examples=40, deadline=None)
def test_relative_edges(scores):
    assert filter_mono(scores, ThresholdSpec.relative(0)).removed_count == 0
    assert filter_mono(scores, ThresholdSpec.relative(100)).removed_count == len(scores)


@given(scores_vectors, st.floats(-100, 100), st.floats(0, 50))
@settings(max_examples=60, deadline=None)
def test_absolute_monotonicity_nested_masks(scores, t, bump):
    low = filter_mono(scores, ThresholdSpec.absolute(t)).kept
    high = filter_mono(scores, ThresholdSpec.absolute(t + bump)).kept
    # raising the threshold never resurrects a removed line
    assert not np.any(high & ~low)


@given(
    st.lists(
        st.tuples(st.floats(-100, 100, allow_nan=False),
                  st.floats(-100, 100, allow_nan=False)),
        min_size=0, max_size=40,
    ),
    st.floats(-100, 100),
)
@settings(max_examples=60, deadline=None)
def test_parallel_min_absolute_equals_any_side_below(pairs, t):
    a = [x for x, _ in pairs]
    b = [y for _, y in pairs]
    mask = filter_parallel([a, b], Reduction.MIN, ThresholdSpec.absolute(t))
    want = [not (x < t or y < t) for x, y in pairs]
    assert kept(mask) == want


def test_apply_mask_lines():
    mask = KeepMask(kept=np.array([True, False, True, False]))
    assert apply_mask_lines(["a", "b", "c", "d"], mask) == ["a", "c"]
    with pytest.raises(AlignmentError):
        apply_mask_lines(["a"], mask)


def write_lines(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def test_apply_mask_files_keeps_sides_aligned(tmp_path):
    src = tmp_path / "a.txt"
    tgt = tmp_path / "b.txt"
    write_lines(src, ["s0", "s1", "s2", "s3"])
    write_lines(tgt, ["t0", "t1", "t2", "t3"])
    mask = KeepMask(kept=np.array([True, False, True, False]))
    apply_mask_files([src, tgt], [str(src) + ".f", str(tgt) + ".f"], mask)
    assert (tmp_path / "a.txt.f").read_text() == "s0\ns2\n"
    assert (tmp_path / "b.txt.f").read_text() == "t0\nt2\n"


def test_apply_mask_files_all_true_copies_bytes(tmp_path):
    src = tmp_path / "a.txt"
    write_lines(src, ["hello", "world", "中文"])
    out = tmp_path / "a.out"
    apply_mask_files([src], [out], KeepMask(kept=np.ones(3, dtype=bool)))
    assert out.read_bytes() == src.read_bytes()


def test_apply_mask_files_mismatch_writes_nothing(tmp_path):
    src = tmp_path / "a.txt"
    tgt = tmp_path / "b.txt"
    write_lines(src, ["s0", "s1", "s2"])
    write_lines(tgt, ["t0", "t1"])  # short side
    mask = KeepMask(kept=np.ones(3, dtype=bool))
    outs = [tmp_path / "a.out", tmp_path / "b.out"]
    with pytest.raises(AlignmentError):
        apply_mask_files([src, tgt], outs, mask)
    assert not outs[0].exists()
    assert not outs[1].exists()
    assert not list(tmp_path.glob("*.tmp"))


def test_apply_mask_files_too_many_lines(tmp_path):
    src = tmp_path / "a.txt"
    write_lines(src, ["s0", "s1", "s2"])
    out = tmp_path / "a.out"
    with pytest.raises(AlignmentError):
        apply_mask_files([src], [out], KeepMask(kept=np.ones(2, dtype=bool)))
    assert not out.exists()
