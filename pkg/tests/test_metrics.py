import numpy as np
import pytest

from csaeo.sim.metrics import ConfusionMatrix, confusion, index_error_rate, top1
from csaeo.utils.errors import ShapeMismatchError


def test_top1_examples():
    assert top1([0, 1, 2], [0, 1, 2]) == 1.0
    assert top1([1, 1, 1], [0, 1, 2]) == pytest.approx(1 / 3)
    assert top1(np.array([[0.1, 0.9], [0.5, 0.5]]), [1, 0]) == 1.0


def test_top1_errors():
    with pytest.raises(ValueError):
        top1([], [])
    with pytest.raises(ShapeMismatchError):
        top1([0, 1], [0])


def test_perfect_confusion():
    matrix = confusion([0, 1, 2, 2], [0, 1, 2, 2], 3, ["a", "b", "c"])
    np.testing.assert_array_equal(matrix.normalized(), 100 * np.eye(3))
    assert matrix.accuracy() == 1.0


def test_confusion_rows_and_trace():
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 5, size=500)
    predictions = np.where(rng.random(500) < 0.7, labels, rng.integers(0, 5, size=500))
    matrix = confusion(predictions, labels, 5)
    np.testing.assert_allclose(matrix.normalized().sum(axis=1), 100.0)
    assert np.trace(matrix.counts) / labels.size == pytest.approx(top1(predictions, labels))
    assert matrix.accuracy() == pytest.approx(top1(predictions, labels))


def test_uniform_predictions_spread_evenly():
    rng = np.random.default_rng(1)
    labels = rng.integers(0, 10, size=200_000)
    predictions = rng.integers(0, 10, size=200_000)
    np.testing.assert_allclose(confusion(predictions, labels, 10).normalized(), 10.0, atol=1.0)


def test_permuting_classes_permutes_matrix():
    rng = np.random.default_rng(2)
    labels = rng.integers(0, 4, size=300)
    predictions = rng.integers(0, 4, size=300)
    perm = np.array([2, 0, 3, 1])
    original = confusion(predictions, labels, 4).counts
    permuted = confusion(perm[predictions], perm[labels], 4).counts
    np.testing.assert_array_equal(permuted[np.ix_(perm, perm)], original)


def test_empty_rows_and_range_checks():
    matrix = confusion([0, 0], [0, 0], 3)
    np.testing.assert_array_equal(matrix.normalized()[1:], 0.0)
    assert np.isnan(matrix.per_class_accuracy()[1])
    with pytest.raises(ValueError):
        confusion([3], [0], 3)
    with pytest.raises(ValueError):
        confusion([0], [-1], 3)


def test_confusion_csv(tmp_path):
    matrix = ConfusionMatrix(np.array([[3, 1], [0, 2]]), ["Forest", "River"])
    path = tmp_path / "m.csv"
    text = matrix.to_csv(path)
    assert text == "Forest,River\n75.00,25.00\n0.00,100.00\n"
    assert path.read_text(encoding="utf-8") == text


def test_merge():
    a = ConfusionMatrix(np.array([[1, 0], [0, 1]]), ["x", "y"])
    b = ConfusionMatrix(np.array([[0, 1], [0, 1]]), ["x", "y"])
    np.testing.assert_array_equal(a.merge(b).counts, [[1, 1], [0, 2]])
    with pytest.raises(ShapeMismatchError):
        a.merge(ConfusionMatrix(np.eye(2), ["x", "z"]))


def test_index_error_rate():
    assert index_error_rate([[1, 2], [3, 4]], [[1, 2], [3, 4]]) == 0.0
    assert index_error_rate([[1, 2], [3, 4]], [[0, 2], [3, 0]]) == 0.5
    assert index_error_rate(np.zeros((0, 4)), np.zeros((0, 4))) == 0.0
    with pytest.raises(ShapeMismatchError):
        index_error_rate([[1, 2]], [[1, 2, 3]])
