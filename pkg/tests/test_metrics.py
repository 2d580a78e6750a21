import numpy as np
import pytest

from phflow.data import Dataset, duffing_field, gaussian_blobs
from phflow.metrics import (
    UndefinedMetricError,
    accuracy,
    argmax_lowest,
    decision_grid,
    error_field,
    relative_error,
)
from phflow.net import NetworkSpec, flatten

LINEAR = NetworkSpec([2, 2])


def test_relative_error_examples():
    assert relative_error([1.0, 0.0], [1.0, 0.0]) == 0.0
    assert relative_error([1.0, 0.0], [0.0, 0.0]) == 1.0
    assert relative_error([1.0, 0.0], [0.9, 0.1]) == pytest.approx(0.02, rel=1e-13)


def test_relative_error_rotation_invariant(rng):
    y_hat, y = rng.standard_normal(3), rng.standard_normal(3)
    Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    assert relative_error(Q @ y_hat, Q @ y) == pytest.approx(relative_error(y_hat, y), rel=1e-12)


def test_relative_error_zero_label():
    with pytest.raises(UndefinedMetricError):
        relative_error([0.0, 0.0], [1.0, 0.0])


def test_argmax_ties_go_low():
    np.testing.assert_array_equal(argmax_lowest([[1.0, 1.0], [0.0, 2.0]]), [0, 1])


def separator():
    # class 1 when u1 + u2 > 0: outputs (u1 + u2, -(u1 + u2))
    return flatten([(np.array([[1.0, 1.0], [-1.0, -1.0]]), np.zeros(2))])


def test_accuracy_perfect_separator():
    ds = gaussian_blobs(0, 200, sigma=0.2)
    assert accuracy(LINEAR, separator(), ds) == 1.0


def test_accuracy_constant_output_is_half():
    ds = gaussian_blobs(0, 50)
    theta = flatten([(np.zeros((2, 2)), np.array([1.0, 0.0]))])
    assert accuracy(LINEAR, theta, ds) == 0.5


def test_accuracy_single_sample_and_subsets():
    ds = Dataset([[1.0, 1.0], [-1.0, -1.0]], [[1.0, 0.0], [1.0, 0.0]], train_idx=[0], test_idx=[1])
    assert accuracy(LINEAR, separator(), ds, "train") == 1.0
    assert accuracy(LINEAR, separator(), ds, "test") == 0.0
    assert accuracy(LINEAR, separator(), ds) == 0.5


def test_accuracy_empty_subset():
    ds = Dataset([[1.0, 1.0]], [[1.0, 0.0]], train_idx=[0], test_idx=[])
    with pytest.raises(UndefinedMetricError):
        accuracy(LINEAR, separator(), ds, "test")


def test_error_field_zero_when_network_equals_field():
    spec = NetworkSpec([2, 2])
    # the linear part of the Duffing field: [u2, -u1 - u2]
    theta = flatten([(np.array([[0.0, 1.0], [-1.0, -1.0]]), np.zeros(2))])
    ef = error_field(spec, theta, [[-1, 1], [-1, 1]], [5, 5], lambda U: U @ np.array([[0.0, -1.0], [1.0, -1.0]]))
    assert np.all(ef.values == 0)


def test_error_field_zero_network_duffing():
    ef = error_field(LINEAR, np.zeros(6), [[1.0, 1.0], [0.0, 0.0]], [1, 1], duffing_field)
    assert ef.values[0, 0] == 1.5


def test_error_field_layout_and_stats(tmp_path):
    ef = error_field(LINEAR, np.zeros(6), [[-1.0, 1.5], [-1.9, 1.0]], [7, 4], duffing_field)
    assert ef.values.shape == (4, 7)
    assert np.all(ef.values >= 0)
    # node (i, j) sits at (grid_x1[i], grid_x2[j])
    u = np.array([ef.grid_x1[5], ef.grid_x2[2]])
    assert ef.values[2, 5] == pytest.approx(np.linalg.norm(duffing_field(u)), rel=1e-15)
    assert ef.max == ef.values.max() and ef.mean == pytest.approx(ef.values.mean())
    ef.to_csv(tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "x1,x2,value" and len(lines) == 1 + 28


def test_decision_grid_matches_affine_sign():
    w, b = np.array([0.7, -1.3]), 0.2
    theta = flatten([(np.vstack([w, -w]), np.array([b, -b]))])
    grid = decision_grid(LINEAR, theta, [[-1, 1], [-1, 1]], [3, 3])
    for j, x2 in enumerate(grid.grid_x2):
        for i, x1 in enumerate(grid.grid_x1):
            score = w @ [x1, x2] + b
            assert grid.classes[j, i] == (0 if score >= 0 else 1)


def test_decision_grid_constant_for_single_class_params(tmp_path):
    theta = flatten([(np.zeros((2, 2)), np.array([0.0, 1.0]))])
    grid = decision_grid(LINEAR, theta, [[-3, 3], [-3, 3]], [4, 6])
    assert grid.classes.shape == (6, 4) and np.all(grid.classes == 1)
    grid.to_csv(tmp_path / "g.csv")
    assert (tmp_path / "g.csv").read_text().splitlines()[1].endswith(",1")


def test_bad_resolution():
    with pytest.raises(ValueError):
        decision_grid(LINEAR, np.zeros(6), [[0, 1], [0, 1]], [0, 3])
