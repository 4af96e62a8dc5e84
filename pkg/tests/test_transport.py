import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from vgcontract.errors import ArgumentError
from vgcontract.transport import PointCloud, cost_matrix, w_bruteforce, w_exact, w_subsampled


def test_two_point_examples():
    a = PointCloud([[0.0, 0.0], [1.0, 0.0]])
    b = PointCloud([[1.0, 0.0], [0.0, 0.0]])
    assert w_exact(a, b) == 0.0
    c = PointCloud([[0.0, 1.0], [1.0, 1.0]])
    assert w_exact(a, c, 1) == 1.0 and w_exact(a, c, 2) == 1.0
    d = PointCloud([[3.0, 4.0]])
    assert w_exact(PointCloud([[0.0, 0.0]]), d) == 5.0
    assert w_exact(PointCloud([[0.0, 0.0]]), d, norm="ell1") == 7.0


@pytest.mark.parametrize("p", [1, 2])
@pytest.mark.parametrize("norm", ["euclidean", "ell1"])
def test_exact_equals_bruteforce(p, norm):
    rng = np.random.default_rng(100 * p + len(norm))
    for _ in range(40):
        n = int(rng.integers(1, 7))
        dim = int(rng.choice([1, 2, 4]))
        x, y = rng.normal(size=(2, n, dim))
        assert w_exact(x, y, p, norm) == w_bruteforce(x, y, p, norm)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (5, 2), elements=st.floats(-10, 10)),
       arrays(np.float64, (5, 2), elements=st.floats(-10, 10)),
       st.permutations(range(5)))
def test_metric_properties(x, y, perm):
    assert w_exact(x, x) == 0
    assert w_exact(x, y) == pytest.approx(w_exact(y, x), abs=1e-12)
    assert w_exact(x, y[list(perm)]) == pytest.approx(w_exact(x, y), abs=1e-12)
    # W1 <= W2 for uniform measures
    assert w_exact(x, y, 1) <= w_exact(x, y, 2) + 1e-9


def test_translation_of_point_cloud():
    x = np.random.default_rng(3).normal(size=(50, 2))
    shift = np.array([0.3, -0.4])
    assert w_exact(x, x + shift, 2) == pytest.approx(0.5, abs=1e-12)


def test_cost_matrix_squares_distance_for_order_two():
    x = np.array([[0.0, 0.0]])
    y = np.array([[3.0, 4.0]])
    assert cost_matrix(x, y, 2)[0, 0] == 25.0
    assert cost_matrix(x, y, 2, "ell1")[0, 0] == 49.0


def test_errors():
    with pytest.raises(ArgumentError):
        w_exact(np.zeros((3, 2)), np.zeros((4, 2)))
    with pytest.raises(ArgumentError):
        w_exact(np.zeros((2, 2)), np.zeros((2, 2)), norm="sup")
    with pytest.raises(ArgumentError):
        w_bruteforce(np.zeros((9, 1)), np.zeros((9, 1)))
    with pytest.raises(ArgumentError):
        PointCloud([[0.0, np.nan]])


def test_subsampled_estimator_is_reproducible_and_consistent():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(2000, 2))
    y = rng.normal(size=(1500, 2)) + np.array([1.0, 0.0])
    a = w_subsampled(x, y, 1, "euclidean", 400, 6, seed=5)
    assert a == w_subsampled(x, y, 1, "euclidean", 400, 6, seed=5)
    est, se = a
    assert se > 0
    assert abs(est - 1.0) < 0.15  # finite-sample W1 exceeds the shift slightly


def test_csv_round_trip(tmp_path):
    c = PointCloud.from_network(np.arange(6.0).reshape(2, 3), np.ones((2, 3)))
    c.to_csv(tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "v_1,v_2,v_3,g_1,g_2,g_3"
    assert np.array_equal(PointCloud.from_csv(tmp_path / "c.csv").points, c.points)
