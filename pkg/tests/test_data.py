import numpy as np
import pytest

from qasclf.classifier import Split
from qasclf.data import DataError, bundled_iris_path, load_iris, read_iris_csv, split


def test_canonical_counts():
    data = load_iris()
    assert data.X.shape == (150, 4)
    np.testing.assert_array_equal(np.bincount(data.y), [50, 50, 50])


def test_minmax():
    X = load_iris().X
    np.testing.assert_array_equal(X.min(axis=0), 0.0)
    np.testing.assert_array_equal(X.max(axis=0), 1.0)


def test_explicit_path_same_as_bundled():
    a, b = load_iris(), load_iris(bundled_iris_path())
    np.testing.assert_array_equal(a.X, b.X)


def test_three_columns_rejected(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("5.1,3.5,Iris-setosa\n")
    with pytest.raises(DataError, match="column"):
        read_iris_csv(p)


def test_unknown_label_reports_line(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("sepal_length,sepal_width,petal_length,petal_width,species\n5.1,3.5,1.4,0.2,Iris-setosa\n5.0,3.0,1.0,0.1,rose\n")
    with pytest.raises(DataError, match="3"):
        read_iris_csv(p)


def test_non_numeric_reports_line(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("5.1,3.5,1.4,0.2,Iris-setosa\n5.0,abc,1.0,0.1,Iris-setosa\n")
    with pytest.raises(DataError, match="2"):
        read_iris_csv(p)


class TestSplit:
    def test_sizes_and_strata(self):
        parts = split(load_iris(), 0)
        assert [len(p) for p in parts] == [60, 45, 45]
        for p, k in zip(parts, (20, 15, 15)):
            np.testing.assert_array_equal(np.bincount(p.y), [k] * 3)

    def test_disjoint_and_exhaustive(self):
        data = load_iris()
        rows = np.concatenate([p.X for p in split(data, 3)])
        key = lambda A: sorted(map(tuple, A))
        assert key(rows) == key(data.X)

    def test_deterministic(self):
        a, b = split(load_iris(), 7), split(load_iris(), 7)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.X, y.X)
        c = split(load_iris(), 8)
        assert not np.array_equal(a[0].X, c[0].X)

    def test_bad_class_counts(self):
        data = load_iris()
        with pytest.raises(DataError):
            split(Split(data.X[:149], data.y[:149]), 0)
