import numpy as np
import pytest

from qaclust.data import DataError, blob_centers, gen_synthetic, load_dataset, make_blobs


def test_load_with_and_without_header(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("x0,x1\n1,2\n3.5,-4e-3\n")
    assert load_dataset(p).tolist() == [[1.0, 2.0], [3.5, -0.004]]
    p.write_text("1,2\n\n3,4\n")
    assert load_dataset(p).tolist() == [[1.0, 2.0], [3.0, 4.0]]


@pytest.mark.parametrize(
    "text,needle",
    [
        ("1,2\n3\n", "row 2 has 1 columns"),
        ("1,2\n3,abc\n", "row 2, column 2"),
        ("1,nan\n", "non-finite"),
        ("x,y\n", "no data rows"),
    ],
)
def test_load_errors_name_the_cell(tmp_path, text, needle):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(DataError, match=needle):
        load_dataset(p)


def test_load_missing_file_and_format(tmp_path):
    with pytest.raises(DataError):
        load_dataset(tmp_path / "none.csv")
    with pytest.raises(DataError):
        load_dataset(tmp_path / "none.csv", format="parquet")


def test_blob_layout_and_counts():
    assert blob_centers(4, 8.0).tolist() == [[0, 0], [8, 0], [0, 8], [8, 8]]
    X, y = make_blobs(4, 100, 8.0, seed=0)
    assert X.shape == (400, 2) and np.bincount(y).tolist() == [100] * 4
    for b, c in enumerate(blob_centers(4, 8.0)):
        assert np.linalg.norm(X[y == b].mean(axis=0) - c) < 0.5


def test_make_blobs_deterministic_and_zero_separation():
    a, _ = make_blobs(3, 10, 5.0, seed=4, dim=3)
    b, _ = make_blobs(3, 10, 5.0, seed=4, dim=3)
    assert np.array_equal(a, b)
    z, _ = make_blobs(3, 200, 0.0, seed=1)
    assert np.abs(z.mean(axis=0)).max() < 0.2
    with pytest.raises(DataError):
        make_blobs(0, 10, 1.0, 0)
    with pytest.raises(DataError):
        make_blobs(2, 10, -1.0, 0)


def test_gen_synthetic_round_trips(tmp_path):
    p = tmp_path / "sub" / "blobs.csv"
    X = gen_synthetic(p, blobs=2, per_blob=7, separation=3.0, seed=5)
    assert p.read_text().splitlines()[0] == "x0,x1"
    assert np.array_equal(load_dataset(p), X)
