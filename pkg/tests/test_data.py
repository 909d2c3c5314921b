"""Dataset container, LIBSVM round trips, synthetic generation."""

import gzip

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subnewton.data import (
    DataError,
    SparseDataset,
    add_intercept,
    generate_synthetic,
    load_dataset,
    margins,
    parse_libsvm,
    save_dataset,
    serialize_libsvm,
)

SAMPLE = """\
+1 1:0.5 3:-1.25
-1 2:2
+1
-1 1:1e-3 4:7.5
"""


def test_parse_basic_shape():
    data = parse_libsvm(SAMPLE)
    assert data.n == 4
    assert data.d == 4
    assert data.nnz == 5
    np.testing.assert_array_equal(data.labels, [1, -1, 1, -1])
    idx, val = data.row(0)
    np.testing.assert_array_equal(idx, [0, 2])
    np.testing.assert_allclose(val, [0.5, -1.25])
    # third line is a valid all-zero row
    idx, _ = data.row(2)
    assert len(idx) == 0


def test_parse_comments_and_blank_lines():
    data = parse_libsvm("+1 1:2 # trailing note\n\n-1 1:3\n")
    assert data.n == 2
    np.testing.assert_allclose(data.matrix.toarray(), [[2.0], [3.0]])


def test_parse_malformed_token_reports_line():
    with pytest.raises(DataError, match="line 2"):
        parse_libsvm("+1 1:1\n-1 1:abc\n")
    with pytest.raises(DataError, match="bad feature token"):
        parse_libsvm("+1 oops\n")
    with pytest.raises(DataError, match="bad label"):
        parse_libsvm("one 1:1\n")


def test_parse_rejects_nonincreasing_indices():
    with pytest.raises(DataError, match="indices not increasing at line 1"):
        parse_libsvm("+1 2:1 2:2\n")
    with pytest.raises(DataError, match="indices not increasing at line 3"):
        parse_libsvm("+1 1:1\n-1 1:1\n+1 3:1 2:1\n")


def test_parse_rejects_zero_index():
    with pytest.raises(DataError, match="< 1"):
        parse_libsvm("+1 0:3\n")


def test_parse_declared_dimension():
    data = parse_libsvm("+1 2:1\n", d=6)
    assert data.d == 6
    with pytest.raises(DataError, match="exceeds declared dimension"):
        parse_libsvm("+1 9:1\n", d=4)


def test_serialize_round_trip_exact():
    data = parse_libsvm(SAMPLE)
    text = serialize_libsvm(data)
    back = parse_libsvm(text)
    np.testing.assert_array_equal(back.indptr, data.indptr)
    np.testing.assert_array_equal(back.indices, data.indices)
    np.testing.assert_array_equal(back.values, data.values)
    np.testing.assert_array_equal(back.labels, data.labels)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_round_trip_random(data_strategy):
    n = data_strategy.draw(st.integers(1, 6))
    d = data_strategy.draw(st.integers(1, 5))
    rows = []
    for _ in range(n):
        cols = data_strategy.draw(
            st.lists(st.integers(0, d - 1), unique=True, max_size=d).map(sorted)
        )
        vals = data_strategy.draw(
            st.lists(
                st.floats(-1e12, 1e12, allow_nan=False, width=64).filter(lambda v: v != 0.0),
                min_size=len(cols),
                max_size=len(cols),
            )
        )
        rows.append(list(zip(cols, vals)))
    labels = data_strategy.draw(
        st.lists(st.sampled_from([-1.0, 1.0]), min_size=n, max_size=n)
    )
    ds = SparseDataset.from_rows(rows, labels, d=d)
    back = parse_libsvm(serialize_libsvm(ds), d=d)
    np.testing.assert_array_equal(back.values, ds.values)
    np.testing.assert_array_equal(back.indices, ds.indices)
    np.testing.assert_array_equal(back.labels, ds.labels)


def test_container_validation():
    with pytest.raises(DataError, match="strictly increasing"):
        SparseDataset(
            n=1,
            d=3,
            indptr=np.array([0, 2]),
            indices=np.array([1, 1]),
            values=np.array([1.0, 2.0]),
            labels=np.array([1.0]),
        )
    with pytest.raises(DataError, match="out of range"):
        SparseDataset(
            n=1,
            d=2,
            indptr=np.array([0, 1]),
            indices=np.array([5]),
            values=np.array([1.0]),
            labels=np.array([1.0]),
        )
    with pytest.raises(DataError, match="labels length"):
        SparseDataset(
            n=2,
            d=2,
            indptr=np.array([0, 0, 0]),
            indices=np.array([], dtype=int),
            values=np.array([]),
            labels=np.array([1.0]),
        )


def test_load_save_gzip(tmp_path):
    data = parse_libsvm(SAMPLE)
    path = tmp_path / "sample.txt.gz"
    save_dataset(data, path)
    with gzip.open(path, "rt") as fh:
        assert fh.read() == serialize_libsvm(data)
    back = load_dataset(path)
    np.testing.assert_array_equal(back.values, data.values)


def test_load_missing_file():
    with pytest.raises(DataError, match="no such data file"):
        load_dataset("/definitely/not/here.txt")


def test_generate_synthetic_shapes_and_determinism():
    a = generate_synthetic(50, 8, density=0.5, label_noise=0.1, seed=11)
    b = generate_synthetic(50, 8, density=0.5, label_noise=0.1, seed=11)
    c = generate_synthetic(50, 8, density=0.5, label_noise=0.1, seed=12)
    assert a.n == 50 and a.d == 8
    np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert not np.array_equal(a.labels, c.labels) or not np.array_equal(a.values, c.values)
    assert set(np.unique(a.labels)) <= {-1.0, 1.0}
    # expected nonzeros per row is density * d
    assert 0.3 * 8 <= a.nnz / a.n <= 0.7 * 8


def test_generate_synthetic_labels_follow_planted_weights():
    # With no noise, labels are exactly the sign of the planted margins.
    data = generate_synthetic(200, 6, density=1.0, label_noise=0.0, seed=5)
    assert data.w_true is not None
    u = margins(data, data.w_true)
    np.testing.assert_array_equal(data.labels, np.where(u >= 0, 1.0, -1.0))
    # With noise=0.3 and seed fixed, the flip count matches the frozen draw.
    noisy = generate_synthetic(200, 6, density=1.0, label_noise=0.3, seed=5)
    u = margins(noisy, noisy.w_true)
    clean = np.where(u >= 0, 1.0, -1.0)
    flips = int((noisy.labels != clean).sum())
    assert flips == 48  # frozen from seed 5's draw stream; Binomial(200, 0.3) scale
    assert 0 < flips < 200


def test_generate_synthetic_full_density_exact():
    data = generate_synthetic(10, 4, density=1.0, seed=0)
    assert data.nnz == 40


def test_generate_synthetic_validation():
    with pytest.raises(DataError):
        generate_synthetic(10, 4, density=0.0)
    with pytest.raises(DataError):
        generate_synthetic(10, 4, density=0.5, label_noise=1.5)


def test_margins_matches_dense():
    data = generate_synthetic(30, 5, density=0.6, seed=2)
    w = np.random.default_rng(0).standard_normal(5)
    np.testing.assert_allclose(margins(data, w), data.matrix.toarray() @ w, rtol=1e-14)
    with pytest.raises(DataError, match="does not match"):
        margins(data, np.zeros(4))


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_margins_linear(seed):
    rng = np.random.default_rng(seed)
    data = generate_synthetic(12, 4, density=0.7, seed=seed % 1000)
    w1 = rng.standard_normal(4)
    w2 = rng.standard_normal(4)
    a = float(rng.standard_normal())
    np.testing.assert_allclose(
        margins(data, w1 + a * w2),
        margins(data, w1) + a * margins(data, w2),
        rtol=1e-12,
        atol=1e-12,
    )


def test_add_intercept():
    data = generate_synthetic(20, 3, density=0.5, seed=7)
    aug = add_intercept(data)
    assert aug.d == 4
    dense = aug.matrix.toarray()
    np.testing.assert_array_equal(dense[:, 3], np.ones(20))
    np.testing.assert_allclose(dense[:, :3], data.matrix.toarray())
    assert aug.w_true is None


def test_row_norms_sq():
    data = parse_libsvm("+1 1:3 2:4\n-1 1:1\n+1\n")
    np.testing.assert_allclose(data.row_norms_sq(), [25.0, 1.0, 0.0])
