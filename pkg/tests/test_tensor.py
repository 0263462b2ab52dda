import numpy as np
import pytest

from ttrnn.errors import ArgumentError, NumericsError, ShapeError
from ttrnn.tensor import Shape, as_dense, flat_to_multi, multi_to_flat, reshape, split_index


@pytest.mark.parametrize("indices, shape, flat", [
    ((1, 2), (2, 3), 5),
    ((0, 0), (2, 3), 0),
    ((7, 19, 19, 17), (8, 20, 20, 18), 57599),
])
def test_multi_flat_examples(indices, shape, flat):
    assert multi_to_flat(indices, shape) == flat
    assert flat_to_multi(flat, shape) == indices


def test_flat_zero_is_origin():
    assert flat_to_multi(0, (3, 4, 5)) == (0, 0, 0)


def test_out_of_bounds():
    with pytest.raises(IndexError):
        multi_to_flat((2, 0), (2, 3))
    with pytest.raises(IndexError):
        multi_to_flat((0,), (2, 3))
    with pytest.raises(IndexError):
        flat_to_multi(6, (2, 3))


def test_round_trip_and_row_major_order():
    shape = (3, 4, 2)
    flats = [multi_to_flat(idx, shape) for idx in np.ndindex(*shape)]
    assert flats == list(range(24))
    for flat in range(24):
        assert multi_to_flat(flat_to_multi(flat, shape), shape) == flat


@pytest.mark.parametrize("l, n, expected", [(7, 4, (1, 3)), (0, 4, (0, 0)), (31, 4, (7, 3))])
def test_split_index_examples(l, n, expected):
    assert split_index(l, n) == expected


def test_split_index_recombines():
    m, n = 5, 7
    for l in range(m * n):
        i, j = split_index(l, n)
        assert i * n + j == l and 0 <= j < n


def test_split_index_zero_n():
    with pytest.raises(ArgumentError):
        split_index(3, 0)


def test_reshape_keeps_buffer():
    t = np.arange(57600, dtype=np.float64)
    r = reshape(t, (8, 20, 20, 18))
    assert r.shape == (8, 20, 20, 18)
    assert r.tobytes() == t.tobytes()
    flat = reshape(np.arange(6.0).reshape(2, 3), (6,))
    np.testing.assert_array_equal(flat, np.arange(6.0))


def test_reshape_size_mismatch():
    with pytest.raises(ShapeError):
        reshape(np.zeros(6), (4,))


def test_shape_validation():
    assert Shape((2, 3)).size == 6
    with pytest.raises(ShapeError):
        Shape((2, 0))
    with pytest.raises(ShapeError):
        Shape((2 ** 40, 2 ** 40))


def test_as_dense_rejects_nan():
    with pytest.raises(NumericsError):
        as_dense([1.0, np.nan])
    with pytest.raises(ShapeError):
        as_dense(np.zeros(3), (4,))
