"""
Dense tensors and the index arithmetic behind the double-index trick.

Dense tensors are plain row-major float64 numpy arrays; this module only adds
the checks and conversions the rest of the package relies on. All indices
are zero-based.
"""
import numpy as np

from ttrnn.errors import ArgumentError, NumericsError, ShapeError

# largest total size addressable with numpy's signed index type
MAX_SIZE = np.iinfo(np.intp).max


class Shape(tuple):
    """
    Extents of a dense tensor. Every extent is a positive int and the
    total size fits the platform index type.
    """

    def __new__(cls, dims):
        if isinstance(dims, (int, np.integer)):
            dims = (dims,)
        dims = tuple(int(d) for d in dims)
        if not dims:
            raise ShapeError("A shape needs at least one dimension")
        if any(d < 1 for d in dims):
            raise ShapeError(f"Every extent must be >= 1, got {dims}")
        size = 1
        for d in dims:
            size *= d
            if size > MAX_SIZE:
                raise ShapeError(f"Shape {dims} overflows the index type")
        return super().__new__(cls, dims)

    @property
    def size(self):
        size = 1
        for d in self:
            size *= d
        return size

    @property
    def rank(self):
        return len(self)


def as_dense(values, shape=None, name="tensor"):
    """
    Converts `values` into a contiguous float64 array, optionally checking
    its shape, and rejects NaN/Inf. Used at ingestion boundaries.
    """
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if shape is not None and arr.shape != tuple(Shape(shape)):
        raise ShapeError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    if not np.all(np.isfinite(arr)):
        raise NumericsError(f"{name} contains NaN or Inf values")
    return arr


def multi_to_flat(indices, shape):
    shape = Shape(shape)
    indices = tuple(int(i) for i in indices)
    if len(indices) != shape.rank:
        raise IndexError(
            f"Got {len(indices)} indices for a rank-{shape.rank} shape {tuple(shape)}")
    for i, d in zip(indices, shape):
        if not 0 <= i < d:
            raise IndexError(f"Index {indices} out of bounds for shape {tuple(shape)}")
    return int(np.ravel_multi_index(indices, shape))


def flat_to_multi(flat, shape):
    shape = Shape(shape)
    flat = int(flat)
    if not 0 <= flat < shape.size:
        raise IndexError(f"Flat index {flat} out of bounds for size {shape.size}")
    return tuple(int(i) for i in np.unravel_index(flat, shape))


def split_index(l, n_k):
    """
    Splits a combined index l into the pair (i_k, j_k) with
    l = i_k * n_k + j_k and 0 <= j_k < n_k.
    """
    if n_k <= 0:
        raise ArgumentError(f"n_k must be positive, got {n_k}")
    return divmod(int(l), int(n_k))


def reshape(t, new_shape):
    """
    Returns `t` with new shape metadata; the flat buffer is shared.
    """
    new_shape = Shape(new_shape)
    if new_shape.size != t.size:
        raise ShapeError(
            f"Cannot reshape {t.shape} (size {t.size}) into {tuple(new_shape)} (size {new_shape.size})")
    return np.ascontiguousarray(t).reshape(new_shape)
