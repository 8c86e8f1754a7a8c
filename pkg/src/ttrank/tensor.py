"""Dense and sampled third-order tensors.

Dense tensors are plain ``numpy`` arrays of shape ``(n1, n2, n3)``. All
matricizations use column-major (first index fastest) ordering, so the
left unfolding has entry ``(i1, i2 + i3 * n2)`` equal to ``T[i1, i2, i3]``
and the right unfolding has entry ``(i1 + i2 * n1, i3)``.

Indices are 0-based inside the library and 1-based in every file format.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def _check_dims(dims) -> tuple[int, int, int]:
    dims = tuple(int(n) for n in dims)
    if len(dims) != 3:
        raise ValueError(f"expected three dimensions, got {dims}")
    if any(n <= 0 for n in dims):
        raise ValueError(f"dimensions must be positive, got {dims}")
    return dims


def as_tensor3(T) -> np.ndarray:
    """Validate and return ``T`` as a float64 array of order three."""
    T = np.asarray(T, dtype=np.float64)
    if T.ndim != 3:
        raise ValueError(f"expected an order-3 array, got ndim={T.ndim}")
    _check_dims(T.shape)
    return T


def left_unfold(T: np.ndarray) -> np.ndarray:
    n1, n2, n3 = T.shape
    return np.reshape(T, (n1, n2 * n3), order="F")


def right_unfold(T: np.ndarray) -> np.ndarray:
    n1, n2, n3 = T.shape
    return np.reshape(T, (n1 * n2, n3), order="F")


def fold_left(M: np.ndarray, dims) -> np.ndarray:
    """Inverse of :func:`left_unfold`."""
    return np.reshape(M, tuple(dims), order="F")


def fold_right(M: np.ndarray, dims) -> np.ndarray:
    """Inverse of :func:`right_unfold`."""
    return np.reshape(M, tuple(dims), order="F")


def inner(X: np.ndarray, Y: np.ndarray) -> float:
    """Frobenius inner product of two tensors of equal shape."""
    if X.shape != Y.shape:
        raise ValueError(f"shape mismatch: {X.shape} vs {Y.shape}")
    return float(np.dot(X.ravel(order="F"), Y.ravel(order="F")))


def norm(X: np.ndarray) -> float:
    return float(np.linalg.norm(X.ravel()))


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Values of a tensor observed on a set of distinct index triples.

    Parameters
    ----------
    dims : tuple of int
        Shape ``(n1, n2, n3)`` of the underlying tensor.
    indices : ndarray of shape (m, 3)
        0-based index triples.
    values : ndarray of shape (m,)
        Observed values, aligned with ``indices``.

    Entries are stored sorted lexicographically by ``(i1, i2, i3)`` so that
    every downstream reduction runs in a fixed order.
    """

    dims: tuple
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        dims = _check_dims(self.dims)
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1, 3)
        vals = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if idx.shape[0] != vals.shape[0]:
            raise ValueError("indices and values have different lengths")
        if idx.size and (idx.min() < 0 or np.any(idx.max(axis=0) >= np.array(dims))):
            raise IndexError(f"sample index out of range for dims {dims}")
        order = np.lexsort((idx[:, 2], idx[:, 1], idx[:, 0]))
        idx = idx[order]
        vals = vals[order]
        if idx.shape[0] > 1 and np.any(np.all(idx[1:] == idx[:-1], axis=1)):
            raise ValueError("duplicate index triple in sample set")
        idx.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_layouts", {})

    def __len__(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, SampleSet):
            return NotImplemented
        return (
            self.dims == other.dims
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    @property
    def linear_indices(self) -> np.ndarray:
        """Column-major linear positions of the samples."""
        i, j, k = self.indices.T
        n1, n2, _ = self.dims
        return i + n1 * (j + n2 * k)

    def with_values(self, values) -> "SampleSet":
        """Same index set, new values (``values`` aligned with ``self.indices``)."""
        vals = np.array(values, dtype=np.float64).reshape(-1)
        if vals.shape[0] != len(self):
            raise ValueError("values have the wrong length")
        vals.setflags(write=False)
        # indices are already validated and sorted; share them and the layouts
        out = object.__new__(SampleSet)
        object.__setattr__(out, "dims", self.dims)
        object.__setattr__(out, "indices", self.indices)
        object.__setattr__(out, "values", vals)
        object.__setattr__(out, "_layouts", self._layouts)
        return out

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def _csr(self, rows, cols, shape, key) -> sp.csr_matrix:
        if key not in self._layouts:
            perm = np.lexsort((cols, rows))
            indptr = np.zeros(shape[0] + 1, dtype=np.int64)
            np.cumsum(np.bincount(rows, minlength=shape[0]), out=indptr[1:])
            self._layouts[key] = (perm, cols[perm], indptr)
        perm, sorted_cols, indptr = self._layouts[key]
        return sp.csr_matrix((self.values[perm], sorted_cols, indptr), shape=shape)

    def left_matrix(self) -> sp.csr_matrix:
        """Sparse left unfolding, shape ``(n1, n2 * n3)``."""
        n1, n2, n3 = self.dims
        i, j, k = self.indices.T
        return self._csr(i, j + n2 * k, (n1, n2 * n3), "left")

    def right_matrix(self) -> sp.csr_matrix:
        """Sparse right unfolding, shape ``(n1 * n2, n3)``."""
        n1, n2, n3 = self.dims
        i, j, k = self.indices.T
        return self._csr(i + n1 * j, k, (n1 * n2, n3), "right")


def mask(T: np.ndarray, indices) -> SampleSet:
    """Restrict ``T`` to the index triples in ``indices`` (0-based)."""
    T = as_tensor3(T)
    idx = np.asarray(indices, dtype=np.int64).reshape(-1, 3)
    if idx.size and (idx.min() < 0 or np.any(idx.max(axis=0) >= np.array(T.shape))):
        raise IndexError(f"sample index out of range for dims {T.shape}")
    return SampleSet(T.shape, idx, T[idx[:, 0], idx[:, 1], idx[:, 2]])


def scatter(S: SampleSet) -> np.ndarray:
    """Dense tensor equal to ``S`` on its index set and zero elsewhere."""
    T = np.zeros(S.dims)
    T[S.indices[:, 0], S.indices[:, 1], S.indices[:, 2]] = S.values
    return T


def all_indices(dims) -> np.ndarray:
    n1, n2, n3 = _check_dims(dims)
    return np.stack(np.unravel_index(np.arange(n1 * n2 * n3), (n1, n2, n3), order="F"), axis=1)


# --- file formats -----------------------------------------------------------


def write_samples_csv(S: SampleSet, path) -> None:
    """Write ``S`` as CSV with header ``i1,i2,i3,value`` and 1-based indices."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i1", "i2", "i3", "value"])
        for (i, j, k), v in zip(S.indices.tolist(), S.values.tolist()):
            w.writerow([i + 1, j + 1, k + 1, repr(v)])


def read_samples_csv(path, dims) -> SampleSet:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if [h.strip() for h in header] != ["i1", "i2", "i3", "value"]:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = [row for row in r if row]
    if not rows:
        return SampleSet(dims, np.zeros((0, 3), dtype=np.int64), np.zeros(0))
    idx = np.array([[int(a) - 1, int(b) - 1, int(c) - 1] for a, b, c, _ in rows], dtype=np.int64)
    vals = np.array([float(row[3]) for row in rows])
    return SampleSet(dims, idx, vals)


def write_dense(T: np.ndarray, path) -> None:
    """Header ``n1 n2 n3`` then the column-major values, one per line."""
    T = as_tensor3(T)
    with open(path, "w") as fh:
        fh.write("{} {} {}\n".format(*T.shape))
        fh.write("\n".join(repr(float(v)) for v in T.ravel(order="F")))
        fh.write("\n")


def read_dense(path) -> np.ndarray:
    tokens = Path(path).read_text().split()
    dims = _check_dims(int(t) for t in tokens[:3])
    data = np.array([float(t) for t in tokens[3:]])
    if data.size != dims[0] * dims[1] * dims[2]:
        raise ValueError(f"{path}: expected {np.prod(dims)} values, found {data.size}")
    return np.reshape(data, dims, order="F")
