"""Third-order tensor trains ``X = X1 . X2 . X3``.

``X1`` is ``n1 x r1``, the core ``X2`` is ``r1 x n2 x r2`` and ``X3`` is
``r2 x n3``. Unfoldings of the core follow the column-major convention of
:mod:`ttrank.tensor`.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tensor import SampleSet, as_tensor3, fold_left, fold_right, left_unfold, right_unfold

DEFAULT_RANK_TOL = 1e-10
GAUGE_RTOL = 1e-12


class RankDeficientError(ValueError):
    """A factor of a tensor train is (numerically) rank deficient.

    Raised when a tensor train does not have minimal ranks, i.e. it is not
    a point of the fixed-rank manifold its core sizes suggest.
    """


@dataclass(frozen=True)
class TTTensor:
    X1: np.ndarray
    X2: np.ndarray
    X3: np.ndarray

    def __post_init__(self):
        X1 = np.asarray(self.X1, dtype=np.float64)
        X2 = np.asarray(self.X2, dtype=np.float64)
        X3 = np.asarray(self.X3, dtype=np.float64)
        if X1.ndim != 2 or X2.ndim != 3 or X3.ndim != 2:
            raise ValueError("cores must have shapes (n1,r1), (r1,n2,r2), (r2,n3)")
        if X1.shape[1] != X2.shape[0] or X2.shape[2] != X3.shape[0]:
            raise ValueError(
                f"incompatible core shapes {X1.shape}, {X2.shape}, {X3.shape}"
            )
        object.__setattr__(self, "X1", X1)
        object.__setattr__(self, "X2", X2)
        object.__setattr__(self, "X3", X3)

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.X1.shape[0], self.X2.shape[1], self.X3.shape[1])

    @property
    def ranks(self) -> tuple[int, int]:
        return (self.X2.shape[0], self.X2.shape[2])

    def full(self) -> np.ndarray:
        return contract_full(self)

    def norm(self) -> float:
        """Frobenius norm, computed without forming the dense tensor."""
        # Gram of X1 pushed through the core, then closed with the Gram of X3.
        G1 = self.X1.T @ self.X1
        G3 = self.X3 @ self.X3.T
        M = np.einsum("ab,ajc,bjd->cd", G1, self.X2, self.X2)
        return float(np.sqrt(max(np.sum(M * G3), 0.0)))


@dataclass(frozen=True)
class GaugedTT:
    """A tensor train in the simultaneously orthogonalized form.

    The same tensor is available in three factorizations::

        left_orth . mid_left . last  ==  left_orth . mid . right_orth
                                     ==  first . mid_right . right_orth

    with ``left_orth`` having orthonormal columns, ``mid_left`` an
    orthonormal right unfolding, ``mid_right`` an orthonormal left
    unfolding (rows) and ``right_orth`` orthonormal rows. The gauge
    matrices satisfy ``mid = mid_left . C``, ``mid_right = R . mid``,
    ``right_orth = inv(C) @ last`` and ``first = left_orth @ inv(R)``.
    """

    left_orth: np.ndarray
    mid_left: np.ndarray
    last: np.ndarray
    mid: np.ndarray
    mid_right: np.ndarray
    right_orth: np.ndarray
    first: np.ndarray
    R: np.ndarray
    C: np.ndarray

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.left_orth.shape[0], self.mid.shape[1], self.right_orth.shape[1])

    @property
    def ranks(self) -> tuple[int, int]:
        return (self.mid.shape[0], self.mid.shape[2])

    def to_tt(self) -> TTTensor:
        return TTTensor(self.left_orth, self.mid_left, self.last)

    def full(self) -> np.ndarray:
        return contract_full(TTTensor(self.left_orth, self.mid, self.right_orth))

    def norm(self) -> float:
        # Both outer factors are orthonormal in this representation.
        return float(np.linalg.norm(self.mid))

    def orthogonality_residuals(self) -> dict:
        r1, r2 = self.ranks
        ML = left_unfold(self.mid_right)
        QR_ = right_unfold(self.mid_left)
        return {
            "left_orth": np.linalg.norm(self.left_orth.T @ self.left_orth - np.eye(r1)),
            "mid_left": np.linalg.norm(QR_.T @ QR_ - np.eye(r2)),
            "mid_right": np.linalg.norm(ML @ ML.T - np.eye(r1)),
            "right_orth": np.linalg.norm(self.right_orth @ self.right_orth.T - np.eye(r2)),
        }


# --- contraction / evaluation -----------------------------------------------


def core_times_right(core: np.ndarray, M: np.ndarray) -> np.ndarray:
    """``core . M``: contract the last mode of a core with the rows of ``M``."""
    return np.einsum("ajb,bk->ajk", core, M)


def left_times_core(M: np.ndarray, core: np.ndarray) -> np.ndarray:
    """``M . core``: contract the first mode of a core with the columns of ``M``."""
    return np.einsum("ia,ajb->ijb", M, core)


def contract_full(X: TTTensor) -> np.ndarray:
    return np.einsum("ia,ajb,bk->ijk", X.X1, X.X2, X.X3, optimize=True)


def _sample_values(X1, X2, X3, idx: np.ndarray) -> np.ndarray:
    i, j, k = idx[:, 0], idx[:, 1], idx[:, 2]
    # (m, r1) x (m, r1, r2) -> (m, r2), then dot with X3 columns
    left = np.einsum("ma,amb->mb", X1[i], X2[:, j, :])
    return np.einsum("mb,bm->m", left, X3[:, k])


def evaluate_entry(X: TTTensor, i1: int, i2: int, i3: int) -> float:
    """Single entry in ``O(r1 r2)`` operations (0-based indices)."""
    n1, n2, n3 = X.dims
    if not (0 <= i1 < n1 and 0 <= i2 < n2 and 0 <= i3 < n3):
        raise IndexError(f"index ({i1}, {i2}, {i3}) out of range for dims {X.dims}")
    return float(X.X1[i1] @ X.X2[:, i2, :] @ X.X3[:, i3])


def evaluate_samples(X, omega):
    """Evaluate a tensor train on an index set.

    ``omega`` is either a :class:`~ttrank.tensor.SampleSet` (its values are
    ignored) or an ``(m, 3)`` array of 0-based indices. Returns a SampleSet.
    """
    if isinstance(X, GaugedTT):
        X = X.to_tt()
    if isinstance(omega, SampleSet):
        if omega.dims != X.dims:
            raise ValueError(f"dims mismatch: {omega.dims} vs {X.dims}")
        return omega.with_values(_sample_values(X.X1, X.X2, X.X3, omega.indices))
    idx = np.asarray(omega, dtype=np.int64).reshape(-1, 3)
    if idx.size and (idx.min() < 0 or np.any(idx.max(axis=0) >= np.array(X.dims))):
        raise IndexError("sample index out of range")
    return SampleSet(X.dims, idx, _sample_values(X.X1, X.X2, X.X3, idx))


# --- ranks / decompositions ---------------------------------------------------


def _numerical_rank(s: np.ndarray, tol: float) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))


def tt_rank(T, tol: float = DEFAULT_RANK_TOL) -> tuple[int, int]:
    """Numerical TT-rank: ranks of the left and right unfoldings."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    T = as_tensor3(T)
    s1 = np.linalg.svd(left_unfold(T), compute_uv=False)
    s2 = np.linalg.svd(right_unfold(T), compute_uv=False)
    return (_numerical_rank(s1, tol), _numerical_rank(s2, tol))


def _zero_tt(dims) -> TTTensor:
    n1, n2, n3 = dims
    return TTTensor(np.zeros((n1, 1)), np.zeros((1, n2, 1)), np.zeros((1, n3)))


def tt_svd(T, max_ranks=None, tol: float = DEFAULT_RANK_TOL) -> TTTensor:
    """TT-SVD of a dense tensor by two successive truncated SVDs.

    Singular values at or below ``tol * sigma_1`` of each unfolding are
    dropped and the ranks are capped at ``max_ranks``. The zero tensor maps
    to rank-(1, 1) zero cores.
    """
    T = as_tensor3(T)
    n1, n2, n3 = T.shape
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    if max_ranks is None:
        max_ranks = (min(n1, n2 * n3), min(n1 * n2, n3))
    k1, k2 = (int(k) for k in max_ranks)
    if not (1 <= k1 <= min(n1, n2 * n3) and 1 <= k2 <= min(n1 * n2, n3)):
        raise ValueError(f"infeasible max_ranks {max_ranks} for dims {T.shape}")

    U, s, Vt = np.linalg.svd(left_unfold(T), full_matrices=False)
    r1 = min(_numerical_rank(s, tol), k1)
    if r1 == 0:
        return _zero_tt(T.shape)
    X1 = U[:, :r1]
    rest = fold_left(s[:r1, None] * Vt[:r1], (r1, n2, n3))

    U, s, Vt = np.linalg.svd(right_unfold(rest), full_matrices=False)
    r2 = max(min(_numerical_rank(s, tol), k2), 1)
    X2 = fold_right(U[:, :r2], (r1, n2, r2))
    X3 = s[:r2, None] * Vt[:r2]
    return TTTensor(X1, X2, X3)


def _check_conditioning(M: np.ndarray, what: str, rtol: float) -> None:
    s = np.linalg.svd(M, compute_uv=False)
    if M.shape[0] != M.shape[1] or s.size == 0 or s[-1] <= rtol * s[0]:
        raise RankDeficientError(f"{what} is rank deficient (not on the fixed-rank manifold)")


def orthogonalize(X: TTTensor, rtol: float = GAUGE_RTOL) -> GaugedTT:
    """Bring ``X`` into the gauged form by QR sweeps in both directions.

    Raises
    ------
    RankDeficientError
        If a factor is rank deficient relative to ``rtol``, so that the
        gauge matrices would be singular.
    """
    if isinstance(X, GaugedTT):
        X = X.to_tt()
    n1, n2, n3 = X.dims
    r1, r2 = X.ranks
    if r1 > n1 or r2 > n3 or r1 > n2 * r2 or r2 > r1 * n2:
        raise RankDeficientError(f"ranks {X.ranks} cannot be minimal for dims {X.dims}")

    # left-to-right: X1 = Q1 R1, (R1 . X2)^R = Q2 R2, last = R2 X3
    Q1, R1 = np.linalg.qr(X.X1)
    _check_conditioning(R1, "first factor", rtol)
    Q2, R2 = np.linalg.qr(right_unfold(left_times_core(R1, X.X2)))
    _check_conditioning(R2, "core right unfolding", rtol)
    mid_left = fold_right(Q2, (r1, n2, r2))
    last = R2 @ X.X3

    # right-to-left: last = C right_orth, mid^L = L mid_right^L
    Qc, Rc = np.linalg.qr(last.T)
    C = Rc.T
    _check_conditioning(C, "last factor", rtol)
    right_orth = Qc.T
    mid = core_times_right(mid_left, C)
    Ql, Rl = np.linalg.qr(left_unfold(mid).T)
    L = Rl.T
    _check_conditioning(L, "core left unfolding", rtol)
    mid_right = fold_left(Ql.T, (r1, n2, r2))
    R = np.linalg.solve(L, np.eye(r1))
    return GaugedTT(
        left_orth=Q1,
        mid_left=mid_left,
        last=last,
        mid=mid,
        mid_right=mid_right,
        right_orth=right_orth,
        first=Q1 @ L,
        R=R,
        C=C,
    )


def truncate(X: TTTensor, target) -> TTTensor:
    """TT-rounding to ranks ``target``.

    Right-to-left orthogonalization followed by two truncated SVDs from the
    left. Quasi-optimal; exact whenever the tensor has TT-rank at most
    ``target``.
    """
    if isinstance(X, GaugedTT):
        X = X.to_tt()
    t1, t2 = (int(t) for t in target)
    r1, r2 = X.ranks
    if t1 > r1 or t2 > r2 or t1 < 1 or t2 < 1:
        raise ValueError(f"target ranks {target} must lie between (1, 1) and {X.ranks}")
    n1, n2, n3 = X.dims

    Q3, L3 = np.linalg.qr(X.X3.T)  # X3 = L3.T Q3.T
    core = core_times_right(X.X2, L3.T)
    k2 = Q3.shape[1]
    Q2, L2 = np.linalg.qr(left_unfold(core).T)
    k1 = Q2.shape[1]
    first = X.X1 @ L2.T
    core = fold_left(Q2.T, (k1, n2, k2))

    U, s, Vt = np.linalg.svd(first, full_matrices=False)
    t1 = min(t1, s.size)
    X1 = U[:, :t1]
    core = left_times_core(s[:t1, None] * Vt[:t1], core)

    U, s, Vt = np.linalg.svd(right_unfold(core), full_matrices=False)
    t2 = min(t2, s.size)
    X2 = fold_right(U[:, :t2], (t1, n2, t2))
    X3 = (s[:t2, None] * Vt[:t2]) @ Q3.T
    return TTTensor(X1, X2, X3)


def random_tt(dims, ranks, seed=None) -> TTTensor:
    """Tensor train with independent standard normal cores.

    ``seed`` may be anything accepted by :func:`numpy.random.default_rng`,
    including an existing Generator.
    """
    n1, n2, n3 = (int(n) for n in dims)
    r1, r2 = (int(r) for r in ranks)
    if min(n1, n2, n3, r1, r2) < 1:
        raise ValueError(f"infeasible dims/ranks {dims}, {ranks}")
    rng = np.random.default_rng(seed)
    X1 = rng.standard_normal((n1, r1))
    X2 = rng.standard_normal((r1, n2, r2))
    X3 = rng.standard_normal((r2, n3))
    return TTTensor(X1, X2, X3)


# --- serialization ------------------------------------------------------------

_MAGIC = "TT3 v1"


def write_tt(X, path) -> None:
    """Write a tensor train in the ``TT3 v1`` text layout.

    Line 1 is the magic ``TT3 v1``, line 2 ``n1 n2 n3``, line 3 ``r1 r2``,
    followed by three lines holding the cores ``X1``, ``X2``, ``X3``, each
    flattened in column-major order with values separated by single spaces.
    """
    if isinstance(X, GaugedTT):
        X = X.to_tt()
    lines = [_MAGIC, "{} {} {}".format(*X.dims), "{} {}".format(*X.ranks)]
    for core in (X.X1, X.X2, X.X3):
        lines.append(" ".join(repr(float(v)) for v in core.ravel(order="F")))
    Path(path).write_text("\n".join(lines) + "\n")


def read_tt(path) -> TTTensor:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != _MAGIC:
        raise ValueError(f"{path}: missing '{_MAGIC}' header")
    n1, n2, n3 = (int(t) for t in lines[1].split())
    r1, r2 = (int(t) for t in lines[2].split())
    shapes = [(n1, r1), (r1, n2, r2), (r2, n3)]
    cores = []
    for shape, line in zip(shapes, lines[3:6]):
        vals = np.array([float(t) for t in re.split(r"\s+", line.strip()) if t])
        if vals.size != int(np.prod(shape)):
            raise ValueError(f"{path}: core of shape {shape} has {vals.size} values")
        cores.append(np.reshape(vals, shape, order="F"))
    return TTTensor(*cores)
