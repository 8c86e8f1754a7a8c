"""Tangent space and tangent cone of the fixed-rank TT manifold.

At a point given in gauged form (see :class:`ttrank.tt.GaugedTT`), a
tangent vector is stored through three parameters::

    xi = left_orth . mid_left . d_last
       + left_orth . d_mid . right_orth
       + d_first . mid_right . right_orth

subject to ``d_first.T @ left_orth == 0`` and ``d_last @ right_orth.T == 0``.
The three terms are mutually orthogonal and each parametrization is an
isometry, so the norm of ``xi`` is the norm of its parameters.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import SampleSet, as_tensor3, fold_left, fold_right, left_unfold, right_unfold
from .tt import (
    DEFAULT_RANK_TOL,
    GaugedTT,
    RankDeficientError,
    TTTensor,
    contract_full,
    core_times_right,
    left_times_core,
    orthogonalize,
    truncate,
    tt_svd,
)


def _perp_left(U, M):
    """``(I - U U^T) M`` without forming the projector."""
    return M - U @ (U.T @ M)


def _perp_right(M, V):
    """``M (I - V^T V)`` for ``V`` with orthonormal rows."""
    return M - (M @ V.T) @ V


@dataclass
class TangentVector:
    base: GaugedTT
    d_first: np.ndarray
    d_mid: np.ndarray
    d_last: np.ndarray

    def __add__(self, other: "TangentVector") -> "TangentVector":
        return TangentVector(
            self.base,
            self.d_first + other.d_first,
            self.d_mid + other.d_mid,
            self.d_last + other.d_last,
        )

    def __sub__(self, other: "TangentVector") -> "TangentVector":
        return self + (-1.0) * other

    def __mul__(self, a: float) -> "TangentVector":
        return TangentVector(self.base, a * self.d_first, a * self.d_mid, a * self.d_last)

    __rmul__ = __mul__

    def __neg__(self) -> "TangentVector":
        return (-1.0) * self

    def inner(self, other: "TangentVector") -> float:
        """Inner product of two tangent vectors at the same base point."""
        return float(
            np.vdot(self.d_first, other.d_first)
            + np.vdot(self.d_mid, other.d_mid)
            + np.vdot(self.d_last, other.d_last)
        )

    def norm_sq(self) -> float:
        return self.inner(self)

    def norm(self) -> float:
        return float(np.sqrt(self.norm_sq()))

    def gauge_residuals(self) -> tuple[float, float]:
        b = self.base
        return (
            float(np.linalg.norm(self.d_first.T @ b.left_orth)),
            float(np.linalg.norm(self.d_last @ b.right_orth.T)),
        )

    def to_tt(self) -> TTTensor:
        """The ambient tensor as an exact TT of ranks ``(2 r1, 2 r2)``."""
        b = self.base
        r1, r2 = b.ranks
        n2 = b.dims[1]
        first = np.hstack([b.left_orth, self.d_first])
        core = np.zeros((2 * r1, n2, 2 * r2))
        core[:r1, :, :r2] = b.mid_left
        core[:r1, :, r2:] = self.d_mid
        core[r1:, :, r2:] = b.mid_right
        last = np.vstack([self.d_last, b.right_orth])
        return TTTensor(first, core, last)

    def ambient(self) -> np.ndarray:
        return contract_full(self.to_tt())

    @classmethod
    def zeros(cls, base: GaugedTT) -> "TangentVector":
        n1, n2, n3 = base.dims
        r1, r2 = base.ranks
        return cls(base, np.zeros((n1, r1)), np.zeros((r1, n2, r2)), np.zeros((r2, n3)))


def side_contractions(base: GaugedTT, Y):
    """Return ``(Y . right_orth^T, left_orth^T . Y)``.

    The first has shape ``(n1, n2, r2)``, the second ``(r1, n2, n3)``. ``Y``
    may be a dense array, a :class:`SampleSet` (never densified; cost linear
    in the number of samples), a :class:`TTTensor`, a :class:`GaugedTT` or a
    :class:`TangentVector`.
    """
    n1, n2, n3 = base.dims
    r1, r2 = base.ranks
    Q1, P3 = base.left_orth, base.right_orth
    if isinstance(Y, TangentVector):
        Y = Y.to_tt()
    if isinstance(Y, GaugedTT):
        Y = Y.to_tt()
    if isinstance(Y, SampleSet):
        if Y.dims != base.dims:
            raise ValueError(f"dims mismatch: {Y.dims} vs {base.dims}")
        A = fold_right(Y.right_matrix() @ P3.T, (n1, n2, r2))
        B = fold_left((Y.left_matrix().T @ Q1).T, (r1, n2, n3))
    elif isinstance(Y, TTTensor):
        if Y.dims != base.dims:
            raise ValueError(f"dims mismatch: {Y.dims} vs {base.dims}")
        A = left_times_core(Y.X1, core_times_right(Y.X2, Y.X3 @ P3.T))
        B = core_times_right(left_times_core(Q1.T @ Y.X1, Y.X2), Y.X3)
    else:
        Y = as_tensor3(Y)
        if Y.shape != base.dims:
            raise ValueError(f"dims mismatch: {Y.shape} vs {base.dims}")
        A = np.einsum("ijk,bk->ijb", Y, P3)
        B = np.einsum("ia,ijk->ajk", Q1, Y)
    return A, B


def project_tangent(base: GaugedTT, Y) -> TangentVector:
    """Orthogonal projection of ``Y`` onto the tangent space at ``base``."""
    A, B = side_contractions(base, Y)
    r1, r2 = base.ranks
    n2 = base.dims[1]
    Q1, P3 = base.left_orth, base.right_orth
    d_mid = fold_left(Q1.T @ left_unfold(A), (r1, n2, r2))
    d_first = _perp_left(Q1, left_unfold(A) @ left_unfold(base.mid_right).T)
    d_last = _perp_right(right_unfold(base.mid_left).T @ right_unfold(B), P3)
    return TangentVector(base, d_first, d_mid, d_last)


def transport(xi: TangentVector, new_base: GaugedTT) -> TangentVector:
    """Vector transport by re-projection onto the tangent space at ``new_base``."""
    if xi.base is new_base:
        return xi
    return project_tangent(new_base, xi)


def _perturb(X: TTTensor, rng, scale: float = 1e-10) -> TTTensor:
    cores = []
    for c in (X.X1, X.X2, X.X3):
        smax = np.linalg.norm(c.reshape(c.shape[0], -1), 2)
        cores.append(c + scale * max(smax, 1.0) * rng.standard_normal(c.shape))
    return TTTensor(*cores)


def retract(base: GaugedTT, xi: TangentVector, step: float = 1.0, rng=None) -> GaugedTT:
    """Retraction by TT-rounding of ``base + step * xi``.

    The sum is formed exactly as a TT of ranks ``(2 r1, 2 r2)`` and rounded
    back to ``base.ranks``. If rounding leaves the manifold, a
    :class:`RankDeficientError` is raised unless ``rng`` is given, in which
    case the rounded cores are perturbed by noise of relative size 1e-10 and
    re-orthogonalized.
    """
    return retract_with_info(base, xi, step, rng)[0]


def retract_with_info(base: GaugedTT, xi: TangentVector, step: float = 1.0, rng=None):
    """Like :func:`retract`, also returning whether a perturbation was needed."""
    r1, r2 = base.ranks
    n2 = base.dims[1]
    first = np.hstack([base.left_orth, step * xi.d_first])
    core = np.zeros((2 * r1, n2, 2 * r2))
    core[:r1, :, :r2] = base.mid_left
    core[:r1, :, r2:] = step * xi.d_mid
    core[r1:, :, r2:] = base.mid_right
    last = np.vstack([base.last + step * xi.d_last, base.right_orth])
    Y = truncate(TTTensor(first, core, last), base.ranks)
    try:
        return orthogonalize(Y), False
    except RankDeficientError:
        if rng is None:
            raise
        return orthogonalize(_perturb(Y, rng)), True


# --- tangent cone -------------------------------------------------------------


@dataclass
class ConeElement:
    """Block parametrization of a tensor in the tangent cone at ``base``.

    The tensor is the sum of six mutually orthogonal TT terms (see
    :meth:`terms`); ``U1`` is ``n1 x s1``, ``U2`` is ``r1 x n2 x s2``,
    ``Z2`` is ``s1 x n2 x s2``, ``V2`` is ``s1 x n2 x r2`` and ``V3`` is
    ``s2 x n3``. The remaining three blocks form a tangent vector.
    """

    base: GaugedTT
    U1: np.ndarray
    U2: np.ndarray
    Z2: np.ndarray
    V2: np.ndarray
    V3: np.ndarray
    d_first: np.ndarray
    d_mid: np.ndarray
    d_last: np.ndarray

    @property
    def widths(self) -> tuple[int, int]:
        return (self.U1.shape[1], self.V3.shape[0])

    @property
    def tangent(self) -> TangentVector:
        return TangentVector(self.base, self.d_first, self.d_mid, self.d_last)

    def terms(self) -> list[np.ndarray]:
        b = self.base

        def tt(a, c, d):
            return contract_full(TTTensor(a, c, d))

        return [
            tt(b.left_orth, b.mid_left, self.d_last),
            tt(b.left_orth, self.U2, self.V3),
            tt(b.left_orth, self.d_mid, b.right_orth),
            tt(self.U1, self.Z2, self.V3),
            tt(self.U1, self.V2, b.right_orth),
            tt(self.d_first, b.mid_right, b.right_orth),
        ]

    def full(self) -> np.ndarray:
        return sum(self.terms())

    def orthogonality_residuals(self) -> dict:
        b = self.base
        return {
            "U1": float(np.linalg.norm(self.U1.T @ b.left_orth)),
            "d_first": float(np.linalg.norm(self.d_first.T @ b.left_orth)),
            "U2": float(np.linalg.norm(right_unfold(self.U2).T @ right_unfold(b.mid_left))),
            "d_last": float(np.linalg.norm(self.d_last @ b.right_orth.T)),
            "V3": float(np.linalg.norm(self.V3 @ b.right_orth.T)),
            "V2": float(np.linalg.norm(left_unfold(self.V2) @ left_unfold(b.mid_right).T)),
        }


def decompose_cone(base: GaugedTT, Y, tol: float = DEFAULT_RANK_TOL) -> ConeElement:
    """Write a dense tensor ``Y`` in the block form of the tangent cone.

    ``Y`` is first factored as ``Y1 . Y2 . Y3`` by TT-SVD (threshold
    ``tol``); the blocks are then ``U1 = P1perp Y1``, ``Z2 = Y2``,
    ``V3 = Y3 P3perp`` and so on, so the widths before reduction are the
    TT-ranks of ``Y``.
    """
    Y = as_tensor3(Y)
    if Y.shape != base.dims:
        raise ValueError(f"dims mismatch: {Y.shape} vs {base.dims}")
    r1, r2 = base.ranks
    n2 = base.dims[1]
    Q1, P3 = base.left_orth, base.right_orth
    F = tt_svd(Y, tol=tol)
    s1, s2 = F.ranks

    U1 = _perp_left(Q1, F.X1)
    V3 = _perp_right(F.X3, P3)
    # (X1'^T . Y1 . Y2)^R with the X2'^R component removed
    M = right_unfold(left_times_core(Q1.T @ F.X1, F.X2))
    Q2R = right_unfold(base.mid_left)
    U2 = fold_right(_perp_left(Q2R, M), (r1, n2, s2))
    # (Y2 . Y3 . X3''^T)^L with the X2''^L row space removed
    N = left_unfold(core_times_right(F.X2, F.X3 @ P3.T))
    P2L = left_unfold(base.mid_right)
    V2 = fold_left(_perp_right(N, P2L), (s1, n2, r2))
    xi = project_tangent(base, Y)
    return ConeElement(base, U1, U2, F.X2, V2, V3, xi.d_first, xi.d_mid, xi.d_last)


def _svd_rank(s: np.ndarray, tol: float) -> int:
    return int(np.count_nonzero(s > tol))


def reduce_cone_factors(e: ConeElement, rtol: float = DEFAULT_RANK_TOL, atol: float = 0.0) -> ConeElement:
    """Shrink the widths to the ranks of ``U1 V2^L`` and ``U2^R V3``.

    Both products are re-factored through truncated SVDs; ``U1`` and ``V3``
    come out with orthonormal columns/rows and ``Z2`` is replaced by its
    projection ``U1^T . (U1 . Z2 . V3) . V3^T`` onto the new bases.
    Singular values at or below ``max(rtol * ||e||, atol)`` are dropped,
    where ``||e||`` is the norm of the represented tensor.
    """
    b = e.base
    r1, r2 = b.ranks
    n2 = b.dims[1]
    tol = max(rtol * float(np.linalg.norm(e.full())), atol)

    U, s, Vt = np.linalg.svd(e.U1 @ left_unfold(e.V2), full_matrices=False)
    k1 = _svd_rank(s, tol)
    U1 = U[:, :k1]
    V2 = fold_left(s[:k1, None] * Vt[:k1], (k1, n2, r2))

    U, s, Vt = np.linalg.svd(right_unfold(e.U2) @ e.V3, full_matrices=False)
    k2 = _svd_rank(s, tol)
    U2 = fold_right(U[:, :k2] * s[:k2], (r1, n2, k2))
    V3 = Vt[:k2]

    Z2 = core_times_right(left_times_core(U1.T @ e.U1, e.Z2), e.V3 @ V3.T)
    return ConeElement(b, U1, U2, Z2, V2, V3, e.d_first, e.d_mid, e.d_last)
