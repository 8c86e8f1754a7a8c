"""Rank estimation from singular-value gaps of the gradient side matrices.

Given a (near) stationary point ``X`` of the fixed-rank completion problem
at rank ``(r1, r2)`` with Euclidean gradient ``G = X_omega - A_omega``, the
two side matrices

    M1 = (G . right_orth^T)^L      (n1 x n2 r2)
    M2 = (left_orth^T . G)^R       (r1 n2 x n3)

have, for full sampling and an exact target of TT-rank ``(r1', r2')``,
ranks ``(r1' - r1, r2' - r2)``. With partial sampling the rank is replaced
by the largest relative gap in the singular values, capped at ``s``.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .completion import CompletionProblem, riemannian_gradient
from .manifold import project_tangent, side_contractions
from .tensor import SampleSet, as_tensor3, left_unfold, right_unfold
from .tt import GaugedTT, TTTensor, orthogonalize

logger = logging.getLogger(__name__)


@dataclass
class EstimatorConfig:
    """``s`` caps the estimated rank; ``zero_tol`` is the absolute threshold
    on ``sigma_1`` below which a matrix counts as zero (``None`` picks
    ``1e-12 * max(matrix dims)``)."""

    s: int = 20
    zero_tol: float | None = None

    def __post_init__(self):
        if int(self.s) < 1:
            raise ValueError("s must be at least 1")
        self.s = int(self.s)

    def zero_tol_for(self, shape) -> float:
        if self.zero_tol is not None:
            return float(self.zero_tol)
        return 1e-12 * max(shape)


def _eligible(count: int, s: int) -> int:
    """Number of indices ``j`` that compete in the argmax."""
    return max(1, min(int(s), count - 1)) if count else 0


def relative_gaps(sigma, s: int) -> np.ndarray:
    """``(sigma_j - sigma_{j+1}) / sigma_j`` for ``j = 1 .. min(s, len(sigma) - 1)``.

    A single singular value is compared against an implied trailing zero.
    Zero singular values get a gap of 0.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    m = _eligible(sigma.size, s)
    nxt = np.append(sigma[1:], 0.0)[:m]
    cur = sigma[:m]
    gaps = np.zeros(m)
    pos = cur > 0
    gaps[pos] = (cur[pos] - nxt[pos]) / cur[pos]
    return gaps


def estimated_rank(sigma, s: int = 20, zero_tol: float = 0.0) -> int:
    """Index ``j <= s`` of the largest relative singular-value gap.

    Parameters
    ----------
    sigma : array_like
        Singular values in non-increasing order.
    s : int
        Cap on the result. Values of ``s`` not below ``len(sigma)`` are
        clamped to ``len(sigma) - 1`` with a warning.
    zero_tol : float
        Returns 0 when ``sigma_1 <= zero_tol`` (the zero matrix).

    Returns
    -------
    int
        The smallest maximizing index, or 0 for an empty or zero list.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.size == 0 or sigma[0] <= zero_tol:
        return 0
    if np.any(sigma < 0) or np.any(np.diff(sigma) > 0):
        raise ValueError("singular values must be nonnegative and non-increasing")
    if sigma.size > 1 and s > sigma.size - 1:
        logger.warning("cap s=%d clamped to %d (number of singular values - 1)", s, sigma.size - 1)
    # argmax returns the first maximizer
    return int(np.argmax(relative_gaps(sigma, s))) + 1


def side_matrices(X: GaugedTT, G):
    """The side matrices ``(M1, M2)`` of ``G`` at ``X``.

    ``G`` is a dense tensor or a :class:`SampleSet`; the sampled path costs
    ``O(|omega| max(r1, r2))`` plus the dense outputs.
    """
    A, B = side_contractions(X, G)
    return left_unfold(A), right_unfold(B)


@dataclass
class RankEstimate:
    base_rank: tuple
    delta: tuple
    proposed: tuple
    grad_norm_sq: float
    sv1: list
    sv2: list
    gaps1: list
    gaps2: list
    s: int
    zero_tol: tuple = field(default=(0.0, 0.0))

    def to_json(self, path=None) -> str:
        d = asdict(self)
        d["base_rank"] = list(self.base_rank)
        d["delta"] = list(self.delta)
        d["proposed"] = list(self.proposed)
        d["zero_tol"] = list(self.zero_tol)
        text = json.dumps(d, indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_json(cls, text: str) -> "RankEstimate":
        d = json.loads(text)
        for key in ("base_rank", "delta", "proposed", "zero_tol"):
            d[key] = tuple(d[key])
        return cls(**d)

    def write_singular_values_csv(self, path) -> None:
        """Rows ``j, sigma_m1, gap_m1, sigma_m2, gap_m2``; blanks where undefined."""
        n = max(len(self.sv1), len(self.sv2))

        def cell(seq, j):
            return repr(float(seq[j])) if j < len(seq) else ""

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", "sigma_m1", "gap_m1", "sigma_m2", "gap_m2"])
            for j in range(n):
                w.writerow([j + 1, cell(self.sv1, j), cell(self.gaps1, j), cell(self.sv2, j), cell(self.gaps2, j)])


def _singular_values(M) -> np.ndarray:
    return np.linalg.svd(M, compute_uv=False)


def estimate_tt_rank(X, p: CompletionProblem, cfg: EstimatorConfig | None = None) -> RankEstimate:
    """Propose ``(r1 + delta1, r2 + delta2)`` as rank bound for completion."""
    cfg = cfg or EstimatorConfig()
    if not isinstance(X, GaugedTT):
        X = orthogonalize(X)
    grad, resid = riemannian_gradient(X, p)
    M1, M2 = side_matrices(X, resid)
    sv1, sv2 = _singular_values(M1), _singular_values(M2)
    zt = (cfg.zero_tol_for(M1.shape), cfg.zero_tol_for(M2.shape))
    d1 = estimated_rank(sv1, cfg.s, zt[0])
    d2 = estimated_rank(sv2, cfg.s, zt[1])
    r1, r2 = X.ranks
    return RankEstimate(
        base_rank=(r1, r2),
        delta=(d1, d2),
        proposed=(r1 + d1, r2 + d2),
        grad_norm_sq=grad.norm_sq(),
        sv1=sv1.tolist(),
        sv2=sv2.tolist(),
        gaps1=relative_gaps(sv1, cfg.s).tolist(),
        gaps2=relative_gaps(sv2, cfg.s).tolist(),
        s=cfg.s,
        zero_tol=zt,
    )


def naive_estimate(G, dims=None, cfg: EstimatorConfig | None = None) -> int:
    """Estimated rank of the left unfolding of the raw gradient ``G``.

    This is the baseline that ignores the current iterate; it is included
    for comparison only.
    """
    cfg = cfg or EstimatorConfig()
    if isinstance(G, SampleSet):
        if dims is not None and tuple(dims) != G.dims:
            raise ValueError("dims mismatch")
        GL = G.left_matrix().toarray()
    else:
        GL = left_unfold(as_tensor3(G))
    sv = _singular_values(GL)
    return estimated_rank(sv, cfg.s, cfg.zero_tol_for(GL.shape))


@dataclass
class StationarityReport:
    grad_norm: float
    stationary: bool
    left_range_residual: float
    right_range_residual: float
    core_residual: float
    target_norm: float

    @property
    def conclusive(self) -> bool:
        return self.stationary

    def holds(self, range_tol: float = 1e-6, core_rtol: float = 1e-8) -> bool:
        """Whether the range containments and the core identity hold."""
        return (
            self.stationary
            and self.left_range_residual <= range_tol
            and self.right_range_residual <= range_tol
            and self.core_residual <= core_rtol * self.target_norm
        )


def verify_stationary_structure(X, A, tol: float = 1e-8) -> StationarityReport:
    """Check the structure of a stationary point of ``0.5 ||X - A||^2``.

    At a stationary point the orthonormal outer factors of ``X`` lie in the
    ranges of those of ``A`` and the middle core of ``X`` equals
    ``left_orth^T . A . right_orth^T``. The report is flagged inconclusive
    when the Riemannian gradient norm exceeds ``tol``.
    """
    if not isinstance(X, GaugedTT):
        X = orthogonalize(X)
    if not isinstance(A, GaugedTT):
        A = orthogonalize(A if isinstance(A, TTTensor) else _as_tt(A))
    if X.dims != A.dims:
        raise ValueError("dims mismatch")
    grad = project_tangent(X, X) - project_tangent(X, A)
    gnorm = grad.norm()

    Q1, P3 = X.left_orth, X.right_orth
    A1, A3 = A.left_orth, A.right_orth
    left = np.linalg.norm(Q1 - A1 @ (A1.T @ Q1))
    right = np.linalg.norm(P3 - (P3 @ A3.T) @ A3)
    proj = np.einsum("ia,ajb,bk->ijk", Q1.T @ A1, A.mid, A3 @ P3.T)
    core = np.linalg.norm(X.mid - proj)
    return StationarityReport(
        grad_norm=float(gnorm),
        stationary=bool(gnorm <= tol),
        left_range_residual=float(left),
        right_range_residual=float(right),
        core_residual=float(core),
        target_norm=A.norm(),
    )


def _as_tt(T) -> TTTensor:
    from .tt import tt_svd

    return tt_svd(as_tensor3(T))
