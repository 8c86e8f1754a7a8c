"""scikit-learn compatible wrappers.

Observations are given as an integer array of shape ``(m, 3)`` holding
0-based index triples, with the observed values as ``y``::

    model = TTCompletion(rank=(2, 2), random_state=0).fit(idx, values)
    model.predict(other_idx)
"""
from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted, check_consistent_length

from .completion import CompletionProblem, SolverConfig, solve
from .rank import EstimatorConfig, estimate_tt_rank
from .tensor import SampleSet
from .tt import evaluate_samples


def check_indices(X, shape=None) -> np.ndarray:
    """Validate an ``(m, 3)`` array of nonnegative integer indices."""
    X = check_array(X, dtype=None, ensure_min_samples=1)
    if X.shape[1] != 3:
        raise ValueError(f"expected index triples of shape (m, 3), got {X.shape}")
    if not np.issubdtype(X.dtype, np.integer):
        if not np.all(np.equal(np.mod(X, 1), 0)):
            raise ValueError("indices must be integers")
    X = X.astype(np.int64)
    if X.min() < 0:
        raise ValueError("indices must be nonnegative")
    if shape is not None and np.any(X.max(axis=0) >= np.asarray(shape)):
        raise ValueError(f"index out of range for shape {tuple(shape)}")
    return X


def _seed(random_state) -> int:
    if isinstance(random_state, numbers.Integral):
        return int(random_state)
    return int(check_random_state(random_state).randint(2**31 - 1))


def _as_samples(X, y, shape):
    if isinstance(X, SampleSet):
        if shape is not None and tuple(shape) != X.dims:
            raise ValueError("shape does not match the sample set")
        return X
    X = check_indices(X, shape)
    y = check_array(y, ensure_2d=False, dtype=np.float64)
    check_consistent_length(X, y)
    if shape is None:
        shape = tuple(int(v) + 1 for v in X.max(axis=0))
    return SampleSet(shape, X, y)


class TTCompletion(RegressorMixin, BaseEstimator):
    """Fixed-rank tensor-train completion by Riemannian conjugate gradients.

    Parameters
    ----------
    rank : tuple of int, default=(2, 2)
        TT-rank ``(r1, r2)`` of the fitted tensor.
    shape : tuple of int or None
        Tensor dimensions; inferred from the largest index if None.
    max_iter : int, default=1000
    grad_tol_sq : float, default=1e-8
        Stop once the squared Riemannian gradient norm falls below this.
    beta_rule : {"pr+", "hs+", "fr", "sd"}, default="pr+"
    restart_period : int, default=50
    random_state : int, RandomState or None
        Seeds the random starting point.

    Attributes
    ----------
    tt_ : GaugedTT
        The fitted tensor train.
    trace_ : Trace
    n_iter_ : int
    grad_norm_sq_ : float
    shape_ : tuple of int
    """

    def __init__(self, rank=(2, 2), shape=None, max_iter=1000, grad_tol_sq=1e-8,
                 beta_rule="pr+", restart_period=50, random_state=None):
        self.rank = rank
        self.shape = shape
        self.max_iter = max_iter
        self.grad_tol_sq = grad_tol_sq
        self.beta_rule = beta_rule
        self.restart_period = restart_period
        self.random_state = random_state

    def _solver_config(self) -> SolverConfig:
        return SolverConfig(
            max_iters=self.max_iter,
            grad_tol_sq=self.grad_tol_sq,
            beta_rule=self.beta_rule,
            restart_period=self.restart_period,
            seed=_seed(self.random_state),
        )

    def fit(self, X, y=None, X0=None):
        samples = _as_samples(X, y, self.shape)
        self.shape_ = samples.dims
        self.n_features_in_ = 3
        self.problem_ = CompletionProblem(samples.dims, tuple(self.rank), train=samples)
        self.tt_, self.trace_ = solve(self.problem_, self._solver_config(), X0)
        self.n_iter_ = self.trace_.n_iter
        self.grad_norm_sq_ = self.trace_.grad_norm_sq
        return self

    def predict(self, X):
        check_is_fitted(self, "tt_")
        X = check_indices(X, self.shape_)
        S = evaluate_samples(self.tt_, X)
        # evaluate_samples returns entries sorted; map back to input order
        order = np.lexsort((X[:, 2], X[:, 1], X[:, 0]))
        out = np.empty(len(X))
        out[order] = S.values
        return out


class TTRankEstimator(BaseEstimator):
    """Estimate an adequate TT-rank bound from partially observed entries.

    Fits a :class:`TTCompletion` at ``rank`` and proposes
    ``rank + delta``, where ``delta`` is read off the singular-value gaps
    of the two gradient side matrices at the fitted point.

    Attributes
    ----------
    completion_ : TTCompletion
    estimate_ : RankEstimate
    delta_ : tuple of int
    proposed_rank_ : tuple of int
    """

    def __init__(self, rank=(2, 2), s=20, zero_tol=None, shape=None, max_iter=1000,
                 grad_tol_sq=1e-8, random_state=None):
        self.rank = rank
        self.s = s
        self.zero_tol = zero_tol
        self.shape = shape
        self.max_iter = max_iter
        self.grad_tol_sq = grad_tol_sq
        self.random_state = random_state

    def fit(self, X, y=None):
        self.completion_ = TTCompletion(
            rank=self.rank, shape=self.shape, max_iter=self.max_iter,
            grad_tol_sq=self.grad_tol_sq, random_state=self.random_state,
        ).fit(X, y)
        self.estimate_ = estimate_tt_rank(
            self.completion_.tt_, self.completion_.problem_, EstimatorConfig(self.s, self.zero_tol)
        )
        self.delta_ = self.estimate_.delta
        self.proposed_rank_ = self.estimate_.proposed
        self.n_features_in_ = 3
        return self

    def predict(self, X):
        check_is_fitted(self, "completion_")
        return self.completion_.predict(X)
