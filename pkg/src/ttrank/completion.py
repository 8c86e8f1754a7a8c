"""Riemannian conjugate gradients for fixed-rank TT completion.

Minimizes ``f(X) = 0.5 * ||X_omega - A_omega||^2`` over tensors of TT-rank
exactly ``(r1, r2)``. With a dense target (``CompletionProblem.dense``) the
sum runs over all entries, which is the low-rank approximation problem.
"""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .manifold import TangentVector, project_tangent, retract_with_info, transport
from .tensor import SampleSet, as_tensor3
from .tt import GaugedTT, evaluate_samples, orthogonalize, random_tt

logger = logging.getLogger(__name__)

BETA_RULES = ("pr+", "hs+", "fr", "sd")
# Relative slack when comparing objective values; below this the change is
# roundoff and the quadratic step is trusted.
_F_RTOL = 1e-13


@dataclass
class CompletionProblem:
    """Data of a fixed-rank completion problem.

    Exactly one of ``train`` (sampled mode) and ``dense`` (full-data mode)
    is given. ``test`` is an optional held-out set used only for reporting.
    """

    dims: tuple
    rank: tuple
    train: SampleSet | None = None
    test: SampleSet | None = None
    dense: np.ndarray | None = None

    def __post_init__(self):
        self.dims = tuple(int(n) for n in self.dims)
        self.rank = tuple(int(r) for r in self.rank)
        if (self.train is None) == (self.dense is None):
            raise ValueError("give exactly one of train samples or a dense target")
        if self.dense is not None:
            self.dense = as_tensor3(self.dense)
            if self.dense.shape != self.dims:
                raise ValueError("dense target has wrong shape")
        if self.train is not None and self.train.dims != self.dims:
            raise ValueError("training samples have wrong dims")
        if self.test is not None:
            if self.test.dims != self.dims:
                raise ValueError("test samples have wrong dims")
            if self.train is not None and len(self.test) and len(self.train):
                if np.intersect1d(self.train.linear_indices, self.test.linear_indices).size:
                    raise ValueError("training and test sets overlap")

    @property
    def is_dense(self) -> bool:
        return self.dense is not None


@dataclass
class SolverConfig:
    max_iters: int = 1000
    grad_tol_sq: float = 1e-8
    beta_rule: str = "pr+"
    restart_period: int = 50
    seed: int | None = 0
    trace_every: int = 1
    record_time: bool = True

    def __post_init__(self):
        if self.max_iters < 0 or self.restart_period < 1 or self.trace_every < 1:
            raise ValueError("iteration counts must be positive")
        if self.grad_tol_sq < 0:
            raise ValueError("grad_tol_sq must be nonnegative")
        if self.beta_rule not in BETA_RULES:
            raise ValueError(f"beta_rule must be one of {BETA_RULES}")


@dataclass
class TraceRecord:
    iter: int
    f_omega: float
    grad_norm_sq: float
    step: float
    test_rmse: float
    wall_ms: float


@dataclass
class Trace:
    records: list = field(default_factory=list)
    events: list = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False
    f_omega: float = float("nan")
    grad_norm_sq: float = float("nan")
    diagnostic: str = ""

    HEADER = ("iter", "f_omega", "grad_norm_sq", "step", "test_rmse", "wall_ms")

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.HEADER)
            for r in self.records:
                w.writerow([r.iter] + [repr(float(getattr(r, h))) for h in self.HEADER[1:]])


def _residual(X: GaugedTT, p: CompletionProblem):
    if p.is_dense:
        return X.full() - p.dense
    vals = evaluate_samples(X, p.train).values
    return p.train.with_values(vals - p.train.values)


def _sq(resid) -> float:
    if isinstance(resid, SampleSet):
        return float(resid.values @ resid.values)
    return float(np.vdot(resid, resid))


def objective(X, p: CompletionProblem) -> float:
    if not isinstance(X, GaugedTT):
        X = orthogonalize(X)
    return 0.5 * _sq(_residual(X, p))


def riemannian_gradient(X: GaugedTT, p: CompletionProblem):
    """Return ``(grad, residual)``.

    ``residual`` is ``X - A`` on the sampling set (a SampleSet, or a dense
    array in full-data mode) and ``grad`` its tangent-space projection.
    """
    resid = _residual(X, p)
    return project_tangent(X, resid), resid


def test_rmse(X, gamma: SampleSet) -> float:
    if gamma is None or len(gamma) == 0:
        raise ValueError("test set is empty")
    err = evaluate_samples(X, gamma).values - gamma.values
    return float(np.sqrt(np.mean(err**2)))


test_rmse.__test__ = False  # not a pytest test


def _direction_on_omega(d: TangentVector, p: CompletionProblem):
    if p.is_dense:
        return d.ambient()
    return evaluate_samples(d.to_tt(), p.train).values


def exact_step(resid, d_omega) -> float:
    """Minimizer of ``t -> 0.5 ||resid + t d_omega||^2``."""
    r = resid.values if isinstance(resid, SampleSet) else resid
    denom = float(np.vdot(d_omega, d_omega))
    if denom == 0.0:
        return 0.0
    return -float(np.vdot(r, d_omega)) / denom


def solve(p: CompletionProblem, cfg: SolverConfig | None = None, X0=None):
    """Run Riemannian CG from ``X0`` (a random TT at ``p.rank`` if omitted).

    Returns the final iterate in gauged form and a :class:`Trace`.
    """
    cfg = cfg or SolverConfig()
    rng = np.random.default_rng(cfg.seed)
    if X0 is None:
        X0 = random_tt(p.dims, p.rank, rng)
    X = X0 if isinstance(X0, GaugedTT) else orthogonalize(X0)
    if X.ranks != p.rank or X.dims != p.dims:
        raise ValueError(f"starting point has ranks {X.ranks}, dims {X.dims}")

    trace = Trace()
    t_start = time.perf_counter()
    grad, resid = riemannian_gradient(X, p)
    f = 0.5 * _sq(resid)
    gsq = grad.norm_sq()
    d_prev = g_prev = None

    k = 0
    while k < cfg.max_iters and gsq > cfg.grad_tol_sq:
        k += 1
        restart = d_prev is None or cfg.beta_rule == "sd" or (k - 1) % cfg.restart_period == 0
        if restart:
            d = -grad
        else:
            gp = transport(g_prev, X)
            if cfg.beta_rule == "pr+":
                beta = max(0.0, grad.inner(grad - gp) / g_prev.norm_sq())
            elif cfg.beta_rule == "hs+":
                dp = transport(d_prev, X)
                y = grad - gp
                denom = dp.inner(y)
                beta = max(0.0, grad.inner(y) / denom) if denom != 0.0 else 0.0
            else:
                beta = gsq / g_prev.norm_sq()
            d = -grad + beta * transport(d_prev, X)
            if grad.inner(d) >= 0.0:
                d = -grad

        d_omega = _direction_on_omega(d, p)
        step = exact_step(resid, d_omega)
        for _ in range(21):
            X_new, perturbed = retract_with_info(X, d, step, rng=rng)
            if perturbed:
                trace.events.append((k, "perturbed rank-deficient cores"))
            resid_new = _residual(X_new, p)
            f_new = 0.5 * _sq(resid_new)
            if f_new <= f + _F_RTOL * abs(f):
                break
            step *= 0.5
        else:
            trace.diagnostic = f"line search failed at iteration {k}"
            logger.warning(trace.diagnostic)
            k -= 1
            break

        g_prev, d_prev = grad, d
        X, resid, f = X_new, resid_new, f_new
        grad = project_tangent(X, resid)
        gsq = grad.norm_sq()

        if k % cfg.trace_every == 0 or gsq <= cfg.grad_tol_sq or k == cfg.max_iters:
            rmse = test_rmse(X, p.test) if p.test is not None and len(p.test) else float("nan")
            wall = 1e3 * (time.perf_counter() - t_start) if cfg.record_time else 0.0
            trace.records.append(TraceRecord(k, f, gsq, step, rmse, wall))

    trace.n_iter = k
    trace.converged = gsq <= cfg.grad_tol_sq
    trace.f_omega = f
    trace.grad_norm_sq = gsq
    return X, trace
