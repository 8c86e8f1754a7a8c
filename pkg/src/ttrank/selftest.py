"""Fast internal consistency checks used by ``ttrank selftest``."""
from __future__ import annotations

import numpy as np

from .completion import CompletionProblem, SolverConfig, solve, test_rmse
from .manifold import decompose_cone, project_tangent
from .rank import EstimatorConfig, estimate_tt_rank
from .tensor import SampleSet, fold_left, left_unfold
from .tt import orthogonalize, random_tt, tt_svd


def _rel(a, b) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def run_checks(seed: int = 0):
    """Yield ``(name, ok, detail)`` triples."""
    rng = np.random.default_rng(seed)
    dims = (8, 9, 10)

    T = rng.standard_normal(dims)
    err = np.abs(fold_left(left_unfold(T), dims) - T).max()
    yield "unfold round trip", err == 0.0, f"max error {err:.1e}"

    X = orthogonalize(random_tt(dims, (3, 4), rng))
    res = max(X.orthogonality_residuals().values())
    yield "gauge orthogonality", res <= 1e-12, f"residual {res:.1e}"

    Y = rng.standard_normal(dims)
    P = project_tangent(X, Y).ambient()
    idem = _rel(project_tangent(X, P).ambient(), P)
    yield "tangent projection idempotent", idem <= 1e-11, f"relative {idem:.1e}"

    e = decompose_cone(X, Y)
    rec = _rel(e.full(), Y)
    yield "six-term decomposition", rec <= 1e-11, f"relative {rec:.1e}"

    A = random_tt((12, 12, 12), (2, 2), rng)
    idx = np.stack(np.unravel_index(rng.choice(12**3, 700, replace=False), (12,) * 3), axis=1)
    vals = np.einsum("ia,ajb,bk->ijk", A.X1, A.X2, A.X3)[idx[:, 0], idx[:, 1], idx[:, 2]]
    train = SampleSet((12,) * 3, idx[:500], vals[:500])
    test = SampleSet((12,) * 3, idx[500:], vals[500:])
    p = CompletionProblem((12,) * 3, (2, 2), train=train, test=test)
    Xs, trace = solve(p, SolverConfig(max_iters=500, grad_tol_sq=1e-20, seed=seed))
    rmse = test_rmse(Xs, test)
    yield "exact recovery", rmse <= 1e-6, f"test RMSE {rmse:.1e} after {trace.n_iter} iterations"

    B = random_tt((10, 10, 10), (4, 4), rng).full()
    pd = CompletionProblem((10,) * 3, (2, 2), dense=B)
    Xd, _ = solve(pd, SolverConfig(max_iters=2000, grad_tol_sq=1e-24), tt_svd(B, (2, 2)))
    est = estimate_tt_rank(Xd, pd, EstimatorConfig(s=5))
    yield "full-data rank estimate", est.proposed == (4, 4), f"proposed {est.proposed}"
