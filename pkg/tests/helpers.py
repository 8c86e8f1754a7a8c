"""Shared constructions for tests that need stationary points."""
from ttrank.completion import CompletionProblem, SolverConfig, solve
from ttrank.tt import random_tt, tt_svd


def full_data_stationary_point(dims, true_rank, rank, seed, grad_tol_sq=1e-16, max_iters=5000):
    """Full-data stationary point: TT-SVD start refined by CG.

    Returns ``(A, X, problem, trace)`` with ``A`` the exact target.
    """
    A = random_tt(dims, true_rank, seed)
    T = A.full()
    p = CompletionProblem(tuple(dims), tuple(rank), dense=T)
    cfg = SolverConfig(max_iters=max_iters, grad_tol_sq=grad_tol_sq, restart_period=50)
    X, trace = solve(p, cfg, tt_svd(T, max_ranks=rank))
    return A, X, p, trace
