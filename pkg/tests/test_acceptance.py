"""Acceptance criteria, each at its stated tolerance.

Every criterion prints one ``[PASS]`` or ``[FAIL]`` line (also collected in
the pytest terminal summary). Run standalone with
``python tests/test_acceptance.py``.
"""
import itertools
import sys

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from helpers import full_data_stationary_point
from oracles import gap_rank, numerical_rank, project_with_basis, tangent_basis

from ttrank.completion import SolverConfig, objective, riemannian_gradient
from ttrank.experiments import ExperimentConfig, preset, run
from ttrank.manifold import decompose_cone, project_tangent, reduce_cone_factors, retract
from ttrank.rank import estimated_rank, side_matrices, verify_stationary_structure
from ttrank.tensor import fold_left, fold_right, left_unfold, mask, right_unfold
from ttrank.tt import evaluate_entry, orthogonalize, random_tt

SEEDS = range(10)


def record(name: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def runs_for(figure: str):
    return [run(preset(figure, seed=s)) for s in SEEDS]


@pytest.fixture(scope="module")
def fig1_runs():
    return runs_for("fig1")


def test_criterion_1a_fig1_convergence(fig1_runs):
    iters = [r.trace.n_iter for r in fig1_runs]
    ok = all(r.trace.grad_norm_sq <= 1e-8 and r.trace.n_iter <= 1000 for r in fig1_runs)
    n_ok = sum(r.trace.grad_norm_sq <= 1e-8 for r in fig1_runs)
    record("criterion 1a (fig1 convergence)", ok,
           f"{n_ok}/10 seeds reach grad^2 <= 1e-8 within 1000 iterations (iterations {min(iters)}-{max(iters)})")
    assert ok


def test_criterion_1b_fig1_proposed_rank(fig1_runs):
    hits = sum(r.estimate.proposed == (6, 6) for r in fig1_runs)
    record("criterion 1b (fig1 proposed rank)", hits >= 8, f"proposed (6, 6) in {hits}/10 seeds")
    assert hits >= 8


def test_criterion_1c_fig1_naive_differs(fig1_runs):
    naive = [r.naive for r in fig1_runs]
    hits = sum(v != 4 for v in naive)
    record("criterion 1c (fig1 naive estimate)", hits >= 8,
           f"naive estimate != 4 in {hits}/10 seeds (values {naive})")
    assert hits >= 8


def test_criterion_2_fig2_early_stop():
    runs = runs_for("fig2")
    hits = sum(r.estimate.proposed == (6, 6) for r in runs)
    g = [r.trace.grad_norm_sq for r in runs]
    props = [r.estimate.proposed for r in runs]
    record("criterion 2 (fig2, 10 iterations)", hits >= 8,
           f"proposed (6, 6) in {hits}/10 seeds; grad^2 {min(g):.3g}-{max(g):.3g}; proposals {props}")
    assert hits >= 8


def test_criterion_3_fig3_noise():
    runs = runs_for("fig3")
    hits = sum(r.estimate.proposed == (6, 6) for r in runs)
    cfg = preset("fig3")
    record("criterion 3 (fig3, eta = 10)", hits >= 8,
           f"proposed (6, 6) in {hits}/10 seeds (|Omega| = {cfg.num_samples}, "
           f"{cfg.solver.max_iters} iterations)")
    assert hits >= 8


@pytest.fixture(scope="module")
def stationary_points():
    return [full_data_stationary_point((20, 20, 20), (5, 5), (2, 2), seed) for seed in range(5)]


def test_criterion_4_exact_ranks(stationary_points):
    failures = []
    worst_ratio = worst_w = 0.0
    for seed, (A, X, p, trace) in enumerate(stationary_points):
        grad, resid = riemannian_gradient(X, p)
        M1, M2 = side_matrices(X, resid)
        ranks = (numerical_rank(M1, 1e-8), numerical_rank(M2, 1e-8))
        s1 = np.linalg.svd(M1, compute_uv=False)
        s2 = np.linalg.svd(M2, compute_uv=False)
        ratio = max(s1[3] / s1[2], s2[3] / s2[2])
        e = decompose_cone(X, resid)
        gnorm = np.linalg.norm(resid)
        w = max(np.linalg.norm(e.d_first), np.linalg.norm(e.d_mid), np.linalg.norm(e.d_last)) / gnorm
        widths = reduce_cone_factors(e).widths
        worst_ratio, worst_w = max(worst_ratio, ratio), max(worst_w, w)
        if not (trace.grad_norm_sq <= 1e-16 and ranks == (3, 3) and ratio < 1e-6
                and w <= 1e-8 and widths == (3, 3)):
            failures.append((seed, trace.grad_norm_sq, ranks, ratio, w, widths))
    ok = not failures
    record("criterion 4 (exact side-matrix ranks)", ok,
           f"5 stationary points: ranks (3, 3), max sigma4/sigma3 {worst_ratio:.2e}, "
           f"max W-block/||grad f|| {worst_w:.2e}, reduced widths (3, 3)"
           + (f"; failures {failures}" if failures else ""))
    assert ok


def test_criterion_5_stationary_structure(stationary_points):
    worst = [0.0, 0.0, 0.0]
    ok = True
    for A, X, _, _ in stationary_points:
        r = verify_stationary_structure(X, A, tol=1e-8)
        rel_core = r.core_residual / r.target_norm
        worst = [max(worst[0], r.left_range_residual), max(worst[1], r.right_range_residual),
                 max(worst[2], rel_core)]
        ok &= r.stationary and r.holds(range_tol=1e-6, core_rtol=1e-8)
    record("criterion 5 (stationary structure)", ok,
           f"left range {worst[0]:.2e}, right range {worst[1]:.2e}, core {worst[2]:.2e} * ||A||")
    assert ok


def _property_suite():
    rng = np.random.default_rng(2024)
    results = {}

    # unfold/fold round trips
    T = rng.standard_normal((4, 5, 6))
    results["unfold round trip"] = (np.array_equal(fold_left(left_unfold(T), T.shape), T)
                                    and np.array_equal(fold_right(right_unfold(T), T.shape), T))

    dims, ranks = (5, 6, 7), (2, 3)
    X0 = random_tt(dims, ranks, rng)
    X = orthogonalize(X0)
    results["gauge residuals <= 1e-12"] = max(X.orthogonality_residuals().values()) <= 1e-12

    # tangent projection: linearity, idempotence, agreement with an explicit basis
    Y, Z = rng.standard_normal((2,) + dims)
    P = lambda V: project_tangent(X, V).ambient()  # noqa: E731
    lin = np.linalg.norm(P(2 * Y - 3 * Z) - 2 * P(Y) + 3 * P(Z)) / np.linalg.norm(P(2 * Y - 3 * Z))
    idem = np.linalg.norm(P(P(Y)) - P(Y)) / np.linalg.norm(P(Y))
    basis = tangent_basis(X0.X1, X0.X2, X0.X3)
    oracle = np.linalg.norm(P(Y) - project_with_basis(basis, Y)) / np.linalg.norm(P(Y))
    results["projection linear/idempotent <= 1e-11"] = max(lin, idem, oracle) <= 1e-11

    xi = project_tangent(X, Y)
    amb = xi.ambient()
    norm_err = abs(xi.norm_sq() - np.sum(amb**2)) / np.sum(amb**2)
    results["tangent norm identity <= 1e-12"] = norm_err <= 1e-12

    e = decompose_cone(X, Y)
    terms = e.terms()
    rec = np.linalg.norm(sum(terms) - Y) / np.linalg.norm(Y)
    orth = max(abs(np.sum(terms[a] * terms[b])) for a, b in itertools.combinations(range(6), 2))
    results["six-term decomposition"] = rec <= 1e-11 and orth <= 1e-10 * np.sum(Y**2)

    # directional derivative against central differences
    from ttrank.completion import CompletionProblem

    A = random_tt(dims, (3, 3), rng).full()
    lin_idx = rng.choice(np.prod(dims), 120, replace=False)
    S = mask(A, np.stack(np.unravel_index(lin_idx, dims), axis=1))
    p = CompletionProblem(dims, ranks, train=S)
    grad, _ = riemannian_gradient(X, p)
    d = project_tangent(X, rng.standard_normal(dims))
    d = d * (1.0 / d.norm())
    h = 1e-5
    fd = (objective(retract(X, d, h), p) - objective(retract(X, d, -h), p)) / (2 * h)
    results["directional derivative <= 1e-4"] = abs(fd - grad.inner(d)) <= 1e-4 * abs(grad.inner(d))

    # estimated rank against direct evaluation, with ties and zeros
    mism = 0
    for trial in range(1000):
        n = int(rng.integers(1, 25))
        if trial % 3 == 0:
            sigma = 2.0 ** -np.sort(rng.integers(0, 5, size=n))
        elif trial % 3 == 1:
            sigma = np.sort(rng.exponential(size=n))[::-1]
            sigma[rng.integers(0, n):] = 0.0
        else:
            sigma = np.sort(rng.exponential(size=n))[::-1]
        s = int(rng.integers(1, 22))
        mism += estimated_rank(sigma, s) != gap_rank(sigma, s)
    results["estimated_rank oracle (1000 lists)"] = mism == 0

    W = random_tt((3, 4, 5), (2, 3), rng)
    F = np.einsum("ia,ajb,bk->ijk", W.X1, W.X2, W.X3)
    results["entry evaluation 3x4x5"] = all(
        abs(evaluate_entry(W, i, j, k) - F[i, j, k]) <= 1e-13 * max(1.0, abs(F[i, j, k]))
        for i, j, k in itertools.product(range(3), range(4), range(5))
    )
    return results


def test_criterion_6_property_suite():
    results = _property_suite()
    failed = [k for k, v in results.items() if not v]
    record("criterion 6 (property suite)", not failed,
           f"{len(results) - len(failed)}/{len(results)} properties hold"
           + (f"; failed {failed}" if failed else ""))
    assert not failed


def test_criterion_7_exact_recovery():
    rmses, iters = [], []
    for seed in SEEDS:
        cfg = ExperimentConfig(
            dims=(30, 30, 30), solve_rank=(2, 2), true_rank=(2, 2), num_samples=8000,
            num_test=2000, seed=seed, solver=SolverConfig(max_iters=500, grad_tol_sq=1e-24),
        )
        r = run(cfg)
        rmses.append(r.test_rmse)
        iters.append(r.trace.n_iter)
    hits = sum(v <= 1e-6 for v in rmses)
    record("criterion 7 (exact recovery)", hits >= 8,
           f"test RMSE <= 1e-6 within 500 iterations in {hits}/10 seeds (max RMSE {max(rmses):.2e})")
    assert hits >= 8


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
