import json
import logging

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from ttrank.completion import riemannian_gradient
from ttrank.manifold import decompose_cone, reduce_cone_factors
from ttrank.rank import (
    EstimatorConfig,
    RankEstimate,
    estimate_tt_rank,
    estimated_rank,
    naive_estimate,
    relative_gaps,
    side_matrices,
    verify_stationary_structure,
)
from ttrank.tensor import mask, scatter
from ttrank.tt import orthogonalize, random_tt

from helpers import full_data_stationary_point
from oracles import gap_rank, numerical_rank


class TestEstimatedRank:
    def test_documented_examples(self):
        assert estimated_rank([4, 3, 1, 0.9], s=3) == 2
        assert list(relative_gaps([4, 3, 1, 0.9], 3)) == pytest.approx([0.25, 2 / 3, 0.1])
        # tie between j = 1 and j = 2 goes to the smaller index
        assert estimated_rank([4, 2, 1], s=2) == 1

    def test_zero_and_empty(self):
        assert estimated_rank([0.0, 0.0, 0.0]) == 0
        assert estimated_rank([]) == 0
        assert estimated_rank([1e-14, 1e-15], zero_tol=1e-12) == 0

    def test_single_value(self):
        assert estimated_rank([3.0], s=5) == 1

    def test_trailing_zeros(self):
        assert estimated_rank([5.0, 4.0, 0.0, 0.0], s=3) == 2

    def test_cap(self):
        sigma = [10, 9, 8, 7, 1, 0.9]
        assert estimated_rank(sigma, s=10) == 4
        assert estimated_rank(sigma, s=3) <= 3

    def test_warns_when_cap_too_large(self, caplog):
        with caplog.at_level(logging.WARNING, logger="ttrank.rank"):
            estimated_rank([3.0, 2.0, 1.0], s=20)
        assert "clamped" in caplog.text

    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            estimated_rank([1.0, 2.0])
        with pytest.raises(ValueError):
            estimated_rank([1.0, -1.0])

    def test_matches_oracle_on_random_lists(self):
        rng = np.random.default_rng(12345)
        for trial in range(1000):
            n = int(rng.integers(1, 30))
            kind = trial % 4
            if kind == 0:
                sigma = np.sort(rng.exponential(size=n))[::-1]
            elif kind == 1:
                # geometric runs produce exact ties
                sigma = 2.0 ** -np.sort(rng.integers(0, 6, size=n))
            elif kind == 2:
                sigma = np.sort(rng.exponential(size=n))[::-1]
                sigma[rng.integers(0, n):] = 0.0
            else:
                sigma = np.repeat(np.sort(rng.uniform(1, 2, size=max(n // 3, 1)))[::-1], 3)
            s = int(rng.integers(1, 25))
            zero_tol = float(rng.choice([0.0, 1e-12]))
            assert estimated_rank(sigma, s, zero_tol) == gap_rank(sigma, s, zero_tol), (sigma, s)


sigma_lists = st.lists(st.floats(1e-3, 1e3), min_size=2, max_size=25).map(
    lambda v: sorted(v, reverse=True)
)


@settings(max_examples=200, deadline=None)
@given(sigma=sigma_lists, c=st.floats(1e-6, 1e6), s=st.integers(1, 30))
def test_scale_invariance(sigma, c, s):
    assert estimated_rank(np.multiply(sigma, c), s) == estimated_rank(sigma, s)


@settings(max_examples=200, deadline=None)
@given(sigma=sigma_lists, s=st.integers(1, 30), s_small=st.integers(1, 30))
def test_monotone_cap(sigma, s, s_small):
    assume(s_small < s)
    small = estimated_rank(sigma, s_small)
    big = estimated_rank(sigma, s)
    assert small <= s_small
    if big <= s_small:
        assert small == big


def test_estimator_config():
    assert EstimatorConfig().s == 20
    assert EstimatorConfig().zero_tol_for((100, 200)) == pytest.approx(2e-10)
    assert EstimatorConfig(zero_tol=1.0).zero_tol_for((5, 5)) == 1.0
    with pytest.raises(ValueError):
        EstimatorConfig(s=0)


class TestSideMatrices:
    def test_match_dense_contraction(self, rng):
        dims = (5, 6, 7)
        X = orthogonalize(random_tt(dims, (2, 3), rng))
        G = rng.standard_normal(dims)
        M1, M2 = side_matrices(X, G)
        Q1, P3 = X.left_orth, X.right_orth
        n1, n2, n3 = dims
        exp1 = np.zeros((n1, n2 * 3))
        exp2 = np.zeros((2 * n2, n3))
        for i in range(n1):
            for j in range(n2):
                for b in range(3):
                    exp1[i, j + n2 * b] = G[i, j, :] @ P3[b]
        for a in range(2):
            for j in range(n2):
                for k in range(n3):
                    exp2[a + 2 * j, k] = Q1[:, a] @ G[:, j, k]
        assert np.allclose(M1, exp1, atol=1e-12)
        assert np.allclose(M2, exp2, atol=1e-12)
        assert M1.shape == (n1, n2 * 3) and M2.shape == (2 * n2, n3)

    def test_sampled_matches_dense(self, rng):
        dims = (5, 6, 7)
        X = orthogonalize(random_tt(dims, (2, 2), rng))
        lin = rng.choice(np.prod(dims), 60, replace=False)
        S = mask(rng.standard_normal(dims), np.stack(np.unravel_index(lin, dims), axis=1))
        for a, b in zip(side_matrices(X, S), side_matrices(X, scatter(S))):
            assert np.allclose(a, b, atol=1e-12)

    def test_zero_gradient(self, rng):
        X = orthogonalize(random_tt((4, 4, 4), (2, 2), rng))
        M1, M2 = side_matrices(X, np.zeros((4, 4, 4)))
        assert not M1.any() and not M2.any()

    def test_dims_mismatch(self, rng):
        X = orthogonalize(random_tt((4, 4, 4), (2, 2), rng))
        with pytest.raises(ValueError):
            side_matrices(X, np.zeros((4, 4, 5)))


@pytest.mark.parametrize("seed", range(3))
def test_exact_ranks_at_stationary_point(seed):
    A, X, p, trace = full_data_stationary_point((12, 12, 12), (4, 5), (2, 2), seed)
    assert trace.converged
    grad, resid = riemannian_gradient(X, p)
    M1, M2 = side_matrices(X, resid)
    assert numerical_rank(M1, 1e-8) == 2
    assert numerical_rank(M2, 1e-8) == 3
    est = estimate_tt_rank(X, p, EstimatorConfig(s=5))
    assert est.delta == (2, 3)
    assert est.proposed == (4, 5)
    # the gradient lies in the cone with zero tangent part
    e = reduce_cone_factors(decompose_cone(X, resid), rtol=1e-8)
    assert e.widths == (2, 3)
    assert np.linalg.norm(e.tangent.ambient()) <= 1e-8 * np.linalg.norm(resid)


def test_stationary_structure(rng):
    A, X, _, _ = full_data_stationary_point((10, 10, 10), (4, 4), (2, 2), 7)
    report = verify_stationary_structure(X, A)
    assert report.conclusive
    assert report.holds()
    # a random point is not stationary
    other = verify_stationary_structure(random_tt((10, 10, 10), (2, 2), rng), A)
    assert not other.conclusive and not other.holds()


def test_stationary_structure_dense_target(rng):
    A, X, _, _ = full_data_stationary_point((8, 8, 8), (3, 3), (2, 2), 1)
    assert verify_stationary_structure(X, A.full()).holds()


def test_rank_estimate_json_round_trip(tmp_path):
    est = RankEstimate((2, 2), (4, 4), (6, 6), 1e-9, [3.0, 1.0], [2.0, 1.0], [2 / 3], [0.5], 20,
                       (1e-10, 1e-10))
    path = tmp_path / "estimate.json"
    text = est.to_json(path)
    d = json.loads(path.read_text())
    assert list(d) == ["base_rank", "delta", "proposed", "grad_norm_sq", "sv1", "sv2",
                       "gaps1", "gaps2", "s", "zero_tol"]
    assert RankEstimate.from_json(text) == est


def test_singular_values_csv(tmp_path):
    est = RankEstimate((2, 2), (1, 1), (3, 3), 0.0, [3.0, 1.0, 0.5], [2.0, 1.0], [2 / 3, 0.5],
                       [0.5], 20)
    path = tmp_path / "sv.csv"
    est.write_singular_values_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "j,sigma_m1,gap_m1,sigma_m2,gap_m2"
    assert lines[1].split(",")[0] == "1"
    assert len(lines) == 4
    assert lines[3] == "3,0.5,,,"


def test_naive_estimate_dense_and_sampled(rng):
    dims = (6, 6, 6)
    G = random_tt(dims, (3, 3), rng).full()
    assert naive_estimate(G, cfg=EstimatorConfig(s=5)) == 3
    S = mask(G, np.argwhere(np.ones(dims)))
    assert naive_estimate(S, dims, EstimatorConfig(s=5)) == 3
    with pytest.raises(ValueError):
        naive_estimate(S, (6, 6, 7))
