import math

import numpy as np
import pytest
import scipy.linalg as sla
from scipy import stats

from hagerlab.errors import TruncationTooSmall
from hagerlab.matrix import (
    _dense_triplets,
    _inverse_iteration_triplets,
    assemble_operator,
    eigenvalues,
    sample_gaussian,
    smallest_singular_triplets,
)
from hagerlab.symbol import FourierSymbol


def test_assemble_small_example(g):
    H = assemble_operator(g, 0.5, 1)
    expected = np.array([[-0.5, 1, 0], [0, 0, 1], [0, 0, 0.5]], dtype=complex)
    assert np.array_equal(H, expected)


def test_assemble_general_symbol(skewed):
    N = 4
    H = assemble_operator(skewed, 0.3, N)
    for r in range(2 * N + 1):
        for c in range(2 * N + 1):
            j, k = r - N, c - N
            want = 0.3 * j * (j == k) + skewed.coefficient(j - k)
            assert H[r, c] == want


def test_assemble_zero_symbol():
    assert np.array_equal(assemble_operator(None, 0.2, 3), np.diag(0.2 * np.arange(-3, 4)).astype(complex))


def test_truncation_too_small():
    with pytest.raises(TruncationTooSmall):
        assemble_operator(FourierSymbol({-1: 1.0, -2: 0.2}), 0.1, 1)


def test_triangular_spectrum_is_exact(g):
    H = assemble_operator(g, 0.05, 60)
    ev = np.sort_complex(eigenvalues(H))
    assert np.array_equal(ev, 0.05 * np.arange(-60, 61) + 0j)


def test_upper_triangular_input_returns_diagonal():
    rng = np.random.default_rng(3)
    A = np.triu(rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12)))
    assert np.array_equal(np.sort_complex(eigenvalues(A)), np.sort_complex(np.diagonal(A)))


def test_companion_roots():
    C = np.zeros((3, 3), dtype=complex)
    C[1:, :-1] = np.eye(2)
    C[0, -1] = 1.0  # z^3 - 1
    got = np.sort_complex(eigenvalues(C))
    want = np.sort_complex(np.exp(2j * np.pi * np.arange(3) / 3))
    assert np.max(np.abs(got - want)) <= 1e-12


@pytest.mark.parametrize("dim", [5, 17, 40, 64])
def test_trace_and_determinant(dim):
    rng = np.random.default_rng(dim)
    A = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    lam = eigenvalues(A)
    norm = np.linalg.norm(A, 2)
    assert abs(lam.sum() - np.trace(A)) <= 1e-9 * dim * norm
    lu, piv = sla.lu_factor(A)
    logdet = np.sum(np.log(np.abs(np.diagonal(lu))))
    assert abs(np.sum(np.log(np.abs(lam))) - logdet) <= 1e-6


def test_similarity_invariance():
    rng = np.random.default_rng(8)
    A = rng.standard_normal((20, 20)) + 1j * rng.standard_normal((20, 20))
    P = np.eye(20)[rng.permutation(20)]
    a = eigenvalues(A)
    b = eigenvalues(P @ A @ P.T)
    cost = np.abs(a[:, None] - b[None, :])
    from scipy.optimize import linear_sum_assignment

    r, c = linear_sum_assignment(cost)
    assert cost[r, c].max() <= 1e-10


def test_eigenvalues_reject_non_finite():
    with pytest.raises(ValueError):
        eigenvalues(np.array([[np.nan, 0], [0, 1]], dtype=complex))


def test_gaussian_moments():
    a = sample_gaussian(1000, np.random.default_rng(11)).ravel()
    p2 = np.abs(a) ** 2
    assert 0.995 <= p2.mean() <= 1.005
    assert -0.005 <= a.real.mean() <= 0.005
    assert -0.005 <= a.imag.mean() <= 0.005
    assert a.real.var() == pytest.approx(0.5, abs=0.005)
    assert abs(np.mean(a.real * a.imag)) < 0.005


def test_gaussian_chi_square():
    p2 = np.abs(sample_gaussian(1000, np.random.default_rng(12)).ravel()) ** 2
    # |a|^2 ~ Exp(1): 64 equiprobable bins
    edges = np.append(-np.log1p(-np.arange(64) / 64), np.inf)
    counts = np.histogram(p2, bins=edges)[0]
    assert counts.sum() == p2.size
    assert stats.chisquare(counts).pvalue > 1e-6


def test_gaussian_determinism_and_scale():
    a = sample_gaussian(30, np.random.default_rng(5))
    b = sample_gaussian(30, np.random.default_rng(5))
    assert np.array_equal(a, b)
    c = sample_gaussian(30, np.random.default_rng(5), scale=math.sqrt(2))
    assert np.allclose(c, math.sqrt(2) * a, rtol=1e-15)


def _check_triplets(A, z, trips):
    B = A - z * np.eye(A.shape[0])
    norm = np.linalg.norm(A, 2)
    for t in trips:
        assert abs(np.linalg.norm(t.right) - 1) <= 1e-12
        assert abs(np.linalg.norm(t.left) - 1) <= 1e-12
        assert np.linalg.norm(B @ t.right - t.sigma * t.left) <= 1e-8 * norm


def test_diagonal_example():
    A = np.diag([3.0, 1e-5]).astype(complex)
    t = smallest_singular_triplets(A, 0, 2)
    assert t[0].sigma == pytest.approx(1e-5, rel=1e-12)
    assert t[1].sigma == pytest.approx(3.0, rel=1e-12)
    _check_triplets(A, 0, t)


def test_exact_eigenvalue_is_at_noise_floor(g):
    H = assemble_operator(g, 0.05, 100)
    t = smallest_singular_triplets(H, 0.05 * 7, 2)
    assert t[0].sigma <= 1e-13 * np.linalg.norm(H, 2)
    assert t[0].at_noise_floor
    _check_triplets(H, 0.35, t)


def test_product_of_singular_values_is_det():
    rng = np.random.default_rng(4)
    A = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    lu, _ = sla.lu_factor(A)
    absdet = np.prod(np.abs(np.diagonal(lu)))
    # peel off the two smallest with our routine, the rest from the spectrum of A* A
    two = smallest_singular_triplets(A, 0, 2)
    rest = np.sqrt(np.sort(np.linalg.eigvalsh(A.conj().T @ A))[2:])
    assert two[0].sigma * two[1].sigma * np.prod(rest) == pytest.approx(absdet, rel=1e-8)


@pytest.mark.parametrize("z", [0.3 + 0.5j, -0.21 - 0.3j, 0.05 + 0.0j, 1.0 + 0.9j, 0.3j])
def test_bidiagonal_path_matches_dense_svd(g, z):
    H = assemble_operator(g, 0.05, 120)
    fast = smallest_singular_triplets(H, z, 2)
    s = sla.svdvals(H - z * np.eye(H.shape[0]))
    for k in range(2):
        if fast[k].at_noise_floor:
            assert s[-1 - k] <= 1e-13 * s[0]
        else:
            assert fast[k].sigma == pytest.approx(s[-1 - k], rel=1e-6)
    _check_triplets(H, z, fast)


def test_bidiagonal_overlap_matches_dense(g):
    H = assemble_operator(g, 0.05, 150)
    z = 0.3j
    fast = smallest_singular_triplets(H, z, 1)[0]
    dense = _dense_triplets(H - z * np.eye(H.shape[0]), 1)[0][0]
    a = math.log(abs(np.vdot(fast.left, fast.right)))
    b = math.log(abs(np.vdot(dense[2], dense[1])))
    assert a == pytest.approx(b, abs=1e-6)


def test_dense_path_for_banded_symbol(skewed):
    H = assemble_operator(skewed, 0.1, 40)
    z = 0.2 + 0.3j
    t = smallest_singular_triplets(H, z, 2)
    s = sla.svdvals(H - z * np.eye(H.shape[0]))
    assert t[0].sigma == pytest.approx(s[-1], rel=1e-10)
    assert t[1].sigma == pytest.approx(s[-2], rel=1e-10)
    _check_triplets(H, z, t)


def test_inverse_iteration_path(skewed):
    H = assemble_operator(skewed, 0.1, 60)
    z = 0.2 + 0.3j
    B = H - z * np.eye(H.shape[0])
    raw, _ = _inverse_iteration_triplets(B, 2)
    s = sla.svdvals(B)
    assert raw[0][0] == pytest.approx(s[-1], rel=1e-8)
    assert raw[1][0] == pytest.approx(s[-2], rel=1e-8)
    for sigma, right, left in raw:
        assert np.linalg.norm(B @ right - sigma * left) <= 1e-8 * s[0]


def test_sigma_min_is_inverse_resolvent_norm(skewed):
    """Power iteration on (B* B)^{-1} as an independent estimate of 1/||B^{-1}||."""
    H = assemble_operator(skewed, 0.1, 100)
    z = -0.1 + 0.4j
    B = H - z * np.eye(H.shape[0])
    lu = sla.lu_factor(B)
    rng = np.random.default_rng(9)
    x = rng.standard_normal(B.shape[0]) + 1j * rng.standard_normal(B.shape[0])
    for _ in range(60):
        y = sla.lu_solve(lu, sla.lu_solve(lu, x, trans=2))
        x = y / np.linalg.norm(y)
    # x is now the dominant right singular vector of B^{-1} B^{-*}, so ||B x|| = 1 / ||B^{-1}||
    sigma_est = np.linalg.norm(B @ x)
    assert smallest_singular_triplets(H, z, 1)[0].sigma == pytest.approx(sigma_est, rel=1e-6)
